//! Acceptance suite: one test per criterion, each printing a pass line with
//! the measured quantities (run with `-- --nocapture --test-threads=1` to see
//! them). Expected values follow the operator definition, the closed-form
//! accounting, and independent scalar oracles implemented in this file.

use onedconv_core::accounting::{
    build_resnet18, count_flops, count_params, layers, measured_flops, onedconv_overhead_params,
    LayerDescriptor, LayerKind, Variant,
};
use onedconv_core::data::{
    distort_dataset, load_idx, sample_params, save_idx, write_digit_idx, DistortionSpec,
};
use onedconv_core::gradcheck::{check, CheckOp};
use onedconv_core::nn::{conv2d_forward, ConvSpec, ConvWeights};
use onedconv_core::onedconv::{onedconv_forward, ShapeConvWeights};
use onedconv_core::tensor::Tensor;
use onedconv_core::train::{train, DataMode, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn random_tensor(shape: [usize; 4], rng: &mut ChaCha8Rng) -> Tensor {
    let len = shape.iter().product();
    Tensor::from_vec(shape, (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn criterion_1_zero_shape_equivalence() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut cases = 0usize;
    let mut worst = 0.0f64;
    for k in [3usize, 5] {
        for stride in [1usize, 2] {
            for _ in 0..27 {
                let n = rng.gen_range(1..3);
                let cin = rng.gen_range(1..4);
                let cout = rng.gen_range(1..5);
                let h = rng.gen_range(7..12);
                let w = rng.gen_range(7..12);
                let spec = ConvSpec::new(cin, cout, k).with_stride(stride);
                let x = random_tensor([n, cin, h, w], &mut rng);
                let wts = ConvWeights::init(&spec, &mut rng);
                let sw = ShapeConvWeights::zeros(&spec);
                let (y, _) = onedconv_forward(&x, &spec, &wts, &sw).unwrap();
                let oracle = conv2d_forward(&x, &spec, &wts).unwrap();
                for (a, b) in y.data().iter().zip(oracle.data()) {
                    worst = worst.max((a - b).abs());
                }
                cases += 1;
            }
        }
    }
    assert!(cases >= 100, "only {} cases", cases);
    assert!(
        worst < 1e-12,
        "zero-shape deviation {} exceeds 1e-12",
        worst
    );
    println!(
        "PASS criterion 1: zero-shape equivalence over {} cases, max |dy| = {:.3e} ({:.1}s)",
        cases,
        worst,
        t0.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_2_gradient_suite() {
    let t0 = Instant::now();
    for op in CheckOp::ALL {
        let tol = op.default_tol();
        let mut worst = 0.0f64;
        for seed in 0..20 {
            let report = check(op, seed, tol).unwrap();
            worst = worst.max(report.max_rel());
            assert!(
                report.pass,
                "{} failed at seed {}: max rel {:.3e} vs tol {:.0e}",
                op.name(),
                seed,
                report.max_rel(),
                tol
            );
        }
        println!(
            "PASS criterion 2: {} over 20 seeds, max rel err {:.3e} (tol {:.0e})",
            op.name(),
            worst,
            tol
        );
    }
    println!(
        "PASS criterion 2: gradient suite ({:.1}s)",
        t0.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_3_parameter_accounting() {
    let vanilla = build_resnet18(Variant::Vanilla, 10, [3, 32, 32]);
    let oned = build_resnet18(Variant::OneDConv, 10, [3, 32, 32]);
    let pv = count_params(&vanilla).trainable;
    let po = count_params(&oned).trainable;
    let rel_v = (pv as f64 - 11.17e6).abs() / 11.17e6;
    let rel_o = (po as f64 - 11.24e6).abs() / 11.24e6;
    assert!(rel_v < 0.02, "vanilla {} off by {:.3}%", pv, rel_v * 100.0);
    assert!(rel_o < 0.02, "onedconv {} off by {:.3}%", po, rel_o * 100.0);

    let expected_diff: u64 = layers(&oned)
        .iter()
        .filter_map(|l| match &l.kind {
            LayerKind::OneDConv(spec) => Some(onedconv_overhead_params(spec)),
            _ => None,
        })
        .sum();
    assert_eq!(po - pv, expected_diff, "difference must be exact");
    println!(
        "PASS criterion 3: params vanilla {} ({:+.2}% of 11.17M), onedconv {} ({:+.2}% of 11.24M), exact diff {}",
        pv,
        (pv as f64 / 11.17e6 - 1.0) * 100.0,
        po,
        (po as f64 / 11.24e6 - 1.0) * 100.0,
        expected_diff
    );
}

#[test]
fn criterion_4_flops_accounting() {
    let t0 = Instant::now();
    // reference layer: output 32x32, C_in 3, C_out 64, K 3
    let spec = ConvSpec::new(3, 64, 3);
    let reference = LayerDescriptor {
        name: "reference".into(),
        kind: LayerKind::OneDConv(spec),
        in_shape: [3, 32, 32],
        out_shape: [64, 32, 32],
    };
    let (main, overhead) = count_flops(&reference);
    assert_eq!(main, 3_670_016);
    assert_eq!(overhead, 114_688);

    // overhead/main = (K-1)/C_out for every convolution geometry of both
    // variants (identically zero for the 1x1 projections)
    for variant in [Variant::Vanilla, Variant::OneDConv] {
        let g = build_resnet18(variant, 10, [3, 32, 32]);
        for l in layers(&g) {
            let spec = match &l.kind {
                LayerKind::Conv(s) | LayerKind::OneDConv(s) => s,
                _ => continue,
            };
            let (h, w) = (l.out_shape[1] as u64, l.out_shape[2] as u64);
            let term = (spec.in_channels * spec.kernel * spec.kernel + 1) as u64;
            let main = 2 * h * w * spec.out_channels as u64 * term;
            let overhead = 2 * h * w * (spec.kernel - 1) as u64 * term;
            let expected = (spec.kernel as f64 - 1.0) / spec.out_channels as f64;
            assert!(
                (overhead as f64 / main as f64 - expected).abs() < 1e-12,
                "{}: ratio mismatch",
                l.name
            );
        }
    }

    // instrumented scalar counter matches the closed form exactly (2 ops per
    // multiply-accumulate, bias folded as one MAC)
    let tiny_spec = ConvSpec::new(2, 3, 3);
    let tiny = LayerDescriptor {
        name: "tiny".into(),
        kind: LayerKind::Conv(tiny_spec),
        in_shape: [2, 6, 6],
        out_shape: [3, 6, 6],
    };
    let x = Tensor::filled([1, 2, 6, 6], 0.5);
    let measured = measured_flops(&tiny, &x).unwrap();
    let (closed, _) = count_flops(&tiny);
    assert_eq!(measured, closed);

    // interpolation arithmetic is not modeled by the closed form; the
    // measured overhead stays within 2x of it and the ratio is reported
    let tiny_oned = LayerDescriptor {
        kind: LayerKind::OneDConv(tiny_spec),
        ..tiny.clone()
    };
    let m_oned = measured_flops(&tiny_oned, &x).unwrap();
    let measured_overhead = m_oned - measured;
    let (_, formula_overhead) = count_flops(&tiny_oned);
    let ratio = measured_overhead as f64 / formula_overhead as f64;
    assert!(ratio >= 1.0 && ratio <= 2.0, "measured ratio {}", ratio);

    println!(
        "PASS criterion 4: main {} overhead {} exact; measured vanilla == closed form ({}); measured onedconv overhead = {:.2}x formula ({:.1}s)",
        main,
        overhead,
        measured,
        ratio,
        t0.elapsed().as_secs_f64()
    );
}

/// Independent scalar enumeration of the operator: flatten the padded plane,
/// form gaps from the bias-only shape map, accumulate per-filter
/// displacements, and sum kernel * interpolated sample term by term.
fn brute_force_operator(
    x: &Tensor,
    kernel: &Tensor,
    bias: f64,
    shape_bias: &[f64],
) -> Vec<f64> {
    let k = 3usize;
    let (h, w) = (5usize, 5usize);
    let pad = 1usize;
    let (hp, wp) = (h + 2 * pad, w + 2 * pad);
    let mut flat = vec![0.0; hp * wp];
    for r in 0..h {
        for c in 0..w {
            flat[(r + pad) * wp + (c + pad)] = x.at(0, 0, r, c);
        }
    }
    let value_at = |p: i64| -> f64 {
        if p >= 0 && (p as usize) < flat.len() {
            flat[p as usize]
        } else {
            0.0
        }
    };
    let sample = |l: f64| -> f64 {
        let lo = l.floor();
        let fr = l - lo;
        (1.0 - fr) * value_at(lo as i64) + fr * value_at(lo as i64 + 1)
    };
    // gaps between adjacent one-dimensional filters; center filter anchored
    let gaps: Vec<f64> = shape_bias.iter().map(|s| wp as f64 + s).collect();
    let d = [-gaps[0], 0.0, gaps[1]];

    let mut out = vec![0.0; h * w];
    for ho in 0..h {
        for wo in 0..w {
            let base = ((ho + pad) * wp + wo + pad) as f64;
            let mut acc = bias;
            for i in 0..k {
                for t in 0..k {
                    let l = base + (t as f64 - 1.0) + d[i];
                    acc += kernel.at(0, 0, i, t) * sample(l);
                }
            }
            out[ho * w + wo] = acc;
        }
    }
    out
}

#[test]
fn criterion_5_brute_force_operator_oracle() {
    let t0 = Instant::now();
    let spec = ConvSpec::new(1, 1, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut wts = ConvWeights::init(&spec, &mut rng);
    wts.bias = Some(vec![0.125]);

    // input family: all 25 one-hot grids, a ramp, a checkerboard, and a
    // random grid
    let mut family: Vec<Tensor> = Vec::new();
    for p in 0..25 {
        let mut v = vec![0.0; 25];
        v[p] = 1.0;
        family.push(Tensor::from_vec([1, 1, 5, 5], v).unwrap());
    }
    family.push(
        Tensor::from_vec([1, 1, 5, 5], (0..25).map(|i| i as f64 * 0.2 - 2.0).collect()).unwrap(),
    );
    family.push(
        Tensor::from_vec(
            [1, 1, 5, 5],
            (0..25).map(|i| if (i / 5 + i % 5) % 2 == 0 { 1.0 } else { -1.0 }).collect(),
        )
        .unwrap(),
    );
    family.push(random_tensor([1, 1, 5, 5], &mut rng));

    let shape_biases = [[0.7, -1.3], [0.3, 0.3], [-0.5, 1.9], [2.25, -0.75]];
    let mut worst = 0.0f64;
    let mut cases = 0;
    for x in &family {
        for sb in &shape_biases {
            let mut sw = ShapeConvWeights::zeros(&spec);
            sw.bias = sb.to_vec();
            let (y, _) = onedconv_forward(x, &spec, &wts, &sw).unwrap();
            let oracle = brute_force_operator(x, &wts.kernel, 0.125, sb);
            for (a, b) in y.data().iter().zip(&oracle) {
                worst = worst.max((a - b).abs());
            }
            cases += 1;
        }
    }
    assert!(
        worst < 1e-12,
        "operator deviates from the scalar enumeration by {}",
        worst
    );
    println!(
        "PASS criterion 5: brute-force oracle over {} grid/bias cases, max |dy| = {:.3e} ({:.1}s)",
        cases,
        worst,
        t0.elapsed().as_secs_f64()
    );
}

struct ExperimentData {
    dir: tempfile::TempDir,
}

impl ExperimentData {
    fn new() -> ExperimentData {
        let dir = tempfile::tempdir().unwrap();
        write_digit_idx(
            dir.path().join("train-images"),
            dir.path().join("train-labels"),
            2000,
            100,
        )
        .unwrap();
        write_digit_idx(
            dir.path().join("test-images"),
            dir.path().join("test-labels"),
            1000,
            200,
        )
        .unwrap();
        ExperimentData { dir }
    }

    fn config(&self, variant: Variant, mode: DataMode, seed: u64) -> TrainConfig {
        let mut cfg = TrainConfig::new(
            self.dir.path().join("train-images"),
            self.dir.path().join("train-labels"),
        );
        cfg.test_images = Some(self.dir.path().join("test-images"));
        cfg.test_labels = Some(self.dir.path().join("test-labels"));
        cfg.variant = variant;
        cfg.distortion = mode;
        cfg.seed = seed;
        cfg.epochs = 20;
        cfg.batch_size = 32;
        cfg.lr = 0.01;
        cfg.record_seconds = false;
        cfg
    }
}

#[test]
fn criterion_6_desk_scale_directional_experiment() {
    let t0 = Instant::now();
    let data = ExperimentData::new();
    let seeds = [0u64, 1, 2];
    let mut means = std::collections::BTreeMap::new();
    for &seed in &seeds {
        for (mode, tag) in [(DataMode::Origin, "origin"), (DataMode::Rotated, "rotated")] {
            for (variant, vtag) in [(Variant::Vanilla, "vanilla"), (Variant::OneDConv, "onedconv")]
            {
                let cfg = data.config(variant, mode, seed);
                let (mut net, metrics) = train(&cfg).unwrap();
                let test_acc = metrics
                    .iter()
                    .rev()
                    .find(|m| m.split == "test")
                    .expect("test split evaluated")
                    .accuracy;
                let train_loss = metrics
                    .iter()
                    .rev()
                    .find(|m| m.split == "train")
                    .unwrap()
                    .loss;
                println!(
                    "criterion 6: seed {} {} {} test accuracy {:.4} (final train loss {:.4})",
                    seed, tag, vtag, test_acc, train_loss
                );
                if mode == DataMode::Origin {
                    // the untrained-baseline bound and the desk-scale floor
                    assert!(
                        train_loss < 10.0f64.ln(),
                        "origin train loss {:.4} not below ln 10",
                        train_loss
                    );
                    assert!(
                        test_acc >= 0.90,
                        "origin test accuracy {:.4} below 0.90",
                        test_acc
                    );
                }
                if seed == 0 && mode == DataMode::Origin && variant == Variant::OneDConv {
                    // evaluating the training subset with the final model
                    // stays within 2 points of the test accuracy
                    let train_ds = onedconv_core::train::load_train_split(&cfg).unwrap();
                    let rec =
                        onedconv_core::train::evaluate(&mut net, &train_ds, 32, false).unwrap();
                    assert!(
                        rec.accuracy >= test_acc - 0.02,
                        "train-subset accuracy {:.4} below test {:.4} - 0.02",
                        rec.accuracy,
                        test_acc
                    );
                }
                *means.entry((tag, vtag)).or_insert(0.0) += test_acc / seeds.len() as f64;
            }
        }
    }
    let origin_vanilla = means[&("origin", "vanilla")];
    let origin_oned = means[&("origin", "onedconv")];
    let rot_vanilla = means[&("rotated", "vanilla")];
    let rot_oned = means[&("rotated", "onedconv")];

    // (a) canonical images: no more than 1 point behind the vanilla baseline
    assert!(
        origin_oned >= origin_vanilla - 0.01,
        "origin: onedconv {:.4} vs vanilla {:.4}",
        origin_oned,
        origin_vanilla
    );
    // (b) rotated images: at or above the vanilla baseline on the seed mean
    // (single-seed shortfalls are reported above, only the mean is binding)
    assert!(
        rot_oned >= rot_vanilla,
        "rotated: onedconv {:.4} vs vanilla {:.4}",
        rot_oned,
        rot_vanilla
    );
    println!(
        "PASS criterion 6: origin onedconv {:.4} vs vanilla {:.4}; rotated onedconv {:.4} vs vanilla {:.4} ({:.1} min)",
        origin_oned,
        origin_vanilla,
        rot_oned,
        rot_vanilla,
        t0.elapsed().as_secs_f64() / 60.0
    );
}

#[test]
fn criterion_7_determinism() {
    let t0 = Instant::now();
    let data = ExperimentData::new();
    // the fullest machinery of the criterion-6 matrix: dynamic offsets,
    // distortion, checkpoint and metrics output
    let mut cfg = data.config(Variant::OneDConv, DataMode::Rotated, 0);
    cfg.checkpoint_out = Some(data.dir.path().join("run-a.odc"));
    cfg.metrics_out = Some(data.dir.path().join("run-a.csv"));
    train(&cfg).unwrap();

    let mut cfg_b = cfg.clone();
    cfg_b.checkpoint_out = Some(data.dir.path().join("run-b.odc"));
    cfg_b.metrics_out = Some(data.dir.path().join("run-b.csv"));
    let (mut net, _) = train(&cfg_b).unwrap();

    let ckpt_a = std::fs::read(data.dir.path().join("run-a.odc")).unwrap();
    let ckpt_b = std::fs::read(data.dir.path().join("run-b.odc")).unwrap();
    assert_eq!(ckpt_a, ckpt_b, "checkpoints differ between identical runs");
    let csv_a = std::fs::read(data.dir.path().join("run-a.csv")).unwrap();
    let csv_b = std::fs::read(data.dir.path().join("run-b.csv")).unwrap();
    assert_eq!(csv_a, csv_b, "metrics differ between identical runs");

    // reported, not asserted: per-layer offset deviation of the trained model
    // (the shallow layer is expected to stay closer to the square default)
    let test_ds = onedconv_core::train::load_test_split(&cfg_b).unwrap().unwrap();
    let stats = onedconv_core::train::dump_offsets(&mut net, &test_ds, 32).unwrap();
    for s in &stats {
        println!(
            "criterion 7 (offset report): {} mean |dev| {:.4} max {:.4}",
            s.name,
            s.mean_dev(),
            s.max_dev
        );
    }
    println!(
        "PASS criterion 7: identical checkpoints ({} bytes) and metrics ({} bytes) across reruns ({:.1} min)",
        ckpt_a.len(),
        csv_a.len(),
        t0.elapsed().as_secs_f64() / 60.0
    );
}

#[test]
fn criterion_8_distortion_protocol() {
    let t0 = Instant::now();
    // 10,000 draws per mode stay inside the documented ranges
    let rot = DistortionSpec::rotated(11);
    let rts = DistortionSpec::rts(12);
    for i in 0..10_000 {
        let p = sample_params(&rot, i);
        assert!(p.angle_deg >= -90.0 && p.angle_deg < 90.0);
        assert_eq!((p.scale, p.tx, p.ty), (1.0, 0.0, 0.0));
        let p = sample_params(&rts, i);
        assert!(p.angle_deg >= -45.0 && p.angle_deg < 45.0);
        assert!(p.scale >= 0.7 && p.scale < 1.0);
        assert!(p.tx >= -5.0 && p.tx < 5.0);
        assert!(p.ty >= -5.0 && p.ty < 5.0);
    }

    // identity distortion is bit-exact and the IDX round trip preserves bytes
    let dir = tempfile::tempdir().unwrap();
    let (ip, lp) = (dir.path().join("i"), dir.path().join("l"));
    // 32x32 source so no resizing happens on load
    let mut images = Tensor::zeros([7, 1, 32, 32]);
    for (i, v) in images.data_mut().iter_mut().enumerate() {
        *v = ((i * 131) % 256) as f64 / 255.0;
    }
    let ds = onedconv_core::data::LabeledDataset {
        images,
        labels: (0..7).map(|i| i % 10).collect(),
        provenance: onedconv_core::data::Provenance::Origin,
        seed: 0,
    };
    save_idx(&ds, &ip, &lp).unwrap();
    let orig_images = std::fs::read(&ip).unwrap();
    let orig_labels = std::fs::read(&lp).unwrap();

    let loaded = load_idx(&ip, &lp, None).unwrap();
    let distorted = distort_dataset(&loaded, &DistortionSpec::identity(3));
    assert_eq!(
        distorted.images.data(),
        loaded.images.data(),
        "identity distortion must be bit-exact"
    );
    let (ip2, lp2) = (dir.path().join("i2"), dir.path().join("l2"));
    save_idx(&distorted, &ip2, &lp2).unwrap();
    assert_eq!(std::fs::read(&ip2).unwrap(), orig_images);
    assert_eq!(std::fs::read(&lp2).unwrap(), orig_labels);

    println!(
        "PASS criterion 8: 10k draws per mode in range; identity distortion and IDX round trip byte-exact ({:.1}s)",
        t0.elapsed().as_secs_f64()
    );
}
