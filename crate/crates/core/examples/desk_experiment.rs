//! Runs the desk-scale origin/rotated comparison outside the test harness:
//! `desk_experiment [epochs] [lr] [seeds] [crop]`.

use onedconv_core::accounting::Variant;
use onedconv_core::data::write_digit_idx;
use onedconv_core::train::{train, DataMode, TrainConfig};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(20);
    let lr: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(0.05);
    let seeds: u64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(1);
    let crop: bool = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(false);

    let dir = tempfile::tempdir().unwrap();
    let ti = dir.path().join("ti");
    let tl = dir.path().join("tl");
    let ei = dir.path().join("ei");
    let el = dir.path().join("el");
    write_digit_idx(&ti, &tl, 2000, 100).unwrap();
    write_digit_idx(&ei, &el, 1000, 200).unwrap();

    let mut means = std::collections::BTreeMap::new();
    for seed in 0..seeds {
        for mode in [DataMode::Origin, DataMode::Rotated] {
            for variant in [Variant::Vanilla, Variant::OneDConv] {
                let mut cfg = TrainConfig::new(&ti, &tl);
                cfg.test_images = Some(ei.clone());
                cfg.test_labels = Some(el.clone());
                cfg.epochs = epochs;
                cfg.batch_size = 32;
                cfg.lr = lr;
                cfg.seed = seed;
                cfg.variant = variant;
                cfg.distortion = mode;
                cfg.augment_crop = crop;
                let t0 = Instant::now();
                let (_, metrics) = train(&cfg).unwrap();
                let test = metrics.iter().rev().find(|m| m.split == "test").unwrap();
                let tr = metrics.iter().rev().find(|m| m.split == "train").unwrap();
                println!(
                    "seed={} mode={:?} variant={:?}: test acc {:.4} loss {:.4} | train acc {:.4} loss {:.4} | {:.1}s",
                    seed, mode, variant, test.accuracy, test.loss, tr.accuracy, tr.loss,
                    t0.elapsed().as_secs_f64()
                );
                *means
                    .entry(format!("{:?}/{:?}", mode, variant))
                    .or_insert(0.0) += test.accuracy / seeds as f64;
            }
        }
    }
    println!("--- means over {} seeds ---", seeds);
    for (k, v) in means {
        println!("{k}: {v:.4}");
    }
}
