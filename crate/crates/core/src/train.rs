//! Config-driven training and evaluation at desk scale.
//!
//! One run: load an IDX pair, apply the configured distortion, build the
//! model, loop minibatch forward / cross-entropy / backward / SGD, then
//! evaluate. Everything is keyed off the config seed, so a run is a pure
//! function of its config (with `record_seconds = false`).

use crate::accounting::{build_resnet18, build_tiny_cnn, ModelGraph, Variant};
use crate::checkpoint::save_checkpoint;
use crate::data::{distort_dataset, load_idx, DistortionSpec, LabeledDataset};
use crate::model::{Network, OffsetStats};
use crate::nn::{softmax_cross_entropy, SgdState};
use crate::tensor::Tensor;
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    TinyCnn,
    Resnet18,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<ModelKind> {
        match s {
            "tiny-cnn" => Ok(ModelKind::TinyCnn),
            "resnet18" => Ok(ModelKind::Resnet18),
            other => Err(Error::Config(format!("unknown model '{}'", other))),
        }
    }
}

/// Which distortion is applied to both splits before training/evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataMode {
    Origin,
    Rotated,
    Rts,
}

impl std::str::FromStr for DataMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<DataMode> {
        match s {
            "origin" => Ok(DataMode::Origin),
            "rotated" => Ok(DataMode::Rotated),
            "rts" => Ok(DataMode::Rts),
            other => Err(Error::Config(format!("unknown distortion '{}'", other))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub variant: Variant,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    pub distortion: DataMode,
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
    pub threads: usize,
    pub augment_crop: bool,
    /// Evaluate the test split every this many epochs; 0 = only after the
    /// final epoch.
    pub eval_every: usize,
    pub classes: usize,
    pub checkpoint_out: Option<PathBuf>,
    pub metrics_out: Option<PathBuf>,
    /// With `false`, the seconds column is written as zero so metrics files
    /// are bit-reproducible.
    pub record_seconds: bool,
}

impl TrainConfig {
    pub fn new<P: Into<PathBuf>, Q: Into<PathBuf>>(train_images: P, train_labels: Q) -> TrainConfig {
        TrainConfig {
            model: ModelKind::TinyCnn,
            variant: Variant::OneDConv,
            epochs: 20,
            batch_size: 32,
            lr: 0.1,
            momentum: 0.9,
            weight_decay: 5e-3,
            seed: 0,
            train_images: train_images.into(),
            train_labels: train_labels.into(),
            test_images: None,
            test_labels: None,
            distortion: DataMode::Origin,
            train_limit: None,
            test_limit: None,
            threads: 1,
            augment_crop: false,
            eval_every: 0,
            classes: 10,
            checkpoint_out: None,
            metrics_out: None,
            record_seconds: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config("lr must be positive".into()));
        }
        if self.classes == 0 {
            return Err(Error::Config("classes must be positive".into()));
        }
        if self.threads != 1 {
            return Err(Error::Config(
                "threads must be 1 (reproducible single-thread execution)".into(),
            ));
        }
        Ok(())
    }
}

/// Parses the plain-text `key=value` config format (one pair per line, `#`
/// comments). Unknown keys are rejected.
pub fn parse_config(text: &str) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::new("", "");
    let mut saw_train_images = false;
    let mut saw_train_labels = false;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected key=value", lineno + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        let bad = |what: &str| Error::Config(format!("line {}: bad {} '{}'", lineno + 1, what, value));
        match key {
            "model" => cfg.model = value.parse()?,
            "variant" => cfg.variant = value.parse()?,
            "epochs" => cfg.epochs = value.parse().map_err(|_| bad("epochs"))?,
            "batch_size" => cfg.batch_size = value.parse().map_err(|_| bad("batch_size"))?,
            "lr" => cfg.lr = value.parse().map_err(|_| bad("lr"))?,
            "momentum" => cfg.momentum = value.parse().map_err(|_| bad("momentum"))?,
            "weight_decay" => cfg.weight_decay = value.parse().map_err(|_| bad("weight_decay"))?,
            "seed" => cfg.seed = value.parse().map_err(|_| bad("seed"))?,
            "train_images" => {
                cfg.train_images = value.into();
                saw_train_images = true;
            }
            "train_labels" => {
                cfg.train_labels = value.into();
                saw_train_labels = true;
            }
            "test_images" => cfg.test_images = Some(value.into()),
            "test_labels" => cfg.test_labels = Some(value.into()),
            "distortion" => cfg.distortion = value.parse()?,
            "train_limit" => cfg.train_limit = Some(value.parse().map_err(|_| bad("train_limit"))?),
            "test_limit" => cfg.test_limit = Some(value.parse().map_err(|_| bad("test_limit"))?),
            "threads" => cfg.threads = value.parse().map_err(|_| bad("threads"))?,
            "augment_crop" => cfg.augment_crop = value.parse().map_err(|_| bad("augment_crop"))?,
            "eval_every" => cfg.eval_every = value.parse().map_err(|_| bad("eval_every"))?,
            "classes" => cfg.classes = value.parse().map_err(|_| bad("classes"))?,
            "checkpoint_out" => cfg.checkpoint_out = Some(value.into()),
            "metrics_out" => cfg.metrics_out = Some(value.into()),
            "record_seconds" => {
                cfg.record_seconds = value.parse().map_err(|_| bad("record_seconds"))?
            }
            other => {
                return Err(Error::Config(format!(
                    "line {}: unknown key '{}'",
                    lineno + 1,
                    other
                )))
            }
        }
    }
    if !saw_train_images || !saw_train_labels {
        return Err(Error::Config(
            "train_images and train_labels are required".into(),
        ));
    }
    Ok(cfg)
}

/// One metrics row: per-epoch training stats or one evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub epoch: usize,
    pub split: String,
    pub loss: f64,
    pub accuracy: f64,
    pub seconds: f64,
    /// Per OneDConv layer, mean |offset - square default| seen this pass.
    pub offset_dev: Vec<(String, f64)>,
}

/// Argmax with ties broken toward the lowest class index.
pub fn predictions(logits: &Tensor) -> Vec<usize> {
    let [n, classes, _, _] = logits.shape();
    (0..n)
        .map(|b| {
            let row = &logits.data()[b * classes..(b + 1) * classes];
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

fn graph_for(cfg: &TrainConfig) -> ModelGraph {
    match cfg.model {
        ModelKind::TinyCnn => build_tiny_cnn(cfg.variant, cfg.classes, [1, 32, 32]),
        ModelKind::Resnet18 => build_resnet18(cfg.variant, cfg.classes, [1, 32, 32]),
    }
}

/// Builds the (untrained) network the config describes.
pub fn build_model(cfg: &TrainConfig) -> Result<Network> {
    Network::from_graph(&graph_for(cfg), cfg.seed)
}

fn apply_distortion(ds: LabeledDataset, mode: DataMode, seed: u64) -> LabeledDataset {
    match mode {
        DataMode::Origin => ds,
        DataMode::Rotated => distort_dataset(&ds, &DistortionSpec::rotated(seed)),
        DataMode::Rts => distort_dataset(&ds, &DistortionSpec::rts(seed)),
    }
}

/// Loads and distorts the training split exactly as `train` would.
pub fn load_train_split(cfg: &TrainConfig) -> Result<LabeledDataset> {
    let ds = load_idx(&cfg.train_images, &cfg.train_labels, cfg.train_limit)?;
    Ok(apply_distortion(ds, cfg.distortion, cfg.seed.wrapping_add(1)))
}

/// Loads and distorts the test split exactly as `train` would.
pub fn load_test_split(cfg: &TrainConfig) -> Result<Option<LabeledDataset>> {
    match (&cfg.test_images, &cfg.test_labels) {
        (Some(ip), Some(lp)) => {
            let ds = load_idx(ip, lp, cfg.test_limit)?;
            Ok(Some(apply_distortion(
                ds,
                cfg.distortion,
                cfg.seed.wrapping_add(2),
            )))
        }
        (None, None) => Ok(None),
        _ => Err(Error::Config(
            "test_images and test_labels must be given together".into(),
        )),
    }
}

/// 4-pixel zero pad followed by a random same-size crop.
fn crop_shift(src: &[f64], h: usize, w: usize, dy: isize, dx: isize, dst: &mut [f64]) {
    for y in 0..h {
        let sy = y as isize + dy;
        for x in 0..w {
            let sx = x as isize + dx;
            dst[y * w + x] = if sy >= 0 && sx >= 0 && (sy as usize) < h && (sx as usize) < w {
                src[sy as usize * w + sx as usize]
            } else {
                0.0
            };
        }
    }
}

fn gather_batch(
    ds: &LabeledDataset,
    idxs: &[usize],
    crop_rng: Option<&mut ChaCha8Rng>,
) -> (Tensor, Vec<usize>) {
    let [_, _, h, w] = ds.images.shape();
    let mut x = Tensor::zeros([idxs.len(), 1, h, w]);
    let mut labels = Vec::with_capacity(idxs.len());
    match crop_rng {
        None => {
            for (bi, &i) in idxs.iter().enumerate() {
                x.plane_slice_mut(bi, 0)
                    .copy_from_slice(ds.images.plane_slice(i, 0));
                labels.push(ds.labels[i]);
            }
        }
        Some(rng) => {
            for (bi, &i) in idxs.iter().enumerate() {
                let dy = rng.gen_range(0..9) as isize - 4;
                let dx = rng.gen_range(0..9) as isize - 4;
                crop_shift(ds.images.plane_slice(i, 0), h, w, dy, dx, x.plane_slice_mut(bi, 0));
                labels.push(ds.labels[i]);
            }
        }
    }
    (x, labels)
}

fn mix(seed: u64, salt: u64) -> u64 {
    seed.wrapping_mul(0x100000001B3).wrapping_add(salt.wrapping_mul(0x9E3779B97F4A7C15))
}

/// Runs the full training loop; returns the trained model and the metrics
/// records (empty for `epochs = 0`).
pub fn train(cfg: &TrainConfig) -> Result<(Network, Vec<MetricsRecord>)> {
    cfg.validate()?;
    let train_ds = load_train_split(cfg)?;
    if train_ds.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    for &l in &train_ds.labels {
        if l >= cfg.classes {
            return Err(Error::LabelOutOfRange {
                label: l,
                classes: cfg.classes,
            });
        }
    }
    let test_ds = load_test_split(cfg)?;
    let mut net = build_model(cfg)?;
    let sgd = SgdState {
        lr: cfg.lr,
        momentum: cfg.momentum,
        weight_decay: cfg.weight_decay,
    };

    let mut metrics = Vec::new();
    let n = train_ds.len();
    let mut indices: Vec<usize> = (0..n).collect();

    for epoch in 0..cfg.epochs {
        let t0 = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, epoch as u64));
        indices.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut devs: Vec<OffsetStats> = Vec::new();

        for chunk in indices.chunks(cfg.batch_size) {
            let (x, labels) = gather_batch(
                &train_ds,
                chunk,
                cfg.augment_crop.then_some(&mut rng),
            );
            let (logits, caches) = net.forward(&x, true)?;
            let (loss, grad) = softmax_cross_entropy(&logits, &labels)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("training loss diverged at epoch {}", epoch),
                });
            }
            loss_sum += loss * labels.len() as f64;
            correct += predictions(&logits)
                .iter()
                .zip(&labels)
                .filter(|(p, l)| p == l)
                .count();
            Network::merge_offset_stats(&mut devs, net.offset_stats(&caches, 0));

            net.zero_grads();
            net.backward(&caches, &grad)?;
            net.step(&sgd);
        }

        metrics.push(MetricsRecord {
            epoch,
            split: "train".into(),
            loss: loss_sum / n as f64,
            accuracy: correct as f64 / n as f64,
            seconds: if cfg.record_seconds {
                t0.elapsed().as_secs_f64()
            } else {
                0.0
            },
            offset_dev: devs.iter().map(|s| (s.name.clone(), s.mean_dev())).collect(),
        });

        let last = epoch + 1 == cfg.epochs;
        let scheduled = cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0;
        if let Some(test) = &test_ds {
            if scheduled || last {
                let mut rec = evaluate(&mut net, test, cfg.batch_size, cfg.record_seconds)?;
                rec.epoch = epoch;
                metrics.push(rec);
            }
        }
    }

    if let Some(path) = &cfg.checkpoint_out {
        save_checkpoint(&mut net, path)?;
    }
    if let Some(path) = &cfg.metrics_out {
        std::fs::write(path, metrics_csv(&metrics))?;
    }
    Ok((net, metrics))
}

/// Forward-only pass over a dataset in eval mode (running statistics).
pub fn evaluate(
    net: &mut Network,
    ds: &LabeledDataset,
    batch_size: usize,
    record_seconds: bool,
) -> Result<MetricsRecord> {
    let t0 = Instant::now();
    let n = ds.len();
    if n == 0 {
        return Err(Error::Config("evaluation split is empty".into()));
    }
    let idxs: Vec<usize> = (0..n).collect();
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    let mut devs: Vec<OffsetStats> = Vec::new();
    for chunk in idxs.chunks(batch_size) {
        let (x, labels) = gather_batch(ds, chunk, None);
        let (logits, caches) = net.forward(&x, false)?;
        let (loss, _) = softmax_cross_entropy(&logits, &labels)?;
        loss_sum += loss * labels.len() as f64;
        correct += predictions(&logits)
            .iter()
            .zip(&labels)
            .filter(|(p, l)| p == l)
            .count();
        Network::merge_offset_stats(&mut devs, net.offset_stats(&caches, chunk[0]));
    }
    Ok(MetricsRecord {
        epoch: 0,
        split: "test".into(),
        loss: loss_sum / n as f64,
        accuracy: correct as f64 / n as f64,
        seconds: if record_seconds {
            t0.elapsed().as_secs_f64()
        } else {
            0.0
        },
        offset_dev: devs.iter().map(|s| (s.name.clone(), s.mean_dev())).collect(),
    })
}

/// Offset deviation statistics per OneDConv layer over a whole dataset.
pub fn dump_offsets(
    net: &mut Network,
    ds: &LabeledDataset,
    batch_size: usize,
) -> Result<Vec<OffsetStats>> {
    if !net.has_onedconv() {
        return Err(Error::NoDynamicLayers);
    }
    let idxs: Vec<usize> = (0..ds.len()).collect();
    let mut devs: Vec<OffsetStats> = Vec::new();
    for chunk in idxs.chunks(batch_size.max(1)) {
        let (x, _) = gather_batch(ds, chunk, None);
        let (_, caches) = net.forward(&x, false)?;
        Network::merge_offset_stats(&mut devs, net.offset_stats(&caches, chunk[0]));
    }
    Ok(devs)
}

/// Renders metrics as CSV: `epoch,split,loss,accuracy,seconds` plus one
/// `offset_dev_<layer>` column per dynamic layer.
pub fn metrics_csv(records: &[MetricsRecord]) -> String {
    let layer_names: Vec<String> = records
        .iter()
        .find(|r| !r.offset_dev.is_empty())
        .map(|r| r.offset_dev.iter().map(|(n, _)| n.clone()).collect())
        .unwrap_or_default();
    let mut out = String::from("epoch,split,loss,accuracy,seconds");
    for n in &layer_names {
        out.push_str(&format!(",offset_dev_{}", n));
    }
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{}",
            r.epoch, r.split, r.loss, r.accuracy, r.seconds
        ));
        for n in &layer_names {
            match r.offset_dev.iter().find(|(ln, _)| ln == n) {
                Some((_, v)) => out.push_str(&format!(",{}", v)),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

/// Renders per-layer offset statistics as CSV in network order.
pub fn offsets_csv(stats: &[OffsetStats]) -> String {
    let mut out = String::from(
        "layer,mean_abs_dev,max_abs_dev,max_sample,max_filter,max_row,max_col,max_offset\n",
    );
    for s in stats {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            s.name,
            s.mean_dev(),
            s.max_dev,
            s.max_sample,
            s.max_filter,
            s.max_row,
            s.max_col,
            s.max_offset
        ));
    }
    out
}
