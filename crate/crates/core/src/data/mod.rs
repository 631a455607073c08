//! Dataset ingestion and the distortion generators.

mod distort;
mod idx;
mod synth;

pub use distort::{
    distort_dataset, sample_params, warp, DistortMode, DistortionSpec, WarpParams,
};
pub use idx::{bilinear_resize, load_idx, save_idx, IMAGES_MAGIC, LABELS_MAGIC};
pub use synth::{generate_digits, write_digit_idx};

use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Origin,
    Rotated,
    Rts,
}

/// Images `(N, 1, 32, 32)` valued in `[0, 1]` plus integer labels.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub images: Tensor,
    pub labels: Vec<usize>,
    pub provenance: Provenance,
    pub seed: u64,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}
