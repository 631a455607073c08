//! OneDConv: a convolution operator whose `K x K` kernel is decomposed into
//! `K` one-dimensional row filters with dynamically predicted inter-filter
//! distances, sampled on the flattened feature axis with linear interpolation.
//!
//! The crate bundles everything needed to study the operator on a desk:
//!
//! * [`tensor`] — dense 4-D storage every other module builds on
//! * [`nn`] — the vanilla baselines (conv2d, batchnorm, pooling, fc,
//!   softmax cross-entropy, SGD) the operator must reduce to
//! * [`onedconv`] — the operator itself: shape convolution, offset fields,
//!   interpolated sampling, full backward pass
//! * [`gradcheck`] — an independent finite-difference oracle for every
//!   backward implementation
//! * [`accounting`] — model graph descriptors with closed-form parameter and
//!   FLOPs counting, cross-checked by an instrumented scalar counter
//! * [`data`] — IDX ingestion, synthetic digit generation, and the rotated /
//!   RTS distortion generators
//! * [`model`] / [`train`] — a runtime network built from graph descriptors
//!   and the config-driven training / evaluation loop

pub mod accounting;
pub mod checkpoint;
pub mod data;
pub mod gradcheck;
pub mod model;
pub mod nn;
pub mod onedconv;
pub mod tensor;
pub mod train;

use thiserror::Error;

/// Error type shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("value list length {got} does not match shape product {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("channel mismatch: input has {got} channels, spec expects {expected}")]
    ChannelMismatch { expected: usize, got: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("bad magic in {path}: expected {expected:#010x}, got {got:#010x}")]
    BadMagic {
        path: String,
        expected: u32,
        got: u32,
    },
    #[error("truncated file {path}: needed {needed} bytes, had {had}")]
    Truncated {
        path: String,
        needed: usize,
        had: usize,
    },
    #[error("record count mismatch: {images} images vs {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("non-finite value encountered in {context}")]
    NonFinite { context: String },
    #[error("model contains no dynamic layers")]
    NoDynamicLayers,
    #[error("invalid config: {0}")]
    Config(String),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error("unresolved graph: {0}")]
    UnresolvedGraph(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
pub(crate) fn test_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}
