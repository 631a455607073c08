//! Reference dense layers: the vanilla 2-D convolution that OneDConv must
//! match at zero offsets, plus batch normalization, pooling, a fully connected
//! layer, softmax cross-entropy, and SGD with momentum and weight decay.

mod batchnorm;
pub(crate) mod conv2d;
mod linear;
pub(crate) mod matmul;
mod pool;
mod sgd;

pub use batchnorm::{batchnorm_backward, batchnorm_forward, BatchNormParams, BnCache};
pub use conv2d::{conv2d_backward, conv2d_forward, Conv2dGrads};
pub use linear::{
    fc_backward, fc_forward, softmax_cross_entropy, softmax_probs, FcGrads, FcWeights,
};
pub use pool::{
    avgpool_backward, avgpool_forward, maxpool_backward, maxpool_forward, PoolCache,
};
pub use sgd::{sgd_step, SgdState};

use crate::tensor::Tensor;
use crate::{Error, Result};
use rand::Rng;

/// Geometry of one convolution layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    /// Square kernel extent, odd.
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub has_bias: bool,
}

impl ConvSpec {
    /// Stride-1 "same" convolution: padding defaults to `kernel / 2`.
    pub fn new(in_channels: usize, out_channels: usize, kernel: usize) -> ConvSpec {
        ConvSpec {
            in_channels,
            out_channels,
            kernel,
            stride: 1,
            padding: kernel / 2,
            has_bias: true,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> ConvSpec {
        self.stride = stride;
        self
    }

    pub fn with_padding(mut self, padding: usize) -> ConvSpec {
        self.padding = padding;
        self
    }

    pub fn with_bias(mut self, has_bias: bool) -> ConvSpec {
        self.has_bias = has_bias;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel == 0 || self.kernel % 2 == 0 {
            return Err(Error::Config(format!(
                "kernel must be odd and >= 1, got {}",
                self.kernel
            )));
        }
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::Config("channel counts must be >= 1".into()));
        }
        if self.stride == 0 || self.stride > 2 {
            return Err(Error::Config(format!(
                "stride must be 1 or 2, got {}",
                self.stride
            )));
        }
        Ok(())
    }

    /// Output extents: `floor((ext + 2*padding - kernel) / stride) + 1`.
    pub fn out_extents(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let he = h + 2 * self.padding;
        let we = w + 2 * self.padding;
        if he < self.kernel || we < self.kernel {
            return Err(Error::Config(format!(
                "input {}x{} too small for kernel {} with padding {}",
                h, w, self.kernel, self.padding
            )));
        }
        Ok((
            (he - self.kernel) / self.stride + 1,
            (we - self.kernel) / self.stride + 1,
        ))
    }
}

/// Weights of one convolution layer: kernel `(C_out, C_in, K, K)` and an
/// optional per-output-channel bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvWeights {
    pub kernel: Tensor,
    pub bias: Option<Vec<f64>>,
}

impl ConvWeights {
    pub fn zeros(spec: &ConvSpec) -> ConvWeights {
        ConvWeights {
            kernel: Tensor::zeros([
                spec.out_channels,
                spec.in_channels,
                spec.kernel,
                spec.kernel,
            ]),
            bias: spec.has_bias.then(|| vec![0.0; spec.out_channels]),
        }
    }

    /// Fan-in-scaled uniform init: `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn init<R: Rng>(spec: &ConvSpec, rng: &mut R) -> ConvWeights {
        let fan_in = (spec.in_channels * spec.kernel * spec.kernel) as f64;
        let bound = 1.0 / fan_in.sqrt();
        let len = spec.out_channels * spec.in_channels * spec.kernel * spec.kernel;
        let data: Vec<f64> = (0..len).map(|_| rng.gen_range(-bound..bound)).collect();
        let kernel = Tensor::from_vec(
            [
                spec.out_channels,
                spec.in_channels,
                spec.kernel,
                spec.kernel,
            ],
            data,
        )
        .expect("kernel length matches spec");
        let bias = spec
            .has_bias
            .then(|| (0..spec.out_channels).map(|_| rng.gen_range(-bound..bound)).collect());
        ConvWeights { kernel, bias }
    }

    pub(crate) fn check(&self, spec: &ConvSpec) -> Result<()> {
        let expected = [
            spec.out_channels,
            spec.in_channels,
            spec.kernel,
            spec.kernel,
        ];
        if self.kernel.shape() != expected {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", expected),
                got: format!("{:?}", self.kernel.shape()),
            });
        }
        if let Some(b) = &self.bias {
            if b.len() != spec.out_channels {
                return Err(Error::ShapeMismatch {
                    expected: format!("bias len {}", spec.out_channels),
                    got: format!("bias len {}", b.len()),
                });
            }
        }
        Ok(())
    }
}
