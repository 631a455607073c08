//! Per-channel batch normalization.

use crate::tensor::Tensor;
use crate::{Error, Result};

/// Learnable scale/shift plus running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormParams {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    /// Running-stat update rate.
    pub momentum: f64,
    pub eps: f64,
}

impl BatchNormParams {
    pub fn new(channels: usize) -> BatchNormParams {
        BatchNormParams {
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            momentum: 0.1,
            eps: 1e-5,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }
}

/// Saved forward state for the backward pass.
#[derive(Debug, Clone)]
pub struct BnCache {
    x_hat: Tensor,
    inv_std: Vec<f64>,
    gamma: Vec<f64>,
    training: bool,
}

/// Normalizes each channel over (batch, height, width).
///
/// In training mode batch statistics (biased variance) normalize and the
/// running stats are updated with unbiased variance; in eval mode the running
/// stats normalize.
pub fn batchnorm_forward(
    x: &Tensor,
    params: &mut BatchNormParams,
    training: bool,
) -> Result<(Tensor, BnCache)> {
    let [n, c, h, w] = x.shape();
    if c != params.channels() {
        return Err(Error::ChannelMismatch {
            expected: params.channels(),
            got: c,
        });
    }
    let m = (n * h * w) as f64;
    let hw = h * w;
    let mut y = Tensor::zeros([n, c, h, w]);
    let mut x_hat = Tensor::zeros([n, c, h, w]);
    let mut inv_std = vec![0.0; c];

    for ch in 0..c {
        let (mean, var) = if training {
            let mut sum = 0.0;
            for b in 0..n {
                sum += x.plane_slice(b, ch).iter().sum::<f64>();
            }
            let mean = sum / m;
            let mut sq = 0.0;
            for b in 0..n {
                for &v in x.plane_slice(b, ch) {
                    let d = v - mean;
                    sq += d * d;
                }
            }
            let var = sq / m;
            let unbiased = if m > 1.0 { sq / (m - 1.0) } else { var };
            params.running_mean[ch] =
                (1.0 - params.momentum) * params.running_mean[ch] + params.momentum * mean;
            params.running_var[ch] =
                (1.0 - params.momentum) * params.running_var[ch] + params.momentum * unbiased;
            (mean, var)
        } else {
            (params.running_mean[ch], params.running_var[ch])
        };
        let istd = 1.0 / (var + params.eps).sqrt();
        inv_std[ch] = istd;
        let (g, bta) = (params.gamma[ch], params.beta[ch]);
        for b in 0..n {
            let src = x.plane_slice(b, ch);
            let start = (b * c + ch) * hw;
            for (i, &v) in src.iter().enumerate() {
                let xh = (v - mean) * istd;
                x_hat.data_mut()[start + i] = xh;
                y.data_mut()[start + i] = g * xh + bta;
            }
        }
    }

    Ok((
        y,
        BnCache {
            x_hat,
            inv_std,
            gamma: params.gamma.clone(),
            training,
        },
    ))
}

/// Returns `(grad_x, grad_gamma, grad_beta)`.
pub fn batchnorm_backward(cache: &BnCache, grad_y: &Tensor) -> Result<(Tensor, Vec<f64>, Vec<f64>)> {
    let [n, c, h, w] = cache.x_hat.shape();
    if grad_y.shape() != [n, c, h, w] {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", [n, c, h, w]),
            got: format!("{:?}", grad_y.shape()),
        });
    }
    let m = (n * h * w) as f64;
    let hw = h * w;
    let mut grad_x = Tensor::zeros([n, c, h, w]);
    let mut grad_gamma = vec![0.0; c];
    let mut grad_beta = vec![0.0; c];

    for ch in 0..c {
        let mut sum_g = 0.0;
        let mut sum_gx = 0.0;
        for b in 0..n {
            let start = (b * c + ch) * hw;
            for i in 0..hw {
                let gy = grad_y.data()[start + i];
                sum_g += gy;
                sum_gx += gy * cache.x_hat.data()[start + i];
            }
        }
        grad_beta[ch] = sum_g;
        grad_gamma[ch] = sum_gx;

        let gi = cache.gamma[ch] * cache.inv_std[ch];
        for b in 0..n {
            let start = (b * c + ch) * hw;
            for i in 0..hw {
                let gy = grad_y.data()[start + i];
                let xh = cache.x_hat.data()[start + i];
                grad_x.data_mut()[start + i] = if cache.training {
                    gi * (gy - sum_g / m - xh * sum_gx / m)
                } else {
                    gi * gy
                };
            }
        }
    }

    Ok((grad_x, grad_gamma, grad_beta))
}
