//! Max and average pooling, no padding, floor-division output extents.

use crate::tensor::Tensor;
use crate::{Error, Result};

/// Saved geometry (and argmax positions for max pooling).
#[derive(Debug, Clone)]
pub struct PoolCache {
    in_shape: [usize; 4],
    kernel: usize,
    stride: usize,
    /// Flat input index of the selected maximum per output element; empty for
    /// average pooling.
    argmax: Vec<usize>,
}

fn out_extents(h: usize, w: usize, k: usize, s: usize) -> Result<(usize, usize)> {
    if h < k || w < k {
        return Err(Error::Config(format!(
            "pool kernel {} larger than input {}x{}",
            k, h, w
        )));
    }
    Ok(((h - k) / s + 1, (w - k) / s + 1))
}

/// Ties go to the first (row-major) position in the window.
pub fn maxpool_forward(x: &Tensor, kernel: usize, stride: usize) -> Result<(Tensor, PoolCache)> {
    let [n, c, h, w] = x.shape();
    let (ho, wo) = out_extents(h, w, kernel, stride)?;
    let mut y = Tensor::zeros([n, c, ho, wo]);
    let mut argmax = vec![0usize; n * c * ho * wo];
    let mut oi = 0;
    for b in 0..n {
        for ch in 0..c {
            let plane = x.plane_slice(b, ch);
            let plane_base = (b * c + ch) * h * w;
            for i in 0..ho {
                for j in 0..wo {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = 0;
                    for di in 0..kernel {
                        for dj in 0..kernel {
                            let idx = (i * stride + di) * w + (j * stride + dj);
                            let v = plane[idx];
                            if v > best {
                                best = v;
                                best_idx = plane_base + idx;
                            }
                        }
                    }
                    y.data_mut()[oi] = best;
                    argmax[oi] = best_idx;
                    oi += 1;
                }
            }
        }
    }
    Ok((
        y,
        PoolCache {
            in_shape: [n, c, h, w],
            kernel,
            stride,
            argmax,
        },
    ))
}

pub fn maxpool_backward(cache: &PoolCache, grad_y: &Tensor) -> Result<Tensor> {
    if grad_y.len() != cache.argmax.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} outputs", cache.argmax.len()),
            got: format!("{}", grad_y.len()),
        });
    }
    let mut grad_x = Tensor::zeros(cache.in_shape);
    for (g, &idx) in grad_y.data().iter().zip(&cache.argmax) {
        grad_x.data_mut()[idx] += g;
    }
    Ok(grad_x)
}

pub fn avgpool_forward(x: &Tensor, kernel: usize, stride: usize) -> Result<(Tensor, PoolCache)> {
    let [n, c, h, w] = x.shape();
    let (ho, wo) = out_extents(h, w, kernel, stride)?;
    let inv = 1.0 / (kernel * kernel) as f64;
    let mut y = Tensor::zeros([n, c, ho, wo]);
    let mut oi = 0;
    for b in 0..n {
        for ch in 0..c {
            let plane = x.plane_slice(b, ch);
            for i in 0..ho {
                for j in 0..wo {
                    let mut sum = 0.0;
                    for di in 0..kernel {
                        for dj in 0..kernel {
                            sum += plane[(i * stride + di) * w + (j * stride + dj)];
                        }
                    }
                    y.data_mut()[oi] = sum * inv;
                    oi += 1;
                }
            }
        }
    }
    Ok((
        y,
        PoolCache {
            in_shape: [n, c, h, w],
            kernel,
            stride,
            argmax: Vec::new(),
        },
    ))
}

pub fn avgpool_backward(cache: &PoolCache, grad_y: &Tensor) -> Result<Tensor> {
    let [n, c, _, w] = cache.in_shape;
    let [gn, gc, ho, wo] = grad_y.shape();
    if gn != n || gc != c {
        return Err(Error::ShapeMismatch {
            expected: format!("batch {} channels {}", n, c),
            got: format!("batch {} channels {}", gn, gc),
        });
    }
    let inv = 1.0 / (cache.kernel * cache.kernel) as f64;
    let mut grad_x = Tensor::zeros(cache.in_shape);
    for b in 0..n {
        for ch in 0..c {
            let plane = grad_x.plane_slice_mut(b, ch);
            for i in 0..ho {
                for j in 0..wo {
                    let g = grad_y.at(b, ch, i, j) * inv;
                    for di in 0..cache.kernel {
                        for dj in 0..cache.kernel {
                            plane[(i * cache.stride + di) * w + (j * cache.stride + dj)] += g;
                        }
                    }
                }
            }
        }
    }
    Ok(grad_x)
}
