//! The OneDConv operator.
//!
//! A `K x K` kernel is treated as `K` one-dimensional `1 x K` row filters. A
//! shape convolution predicts, per output location, the `K-1` deltas on the
//! distances between adjacent row filters; cumulative sums anchored at the
//! center row turn those gaps into per-filter displacements on the flattened
//! (padded) feature axis. Sampling at the displaced, generally fractional,
//! positions uses linear interpolation with zero extension, so the operator
//! stays exactly equal to the vanilla convolution whenever the shape
//! convolution outputs zero.

use crate::nn::matmul::{matmul_abt_acc, matmul_acc, transpose};
use crate::nn::{conv2d_backward, conv2d_forward, Conv2dGrads, ConvSpec, ConvWeights};
use crate::tensor::{FlatView, Tensor};
use crate::{Error, Result};

pub(crate) use crate::nn::conv2d::{pad_input, unpad_grad, ConvGeom};

/// Weights of the shape convolution: kernel `(K-1, C_in, K, K)` plus bias.
/// The filter count is tied to the main kernel extent.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeConvWeights {
    pub kernel: Tensor,
    pub bias: Vec<f64>,
}

impl ShapeConvWeights {
    /// Zero-initialized shape weights: training starts exactly at the vanilla
    /// convolution.
    pub fn zeros(spec: &ConvSpec) -> ShapeConvWeights {
        ShapeConvWeights {
            kernel: Tensor::zeros([
                spec.kernel - 1,
                spec.in_channels,
                spec.kernel,
                spec.kernel,
            ]),
            bias: vec![0.0; spec.kernel - 1],
        }
    }

    pub fn check(&self, spec: &ConvSpec) -> Result<()> {
        if spec.kernel < 3 {
            return Err(Error::Config(format!(
                "onedconv needs kernel >= 3, got {}",
                spec.kernel
            )));
        }
        let expected = [
            spec.kernel - 1,
            spec.in_channels,
            spec.kernel,
            spec.kernel,
        ];
        if self.kernel.shape() != expected || self.bias.len() != spec.kernel - 1 {
            return Err(Error::ShapeMismatch {
                expected: format!("shape kernel {:?} + bias {}", expected, spec.kernel - 1),
                got: format!(
                    "shape kernel {:?} + bias {}",
                    self.kernel.shape(),
                    self.bias.len()
                ),
            });
        }
        Ok(())
    }

    /// The shape convolution seen as an ordinary convolution layer: same
    /// kernel extent, stride and padding as the main convolution, `K-1`
    /// output channels, bias, no activation.
    pub fn as_conv(&self, spec: &ConvSpec) -> (ConvSpec, ConvWeights) {
        let shape_spec = ConvSpec {
            in_channels: spec.in_channels,
            out_channels: spec.kernel - 1,
            kernel: spec.kernel,
            stride: spec.stride,
            padding: spec.padding,
            has_bias: true,
        };
        let wts = ConvWeights {
            kernel: self.kernel.clone(),
            bias: Some(self.bias.clone()),
        };
        (shape_spec, wts)
    }
}

/// Predicts the inter-filter distance deltas: an ordinary convolution with
/// `K-1` output channels aligned with the main convolution's output grid.
/// Returns the shape map `(batch, K-1, H_out, W_out)`.
pub fn shape_conv_forward(
    x: &Tensor,
    spec: &ConvSpec,
    sw: &ShapeConvWeights,
) -> Result<Tensor> {
    sw.check(spec)?;
    let (shape_spec, wts) = sw.as_conv(spec);
    conv2d_forward(x, &shape_spec, &wts)
}

/// Index of the anchored (zero-displacement) center filter for `n_filters`
/// rows, 0-based.
#[inline]
pub fn center_filter(n_filters: usize) -> usize {
    n_filters / 2
}

/// Displacement of filter `i` under the square default: `(i - center) * w_pad`.
#[inline]
pub fn square_offset(i: usize, n_filters: usize, w_pad: usize) -> f64 {
    (i as isize - center_filter(n_filters) as isize) as f64 * w_pad as f64
}

/// Turns a shape map of adjacent-gap deltas into per-filter flattened
/// displacements `(batch, K, H_out, W_out)`.
///
/// Channel `j` of the shape map is the delta on the gap between filters `j`
/// and `j+1`; each gap is `w_pad + delta`. The center filter is anchored at
/// zero and displacements accumulate outward, so a zero shape map yields the
/// square default `(i - center) * w_pad`.
pub fn offsets_from_shape(shape_map: &Tensor, w_pad: usize) -> Tensor {
    let [n, gaps, h, w] = shape_map.shape();
    let filters = gaps + 1;
    let center = center_filter(filters);
    let hw = h * w;
    let mut d = Tensor::zeros([n, filters, h, w]);
    let wp = w_pad as f64;
    for b in 0..n {
        for p in 0..hw {
            let gap = |j: usize| wp + shape_map.data()[(b * gaps + j) * hw + p];
            let mut acc = 0.0;
            for i in center + 1..filters {
                acc += gap(i - 1);
                d.data_mut()[(b * filters + i) * hw + p] = acc;
            }
            acc = 0.0;
            for i in (0..center).rev() {
                acc -= gap(i);
                d.data_mut()[(b * filters + i) * hw + p] = acc;
            }
        }
    }
    d
}

#[inline]
fn fetch(data: &[f64], p: i64) -> f64 {
    if p >= 0 && (p as usize) < data.len() {
        data[p as usize]
    } else {
        0.0
    }
}

/// Linear interpolation on the flattened axis with zero extension outside
/// `[0, len)`. Integer positions return the stored value exactly; the upper
/// neighbor is always `floor(l) + 1` (right-derivative convention at the
/// integer kinks).
pub fn linear_sample(plane: &FlatView<'_>, l: f64) -> f64 {
    let lo = l.floor();
    let frac = l - lo;
    let lo = lo as i64;
    let data = plane.as_slice();
    (1.0 - frac) * fetch(data, lo) + frac * fetch(data, lo + 1)
}

/// Everything the backward pass needs from a forward evaluation. Sampled
/// columns are regathered per sample in backward; they are cheap relative to
/// the integration matmuls and stay cache-hot that way.
#[derive(Debug, Clone)]
pub struct OneDConvCache {
    spec: ConvSpec,
    geom: ConvGeom,
    x_pad: Tensor,
    shape_map: Tensor,
    offsets: Tensor,
}

impl OneDConvCache {
    pub fn shape_map(&self) -> &Tensor {
        &self.shape_map
    }

    pub fn offsets(&self) -> &Tensor {
        &self.offsets
    }

    /// Width of the zero-padded plane the offsets displace over.
    pub fn w_pad(&self) -> usize {
        self.x_pad.width()
    }
}

/// Flattened base position of the window anchored at output location
/// `(ho, wo)`: the padded-plane index of the window center.
#[inline]
fn window_base(ho: usize, wo: usize, stride: usize, k2: usize, w_pad: usize) -> i64 {
    ((ho * stride + k2) * w_pad + wo * stride + k2) as i64
}

/// Fills one sample's interpolated column matrix from the padded planes.
#[allow(clippy::too_many_arguments)]
fn sampled_im2col(
    xp: &Tensor,
    b: usize,
    g: &ConvGeom,
    offsets: &Tensor,
    bases: &[i64],
    floors: &[i64],
    fracs: &[f64],
    col: &mut [f64],
) {
    let cols = g.cols();
    let k = g.k;
    let k2 = (k / 2) as i64;
    debug_assert_eq!(offsets.shape()[1], k);
    for c in 0..g.cin {
        let plane = xp.plane_slice(b, c);
        for i in 0..k {
            let fl_row = &floors[i * cols..(i + 1) * cols];
            let fr_row = &fracs[i * cols..(i + 1) * cols];
            for t in 0..k {
                let dt = t as i64 - k2;
                let out = &mut col[((c * k + i) * k + t) * cols..][..cols];
                for l0 in 0..cols {
                    let pos = bases[l0] + dt + fl_row[l0];
                    let fr = fr_row[l0];
                    out[l0] = (1.0 - fr) * fetch(plane, pos) + fr * fetch(plane, pos + 1);
                }
            }
        }
    }
}

fn precompute_positions(
    g: &ConvGeom,
    offsets: &Tensor,
    b: usize,
) -> (Vec<i64>, Vec<i64>, Vec<f64>) {
    let cols = g.cols();
    let k = g.k;
    let k2 = k / 2;
    let wp = g.w_pad();
    let mut bases = vec![0i64; cols];
    for ho in 0..g.h_out {
        for wo in 0..g.w_out {
            bases[ho * g.w_out + wo] = window_base(ho, wo, g.stride, k2, wp);
        }
    }
    let mut floors = vec![0i64; k * cols];
    let mut fracs = vec![0.0; k * cols];
    for i in 0..k {
        let d_row = &offsets.data()[(b * k + i) * cols..(b * k + i + 1) * cols];
        for l0 in 0..cols {
            let d = d_row[l0];
            let fl = d.floor();
            floors[i * cols + l0] = fl as i64;
            fracs[i * cols + l0] = d - fl;
        }
    }
    (bases, floors, fracs)
}

/// Forward pass of the operator.
///
/// The shape convolution runs on the raw input; its output becomes the offset
/// field shared by every input and output channel. Each one-dimensional
/// filter row samples the flattened padded plane at its displaced positions
/// and the `K` partial responses integrate into the output.
pub fn onedconv_forward(
    x: &Tensor,
    spec: &ConvSpec,
    wts: &ConvWeights,
    sw: &ShapeConvWeights,
) -> Result<(Tensor, OneDConvCache)> {
    let g = ConvGeom::resolve(x, spec)?;
    wts.check(spec)?;
    sw.check(spec)?;

    let shape_map = shape_conv_forward(x, spec, sw)?;
    let offsets = offsets_from_shape(&shape_map, g.w_pad());
    let xp = pad_input(x, g.pad);

    let (rows, cols) = (g.rows(), g.cols());
    let mut y = Tensor::zeros([g.n, g.cout, g.h_out, g.w_out]);
    let mut col = vec![0.0; rows * cols];

    for b in 0..g.n {
        let (bases, floors, fracs) = precompute_positions(&g, &offsets, b);
        sampled_im2col(&xp, b, &g, &offsets, &bases, &floors, &fracs, &mut col);
        let y_s = &mut y.data_mut()[b * g.cout * cols..(b + 1) * g.cout * cols];
        matmul_acc(wts.kernel.data(), &col, y_s, g.cout, rows, cols);
        if let Some(bias) = &wts.bias {
            for o in 0..g.cout {
                let bo = bias[o];
                for v in &mut y_s[o * cols..(o + 1) * cols] {
                    *v += bo;
                }
            }
        }
    }

    Ok((
        y,
        OneDConvCache {
            spec: *spec,
            geom: g,
            x_pad: xp,
            shape_map,
            offsets,
        },
    ))
}

/// Adjoints of [`onedconv_forward`] for all five gradient groups.
#[derive(Debug, Clone)]
pub struct OneDConvGrads {
    pub x: Tensor,
    pub kernel: Tensor,
    pub bias: Option<Vec<f64>>,
    pub shape_kernel: Tensor,
    pub shape_bias: Vec<f64>,
}

pub fn onedconv_backward(
    cache: &OneDConvCache,
    wts: &ConvWeights,
    sw: &ShapeConvWeights,
    grad_y: &Tensor,
) -> Result<OneDConvGrads> {
    let g = cache.geom;
    wts.check(&cache.spec)?;
    sw.check(&cache.spec)?;
    if grad_y.shape() != [g.n, g.cout, g.h_out, g.w_out] {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", [g.n, g.cout, g.h_out, g.w_out]),
            got: format!("{:?}", grad_y.shape()),
        });
    }
    let (rows, cols) = (g.rows(), g.cols());
    let k = g.k;
    let k2 = k / 2;
    let center = center_filter(k);

    let mut grad_kernel = Tensor::zeros(wts.kernel.shape());
    let mut grad_bias = wts.bias.as_ref().map(|b| vec![0.0; b.len()]);
    let mut grad_xp = Tensor::zeros(cache.x_pad.shape());
    // dL/d(offset d_i) accumulated over output channels, input channels, taps
    let mut grad_d = Tensor::zeros(cache.offsets.shape());

    let mut col = vec![0.0; rows * cols];
    let mut grad_col = vec![0.0; rows * cols];
    let mut kernel_t = vec![0.0; g.cout * rows];
    transpose(wts.kernel.data(), g.cout, rows, &mut kernel_t);

    for b in 0..g.n {
        let g_s = &grad_y.data()[b * g.cout * cols..(b + 1) * g.cout * cols];

        if let Some(gb) = grad_bias.as_mut() {
            for o in 0..g.cout {
                gb[o] += g_s[o * cols..(o + 1) * cols].iter().sum::<f64>();
            }
        }

        let (bases, floors, fracs) = precompute_positions(&g, &cache.offsets, b);
        sampled_im2col(
            &cache.x_pad,
            b,
            &g,
            &cache.offsets,
            &bases,
            &floors,
            &fracs,
            &mut col,
        );
        matmul_abt_acc(g_s, &col, grad_kernel.data_mut(), g.cout, cols, rows);

        grad_col.fill(0.0);
        matmul_acc(&kernel_t, g_s, &mut grad_col, rows, g.cout, cols);

        // Scatter through the interpolation: each sampled position feeds its
        // two integer neighbors, and the position gradient is the local slope
        // x(lo+1) - x(lo).
        for c in 0..g.cin {
            let plane_len = cache.x_pad.plane_slice(b, c).len();
            let plane_start = (b * g.cin + c) * plane_len;
            for i in 0..k {
                let fl_row = &floors[i * cols..(i + 1) * cols];
                let fr_row = &fracs[i * cols..(i + 1) * cols];
                let gd_row =
                    &mut grad_d.data_mut()[(b * k + i) * cols..(b * k + i + 1) * cols];
                for t in 0..k {
                    let dt = t as i64 - k2 as i64;
                    let gc_row = &grad_col[((c * k + i) * k + t) * cols..][..cols];
                    for l0 in 0..cols {
                        let gcv = gc_row[l0];
                        if gcv == 0.0 {
                            continue;
                        }
                        let pos = bases[l0] + dt + fl_row[l0];
                        let fr = fr_row[l0];
                        let xp_data = cache.x_pad.data();
                        let v0 = if pos >= 0 && (pos as usize) < plane_len {
                            let idx = plane_start + pos as usize;
                            grad_xp.data_mut()[idx] += (1.0 - fr) * gcv;
                            xp_data[idx]
                        } else {
                            0.0
                        };
                        let hi = pos + 1;
                        let v1 = if hi >= 0 && (hi as usize) < plane_len {
                            let idx = plane_start + hi as usize;
                            grad_xp.data_mut()[idx] += fr * gcv;
                            xp_data[idx]
                        } else {
                            0.0
                        };
                        gd_row[l0] += gcv * (v1 - v0);
                    }
                }
            }
        }
    }

    // Offset adjoints flow to the adjacent gaps: d_i for i > center sums the
    // gaps center..i-1, d_i for i < center subtracts the gaps i..center-1.
    let mut grad_s = Tensor::zeros(cache.shape_map.shape());
    for b in 0..g.n {
        for l0 in 0..cols {
            let gd = |i: usize| grad_d.data()[(b * k + i) * cols + l0];
            let mut acc = 0.0;
            for j in (center..k - 1).rev() {
                acc += gd(j + 1);
                grad_s.data_mut()[(b * (k - 1) + j) * cols + l0] = acc;
            }
            acc = 0.0;
            for j in 0..center {
                acc -= gd(j);
                grad_s.data_mut()[(b * (k - 1) + j) * cols + l0] = acc;
            }
        }
    }

    let x = unpad_grad(&cache.x_pad, g.pad);
    let (shape_spec, shape_wts) = sw.as_conv(&cache.spec);
    let Conv2dGrads {
        x: grad_x_shape,
        kernel: grad_shape_kernel,
        bias: grad_shape_bias,
    } = conv2d_backward(&x, &shape_spec, &shape_wts, &grad_s)?;

    let grad_x = unpad_grad(&grad_xp, g.pad).add(&grad_x_shape)?;

    Ok(OneDConvGrads {
        x: grad_x,
        kernel: grad_kernel,
        bias: grad_bias,
        shape_kernel: grad_shape_kernel,
        shape_bias: grad_shape_bias.expect("shape conv always carries a bias"),
    })
}
