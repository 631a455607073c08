//! Dense 2-D convolution via im2col + matmul, with exact adjoints.

use super::matmul::{matmul_abt_acc, matmul_acc, transpose};
use super::{ConvSpec, ConvWeights};
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Derived sizes for one convolution applied to a concrete input.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeom {
    pub n: usize,
    pub cin: usize,
    pub w: usize,
    pub cout: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub h_out: usize,
    pub w_out: usize,
}

impl ConvGeom {
    pub(crate) fn resolve(x: &Tensor, spec: &ConvSpec) -> Result<ConvGeom> {
        spec.validate()?;
        let [n, cin, h, w] = x.shape();
        if cin != spec.in_channels {
            return Err(Error::ChannelMismatch {
                expected: spec.in_channels,
                got: cin,
            });
        }
        let (h_out, w_out) = spec.out_extents(h, w)?;
        Ok(ConvGeom {
            n,
            cin,
            w,
            cout: spec.out_channels,
            k: spec.kernel,
            stride: spec.stride,
            pad: spec.padding,
            h_out,
            w_out,
        })
    }

    #[inline]
    pub(crate) fn w_pad(&self) -> usize {
        self.w + 2 * self.pad
    }

    #[inline]
    pub(crate) fn cols(&self) -> usize {
        self.h_out * self.w_out
    }

    #[inline]
    pub(crate) fn rows(&self) -> usize {
        self.cin * self.k * self.k
    }
}

/// Zero-pads every channel plane by `pad` on all sides.
pub(crate) fn pad_input(x: &Tensor, pad: usize) -> Tensor {
    if pad == 0 {
        return x.clone();
    }
    let [n, c, h, w] = x.shape();
    let (hp, wp) = (h + 2 * pad, w + 2 * pad);
    let mut out = Tensor::zeros([n, c, hp, wp]);
    for b in 0..n {
        for ch in 0..c {
            let src = x.plane_slice(b, ch);
            let dst = out.plane_slice_mut(b, ch);
            for row in 0..h {
                let s = &src[row * w..(row + 1) * w];
                let d = &mut dst[(row + pad) * wp + pad..(row + pad) * wp + pad + w];
                d.copy_from_slice(s);
            }
        }
    }
    out
}

/// Drops the padding border, accumulating nothing (plain slice copy).
pub(crate) fn unpad_grad(grad_pad: &Tensor, pad: usize) -> Tensor {
    if pad == 0 {
        return grad_pad.clone();
    }
    let [n, c, hp, wp] = grad_pad.shape();
    let (h, w) = (hp - 2 * pad, wp - 2 * pad);
    let mut out = Tensor::zeros([n, c, h, w]);
    for b in 0..n {
        for ch in 0..c {
            let src = grad_pad.plane_slice(b, ch);
            let dst = out.plane_slice_mut(b, ch);
            for row in 0..h {
                let s = &src[(row + pad) * wp + pad..(row + pad) * wp + pad + w];
                dst[row * w..(row + 1) * w].copy_from_slice(s);
            }
        }
    }
    out
}

/// Gathers one padded sample into a column matrix, row layout
/// `(c*K + i)*K + t`, column layout `ho*W_out + wo`.
pub(crate) fn im2col(xp: &Tensor, b: usize, g: &ConvGeom, col: &mut [f64]) {
    let (wp, cols) = (g.w_pad(), g.cols());
    debug_assert_eq!(col.len(), g.rows() * cols);
    for c in 0..g.cin {
        let plane = xp.plane_slice(b, c);
        for i in 0..g.k {
            for t in 0..g.k {
                let row = &mut col[((c * g.k + i) * g.k + t) * cols..][..cols];
                for ho in 0..g.h_out {
                    let src_row = ho * g.stride + i;
                    let base = src_row * wp + t;
                    let dst = &mut row[ho * g.w_out..(ho + 1) * g.w_out];
                    if g.stride == 1 {
                        dst.copy_from_slice(&plane[base..base + g.w_out]);
                    } else {
                        for (wo, d) in dst.iter_mut().enumerate() {
                            *d = plane[base + wo * g.stride];
                        }
                    }
                }
            }
        }
    }
}

/// Scatters a column-matrix gradient back onto the padded sample.
pub(crate) fn col2im_acc(grad_col: &[f64], b: usize, g: &ConvGeom, grad_xp: &mut Tensor) {
    let (wp, cols) = (g.w_pad(), g.cols());
    for c in 0..g.cin {
        let plane = grad_xp.plane_slice_mut(b, c);
        for i in 0..g.k {
            for t in 0..g.k {
                let row = &grad_col[((c * g.k + i) * g.k + t) * cols..][..cols];
                for ho in 0..g.h_out {
                    let src_row = ho * g.stride + i;
                    let base = src_row * wp + t;
                    for wo in 0..g.w_out {
                        plane[base + wo * g.stride] += row[ho * g.w_out + wo];
                    }
                }
            }
        }
    }
}

/// y(b,o,ho,wo) = sum_{c,i,t} kernel(o,c,i,t) * x_pad(b,c,ho*s+i,wo*s+t) + bias(o)
pub fn conv2d_forward(x: &Tensor, spec: &ConvSpec, wts: &ConvWeights) -> Result<Tensor> {
    let g = ConvGeom::resolve(x, spec)?;
    wts.check(spec)?;
    let xp = pad_input(x, g.pad);
    let mut y = Tensor::zeros([g.n, g.cout, g.h_out, g.w_out]);
    // one hot per-sample column buffer: gathered then consumed immediately
    let mut col = vec![0.0; g.rows() * g.cols()];
    for b in 0..g.n {
        im2col(&xp, b, &g, &mut col);
        let y_s = &mut y.data_mut()[b * g.cout * g.cols()..(b + 1) * g.cout * g.cols()];
        matmul_acc(wts.kernel.data(), &col, y_s, g.cout, g.rows(), g.cols());
        if let Some(bias) = &wts.bias {
            for o in 0..g.cout {
                let bo = bias[o];
                for v in &mut y_s[o * g.cols()..(o + 1) * g.cols()] {
                    *v += bo;
                }
            }
        }
    }
    Ok(y)
}

/// Adjoints of [`conv2d_forward`].
#[derive(Debug, Clone)]
pub struct Conv2dGrads {
    pub x: Tensor,
    pub kernel: Tensor,
    pub bias: Option<Vec<f64>>,
}

pub fn conv2d_backward(
    x: &Tensor,
    spec: &ConvSpec,
    wts: &ConvWeights,
    grad_y: &Tensor,
) -> Result<Conv2dGrads> {
    let g = ConvGeom::resolve(x, spec)?;
    wts.check(spec)?;
    if grad_y.shape() != [g.n, g.cout, g.h_out, g.w_out] {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", [g.n, g.cout, g.h_out, g.w_out]),
            got: format!("{:?}", grad_y.shape()),
        });
    }
    let xp = pad_input(x, g.pad);
    let (rows, cols) = (g.rows(), g.cols());

    let mut grad_kernel = Tensor::zeros(wts.kernel.shape());
    let mut grad_bias = wts.bias.as_ref().map(|b| vec![0.0; b.len()]);
    let mut grad_xp = Tensor::zeros(xp.shape());

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

        // dL/dkernel += g_s * col^T
        im2col(&xp, b, &g, &mut col);
        matmul_abt_acc(g_s, &col, grad_kernel.data_mut(), g.cout, cols, rows);

        // dL/dcol = kernel^T * g_s, scattered back through the padding
        grad_col.fill(0.0);
        matmul_acc(&kernel_t, g_s, &mut grad_col, rows, g.cout, cols);
        col2im_acc(&grad_col, b, &g, &mut grad_xp);
    }

    Ok(Conv2dGrads {
        x: unpad_grad(&grad_xp, g.pad),
        kernel: grad_kernel,
        bias: grad_bias,
    })
}
