//! Fully connected layer and softmax cross-entropy.

use super::matmul::matmul_acc;
use crate::tensor::Tensor;
use crate::{Error, Result};
use rand::Rng;

/// Dense layer weights: `weight` is row-major `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FcWeights {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl FcWeights {
    pub fn zeros(in_dim: usize, out_dim: usize) -> FcWeights {
        FcWeights {
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
            in_dim,
            out_dim,
        }
    }

    pub fn identity(dim: usize) -> FcWeights {
        let mut w = FcWeights::zeros(dim, dim);
        for i in 0..dim {
            w.weight[i * dim + i] = 1.0;
        }
        w
    }

    pub fn init<R: Rng>(in_dim: usize, out_dim: usize, rng: &mut R) -> FcWeights {
        let bound = 1.0 / (in_dim as f64).sqrt();
        FcWeights {
            weight: (0..in_dim * out_dim)
                .map(|_| rng.gen_range(-bound..bound))
                .collect(),
            bias: (0..out_dim).map(|_| rng.gen_range(-bound..bound)).collect(),
            in_dim,
            out_dim,
        }
    }
}

/// Treats the input as `(batch, C*H*W)`; returns `(batch, out, 1, 1)`.
pub fn fc_forward(x: &Tensor, w: &FcWeights) -> Result<Tensor> {
    let [n, c, h, wd] = x.shape();
    let in_dim = c * h * wd;
    if in_dim != w.in_dim {
        return Err(Error::ShapeMismatch {
            expected: format!("flattened dim {}", w.in_dim),
            got: format!("{}", in_dim),
        });
    }
    let mut y = Tensor::zeros([n, w.out_dim, 1, 1]);
    for b in 0..n {
        let xb = &x.data()[b * in_dim..(b + 1) * in_dim];
        let yb = &mut y.data_mut()[b * w.out_dim..(b + 1) * w.out_dim];
        for o in 0..w.out_dim {
            let row = &w.weight[o * w.in_dim..(o + 1) * w.in_dim];
            let mut acc = w.bias[o];
            for (xv, wv) in xb.iter().zip(row) {
                acc += xv * wv;
            }
            yb[o] = acc;
        }
    }
    Ok(y)
}

#[derive(Debug, Clone)]
pub struct FcGrads {
    pub x: Tensor,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

pub fn fc_backward(x: &Tensor, w: &FcWeights, grad_y: &Tensor) -> Result<FcGrads> {
    let [n, c, h, wd] = x.shape();
    let in_dim = c * h * wd;
    if grad_y.shape() != [n, w.out_dim, 1, 1] {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", [n, w.out_dim, 1, 1]),
            got: format!("{:?}", grad_y.shape()),
        });
    }
    let mut grad_w = vec![0.0; w.weight.len()];
    let mut grad_b = vec![0.0; w.bias.len()];
    let mut grad_x = Tensor::zeros(x.shape());
    for b in 0..n {
        let xb = &x.data()[b * in_dim..(b + 1) * in_dim];
        let gb = &grad_y.data()[b * w.out_dim..(b + 1) * w.out_dim];
        for (o, &g) in gb.iter().enumerate() {
            grad_b[o] += g;
            let row = &mut grad_w[o * in_dim..(o + 1) * in_dim];
            for (rw, &xv) in row.iter_mut().zip(xb) {
                *rw += g * xv;
            }
        }
        // grad_x[b] = grad_y[b] (1 x out) * weight (out x in)
        let gxb = &mut grad_x.data_mut()[b * in_dim..(b + 1) * in_dim];
        matmul_acc(gb, &w.weight, gxb, 1, w.out_dim, in_dim);
    }
    Ok(FcGrads {
        x: grad_x,
        weight: grad_w,
        bias: grad_b,
    })
}

/// Row-wise softmax of `(batch, classes, 1, 1)` logits.
pub fn softmax_probs(logits: &Tensor) -> Tensor {
    let [n, classes, _, _] = logits.shape();
    let mut probs = Tensor::zeros(logits.shape());
    for b in 0..n {
        let row = &logits.data()[b * classes..(b + 1) * classes];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let out = &mut probs.data_mut()[b * classes..(b + 1) * classes];
        let mut sum = 0.0;
        for (o, &v) in out.iter_mut().zip(row) {
            *o = (v - max).exp();
            sum += *o;
        }
        for o in out.iter_mut() {
            *o /= sum;
        }
    }
    probs
}

/// Mean cross-entropy over the batch and its logit gradient
/// `(softmax - onehot) / batch`.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let [n, classes, _, _] = logits.shape();
    if labels.len() != n {
        return Err(Error::ShapeMismatch {
            expected: format!("{} labels", n),
            got: format!("{}", labels.len()),
        });
    }
    for &l in labels {
        if l >= classes {
            return Err(Error::LabelOutOfRange { label: l, classes });
        }
    }
    let mut grad = softmax_probs(logits);
    let inv_n = 1.0 / n as f64;
    let mut loss = 0.0;
    for (b, &label) in labels.iter().enumerate() {
        let p = grad.data()[b * classes + label];
        loss -= (p.max(f64::MIN_POSITIVE)).ln();
        grad.data_mut()[b * classes + label] -= 1.0;
    }
    for g in grad.data_mut() {
        *g *= inv_n;
    }
    Ok((loss * inv_n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_passthrough() {
        let x = Tensor::from_vec([1, 1, 1, 3], vec![1.0, -2.0, 3.0]).unwrap();
        let w = FcWeights::identity(3);
        let y = fc_forward(&x, &w).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn uniform_logits_loss_is_ln_classes() {
        let logits = Tensor::zeros([2, 10, 1, 1]);
        let (loss, grad) = softmax_cross_entropy(&logits, &[3, 7]).unwrap();
        assert!((loss - 10.0f64.ln()).abs() < 1e-12);
        // each row sums to zero
        for b in 0..2 {
            let s: f64 = grad.data()[b * 10..(b + 1) * 10].iter().sum();
            assert!(s.abs() < 1e-15);
        }
    }

    #[test]
    fn dominant_logit_loss_vanishes() {
        let mut logits = Tensor::zeros([1, 10, 1, 1]);
        logits.data_mut()[4] = 100.0;
        let (loss, _) = softmax_cross_entropy(&logits, &[4]).unwrap();
        assert!(loss < 1e-12);
    }

    #[test]
    fn label_out_of_range() {
        let logits = Tensor::zeros([1, 10, 1, 1]);
        assert!(matches!(
            softmax_cross_entropy(&logits, &[10]),
            Err(Error::LabelOutOfRange { .. })
        ));
    }

    #[test]
    fn fc_backward_hand_case() {
        // y = w*x + b with w = [[2]], x = [3]: dL/dw = g*x, dL/dx = g*w.
        let x = Tensor::from_vec([1, 1, 1, 1], vec![3.0]).unwrap();
        let mut w = FcWeights::zeros(1, 1);
        w.weight[0] = 2.0;
        let gy = Tensor::from_vec([1, 1, 1, 1], vec![5.0]).unwrap();
        let grads = fc_backward(&x, &w, &gy).unwrap();
        assert_eq!(grads.weight, vec![15.0]);
        assert_eq!(grads.bias, vec![5.0]);
        assert_eq!(grads.x.data(), &[10.0]);
    }
}
