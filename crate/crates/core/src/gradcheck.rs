//! Finite-difference oracle for every backward implementation.
//!
//! The oracle side only ever calls forward code: central differences probe a
//! scalar loss coordinate by coordinate. Analytic gradients come from the
//! backward under test and are compared group by group.

use crate::nn::{
    batchnorm_forward, conv2d_backward, conv2d_forward, fc_backward, fc_forward,
    softmax_cross_entropy, BatchNormParams, ConvSpec, ConvWeights, FcWeights,
};
use crate::onedconv::{onedconv_backward, onedconv_forward, ShapeConvWeights};
use crate::tensor::Tensor;
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Central differences `(f(x+eps*e_i) - f(x-eps*e_i)) / (2 eps)` per coordinate.
pub fn finite_diff<F>(mut f: F, x: &Tensor, eps: f64) -> Result<Tensor>
where
    F: FnMut(&Tensor) -> Result<f64>,
{
    assert!(eps > 0.0, "eps must be positive");
    let mut grad = Tensor::zeros(x.shape());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + eps;
        let fp = f(&probe)?;
        probe.data_mut()[i] = orig - eps;
        let fm = f(&probe)?;
        probe.data_mut()[i] = orig;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFinite {
                context: "finite_diff probe".into(),
            });
        }
        grad.data_mut()[i] = (fp - fm) / (2.0 * eps);
    }
    Ok(grad)
}

/// `|a - n| / max(|a|, |n|, 1e-8)`
#[inline]
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

#[derive(Debug, Clone)]
pub struct GroupReport {
    pub name: String,
    pub max_rel: f64,
    pub max_abs: f64,
    pub count: usize,
}

/// Comparison outcome for one op; `pass` iff every group's max relative error
/// is below the tolerance.
#[derive(Debug, Clone)]
pub struct GradReport {
    pub op: String,
    pub tol: f64,
    pub groups: Vec<GroupReport>,
    pub pass: bool,
}

impl GradReport {
    pub fn max_rel(&self) -> f64 {
        self.groups.iter().map(|g| g.max_rel).fold(0.0, f64::max)
    }
}

pub fn compare_group(name: &str, analytic: &[f64], numeric: &[f64]) -> GroupReport {
    assert_eq!(analytic.len(), numeric.len());
    let mut max_rel = 0.0f64;
    let mut max_abs = 0.0f64;
    for (&a, &n) in analytic.iter().zip(numeric) {
        max_rel = max_rel.max(rel_err(a, n));
        max_abs = max_abs.max((a - n).abs());
    }
    GroupReport {
        name: name.into(),
        max_rel,
        max_abs,
        count: analytic.len(),
    }
}

fn report(op: &str, tol: f64, groups: Vec<GroupReport>) -> GradReport {
    let pass = groups.iter().all(|g| g.max_rel < tol);
    GradReport {
        op: op.into(),
        tol,
        groups,
        pass,
    }
}

/// Ops with a gradient check harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckOp {
    Conv2d,
    Fc,
    BatchNorm,
    SoftmaxCe,
    OneDConv,
}

impl CheckOp {
    pub const ALL: [CheckOp; 5] = [
        CheckOp::Conv2d,
        CheckOp::Fc,
        CheckOp::BatchNorm,
        CheckOp::SoftmaxCe,
        CheckOp::OneDConv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckOp::Conv2d => "conv2d",
            CheckOp::Fc => "fc",
            CheckOp::BatchNorm => "batchnorm",
            CheckOp::SoftmaxCe => "softmax_ce",
            CheckOp::OneDConv => "onedconv",
        }
    }

    /// Linear ops get the tighter tolerance.
    pub fn default_tol(self) -> f64 {
        match self {
            CheckOp::Conv2d | CheckOp::Fc => 1e-6,
            _ => 1e-4,
        }
    }
}

pub const DEFAULT_EPS: f64 = 1e-5;

/// Runs the finite-difference comparison for one op with inputs generated
/// deterministically from `seed`.
pub fn check(op: CheckOp, seed: u64, tol: f64) -> Result<GradReport> {
    match op {
        CheckOp::Conv2d => check_conv2d(seed, tol),
        CheckOp::Fc => check_fc(seed, tol),
        CheckOp::BatchNorm => check_batchnorm(seed, tol),
        CheckOp::SoftmaxCe => check_softmax_ce(seed, tol),
        CheckOp::OneDConv => check_onedconv(seed, tol),
    }
}

fn rng_for(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(salt))
}

fn random_tensor(shape: [usize; 4], rng: &mut ChaCha8Rng) -> Tensor {
    let len = shape.iter().product();
    Tensor::from_vec(shape, (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .expect("length matches")
}

/// Fixed random projection turning a tensor output into a scalar loss.
fn loss_weights(shape: [usize; 4], rng: &mut ChaCha8Rng) -> Tensor {
    random_tensor(shape, rng)
}

fn weighted_sum(y: &Tensor, w: &Tensor) -> f64 {
    y.data().iter().zip(w.data()).map(|(a, b)| a * b).sum()
}

fn check_conv2d(seed: u64, tol: f64) -> Result<GradReport> {
    let spec = ConvSpec::new(2, 3, 3);
    let mut rng = rng_for(seed, 1);
    let x = random_tensor([1, 2, 5, 5], &mut rng);
    let wts = ConvWeights::init(&spec, &mut rng);
    let y0 = conv2d_forward(&x, &spec, &wts)?;
    let lw = loss_weights(y0.shape(), &mut rng);

    let grads = conv2d_backward(&x, &spec, &wts, &lw.scale(1.0))?;

    let num_x = finite_diff(
        |xp| Ok(weighted_sum(&conv2d_forward(xp, &spec, &wts)?, &lw)),
        &x,
        DEFAULT_EPS,
    )?;
    let num_k = finite_diff(
        |kp| {
            let w2 = ConvWeights {
                kernel: kp.clone(),
                bias: wts.bias.clone(),
            };
            Ok(weighted_sum(&conv2d_forward(&x, &spec, &w2)?, &lw))
        },
        &wts.kernel,
        DEFAULT_EPS,
    )?;
    let bias = wts.bias.clone().unwrap();
    let bias_t = Tensor::from_vec([1, 1, 1, bias.len()], bias)?;
    let num_b = finite_diff(
        |bp| {
            let w2 = ConvWeights {
                kernel: wts.kernel.clone(),
                bias: Some(bp.data().to_vec()),
            };
            Ok(weighted_sum(&conv2d_forward(&x, &spec, &w2)?, &lw))
        },
        &bias_t,
        DEFAULT_EPS,
    )?;

    Ok(report(
        "conv2d",
        tol,
        vec![
            compare_group("x", grads.x.data(), num_x.data()),
            compare_group("kernel", grads.kernel.data(), num_k.data()),
            compare_group("bias", grads.bias.as_ref().unwrap(), num_b.data()),
        ],
    ))
}

fn check_fc(seed: u64, tol: f64) -> Result<GradReport> {
    let mut rng = rng_for(seed, 2);
    let x = random_tensor([2, 1, 2, 3], &mut rng);
    let w = FcWeights::init(6, 4, &mut rng);
    let y0 = fc_forward(&x, &w)?;
    let lw = loss_weights(y0.shape(), &mut rng);

    let grads = fc_backward(&x, &w, &lw)?;

    let num_x = finite_diff(
        |xp| Ok(weighted_sum(&fc_forward(xp, &w)?, &lw)),
        &x,
        DEFAULT_EPS,
    )?;
    let wt = Tensor::from_vec([1, 1, 4, 6], w.weight.clone())?;
    let num_w = finite_diff(
        |wp| {
            let mut w2 = w.clone();
            w2.weight = wp.data().to_vec();
            Ok(weighted_sum(&fc_forward(&x, &w2)?, &lw))
        },
        &wt,
        DEFAULT_EPS,
    )?;
    let bt = Tensor::from_vec([1, 1, 1, 4], w.bias.clone())?;
    let num_b = finite_diff(
        |bp| {
            let mut w2 = w.clone();
            w2.bias = bp.data().to_vec();
            Ok(weighted_sum(&fc_forward(&x, &w2)?, &lw))
        },
        &bt,
        DEFAULT_EPS,
    )?;

    Ok(report(
        "fc",
        tol,
        vec![
            compare_group("x", grads.x.data(), num_x.data()),
            compare_group("weight", &grads.weight, num_w.data()),
            compare_group("bias", &grads.bias, num_b.data()),
        ],
    ))
}

fn check_batchnorm(seed: u64, tol: f64) -> Result<GradReport> {
    let mut rng = rng_for(seed, 3);
    let x = random_tensor([2, 3, 4, 4], &mut rng);
    let gamma: Vec<f64> = (0..3).map(|_| rng.gen_range(0.5..1.5)).collect();
    let beta: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let lw = loss_weights(x.shape(), &mut rng);

    let make = |g: &[f64], b: &[f64]| BatchNormParams {
        gamma: g.to_vec(),
        beta: b.to_vec(),
        ..BatchNormParams::new(3)
    };

    let (_, cache) = batchnorm_forward(&x, &mut make(&gamma, &beta), true)?;
    let (gx, gg, gb) = crate::nn::batchnorm_backward(&cache, &lw)?;

    let num_x = finite_diff(
        |xp| {
            let (y, _) = batchnorm_forward(xp, &mut make(&gamma, &beta), true)?;
            Ok(weighted_sum(&y, &lw))
        },
        &x,
        DEFAULT_EPS,
    )?;
    let gt = Tensor::from_vec([1, 1, 1, 3], gamma.clone())?;
    let num_g = finite_diff(
        |gp| {
            let (y, _) = batchnorm_forward(&x, &mut make(gp.data(), &beta), true)?;
            Ok(weighted_sum(&y, &lw))
        },
        &gt,
        DEFAULT_EPS,
    )?;
    let bt = Tensor::from_vec([1, 1, 1, 3], beta.clone())?;
    let num_b = finite_diff(
        |bp| {
            let (y, _) = batchnorm_forward(&x, &mut make(&gamma, bp.data()), true)?;
            Ok(weighted_sum(&y, &lw))
        },
        &bt,
        DEFAULT_EPS,
    )?;

    Ok(report(
        "batchnorm",
        tol,
        vec![
            compare_group("x", gx.data(), num_x.data()),
            compare_group("gamma", &gg, num_g.data()),
            compare_group("beta", &gb, num_b.data()),
        ],
    ))
}

fn check_softmax_ce(seed: u64, tol: f64) -> Result<GradReport> {
    let mut rng = rng_for(seed, 4);
    let logits = random_tensor([3, 10, 1, 1], &mut rng);
    let labels: Vec<usize> = (0..3).map(|_| rng.gen_range(0..10)).collect();

    let (_, grad) = softmax_cross_entropy(&logits, &labels)?;
    let num = finite_diff(
        |lp| Ok(softmax_cross_entropy(lp, &labels)?.0),
        &logits,
        DEFAULT_EPS,
    )?;

    Ok(report(
        "softmax_ce",
        tol,
        vec![compare_group("logits", grad.data(), num.data())],
    ))
}

fn check_onedconv(seed: u64, tol: f64) -> Result<GradReport> {
    let spec = ConvSpec::new(2, 2, 3);
    let mut rng = rng_for(seed, 5);
    let x = random_tensor([1, 2, 6, 6], &mut rng);
    let wts = ConvWeights::init(&spec, &mut rng);
    let mut sw = ShapeConvWeights::zeros(&spec);
    for v in sw.kernel.data_mut() {
        *v = rng.gen_range(-0.05..0.05);
    }
    // +0.3 fractional shift keeps the sampled positions away from the
    // interpolation kinks at integer offsets.
    for v in &mut sw.bias {
        *v = 0.3 + rng.gen_range(-0.1..0.1);
    }

    let (y0, cache) = onedconv_forward(&x, &spec, &wts, &sw)?;
    let lw = loss_weights(y0.shape(), &mut rng);
    let grads = onedconv_backward(&cache, &wts, &sw, &lw)?;

    let forward_loss = |x_: &Tensor, w_: &ConvWeights, s_: &ShapeConvWeights| -> Result<f64> {
        let (y, _) = onedconv_forward(x_, &spec, w_, s_)?;
        Ok(weighted_sum(&y, &lw))
    };

    let num_x = finite_diff(|xp| forward_loss(xp, &wts, &sw), &x, DEFAULT_EPS)?;
    let num_k = finite_diff(
        |kp| {
            let w2 = ConvWeights {
                kernel: kp.clone(),
                bias: wts.bias.clone(),
            };
            forward_loss(&x, &w2, &sw)
        },
        &wts.kernel,
        DEFAULT_EPS,
    )?;
    let bias = wts.bias.clone().unwrap();
    let bias_t = Tensor::from_vec([1, 1, 1, bias.len()], bias)?;
    let num_b = finite_diff(
        |bp| {
            let w2 = ConvWeights {
                kernel: wts.kernel.clone(),
                bias: Some(bp.data().to_vec()),
            };
            forward_loss(&x, &w2, &sw)
        },
        &bias_t,
        DEFAULT_EPS,
    )?;
    let num_sk = finite_diff(
        |kp| {
            let s2 = ShapeConvWeights {
                kernel: kp.clone(),
                bias: sw.bias.clone(),
            };
            forward_loss(&x, &wts, &s2)
        },
        &sw.kernel,
        DEFAULT_EPS,
    )?;
    let sb_t = Tensor::from_vec([1, 1, 1, sw.bias.len()], sw.bias.clone())?;
    let num_sb = finite_diff(
        |bp| {
            let s2 = ShapeConvWeights {
                kernel: sw.kernel.clone(),
                bias: bp.data().to_vec(),
            };
            forward_loss(&x, &wts, &s2)
        },
        &sb_t,
        DEFAULT_EPS,
    )?;

    Ok(report(
        "onedconv",
        tol,
        vec![
            compare_group("x", grads.x.data(), num_x.data()),
            compare_group("kernel", grads.kernel.data(), num_k.data()),
            compare_group("bias", grads.bias.as_ref().unwrap(), num_b.data()),
            compare_group("shape_kernel", grads.shape_kernel.data(), num_sk.data()),
            compare_group("shape_bias", &grads.shape_bias, num_sb.data()),
        ],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let x = Tensor::from_vec([1, 1, 1, 1], vec![3.0]).unwrap();
        let g = finite_diff(|t| Ok(t.data().iter().map(|v| v * v).sum()), &x, 1e-5).unwrap();
        assert!((g.data()[0] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn linear_sum_gives_ones() {
        let x = Tensor::from_vec([1, 1, 2, 2], vec![0.3, -1.0, 2.0, 5.0]).unwrap();
        let g = finite_diff(|t| Ok(t.data().iter().sum()), &x, 1e-5).unwrap();
        for &v in g.data() {
            assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn identity_conv_interior_grad_is_one() {
        let spec = ConvSpec::new(1, 1, 3).with_bias(false);
        let mut w = ConvWeights::zeros(&spec);
        *w.kernel.at_mut(0, 0, 1, 1) = 1.0;
        let x = Tensor::filled([1, 1, 4, 4], 0.5);
        let g = finite_diff(
            |xp| Ok(conv2d_forward(xp, &spec, &w).unwrap().data().iter().sum()),
            &x,
            1e-5,
        )
        .unwrap();
        // Identity kernel: every input pixel feeds exactly one output.
        for &v in g.data() {
            assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn all_ops_pass_at_default_tol() {
        for op in CheckOp::ALL {
            let r = check(op, 42, op.default_tol()).unwrap();
            assert!(r.pass, "{} failed: max rel {}", r.op, r.max_rel());
        }
    }

    #[test]
    fn corrupted_backward_fails() {
        // Negative control: a backward returning twice the kernel gradient
        // must be caught by the oracle.
        let spec = ConvSpec::new(2, 3, 3);
        let mut rng = rng_for(7, 1);
        let x = random_tensor([1, 2, 5, 5], &mut rng);
        let wts = ConvWeights::init(&spec, &mut rng);
        let y0 = conv2d_forward(&x, &spec, &wts).unwrap();
        let lw = loss_weights(y0.shape(), &mut rng);
        let grads = conv2d_backward(&x, &spec, &wts, &lw).unwrap();
        let corrupted = grads.kernel.scale(2.0);
        let num_k = finite_diff(
            |kp| {
                let w2 = ConvWeights {
                    kernel: kp.clone(),
                    bias: wts.bias.clone(),
                };
                Ok(weighted_sum(&conv2d_forward(&x, &spec, &w2)?, &lw))
            },
            &wts.kernel,
            DEFAULT_EPS,
        )
        .unwrap();
        let good = compare_group("kernel", grads.kernel.data(), num_k.data());
        let bad = compare_group("kernel", corrupted.data(), num_k.data());
        assert!(good.max_rel < 1e-6);
        assert!(bad.max_rel > 1e-6);
    }

    #[test]
    fn reports_deterministic() {
        let a = check(CheckOp::OneDConv, 11, 1e-4).unwrap();
        let b = check(CheckOp::OneDConv, 11, 1e-4).unwrap();
        for (ga, gb) in a.groups.iter().zip(&b.groups) {
            assert_eq!(ga.max_rel, gb.max_rel);
            assert_eq!(ga.max_abs, gb.max_abs);
        }
    }

    #[test]
    fn non_finite_probe_rejected() {
        let x = Tensor::from_vec([1, 1, 1, 1], vec![0.0]).unwrap();
        let err = finite_diff(|t| Ok(1.0 / t.data()[0]), &x, 1e-5);
        // 1/x is finite at +-eps, so this passes; NaN must not.
        assert!(err.is_ok());
        let err = finite_diff(|_| Ok(f64::NAN), &x, 1e-5);
        assert!(err.is_err());
    }
}
