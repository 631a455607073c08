//! SGD with momentum and decoupled-from-nothing weight decay: the decay is
//! folded into the gradient before the momentum update.

/// Hyperparameters; the per-parameter velocity buffer lives with the owner of
/// the parameter and must mirror its shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdState {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl SgdState {
    pub fn new(lr: f64) -> SgdState {
        SgdState {
            lr,
            momentum: 0.9,
            weight_decay: 5e-3,
        }
    }
}

/// g_eff = grad + wd*param; v <- mu*v + g_eff; param <- param - lr*v
pub fn sgd_step(params: &mut [f64], grads: &[f64], velocity: &mut [f64], state: &SgdState) {
    debug_assert_eq!(params.len(), grads.len());
    debug_assert_eq!(params.len(), velocity.len());
    for ((p, &g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        let g_eff = g + state.weight_decay * *p;
        *v = state.momentum * *v + g_eff;
        *p -= state.lr * *v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_grad_zero_decay_is_fixed_point() {
        let mut p = vec![1.5, -2.0];
        let mut v = vec![0.0; 2];
        let s = SgdState {
            lr: 0.1,
            momentum: 0.9,
            weight_decay: 0.0,
        };
        sgd_step(&mut p, &[0.0, 0.0], &mut v, &s);
        assert_eq!(p, vec![1.5, -2.0]);
        assert_eq!(v, vec![0.0, 0.0]);
    }

    #[test]
    fn plain_descent() {
        let mut p = vec![1.0];
        let mut v = vec![0.0];
        let s = SgdState {
            lr: 0.1,
            momentum: 0.0,
            weight_decay: 0.0,
        };
        sgd_step(&mut p, &[1.0], &mut v, &s);
        assert!((p[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn weight_decay_folds_into_gradient() {
        let mut p = vec![1.0];
        let mut v = vec![0.0];
        let s = SgdState {
            lr: 0.1,
            momentum: 0.0,
            weight_decay: 5e-3,
        };
        sgd_step(&mut p, &[1.0], &mut v, &s);
        assert!((v[0] - 1.005).abs() < 1e-15);
        assert!((p[0] - 0.8995).abs() < 1e-15);
    }

    #[test]
    fn nonzero_grad_changes_param() {
        let mut p = vec![0.3];
        let mut v = vec![0.0];
        let s = SgdState::new(0.1);
        let before = p[0];
        sgd_step(&mut p, &[0.2], &mut v, &s);
        assert_ne!(p[0], before);
    }
}
