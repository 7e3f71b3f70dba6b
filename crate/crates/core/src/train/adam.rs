//! Adam with bias correction.

use crate::model::ParameterStore;
use crate::scalar::Scalar;

use super::TrainError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moments mirroring a [`ParameterStore`], plus the step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: ParameterStore<T>,
    pub v: ParameterStore<T>,
    pub t: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ParameterStore<T>) -> Self {
        Self { m: params.zeros_like(), v: params.zeros_like(), t: 0 }
    }
}

/// Slice-level update; `t` is the 1-based step being taken.
#[allow(clippy::too_many_arguments)]
pub(crate) fn adam_update<T: Scalar>(
    params: &mut [T],
    grads: &[T],
    m: &mut [T],
    v: &mut [T],
    t: u64,
    cfg: &AdamConfig,
    lr: f64,
) {
    let b1 = T::lit(cfg.beta1);
    let b2 = T::lit(cfg.beta2);
    let c1 = T::lit(1.0 - cfg.beta1.powi(t as i32));
    let c2 = T::lit(1.0 - cfg.beta2.powi(t as i32));
    let eps = T::lit(cfg.eps);
    let lr = T::lit(lr);
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = b1 * m[i] + (T::one() - b1) * g;
        v[i] = b2 * v[i] + (T::one() - b2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// One Adam update of every parameter. Rejects non-finite gradients without
/// touching `params` or `state`.
pub fn adam_step<T: Scalar>(
    params: &mut ParameterStore<T>,
    grads: &ParameterStore<T>,
    state: &mut AdamState<T>,
    cfg: &AdamConfig,
    lr: f64,
) -> Result<(), TrainError> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(TrainError::Config("gradient/optimizer state does not mirror parameters".into()));
    }
    for (layer, g) in grads.layers().iter().enumerate() {
        let bad = g.kernel.data().iter().chain(&g.bias).position(|v| !v.is_finite());
        if let Some(index) = bad {
            return Err(TrainError::NonFiniteGradient { layer, index });
        }
    }
    state.t += 1;
    let t = state.t;
    let p = params.slices_mut();
    let m = state.m.slices_mut();
    let v = state.v.slices_mut();
    for (((p, g), m), v) in p.into_iter().zip(grads.slices()).zip(m).zip(v) {
        adam_update(p, g, m, v, t, cfg, lr);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(p: &mut f64, g: f64, m: &mut f64, v: &mut f64, t: u64) -> f64 {
        let before = *p;
        let (mut ps, mut ms, mut vs) = ([*p], [*m], [*v]);
        adam_update(&mut ps, &[g], &mut ms, &mut vs, t, &AdamConfig::default(), 1e-3);
        (*p, *m, *v) = (ps[0], ms[0], vs[0]);
        *p - before
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let (mut p, mut m, mut v) = (0.7, 0.0, 0.0);
        for t in 1..=50 {
            assert_eq!(step(&mut p, 0.0, &mut m, &mut v, t), 0.0);
        }
        assert_eq!(p, 0.7);
    }

    #[test]
    fn first_step_is_signed_learning_rate() {
        for g in [3.0, -0.02, 1e-3] {
            let (mut p, mut m, mut v) = (0.0, 0.0, 0.0);
            let d = step(&mut p, g, &mut m, &mut v, 1);
            // m_hat = g, v_hat = g^2 -> -lr * g / (|g| + eps)
            let expect = -1e-3 * g / (g.abs() + 1e-8);
            assert!((d - expect).abs() < 1e-15, "{d} vs {expect}");
            assert!((d + 1e-3 * g.signum()).abs() < 1e-3 * 1e-5 / g.abs().min(1.0));
        }
    }

    #[test]
    fn second_identical_step_is_not_larger() {
        let (mut p, mut m, mut v) = (0.0, 0.0, 0.0);
        let d1 = step(&mut p, 0.5, &mut m, &mut v, 1);
        let d2 = step(&mut p, 0.5, &mut m, &mut v, 2);
        assert!(d2.abs() <= d1.abs() * (1.0 + 1e-6));
    }
}
