//! Adam parameter updates on flat parameter vectors.

use super::TrainError;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First/second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> AdamState {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

/// One bias-corrected Adam step:
/// m ← β₁m + (1−β₁)g, v ← β₂v + (1−β₂)g²,
/// θ ← θ − lr·m̂/(√v̂ + ε).
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    lr: f64,
) -> Result<(), TrainError> {
    assert_eq!(params.len(), grads.len(), "gradient length mismatch");
    assert_eq!(params.len(), state.m.len(), "state length mismatch");
    state.t += 1;
    let bc1 = 1.0 - BETA1.powi(state.t as i32);
    let bc2 = 1.0 - BETA2.powi(state.t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = BETA1 * state.m[i] + (1.0 - BETA1) * g;
        state.v[i] = BETA2 * state.v[i] + (1.0 - BETA2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + EPSILON);
        if !params[i].is_finite() {
            return Err(TrainError::NonFiniteUpdate);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_gradient_from_fresh_state_leaves_params() {
        let mut p = vec![1.5, -2.0];
        let mut s = AdamState::new(2);
        adam_step(&mut p, &[0.0, 0.0], &mut s, 0.001).unwrap();
        assert_eq!(p, vec![1.5, -2.0]);
        assert_eq!(s.m, vec![0.0, 0.0]);
    }

    #[test]
    fn zero_gradient_decays_existing_moments() {
        let mut p = vec![0.0];
        let mut s = AdamState::new(1);
        s.m[0] = 1.0;
        s.v[0] = 1.0;
        adam_step(&mut p, &[0.0], &mut s, 0.0).unwrap();
        assert_abs_diff_eq!(s.m[0], BETA1, epsilon = 1e-15);
        assert_abs_diff_eq!(s.v[0], BETA2, epsilon = 1e-15);
    }

    #[test]
    fn first_step_from_zero_state_is_closed_form() {
        // hand evaluation: m̂ = g, v̂ = g², update = −lr·g/(|g| + ε)
        for g in [0.3, -1.7, 42.0] {
            let mut p = vec![0.0];
            let mut s = AdamState::new(1);
            adam_step(&mut p, &[g], &mut s, 0.001).unwrap();
            let expect = -0.001 * g / (g.abs() + EPSILON);
            assert_abs_diff_eq!(p[0], expect, epsilon = 1e-12 * expect.abs());
        }
    }

    #[test]
    fn constant_gradient_step_approaches_lr_sign() {
        let g = -0.37;
        let lr = 0.001;
        let mut p = vec![0.0];
        let mut s = AdamState::new(1);
        let mut prev = p[0];
        let mut step = 0.0;
        for _ in 0..5000 {
            adam_step(&mut p, &[g], &mut s, lr).unwrap();
            step = p[0] - prev;
            prev = p[0];
        }
        // fixed point: step → −lr·g/|g| = +lr for negative g
        assert_abs_diff_eq!(step, lr, epsilon = 1e-6 * lr);
    }

    #[test]
    fn non_finite_update_is_detected() {
        let mut p = vec![f64::MAX];
        let mut s = AdamState::new(1);
        // gradient pushing past the representable range
        let r = adam_step(&mut p, &[-1e300], &mut s, 1e305);
        assert!(matches!(r, Err(TrainError::NonFiniteUpdate)));
    }
}
