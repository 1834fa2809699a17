//! Adaptive-moment gradient updates with bias correction.

use crate::error::{Result, VivError};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment estimates, one slot per parameter.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
}

impl OptimizerState {
    pub fn new(param_count: usize) -> Self {
        Self {
            first_moment: vec![0.0; param_count],
            second_moment: vec![0.0; param_count],
            step_count: 0,
        }
    }
}

/// One Adam step: params <- params - lr * m_hat / (sqrt(v_hat) + eps).
pub fn adam_update(
    params: &mut [f64],
    grads: &[f64],
    state: &mut OptimizerState,
    lr: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first_moment.len() {
        return Err(VivError::Shape(format!(
            "adam: {} params, {} grads, {} moments",
            params.len(),
            grads.len(),
            state.first_moment.len()
        )));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(VivError::Training(
            "non-finite gradient; update rejected".into(),
        ));
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let bc1 = 1.0 - BETA1.powi(t);
    let bc2 = 1.0 - BETA2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        let m = &mut state.first_moment[i];
        *m = BETA1 * *m + (1.0 - BETA1) * g;
        let v = &mut state.second_moment[i];
        *v = BETA2 * *v + (1.0 - BETA2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + EPSILON);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![1.0, -2.0, 0.5];
        let mut st = OptimizerState::new(3);
        adam_update(&mut p, &[0.0, 0.0, 0.0], &mut st, 1e-3).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
        assert_eq!(st.step_count, 1);
    }

    #[test]
    fn first_step_unit_gradient_moves_by_lr() {
        // Hand-computed bias-corrected first step: m_hat = 1, v_hat = 1,
        // delta = -lr / (1 + eps).
        let mut p = vec![0.0];
        let mut st = OptimizerState::new(1);
        let lr = 0.01;
        adam_update(&mut p, &[1.0], &mut st, lr).unwrap();
        assert!((p[0] + lr).abs() < 1e-6 * lr, "{}", p[0]);
    }

    #[test]
    fn step_opposes_gradient_sign() {
        let mut p = vec![0.0, 0.0, 0.0];
        let mut st = OptimizerState::new(3);
        adam_update(&mut p, &[2.0, -0.3, 1e-4], &mut st, 1e-3).unwrap();
        assert!(p[0] < 0.0 && p[1] > 0.0 && p[2] < 0.0);
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut p = vec![0.0];
        let mut st = OptimizerState::new(1);
        let before = p.clone();
        assert!(adam_update(&mut p, &[f64::NAN], &mut st, 1e-3).is_err());
        assert_eq!(p, before);
        assert_eq!(st.step_count, 0);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = vec![0.0];
        let mut st = OptimizerState::new(2);
        assert!(adam_update(&mut p, &[1.0], &mut st, 1e-3).is_err());
    }
}
