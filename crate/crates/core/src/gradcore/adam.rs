use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};

/// Moment accumulators for one parameter tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One Adam step with bias correction.
///
/// Coordinates whose gradient is exactly zero are left alone, moments
/// included (the "lazy" variant used for sparse embedding updates). For every
/// other coordinate this is textbook Adam; `t` advances once per call.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() || state.v.len() != params.len()
    {
        return dim_err(format!(
            "adam: params {}, grads {}, moments {}/{}",
            params.len(),
            grads.len(),
            state.m.len(),
            state.v.len()
        ));
    }
    if lr.is_nan() || lr <= 0.0 {
        return Err(Error::Config(format!(
            "learning rate must be positive, got {lr}"
        )));
    }
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        if g == 0.0 {
            continue;
        }
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_gradient_keeps_params() {
        let mut p = vec![1.0, -2.0, 3.5];
        let mut s = AdamState::new(3);
        adam_step(&mut p, &[0.0; 3], &mut s, 1e-3).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.5]);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        for g in [0.3, -7.0, 1e3] {
            let mut p = vec![0.0];
            let mut s = AdamState::new(1);
            adam_step(&mut p, &[g], &mut s, 0.01).unwrap();
            assert!((p[0] + 0.01 * g.signum()).abs() < 1e-8, "{g}: {}", p[0]);
        }
    }

    #[test]
    fn two_steps_match_scalar_recurrence() {
        let (g, lr, x0) = (0.7f64, 0.05f64, 2.0f64);
        let mut p = vec![x0];
        let mut s = AdamState::new(1);
        adam_step(&mut p, &[g], &mut s, lr).unwrap();
        adam_step(&mut p, &[g], &mut s, lr).unwrap();

        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8f64);
        let mut x = x0;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        for t in 1..=2 {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            x -= lr * mh / (vh.sqrt() + eps);
        }
        assert!((p[0] - x).abs() < 1e-15, "{} vs {x}", p[0]);
        assert_eq!(s.t, 2);
    }

    #[test]
    fn shape_mismatch() {
        let mut p = vec![0.0; 2];
        let mut s = AdamState::new(2);
        assert!(matches!(
            adam_step(&mut p, &[1.0], &mut s, 0.1),
            Err(Error::Dimension(_))
        ));
        assert!(adam_step(&mut p, &[1.0, 1.0], &mut s, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn zero_gradient_is_noop_for_any_state(
            warm in proptest::collection::vec(-5.0f64..5.0, 1..6),
            steps in 0usize..4,
        ) {
            let n = warm.len();
            let mut p = warm.clone();
            let mut s = AdamState::new(n);
            for _ in 0..steps {
                adam_step(&mut p, &warm, &mut s, 0.01).unwrap();
            }
            let before = p.clone();
            adam_step(&mut p, &vec![0.0; n], &mut s, 0.01).unwrap();
            prop_assert_eq!(p, before);
        }
    }
}
