use serde::{Deserialize, Serialize};

use super::params::{GradientSet, Parameters};
use crate::{HgrError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new<P: Parameters + ?Sized>(p: &P, lr: f64) -> Self {
        let zeros: Vec<Vec<f64>> = p.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        AdamState { m: zeros.clone(), v: zeros, t: 0, lr, beta1: 0.9, beta2: 0.999, eps: 1e-7 }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step<P: Parameters + ?Sized>(params: &mut P, grads: &GradientSet, state: &mut AdamState) -> Result<()> {
    grads.check_shapes(params)?;
    if state.m.len() != grads.tensors.len() || state.m.iter().zip(&grads.tensors).any(|(a, b)| a.len() != b.len()) {
        return Err(HgrError::Shape("Adam moments do not mirror the parameters".into()));
    }
    state.t += 1;
    let bc1 = 1.0 - state.beta1.powi(state.t as i32);
    let bc2 = 1.0 - state.beta2.powi(state.t as i32);
    let (b1, b2, lr, eps) = (state.beta1, state.beta2, state.lr, state.eps);
    for (((p, g), m), v) in params.tensors_mut().into_iter().zip(&grads.tensors).zip(&mut state.m).zip(&mut state.v) {
        for i in 0..p.len() {
            let gi = g[i];
            m[i] = b1 * m[i] + (1.0 - b1) * gi;
            v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
            let mhat = m[i] / bc1;
            let vhat = v[i] / bc2;
            p[i] -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Scalar(Vec<f64>);
    impl Parameters for Scalar {
        fn tensors(&self) -> Vec<&[f64]> {
            vec![&self.0]
        }
        fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
            vec![&mut self.0]
        }
        fn tensor_names(&self) -> Vec<String> {
            vec!["x".into()]
        }
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = Scalar(vec![1.5, -2.0]);
        let mut st = AdamState::new(&p, 0.001);
        let g = GradientSet { tensors: vec![vec![0.0, 0.0]], input: None };
        for _ in 0..10 {
            adam_step(&mut p, &g, &mut st).unwrap();
        }
        assert_eq!(p.0, vec![1.5, -2.0]);
        assert_eq!(st.t, 10);
    }

    #[test]
    fn first_step_closed_form() {
        let mut p = Scalar(vec![0.0]);
        let mut st = AdamState::new(&p, 0.1);
        let g = GradientSet { tensors: vec![vec![1.0]], input: None };
        adam_step(&mut p, &g, &mut st).unwrap();
        assert!((p.0[0] + 0.1).abs() < 1e-7);
    }

    #[test]
    fn mismatched_shapes() {
        let mut p = Scalar(vec![0.0]);
        let mut st = AdamState::new(&p, 0.1);
        let g = GradientSet { tensors: vec![vec![1.0, 2.0]], input: None };
        assert!(matches!(adam_step(&mut p, &g, &mut st), Err(HgrError::Shape(_))));
    }
}
