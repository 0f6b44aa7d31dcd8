use serde::{Deserialize, Serialize};

use crate::model::{TrainHooks, WindowedDataset};
use crate::nn::activation::softmax_in_place;
use crate::nn::{flatten, GradientSet, GruNet};
use crate::{HgrError, Result};

/// Per-parameter importance and the anchor parameters it protects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceWeights {
    pub omega: Vec<f64>,
    pub anchor: Vec<f64>,
}

impl ImportanceWeights {
    pub fn check(&self, param_count: usize) -> Result<()> {
        if self.omega.len() != param_count || self.anchor.len() != param_count {
            return Err(HgrError::Shape(format!(
                "importance for {} / anchor {} parameters, model has {param_count}",
                self.omega.len(),
                self.anchor.len()
            )));
        }
        if self.omega.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(HgrError::Numeric("importance weights must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Diagonal Fisher information of `net` over the windows of `data`, with the
/// expectation over labels taken under the model's own predictive
/// distribution.
pub fn fisher_diagonal(net: &GruNet, data: &WindowedDataset) -> Result<ImportanceWeights> {
    if data.is_empty() {
        return Err(HgrError::Data("Fisher information needs at least one window".into()));
    }
    let idx: Vec<usize> = (0..data.count()).collect();
    let chunks: Vec<&[usize]> = idx.chunks(16).collect();
    let parts = crate::par::map(&chunks, |chunk| {
        let mut acc = vec![0.0; crate::nn::Parameters::param_count(net)];
        for &i in chunk.iter() {
            let w = data.window(i);
            let tr = net.trace(w);
            let mut p = tr.logits.clone();
            softmax_in_place(&mut p);
            for (y, &py) in p.iter().enumerate() {
                if py == 0.0 {
                    continue;
                }
                let mut dl = p.clone();
                dl[y] -= 1.0;
                let mut g = GradientSet::zeros_like(net);
                net.backward_window(w, &tr, &dl, Some(&mut g), None);
                for (a, gi) in acc.iter_mut().zip(g.tensors.iter().flatten()) {
                    *a += py * gi * gi;
                }
            }
        }
        acc
    });
    let mut omega = vec![0.0; crate::nn::Parameters::param_count(net)];
    for part in parts {
        for (o, v) in omega.iter_mut().zip(part) {
            *o += v;
        }
    }
    let n = data.count() as f64;
    omega.iter_mut().for_each(|o| *o /= n);
    Ok(ImportanceWeights { omega, anchor: flatten(net) })
}

/// Records the path integral of the loss gradient along the optimizer
/// trajectory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SiTracker {
    pub omega: Vec<f64>,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub steps: usize,
}

impl TrainHooks for SiTracker {
    fn after_step(&mut self, grad: &[f64], before: &[f64], after: &[f64]) {
        if self.steps == 0 {
            self.omega = vec![0.0; grad.len()];
            self.start = before.to_vec();
        }
        for i in 0..grad.len() {
            self.omega[i] -= grad[i] * (after[i] - before[i]);
        }
        self.end = after.to_vec();
        self.steps += 1;
    }
}

/// `Omega_i = max(omega_i, 0) / (total_delta_i^2 + xi)` from a training trace.
pub fn si_path_importance(trace: &SiTracker, xi: f64) -> Result<ImportanceWeights> {
    if trace.steps == 0 || trace.omega.is_empty() {
        return Err(HgrError::Config("SI needs a trace recorded during baseline training".into()));
    }
    let omega = trace
        .omega
        .iter()
        .zip(&trace.start)
        .zip(&trace.end)
        .map(|((w, s), e)| w.max(0.0) / ((e - s).powi(2) + xi))
        .collect();
    Ok(ImportanceWeights { omega, anchor: trace.end.clone() })
}

/// `lambda / 2 * sum omega_i (theta_i - anchor_i)^2`.
pub struct QuadraticPenalty<'a> {
    pub lambda: f64,
    pub weights: &'a ImportanceWeights,
}

impl TrainHooks for QuadraticPenalty<'_> {
    fn penalty(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        let mut value = 0.0;
        for i in 0..params.len() {
            let d = params[i] - self.weights.anchor[i];
            value += self.weights.omega[i] * d * d;
            grad[i] += self.lambda * self.weights.omega[i] * d;
        }
        0.5 * self.lambda * value
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn si_plug_in_value() {
        let t = SiTracker { omega: vec![0.1, 0.0, -0.3], start: vec![0.0; 3], end: vec![0.1, 0.0, 0.2], steps: 1 };
        let w = si_path_importance(&t, 0.01).unwrap();
        assert!((w.omega[0] - 5.0).abs() < 1e-12);
        assert_eq!(w.omega[1], 0.0);
        assert_eq!(w.omega[2], 0.0);
        assert!(si_path_importance(&SiTracker::default(), 0.01).is_err());
    }

    #[test]
    fn tracker_accumulates_minus_g_dtheta() {
        let mut t = SiTracker::default();
        t.after_step(&[-1.0, 2.0], &[0.0, 0.0], &[0.1, 0.0]);
        assert_eq!(t.omega, vec![0.1, 0.0]);
        assert_eq!(t.steps, 1);
    }

    #[test]
    fn penalty_value_and_gradient() {
        let w = ImportanceWeights { omega: vec![2.0, 0.0], anchor: vec![1.0, 1.0] };
        let p = QuadraticPenalty { lambda: 3.0, weights: &w };
        let mut g = vec![0.0; 2];
        let v = p.penalty(&[2.0, 5.0], &mut g);
        assert!((v - 3.0).abs() < 1e-12);
        assert_eq!(g, vec![6.0, 0.0]);
    }
}
