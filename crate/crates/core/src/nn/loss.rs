use crate::{HgrError, Result};

/// Probability floor applied before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// `-ln(probs[label])`, with the probability clamped at [`PROB_FLOOR`].
pub fn sparse_ce_loss(probs: &[f64], label: usize) -> Result<f64> {
    if label >= probs.len() {
        return Err(HgrError::Label { label, classes: probs.len() });
    }
    Ok(-probs[label].max(PROB_FLOOR).ln())
}

/// Sum of squared differences.
pub fn squared_error(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// KL divergence of `N(mu, exp(logvar))` from the standard normal.
pub fn kl_standard_normal(mu: &[f64], logvar: &[f64]) -> f64 {
    -0.5 * mu.iter().zip(logvar).map(|(m, lv)| 1.0 + lv - m * m - lv.exp()).sum::<f64>()
}
