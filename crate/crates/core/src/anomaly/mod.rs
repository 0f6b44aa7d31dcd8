//! Out-of-distribution gesture detection: a VAE scored against per-user
//! reconstruction-error thresholds, prediction-pattern conditions, and
//! isolation-forest / LOF baselines.

pub mod detector;
pub mod forest;
pub mod lof;
pub mod verdict;

pub use detector::{train_vae, EarlyStopping, VaeDetector, VaeEpoch, VaeTrainConfig};
pub use forest::{average_path_length, IsolationForest, IsolationForestConfig};
pub use lof::{euclidean, knn, Lof};
pub use verdict::{
    flag_conditions, judge, nearest_rank, user_threshold, verdicts_csv, AnomalyVerdict, Category, ConditionFlag,
    UserThreshold,
};

use serde::{Deserialize, Serialize};

use crate::dsp::{FeatureSequence, FEATURE_COUNT};
use crate::model::MinMaxStats;

/// Input representation for the IF / LOF baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineInput {
    /// The scaled, flattened recording the VAE sees.
    #[default]
    Flattened,
    /// Per-feature min, max, mean and span of the scaled recording.
    Summary,
}

pub fn baseline_vector(seq: &FeatureSequence, scaling: &MinMaxStats, mode: BaselineInput) -> Vec<f64> {
    let x = scaling.apply(&seq.matrix());
    match mode {
        BaselineInput::Flattened => x,
        BaselineInput::Summary => {
            let mut out = Vec::with_capacity(4 * FEATURE_COUNT);
            for j in 0..FEATURE_COUNT {
                let col: Vec<f64> = x.iter().skip(j).step_by(FEATURE_COUNT).copied().collect();
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mean = col.iter().sum::<f64>() / col.len().max(1) as f64;
                out.extend([lo, hi, mean, hi - lo]);
            }
            out
        }
    }
}
