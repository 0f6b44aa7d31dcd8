//! User thresholds, prediction-pattern conditions and the combined verdict.

use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::extended_window;
use crate::types::{AnomalyKind, GestureClass};
use crate::{HgrError, Result};

const BG: usize = GestureClass::Background as usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserThreshold {
    pub user: String,
    pub percentile: f64,
    pub value: f64,
    pub calibration_size: usize,
}

impl UserThreshold {
    pub fn flags(&self, e_rec: f64) -> bool {
        e_rec > self.value
    }
}

/// Nearest-rank percentile: the `ceil(p/100 * n)`-th smallest value.
pub fn nearest_rank(values: &[f64], percentile: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(HgrError::Data("percentile of an empty set".into()));
    }
    if !(0.0..=100.0).contains(&percentile) {
        return Err(HgrError::Config(format!("percentile {percentile} outside [0, 100]")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(HgrError::Numeric("non-finite reconstruction error".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((percentile / 100.0) * v.len() as f64).ceil() as usize;
    Ok(v[rank.clamp(1, v.len()) - 1])
}

/// Threshold for one user from the reconstruction errors of their
/// calibration gestures.
pub fn user_threshold(user: &str, errors: &[f64], percentile: f64) -> Result<UserThreshold> {
    if errors.len() < 10 {
        log::warn!("user {user}: threshold from only {} calibration recordings", errors.len());
    }
    let value = nearest_rank(errors, percentile)?;
    Ok(UserThreshold { user: user.to_string(), percentile, value, calibration_size: errors.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditionFlag {
    None,
    Sparse,
    Mixed,
}

impl ConditionFlag {
    pub fn name(self) -> &'static str {
        match self {
            ConditionFlag::None => "none",
            ConditionFlag::Sparse => "sparse",
            ConditionFlag::Mixed => "mixed",
        }
    }
}

impl fmt::Display for ConditionFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Classifies the predictions inside the tolerance window around the truth
/// segment (the whole recording when there is none). Mixed: two or more
/// gesture classes; sparse: some gesture frames but no single-class run
/// longer than `max_sparse_run`.
pub fn flag_conditions(pred: &[usize], segment: Option<(usize, usize)>, max_sparse_run: usize) -> Result<ConditionFlag> {
    if pred.is_empty() {
        return Ok(ConditionFlag::None);
    }
    let (lo, hi) = match segment {
        Some(seg) => {
            if seg.0 > seg.1 || seg.1 >= pred.len() {
                return Err(HgrError::Input(format!("segment {seg:?} outside {} predictions", pred.len())));
            }
            extended_window(seg, pred.len())
        }
        None => (0, pred.len() - 1),
    };
    let window = &pred[lo..=hi];
    let mut classes: Vec<usize> = window.iter().copied().filter(|&c| c != BG).collect();
    if classes.is_empty() {
        return Ok(ConditionFlag::None);
    }
    classes.sort_unstable();
    classes.dedup();
    if classes.len() >= 2 {
        return Ok(ConditionFlag::Mixed);
    }
    let mut longest = 0;
    let mut run = 0;
    for &c in window {
        run = if c != BG { run + 1 } else { 0 };
        longest = longest.max(run);
    }
    Ok(if longest <= max_sparse_run { ConditionFlag::Sparse } else { ConditionFlag::None })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    Nominal,
    ConditionFlagged,
    ExclusiveVaeFlagged,
    Both,
}

impl Category {
    pub fn of(condition: ConditionFlag, vae_flagged: bool) -> Self {
        match (condition != ConditionFlag::None, vae_flagged) {
            (false, false) => Category::Nominal,
            (true, false) => Category::ConditionFlagged,
            (false, true) => Category::ExclusiveVaeFlagged,
            (true, true) => Category::Both,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Category::Nominal => "nominal",
            Category::ConditionFlagged => "condition-flagged",
            Category::ExclusiveVaeFlagged => "exclusive-vae-flagged",
            Category::Both => "both",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyVerdict {
    pub recording_id: String,
    pub user: String,
    pub condition: ConditionFlag,
    pub vae_flagged: bool,
    pub e_rec: f64,
    pub threshold: f64,
    pub category: Category,
    pub truth: AnomalyKind,
}

impl AnomalyVerdict {
    pub fn flagged(&self) -> bool {
        self.category != Category::Nominal
    }

    pub fn condition_flagged(&self) -> bool {
        self.condition != ConditionFlag::None
    }
}

/// Combines the prediction-pattern condition with the VAE decision.
#[allow(clippy::too_many_arguments)]
pub fn judge(
    recording_id: &str,
    user: &str,
    pred: &[usize],
    truth: &[usize],
    e_rec: f64,
    threshold: &UserThreshold,
    truth_kind: AnomalyKind,
) -> Result<AnomalyVerdict> {
    if pred.len() != truth.len() {
        return Err(HgrError::Shape(format!("{} predictions for {} labels", pred.len(), truth.len())));
    }
    if threshold.user != user {
        log::warn!("judging {recording_id} of user {user} with the threshold of {}", threshold.user);
    }
    let condition = flag_conditions(pred, crate::model::gesture_segment(truth), 4)?;
    let vae_flagged = threshold.flags(e_rec);
    Ok(AnomalyVerdict {
        recording_id: recording_id.to_string(),
        user: user.to_string(),
        condition,
        vae_flagged,
        e_rec,
        threshold: threshold.value,
        category: Category::of(condition, vae_flagged),
        truth: truth_kind,
    })
}

pub fn verdicts_csv(verdicts: &[AnomalyVerdict]) -> String {
    let mut s = String::from("recording_id,user,condition,e_rec,threshold,vae_flagged,category,truth_anomaly_kind\n");
    for v in verdicts {
        let _ = writeln!(
            s,
            "{},{},{},{:.6},{:.6},{},{},{}",
            v.recording_id, v.user, v.condition, v.e_rec, v.threshold, v.vae_flagged, v.category, v.truth
        );
    }
    s
}
