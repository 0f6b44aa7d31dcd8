//! User calibration by retraining: plain, experience replay, EWC and SI,
//! plus forgetting evaluation and the n_train x n_user sweep.

mod importance;
mod retrain;
mod sweep;

pub use importance::{fisher_diagonal, si_path_importance, ImportanceWeights, QuadraticPenalty, SiTracker};
pub use retrain::{build_er_dataset, calibrate, forgetting_eval, CalibrationConfig, Method};
pub use sweep::{run_sweep, SweepCell, SweepGrid, SweepResult, SweepRow, SweepUser};
