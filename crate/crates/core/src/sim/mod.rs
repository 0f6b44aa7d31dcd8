//! Deterministic FMCW point-target simulator with synthetic users and
//! nominal / fast / slow / wrist gesture kinematics.

mod frame;
mod trajectory;
mod user;

pub use frame::{noise_sigma, simulate_frame, Scatterer, TargetState};
pub use trajectory::{
    gesture_trajectory, sample_spec, synthesize_recording, GroundTruth, KinematicsConfig, TrajectorySpec,
};
pub use user::UserStyle;
