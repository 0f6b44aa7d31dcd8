//! Radar hand-gesture recognition: signal chain, simulator, recurrent
//! classifier, per-user calibration, anomaly detection and attributions.

pub mod anomaly;
pub mod calibration;
pub mod dataset;
pub mod dsp;
pub mod error;
pub mod explain;
pub mod io;
pub mod model;
pub mod nn;
pub mod par;
pub mod sim;
pub mod types;

pub use error::{HgrError, Result};
pub use types::{AnomalyKind, GestureClass, RecordingMeta, Source};
