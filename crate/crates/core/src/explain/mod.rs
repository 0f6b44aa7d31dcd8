//! Feature attribution for the gesture classifier and attribution-based
//! characterization of anomalous gestures.

pub mod attribution;
pub mod srv;

pub use attribution::{
    background_windows, expected_gradients, explained_frames, gesture_attributions, AttributionMatrix, Explainable,
    LinearSurrogate, WindowLogit,
};
pub use srv::{
    characterization_csv, characterize, compute_srv, global_attribution, render_feedback, signed_attribution,
    CharacterizationReport, ClassSrv, Deviation, Diagnosis, GlobalAttribution, Srv,
};
