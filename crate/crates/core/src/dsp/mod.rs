//! FMCW preprocessing: range profiles, closest-target selection, Doppler,
//! monopulse angles and label refinement.

mod chain;
mod config;
mod cube;
mod labels;

pub use chain::{
    detect_hand_bin, doppler_at_bin, extract_frame_features, extract_recording, integrate_magnitude,
    monopulse_angles, range_profiles, remove_static_clutter, DopplerEstimate, FeatureExtractor, MonopulseEstimate,
};
pub use config::{RadarConfig, SPEED_OF_LIGHT};
pub use cube::{FeatureSequence, FrameFeatures, RadarCube, RangeProfiles, FEATURE_COUNT, FEATURE_NAMES};
pub use labels::{refine_labels, RefinedLabels};
