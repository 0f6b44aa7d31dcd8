use rand::Rng;
use serde::{Deserialize, Serialize};

/// Execution style of one synthetic user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserStyle {
    pub id: String,
    /// Gesture speed multiplier (duration scales by its inverse).
    pub speed: f64,
    /// metres added to the base range
    pub range_offset: f64,
    /// degrees
    pub azimuth_bias: f64,
    /// degrees
    pub elevation_bias: f64,
    /// Rotation of the swipe direction in the azimuth/elevation plane, degrees.
    pub tilt: f64,
    pub amplitude: f64,
}

impl UserStyle {
    pub fn neutral(id: &str) -> Self {
        UserStyle {
            id: id.to_string(),
            speed: 1.0,
            range_offset: 0.0,
            azimuth_bias: 0.0,
            elevation_bias: 0.0,
            tilt: 0.0,
            amplitude: 1.0,
        }
    }

    /// A user close to the population the baseline is trained on.
    pub fn typical<R: Rng>(id: &str, rng: &mut R) -> Self {
        UserStyle {
            id: id.to_string(),
            speed: rng.gen_range(0.9..1.1),
            range_offset: rng.gen_range(-0.03..0.03),
            azimuth_bias: rng.gen_range(-4.0..4.0),
            elevation_bias: rng.gen_range(-4.0..4.0),
            tilt: rng.gen_range(-6.0..6.0),
            amplitude: rng.gen_range(0.9..1.1),
        }
    }

    /// A user whose habits differ markedly: tilted swipes, offset distance
    /// and pointing bias.
    pub fn shifted<R: Rng>(id: &str, rng: &mut R) -> Self {
        let sign = |rng: &mut R| if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        UserStyle {
            id: id.to_string(),
            speed: rng.gen_range(0.85..1.15),
            range_offset: sign(rng) * rng.gen_range(0.06..0.1),
            azimuth_bias: sign(rng) * rng.gen_range(6.0..12.0),
            elevation_bias: sign(rng) * rng.gen_range(6.0..12.0),
            tilt: sign(rng) * rng.gen_range(35.0..50.0),
            amplitude: rng.gen_range(0.8..1.2),
        }
    }
}
