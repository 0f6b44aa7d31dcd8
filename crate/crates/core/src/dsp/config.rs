use serde::{Deserialize, Serialize};

use crate::{HgrError, Result};

pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Sensor geometry and the tunables of the feature chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RadarConfig {
    pub f_start: f64,
    pub f_end: f64,
    /// Chirp repetition time in seconds.
    pub chirp_prt: f64,
    pub chirps: usize,
    pub samples: usize,
    pub rx: usize,
    pub frame_rate: f64,
    /// Carrier used for the wavelength in velocity/angle formulas.
    pub wavelength_ref_hz: f64,
    /// Element spacing in metres; `None` means half a wavelength.
    pub antenna_spacing: Option<f64>,
    /// (reference, other) rx indices of the horizontal baseline.
    pub azimuth_pair: (usize, usize),
    /// (reference, other) rx indices of the vertical baseline.
    pub elevation_pair: (usize, usize),
    pub smoothing_sigma: f64,
    /// Detection threshold as a fraction of the running energy maximum.
    pub threshold_ratio: f64,
    /// Label anchor threshold as a fraction of the recording's max peak.
    pub amp_threshold_ratio: f64,
}

impl Default for RadarConfig {
    fn default() -> Self {
        RadarConfig {
            f_start: 58.5e9,
            f_end: 62.5e9,
            chirp_prt: 300e-6,
            chirps: 32,
            samples: 64,
            rx: 3,
            frame_rate: 33.0,
            wavelength_ref_hz: 60e9,
            antenna_spacing: None,
            azimuth_pair: (0, 1),
            elevation_pair: (0, 2),
            smoothing_sigma: 1.0,
            threshold_ratio: 0.3,
            amp_threshold_ratio: 0.5,
        }
    }
}

impl RadarConfig {
    pub fn bandwidth(&self) -> f64 {
        self.f_end - self.f_start
    }

    pub fn center_frequency(&self) -> f64 {
        0.5 * (self.f_start + self.f_end)
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.wavelength_ref_hz
    }

    pub fn spacing(&self) -> f64 {
        self.antenna_spacing.unwrap_or(self.wavelength() / 2.0)
    }

    pub fn range_res(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth())
    }

    pub fn v_max(&self) -> f64 {
        self.wavelength() / (4.0 * self.chirp_prt)
    }

    pub fn v_res(&self) -> f64 {
        self.wavelength() / (2.0 * self.chirps as f64 * self.chirp_prt)
    }

    pub fn range_bins(&self) -> usize {
        self.samples / 2
    }

    pub fn max_range(&self) -> f64 {
        self.range_bins() as f64 * self.range_res()
    }

    pub fn frame_len(&self) -> usize {
        self.rx * self.chirps * self.samples
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HgrError::Config(m.to_string()));
        if !(self.f_end > self.f_start) || self.f_start <= 0.0 {
            return bad("f_end must exceed f_start > 0");
        }
        if !(self.chirp_prt > 0.0 && self.frame_rate > 0.0 && self.wavelength_ref_hz > 0.0) {
            return bad("chirp_prt, frame_rate and wavelength_ref_hz must be positive");
        }
        if !self.samples.is_power_of_two() || !self.chirps.is_power_of_two() || self.samples < 2 || self.chirps < 2 {
            return bad("samples and chirps must be powers of two >= 2");
        }
        let pairs = [self.azimuth_pair, self.elevation_pair];
        if pairs.iter().any(|&(a, b)| a >= self.rx || b >= self.rx || a == b) {
            return bad("antenna pairs must name two distinct rx channels");
        }
        if self.antenna_spacing.is_some_and(|d| d <= 0.0) {
            return bad("antenna_spacing must be positive");
        }
        if !(0.0..=1.0).contains(&self.threshold_ratio) || !(0.0..=1.0).contains(&self.amp_threshold_ratio) {
            return bad("threshold ratios must lie in [0, 1]");
        }
        if self.smoothing_sigma < 0.0 {
            return bad("smoothing_sigma must be non-negative");
        }
        Ok(())
    }
}
