use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::RadarConfig;
use crate::types::{GestureClass, RecordingMeta};
use crate::{HgrError, Result};

pub const FEATURE_COUNT: usize = 5;
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = ["range", "doppler", "azimuth", "elevation", "peak"];

/// Raw ADC samples, `frames x rx x chirps x samples`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarCube {
    pub frames: usize,
    pub rx: usize,
    pub chirps: usize,
    pub samples: usize,
    pub data: Vec<f32>,
}

impl RadarCube {
    pub fn zeros(frames: usize, rx: usize, chirps: usize, samples: usize) -> Self {
        RadarCube { frames, rx, chirps, samples, data: vec![0.0; frames * rx * chirps * samples] }
    }

    pub fn new(shape: [usize; 4], data: Vec<f32>) -> Result<Self> {
        let [frames, rx, chirps, samples] = shape;
        if data.len() != frames * rx * chirps * samples {
            return Err(HgrError::Shape(format!("{} values for cube {shape:?}", data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(HgrError::Numeric("radar cube contains non-finite samples".into()));
        }
        Ok(RadarCube { frames, rx, chirps, samples, data })
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.frames, self.rx, self.chirps, self.samples]
    }

    pub fn frame_len(&self) -> usize {
        self.rx * self.chirps * self.samples
    }

    pub fn frame(&self, f: usize) -> &[f32] {
        let n = self.frame_len();
        &self.data[f * n..(f + 1) * n]
    }

    pub fn frame_mut(&mut self, f: usize) -> &mut [f32] {
        let n = self.frame_len();
        &mut self.data[f * n..(f + 1) * n]
    }

    pub fn check_config(&self, cfg: &RadarConfig) -> Result<()> {
        if self.rx != cfg.rx || self.chirps != cfg.chirps || self.samples != cfg.samples {
            return Err(HgrError::Shape(format!(
                "cube frame {}x{}x{} does not match radar config {}x{}x{}",
                self.rx, self.chirps, self.samples, cfg.rx, cfg.chirps, cfg.samples
            )));
        }
        Ok(())
    }
}

/// Complex fast-time spectra of one frame, `rx x chirps x bins`.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeProfiles {
    pub rx: usize,
    pub chirps: usize,
    pub bins: usize,
    pub data: Vec<Complex64>,
}

impl RangeProfiles {
    #[inline]
    pub fn at(&self, rx: usize, chirp: usize, bin: usize) -> Complex64 {
        self.data[(rx * self.chirps + chirp) * self.bins + bin]
    }

    /// Slow-time series of one (rx, bin) cell.
    pub fn slow_time(&self, rx: usize, bin: usize) -> Vec<Complex64> {
        (0..self.chirps).map(|c| self.at(rx, c, bin)).collect()
    }
}

/// The five per-frame physical features.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameFeatures {
    /// metres
    pub range: f64,
    /// m/s, positive when approaching
    pub doppler: f64,
    /// degrees
    pub azimuth: f64,
    /// degrees
    pub elevation: f64,
    pub peak: f64,
}

impl FrameFeatures {
    pub fn to_array(&self) -> [f64; FEATURE_COUNT] {
        [self.range, self.doppler, self.azimuth, self.elevation, self.peak]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        FrameFeatures { range: v[0], doppler: v[1], azimuth: v[2], elevation: v[3], peak: v[4] }
    }
}

/// Per-frame features of one recording, with optional labels and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSequence {
    pub frames: Vec<FrameFeatures>,
    pub labels: Option<Vec<GestureClass>>,
    pub meta: Option<RecordingMeta>,
}

impl FeatureSequence {
    pub fn new(frames: Vec<FrameFeatures>) -> Self {
        FeatureSequence { frames, labels: None, meta: None }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Row-major `T x 5` matrix.
    pub fn matrix(&self) -> Vec<f64> {
        self.frames.iter().flat_map(|f| f.to_array()).collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.frames.iter().map(|f| f.to_array()[j]).collect()
    }

    pub fn with_labels(mut self, labels: Vec<GestureClass>) -> Result<Self> {
        if labels.len() != self.frames.len() {
            return Err(HgrError::Shape(format!("{} labels for {} frames", labels.len(), self.frames.len())));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn label_ids(&self) -> Option<Vec<usize>> {
        self.labels.as_ref().map(|l| l.iter().map(|c| c.index()).collect())
    }
}
