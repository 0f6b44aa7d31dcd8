use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{FrameFeatures, RadarConfig, RadarCube, RangeProfiles};
use crate::{HgrError, Result};

/// Fast-time processing of one frame (`rx x chirps x samples`): per-chirp DC
/// removal, FFT, first half of the spectrum scaled by `2 / samples` so a unit
/// tone on a bin centre has unit magnitude.
pub fn range_profiles(frame: &[f32], cfg: &RadarConfig) -> Result<RangeProfiles> {
    let fft = FftPlanner::new().plan_fft_forward(cfg.samples);
    range_profiles_with(frame, cfg, fft.as_ref())
}

fn range_profiles_with(frame: &[f32], cfg: &RadarConfig, fft: &dyn Fft<f64>) -> Result<RangeProfiles> {
    let (rx, chirps, samples) = (cfg.rx, cfg.chirps, cfg.samples);
    if !samples.is_power_of_two() {
        return Err(HgrError::Config(format!("samples per chirp {samples} is not a power of two")));
    }
    if frame.len() != rx * chirps * samples {
        return Err(HgrError::Shape(format!("frame has {} samples, expected {}", frame.len(), rx * chirps * samples)));
    }
    let bins = samples / 2;
    let scale = 2.0 / samples as f64;
    let mut data = Vec::with_capacity(rx * chirps * bins);
    let mut buf = vec![Complex64::new(0.0, 0.0); samples];
    for chirp in frame.chunks_exact(samples) {
        let mean = chirp.iter().map(|&v| v as f64).sum::<f64>() / samples as f64;
        for (b, &v) in buf.iter_mut().zip(chirp) {
            *b = Complex64::new(v as f64 - mean, 0.0);
        }
        fft.process(&mut buf);
        data.extend(buf[..bins].iter().map(|z| z * scale));
    }
    Ok(RangeProfiles { rx, chirps, bins, data })
}

/// Subtracts the slow-time mean of every (rx, bin) cell.
pub fn remove_static_clutter(profiles: &RangeProfiles) -> RangeProfiles {
    let mut out = profiles.clone();
    let n = profiles.chirps as f64;
    for r in 0..profiles.rx {
        for b in 0..profiles.bins {
            let mean = (0..profiles.chirps).map(|c| profiles.at(r, c, b)).sum::<Complex64>() / n;
            for c in 0..profiles.chirps {
                out.data[(r * profiles.chirps + c) * profiles.bins + b] -= mean;
            }
        }
    }
    out
}

/// Magnitude summed over rx channels and chirps per range bin.
pub fn integrate_magnitude(profiles: &RangeProfiles) -> Vec<f64> {
    let mut e = vec![0.0; profiles.bins];
    for row in profiles.data.chunks_exact(profiles.bins) {
        for (acc, z) in e.iter_mut().zip(row) {
            *acc += z.norm();
        }
    }
    e
}

fn gaussian_smooth(x: &[f64], sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return x.to_vec();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius).map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let n = x.len() as isize;
    (0..n)
        .map(|i| {
            let (mut acc, mut wsum) = (0.0, 0.0);
            for (j, w) in (-radius..=radius).zip(&kernel) {
                let t = i + j;
                if (0..n).contains(&t) {
                    acc += w * x[t as usize];
                    wsum += w;
                }
            }
            acc / wsum
        })
        .collect()
}

fn argmax(x: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in x.iter().enumerate() {
        if *v > x[best] {
            best = i;
        }
    }
    best
}

/// Closest-target selection: smooth, drop values below `threshold`, take the
/// lowest-index local maximum left; global argmax if nothing survives.
pub fn detect_hand_bin(energy: &[f64], sigma: f64, threshold: f64) -> usize {
    if energy.is_empty() {
        return 0;
    }
    let s = gaussian_smooth(energy, sigma);
    let n = s.len();
    for i in 0..n {
        let left = if i == 0 { f64::NEG_INFINITY } else { s[i - 1] };
        let right = if i + 1 == n { f64::NEG_INFINITY } else { s[i + 1] };
        if s[i] > 0.0 && s[i] >= threshold && s[i] > left && s[i] >= right {
            return i;
        }
    }
    argmax(energy)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DopplerEstimate {
    /// m/s, positive when approaching.
    pub velocity: f64,
    /// Index into the fftshifted spectrum.
    pub doppler_bin: usize,
    pub peak: f64,
}

/// Slow-time spectrum at `bin`, magnitudes summed over rx, fftshifted.
pub fn doppler_at_bin(profiles: &RangeProfiles, bin: usize, cfg: &RadarConfig) -> Result<DopplerEstimate> {
    let fft = FftPlanner::new().plan_fft_forward(profiles.chirps);
    doppler_with(profiles, bin, cfg, fft.as_ref())
}

fn doppler_with(profiles: &RangeProfiles, bin: usize, cfg: &RadarConfig, fft: &dyn Fft<f64>) -> Result<DopplerEstimate> {
    if bin >= profiles.bins {
        return Err(HgrError::Input(format!("range bin {bin} outside 0..{}", profiles.bins)));
    }
    let n = profiles.chirps;
    let mut mag = vec![0.0; n];
    for r in 0..profiles.rx {
        let mut buf = profiles.slow_time(r, bin);
        fft.process(&mut buf);
        for k in 0..n {
            // fftshift: shifted index k holds frequency k - n/2
            mag[k] += buf[(k + n / 2) % n].norm() / n as f64;
        }
    }
    let peak = mag.iter().cloned().fold(0.0, f64::max);
    let k = if peak > 0.0 { argmax(&mag) } else { n / 2 };
    Ok(DopplerEstimate { velocity: (k as f64 - (n / 2) as f64) * cfg.v_res(), doppler_bin: k, peak })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonopulseEstimate {
    pub azimuth: f64,
    pub elevation: f64,
    /// Set when a phase difference exceeded the unambiguous range and was clamped.
    pub low_confidence: bool,
}

fn cell(profiles: &RangeProfiles, rx: usize, bin: usize, doppler_bin: usize) -> Complex64 {
    let n = profiles.chirps;
    let f = doppler_bin as f64 - (n / 2) as f64;
    (0..n).map(|c| profiles.at(rx, c, bin) * Complex64::from_polar(1.0, -2.0 * PI * f * c as f64 / n as f64)).sum()
}

/// Phase-comparison angles at one range-Doppler cell.
pub fn monopulse_angles(
    profiles: &RangeProfiles,
    bin: usize,
    doppler_bin: usize,
    cfg: &RadarConfig,
) -> Result<MonopulseEstimate> {
    if bin >= profiles.bins || doppler_bin >= profiles.chirps {
        return Err(HgrError::Input(format!("cell ({bin}, {doppler_bin}) outside the spectrum")));
    }
    let ratio = cfg.wavelength() / (2.0 * PI * cfg.spacing());
    let mut low = false;
    let mut angle = |(a, b): (usize, usize)| {
        let dphi = (cell(profiles, b, bin, doppler_bin) * cell(profiles, a, bin, doppler_bin).conj()).arg();
        let s = dphi * ratio;
        if s.abs() > 1.0 {
            low = true;
        }
        s.clamp(-1.0, 1.0).asin().to_degrees()
    };
    let azimuth = angle(cfg.azimuth_pair);
    let elevation = angle(cfg.elevation_pair);
    Ok(MonopulseEstimate { azimuth, elevation, low_confidence: low })
}

/// Stateless single-frame feature extraction; the detection threshold is
/// relative to this frame's own energy maximum.
pub fn extract_frame_features(frame: &[f32], cfg: &RadarConfig) -> Result<FrameFeatures> {
    FeatureExtractor::new(cfg.clone())?.process(frame)
}

/// Frame-by-frame extractor carrying the running energy maximum of a recording.
pub struct FeatureExtractor {
    cfg: RadarConfig,
    fast: Arc<dyn Fft<f64>>,
    slow: Arc<dyn Fft<f64>>,
    running_max: f64,
}

impl FeatureExtractor {
    pub fn new(cfg: RadarConfig) -> Result<Self> {
        cfg.validate()?;
        let mut planner = FftPlanner::new();
        let fast = planner.plan_fft_forward(cfg.samples);
        let slow = planner.plan_fft_forward(cfg.chirps);
        Ok(FeatureExtractor { cfg, fast, slow, running_max: 0.0 })
    }

    pub fn reset(&mut self) {
        self.running_max = 0.0;
    }

    pub fn config(&self) -> &RadarConfig {
        &self.cfg
    }

    pub fn process(&mut self, frame: &[f32]) -> Result<FrameFeatures> {
        let cfg = &self.cfg;
        let profiles = remove_static_clutter(&range_profiles_with(frame, cfg, self.fast.as_ref())?);
        let energy = integrate_magnitude(&profiles);
        let smooth_max = gaussian_smooth(&energy, cfg.smoothing_sigma).into_iter().fold(0.0, f64::max);
        self.running_max = self.running_max.max(smooth_max);
        let bin = detect_hand_bin(&energy, cfg.smoothing_sigma, cfg.threshold_ratio * self.running_max);
        let dop = doppler_with(&profiles, bin, cfg, self.slow.as_ref())?;
        let (azimuth, elevation) = if dop.peak > 0.0 {
            let m = monopulse_angles(&profiles, bin, dop.doppler_bin, cfg)?;
            (m.azimuth, m.elevation)
        } else {
            (0.0, 0.0)
        };
        Ok(FrameFeatures { range: bin as f64 * cfg.range_res(), doppler: dop.velocity, azimuth, elevation, peak: dop.peak })
    }
}

/// Features of every frame of a cube, sharing one running maximum.
pub fn extract_recording(cube: &RadarCube, cfg: &RadarConfig) -> Result<Vec<FrameFeatures>> {
    cube.check_config(cfg)?;
    let mut ex = FeatureExtractor::new(cfg.clone())?;
    (0..cube.frames).map(|f| ex.process(cube.frame(f))).collect()
}
