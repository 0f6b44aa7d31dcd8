use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::frame::{noise_sigma, simulate_frame, Scatterer, TargetState};
use super::UserStyle;
use crate::dsp::{RadarConfig, RadarCube};
use crate::types::{AnomalyKind, GestureClass};
use crate::{HgrError, Result};

/// Population-level kinematic knobs of the simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KinematicsConfig {
    pub frames: usize,
    pub gesture_len: usize,
    pub nominal_duration: usize,
    pub fast_duration: usize,
    pub slow_duration: usize,
    /// Range dip of a swipe, metres.
    pub swipe_excursion: f64,
    /// Range dip of a push, metres.
    pub push_excursion: f64,
    /// Half-width of the lateral sweep, degrees.
    pub sweep_deg: f64,
    pub base_range: (f64, f64),
    pub start_frame: (usize, usize),
    pub wrist_range_scale: f64,
    pub wrist_amplitude_scale: f64,
    pub wrist_sweep_scale: f64,
    /// Fast gestures are capped at this fraction of v_max.
    pub fast_velocity_cap: f64,
    pub snr_db: f64,
    /// Amplitude that the SNR refers to.
    pub reference_amplitude: f64,
    /// Range at which the hand echo has the reference amplitude.
    pub reference_range: f64,
    pub body_range: (f64, f64),
    pub body_amplitude: f64,
    /// Peak sway velocity of the body, m/s.
    pub body_sway_velocity: (f64, f64),
    /// Sway rate of the body, Hz.
    pub body_sway_hz: (f64, f64),
}

impl Default for KinematicsConfig {
    fn default() -> Self {
        KinematicsConfig {
            frames: 100,
            gesture_len: 10,
            nominal_duration: 10,
            fast_duration: 3,
            slow_duration: 100,
            swipe_excursion: 0.09,
            push_excursion: 0.2,
            sweep_deg: 30.0,
            base_range: (0.35, 0.6),
            start_frame: (25, 65),
            wrist_range_scale: 0.4,
            wrist_amplitude_scale: 0.6,
            wrist_sweep_scale: 0.5,
            fast_velocity_cap: 0.9,
            snr_db: 20.0,
            reference_amplitude: 1.0,
            reference_range: 0.5,
            body_range: (0.9, 1.1),
            body_amplitude: 5.0,
            body_sway_velocity: (0.02, 0.04),
            body_sway_hz: (0.2, 0.4),
        }
    }
}

/// Everything needed to synthesize one recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub class: GestureClass,
    pub anomaly: AnomalyKind,
    pub start_frame: usize,
    pub duration: usize,
    /// Range at gesture start and end, metres.
    pub base_range: f64,
    /// Range dip at the gesture midpoint, metres.
    pub excursion: f64,
    pub sweep_deg: f64,
    pub style: UserStyle,
    pub snr_db: f64,
    pub body_range: f64,
    pub body_sway_velocity: f64,
    pub body_sway_hz: f64,
    pub seed: u64,
}

/// Per-frame truth for a synthesized recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub states: Vec<Option<TargetState>>,
    pub labels: Vec<GestureClass>,
    pub class: GestureClass,
    pub anomaly: AnomalyKind,
    pub user: String,
    /// First labelled frame (closest approach), if any.
    pub anchor: Option<usize>,
    pub seed: u64,
}

/// Draws a spec for `class`/`anomaly` as executed by `style`.
pub fn sample_spec<R: Rng>(
    class: GestureClass,
    anomaly: AnomalyKind,
    style: &UserStyle,
    kin: &KinematicsConfig,
    rng: &mut R,
) -> TrajectorySpec {
    let nominal = ((kin.nominal_duration as f64 / style.speed).round() as usize).max(2);
    let duration = match anomaly {
        AnomalyKind::Fast => kin.fast_duration,
        AnomalyKind::Slow => kin.slow_duration.min(kin.frames),
        _ => nominal,
    };
    let start_frame = if anomaly == AnomalyKind::Slow {
        0
    } else {
        let hi = kin.start_frame.1.min(kin.frames.saturating_sub(duration));
        rng.gen_range(kin.start_frame.0.min(hi)..=hi)
    };
    let mut excursion = match class {
        GestureClass::Push => kin.push_excursion,
        _ => kin.swipe_excursion,
    } * rng.gen_range(0.85..1.15);
    let mut sweep_deg = kin.sweep_deg * rng.gen_range(0.85..1.15);
    if anomaly == AnomalyKind::Wrist {
        excursion *= kin.wrist_range_scale;
        sweep_deg *= kin.wrist_sweep_scale;
    }
    TrajectorySpec {
        class,
        anomaly,
        start_frame,
        duration,
        base_range: rng.gen_range(kin.base_range.0..kin.base_range.1) + style.range_offset,
        excursion,
        sweep_deg,
        style: style.clone(),
        snr_db: kin.snr_db,
        body_range: rng.gen_range(kin.body_range.0..kin.body_range.1),
        body_sway_velocity: rng.gen_range(kin.body_sway_velocity.0..=kin.body_sway_velocity.1),
        body_sway_hz: rng.gen_range(kin.body_sway_hz.0..=kin.body_sway_hz.1),
        seed: rng.gen(),
    }
}

/// Hand state per frame (`None` while the hand is out of view).
pub fn gesture_trajectory(
    spec: &TrajectorySpec,
    cfg: &RadarConfig,
    kin: &KinematicsConfig,
) -> Result<Vec<Option<TargetState>>> {
    let frames = kin.frames;
    let mut out = vec![None; frames];
    if spec.class == GestureClass::Background {
        return Ok(out);
    }
    if spec.duration == 0 || spec.start_frame + spec.duration > frames {
        return Err(HgrError::Config(format!(
            "gesture frames {}..{} do not fit in {frames} frames",
            spec.start_frame,
            spec.start_frame + spec.duration
        )));
    }
    let d = spec.duration as f64;
    let gesture_time = d / cfg.frame_rate;
    // unit sweep direction in (azimuth, elevation), start side positive
    let dir: (f64, f64) = match spec.class {
        GestureClass::SwipeLeft => (1.0, 0.0),
        GestureClass::SwipeRight => (-1.0, 0.0),
        GestureClass::SwipeUp => (0.0, -1.0),
        GestureClass::SwipeDown => (0.0, 1.0),
        _ => (0.0, 0.0),
    };
    let (s, c) = spec.style.tilt.to_radians().sin_cos();
    let dir = (dir.0 * c - dir.1 * s, dir.0 * s + dir.1 * c);
    let v_cap = if spec.anomaly == AnomalyKind::Fast {
        kin.fast_velocity_cap * cfg.v_max()
    } else {
        f64::INFINITY
    };
    let amp_scale = if spec.anomaly == AnomalyKind::Wrist { kin.wrist_amplitude_scale } else { 1.0 };
    for k in 0..spec.duration {
        let u = (k as f64 + 0.5) / d;
        let range = spec.base_range - spec.excursion * (PI * u).sin();
        let v = (spec.excursion * PI * (PI * u).cos() / gesture_time).clamp(-v_cap, v_cap);
        let sweep = spec.sweep_deg * (PI * u).cos();
        let state = TargetState {
            range,
            radial_velocity: v,
            azimuth: (spec.style.azimuth_bias + sweep * dir.0).clamp(-90.0, 90.0),
            elevation: (spec.style.elevation_bias + sweep * dir.1).clamp(-90.0, 90.0),
            amplitude: spec.style.amplitude * amp_scale * kin.reference_amplitude * (kin.reference_range / range).powi(2),
        };
        if !(range > 0.0 && range <= cfg.max_range()) {
            return Err(HgrError::Config(format!("trajectory reaches range {range:.3} m")));
        }
        out[spec.start_frame + k] = Some(state);
    }
    Ok(out)
}

/// Closest-approach anchored labels built from the true trajectory.
fn truth_labels(states: &[Option<TargetState>], class: GestureClass, len: usize) -> (Vec<GestureClass>, Option<usize>) {
    let mut labels = vec![GestureClass::Background; states.len()];
    let anchor = states
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.map(|s| (i, s.range)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i.min(states.len().saturating_sub(len)));
    if let Some(a) = anchor {
        let end = (a + len).min(states.len());
        labels[a..end].fill(class);
    }
    (labels, anchor)
}

/// Synthesizes the radar cube of one recording together with its truth.
pub fn synthesize_recording(
    spec: &TrajectorySpec,
    cfg: &RadarConfig,
    kin: &KinematicsConfig,
) -> Result<(RadarCube, GroundTruth)> {
    cfg.validate()?;
    let states = gesture_trajectory(spec, cfg, kin)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let body_phase = rng.gen_range(0.0..2.0 * PI);
    let sway_phase = rng.gen_range(0.0..2.0 * PI);
    let sigma = noise_sigma(kin.reference_amplitude, spec.snr_db);
    let mut cube = RadarCube::zeros(kin.frames, cfg.rx, cfg.chirps, cfg.samples);
    for (f, state) in states.iter().enumerate() {
        // the body stays at one range but sways slightly, like a standing person
        let w = 2.0 * PI * spec.body_sway_hz;
        let arg = w * f as f64 / cfg.frame_rate + sway_phase;
        let displacement = -spec.body_sway_velocity / w.max(1e-9) * arg.cos();
        let body = Scatterer {
            state: TargetState {
                range: spec.body_range,
                radial_velocity: spec.body_sway_velocity * arg.sin(),
                azimuth: spec.style.azimuth_bias,
                elevation: -10.0,
                amplitude: kin.body_amplitude * kin.reference_amplitude,
            },
            phase: body_phase - 4.0 * PI * displacement / cfg.wavelength(),
        };
        let mut scatterers = vec![body];
        if let Some(s) = state {
            let phase = (4.0 * PI * s.range / cfg.wavelength()) % (2.0 * PI);
            scatterers.push(Scatterer { state: *s, phase });
        }
        let frame = simulate_frame(&scatterers, cfg, sigma, &mut rng)?;
        cube.frame_mut(f).copy_from_slice(&frame);
    }
    let class = spec.class;
    let (labels, anchor) = if class == GestureClass::Background {
        (vec![GestureClass::Background; kin.frames], None)
    } else {
        truth_labels(&states, class, kin.gesture_len)
    };
    Ok((cube, GroundTruth { states, labels, class, anomaly: spec.anomaly, user: spec.style.id.clone(), anchor, seed: spec.seed }))
}
