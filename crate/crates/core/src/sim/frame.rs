use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dsp::RadarConfig;
use crate::{HgrError, Result};

/// Kinematic state of a point scatterer during one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetState {
    /// metres
    pub range: f64,
    /// m/s, positive when approaching
    pub radial_velocity: f64,
    /// degrees
    pub azimuth: f64,
    /// degrees
    pub elevation: f64,
    pub amplitude: f64,
}

/// A target plus the carrier phase it starts the frame with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scatterer {
    pub state: TargetState,
    pub phase: f64,
}

/// Per-sample noise deviation for `snr_db` relative to a sinusoid of
/// amplitude `reference`.
pub fn noise_sigma(reference: f64, snr_db: f64) -> f64 {
    reference / 2f64.sqrt() * 10f64.powf(-snr_db / 20.0)
}

fn check_state(s: &TargetState, cfg: &RadarConfig) -> Result<()> {
    let finite = [s.range, s.radial_velocity, s.azimuth, s.elevation, s.amplitude].iter().all(|v| v.is_finite());
    if !finite {
        return Err(HgrError::Numeric("non-finite target state".into()));
    }
    if s.range < 0.0 || s.range > cfg.max_range() + 1e-12 {
        return Err(HgrError::Config(format!("target range {:.3} m outside [0, {:.3}] m", s.range, cfg.max_range())));
    }
    if s.azimuth.abs() > 90.0 || s.elevation.abs() > 90.0 || s.amplitude < 0.0 {
        return Err(HgrError::Config("target angles must lie in [-90, 90] and amplitude be >= 0".into()));
    }
    Ok(())
}

/// IF samples of one frame (`rx x chirps x samples`), summed over scatterers,
/// plus white Gaussian noise of deviation `sigma`.
///
/// Beat frequency is placed so that range `R` falls on bin `R / range_res`;
/// the chirp-to-chirp phase advance is `2 pi v / (2 v_max)` so that the
/// fftshifted Doppler bin is `N/2 + v / v_res`.
pub fn simulate_frame<R: Rng>(
    scatterers: &[Scatterer],
    cfg: &RadarConfig,
    sigma: f64,
    rng: &mut R,
) -> Result<Vec<f32>> {
    for s in scatterers {
        check_state(&s.state, cfg)?;
    }
    let (rx, chirps, samples) = (cfg.rx, cfg.chirps, cfg.samples);
    let lambda = cfg.wavelength();
    let d = cfg.spacing();
    let mut out = vec![0.0f64; rx * chirps * samples];
    for s in scatterers {
        let st = &s.state;
        if st.amplitude == 0.0 {
            continue;
        }
        let beat = st.range / cfg.range_res() / samples as f64;
        let dopp = st.radial_velocity / (2.0 * cfg.v_max());
        let mut rx_phase = vec![0.0; rx];
        let (a0, a1) = cfg.azimuth_pair;
        let (e0, e1) = cfg.elevation_pair;
        rx_phase[a1] = rx_phase[a0] + 2.0 * PI * d * st.azimuth.to_radians().sin() / lambda;
        rx_phase[e1] = rx_phase[e0] + 2.0 * PI * d * st.elevation.to_radians().sin() / lambda;
        // cos(a + b) = cos a cos b - sin a sin b with the fast-time tone tabulated once
        let (tone_sin, tone_cos): (Vec<f64>, Vec<f64>) =
            (0..samples).map(|n| (2.0 * PI * beat * n as f64).sin_cos()).unzip();
        for (r, ph_rx) in rx_phase.iter().enumerate() {
            for c in 0..chirps {
                let (ps, pc) = (2.0 * PI * dopp * c as f64 + ph_rx + s.phase).sin_cos();
                let (ps, pc) = (st.amplitude * ps, st.amplitude * pc);
                let base = (r * chirps + c) * samples;
                for ((o, ts), tc) in out[base..base + samples].iter_mut().zip(&tone_sin).zip(&tone_cos) {
                    *o += pc * tc - ps * ts;
                }
            }
        }
    }
    if sigma > 0.0 {
        for v in out.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += sigma * z;
        }
    }
    Ok(out.into_iter().map(|v| v as f32).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{doppler_at_bin, integrate_magnitude, range_profiles, remove_static_clutter};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn target(range: f64, v: f64) -> Scatterer {
        Scatterer {
            state: TargetState { range, radial_velocity: v, azimuth: 0.0, elevation: 0.0, amplitude: 1.0 },
            phase: 0.3,
        }
    }

    #[test]
    fn range_bin_of_a_target() {
        let cfg = RadarConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = simulate_frame(&[target(0.6, 1.0)], &cfg, 0.0, &mut rng).unwrap();
        let e = integrate_magnitude(&range_profiles(&f, &cfg).unwrap());
        let best = e.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        assert_eq!(best, 16);
    }

    #[test]
    fn beyond_max_range_is_a_config_error() {
        let cfg = RadarConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(simulate_frame(&[target(1.2, 0.0)], &cfg, 0.0, &mut rng).is_ok());
        assert!(matches!(simulate_frame(&[target(1.25, 0.0)], &cfg, 0.0, &mut rng), Err(HgrError::Config(_))));
    }

    #[test]
    fn v_max_lands_on_the_spectrum_edge() {
        let cfg = RadarConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = simulate_frame(&[target(0.6, cfg.v_max())], &cfg, 0.0, &mut rng).unwrap();
        let p = remove_static_clutter(&range_profiles(&f, &cfg).unwrap());
        let d = doppler_at_bin(&p, 16, &cfg).unwrap();
        // +v_max aliases onto the most negative shifted bin
        assert_eq!(d.doppler_bin, 0);
    }

    #[test]
    fn zero_amplitude_is_pure_noise() {
        let cfg = RadarConfig::default();
        let mut t = target(0.5, 0.0);
        t.state.amplitude = 0.0;
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        let f = simulate_frame(&[t], &cfg, 0.1, &mut a).unwrap();
        let g = simulate_frame(&[], &cfg, 0.1, &mut b).unwrap();
        assert_eq!(f, g);
        let var = f.iter().map(|v| (*v as f64).powi(2)).sum::<f64>() / f.len() as f64;
        assert!((var.sqrt() - 0.1).abs() < 0.005);
    }
}
