use serde::{Deserialize, Serialize};

use crate::dsp::FEATURE_COUNT;
use crate::{HgrError, Result};

pub const STD_FLOOR: f64 = 1e-6;

/// Per-feature z-score statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: [f64; FEATURE_COUNT],
    pub std: [f64; FEATURE_COUNT],
}

impl NormStats {
    pub fn identity() -> Self {
        NormStats { mean: [0.0; FEATURE_COUNT], std: [1.0; FEATURE_COUNT] }
    }

    /// Fits on row-major `T x 5` blocks.
    pub fn fit<'a, I: IntoIterator<Item = &'a [f64]>>(blocks: I) -> Result<Self> {
        let mut n = 0usize;
        let mut sum = [0.0; FEATURE_COUNT];
        let mut sq = [0.0; FEATURE_COUNT];
        let blocks: Vec<&[f64]> = blocks.into_iter().collect();
        for b in &blocks {
            for row in b.chunks_exact(FEATURE_COUNT) {
                n += 1;
                for j in 0..FEATURE_COUNT {
                    sum[j] += row[j];
                }
            }
        }
        if n == 0 {
            return Err(HgrError::Data("no frames to fit normalization on".into()));
        }
        let mean = sum.map(|s| s / n as f64);
        for b in &blocks {
            for row in b.chunks_exact(FEATURE_COUNT) {
                for j in 0..FEATURE_COUNT {
                    sq[j] += (row[j] - mean[j]).powi(2);
                }
            }
        }
        let std = sq.map(|s| (s / n as f64).sqrt().max(STD_FLOOR));
        let stats = NormStats { mean, std };
        stats.check()?;
        Ok(stats)
    }

    pub fn check(&self) -> Result<()> {
        let ok = self.mean.iter().all(|v| v.is_finite()) && self.std.iter().all(|v| v.is_finite() && *v > 0.0);
        if ok {
            Ok(())
        } else {
            Err(HgrError::Numeric("normalization statistics".into()))
        }
    }

    pub fn apply(&self, frames: &[f64]) -> Vec<f64> {
        frames.iter().enumerate().map(|(i, v)| (v - self.mean[i % FEATURE_COUNT]) / self.std[i % FEATURE_COUNT]).collect()
    }

    pub fn invert(&self, frames: &[f64]) -> Vec<f64> {
        frames.iter().enumerate().map(|(i, v)| v * self.std[i % FEATURE_COUNT] + self.mean[i % FEATURE_COUNT]).collect()
    }
}

/// Per-feature min-max scaling to [0, 1] (clamped), used for the VAE input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxStats {
    pub min: [f64; FEATURE_COUNT],
    pub max: [f64; FEATURE_COUNT],
}

impl MinMaxStats {
    pub fn fit<'a, I: IntoIterator<Item = &'a [f64]>>(blocks: I) -> Result<Self> {
        let mut min = [f64::INFINITY; FEATURE_COUNT];
        let mut max = [f64::NEG_INFINITY; FEATURE_COUNT];
        for b in blocks {
            for row in b.chunks_exact(FEATURE_COUNT) {
                for j in 0..FEATURE_COUNT {
                    min[j] = min[j].min(row[j]);
                    max[j] = max[j].max(row[j]);
                }
            }
        }
        if min.iter().chain(&max).any(|v| !v.is_finite()) {
            return Err(HgrError::Data("no finite frames to fit min-max scaling on".into()));
        }
        Ok(MinMaxStats { min, max })
    }

    pub fn apply(&self, frames: &[f64]) -> Vec<f64> {
        frames
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let j = i % FEATURE_COUNT;
                let span = (self.max[j] - self.min[j]).max(STD_FLOOR);
                ((v - self.min[j]) / span).clamp(0.0, 1.0)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zscore_on_the_fitting_data() {
        let data: Vec<f64> = (0..500).map(|i| (i as f64 * 0.37).sin() * (1 + i % 5) as f64).collect();
        let s = NormStats::fit([data.as_slice()]).unwrap();
        let z = s.apply(&data);
        for j in 0..5 {
            let col: Vec<f64> = z.iter().skip(j).step_by(5).copied().collect();
            let m = col.iter().sum::<f64>() / col.len() as f64;
            let v = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / col.len() as f64;
            assert!(m.abs() < 1e-9 && (v - 1.0).abs() < 1e-9);
        }
        let back = s.invert(&z);
        assert!(back.iter().zip(&data).all(|(a, b)| (a - b).abs() < 1e-9));
    }

    #[test]
    fn constant_feature_maps_to_zero() {
        let data = vec![3.0; 50];
        let s = NormStats::fit([data.as_slice()]).unwrap();
        assert_eq!(s.std, [STD_FLOOR; 5]);
        assert!(s.apply(&data).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn minmax_clamps() {
        let data: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let s = MinMaxStats::fit([data.as_slice()]).unwrap();
        let y = s.apply(&data);
        assert!(y.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(s.apply(&[-100.0; 5]), vec![0.0; 5]);
    }
}
