use rand::Rng;
use serde::{Deserialize, Serialize};

use super::normalize::NormStats;
use crate::dsp::{FeatureSequence, FEATURE_COUNT};
use crate::nn::{activation::argmax, GruNet};
use crate::Result;

/// GRU classifier together with its input normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruModel {
    pub net: GruNet,
    pub norm: NormStats,
    pub window_len: usize,
}

impl GruModel {
    pub fn new<R: Rng>(rng: &mut R, hidden: usize, classes: usize, window_len: usize, norm: NormStats) -> Self {
        GruModel { net: GruNet::init(rng, FEATURE_COUNT, hidden, classes), norm, window_len }
    }

    /// Window of normalized frames ending at `t`, left-padded with frame 0.
    pub fn window_at(&self, normalized: &[f64], t: usize) -> Vec<f64> {
        let d = FEATURE_COUNT;
        let l = self.window_len;
        let mut w = Vec::with_capacity(l * d);
        for k in 0..l {
            let src = (t + k + 1).saturating_sub(l);
            w.extend_from_slice(&normalized[src * d..(src + 1) * d]);
        }
        w
    }

    /// Normalized `T x 5` frames of a raw feature sequence.
    pub fn normalize(&self, seq: &FeatureSequence) -> Vec<f64> {
        self.norm.apply(&seq.matrix())
    }

    /// Pre-softmax logits of every frame (`T x classes`).
    pub fn frame_logits(&self, seq: &FeatureSequence) -> Vec<Vec<f64>> {
        let x = self.normalize(seq);
        (0..seq.len()).map(|t| self.net.logits(&self.window_at(&x, t))).collect()
    }

    /// Arg-max class of the window ending at each frame.
    pub fn predict_frames(&self, seq: &FeatureSequence) -> Vec<usize> {
        self.frame_logits(seq).iter().map(|l| argmax(l)).collect()
    }

    pub fn predict_many(&self, seqs: &[FeatureSequence]) -> Vec<Vec<usize>> {
        crate::par::map(seqs, |s| self.predict_frames(s))
    }

    /// Predictions for raw `T x 5` matrices already normalized.
    pub fn predict_normalized(&self, normalized: &[f64]) -> Result<Vec<usize>> {
        crate::nn::ensure_finite(normalized, "classifier input")?;
        let t = normalized.len() / FEATURE_COUNT;
        Ok((0..t).map(|i| argmax(&self.net.logits(&self.window_at(normalized, i)))).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::FrameFeatures;
    use crate::nn::Parameters;

    #[test]
    fn background_biased_model_predicts_background() {
        let mut net = GruNet::zeros(5, 16, 6);
        net.dense.bias[0] = 5.0;
        let m = GruModel { net, norm: NormStats::identity(), window_len: 22 };
        let seq = FeatureSequence::new(vec![FrameFeatures { range: 0.4, doppler: 1.0, ..Default::default() }; 100]);
        let p = m.predict_frames(&seq);
        assert_eq!(p.len(), 100);
        assert!(p.iter().all(|&c| c == 0));
        assert_eq!(m.net.param_count(), 5 * 48 + 16 * 48 + 48 + 16 * 6 + 6);
    }

    #[test]
    fn padded_windows_replicate_frame_zero() {
        let m = GruModel { net: GruNet::zeros(5, 4, 6), norm: NormStats::identity(), window_len: 4 };
        let x: Vec<f64> = (0..30).map(|v| v as f64).collect();
        assert_eq!(m.window_at(&x, 1), [&x[0..5], &x[0..5], &x[0..5], &x[5..10]].concat());
        assert_eq!(m.window_at(&x, 5), x[10..30].to_vec());
    }
}
