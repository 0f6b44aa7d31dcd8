//! Expected-gradients attribution of a class logit over one input window.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::{refine_labels, FeatureSequence, FEATURE_COUNT};
use crate::model::{extended_window, gesture_segment, GruModel};
use crate::nn::GruNet;
use crate::{HgrError, Result};

/// A scalar model output with an input gradient.
pub trait Explainable: Sync {
    fn input_len(&self) -> usize;
    /// Output for `class` at `x` and its gradient with respect to `x`.
    fn output_and_gradient(&self, x: &[f64], class: usize) -> (f64, Vec<f64>);

    fn output(&self, x: &[f64], class: usize) -> f64 {
        self.output_and_gradient(x, class).0
    }
}

/// GRU window classifier; the explained output is the last-frame logit.
pub struct WindowLogit<'a> {
    pub net: &'a GruNet,
    pub window_len: usize,
}

impl Explainable for WindowLogit<'_> {
    fn input_len(&self) -> usize {
        self.window_len * self.net.input_dim()
    }

    fn output_and_gradient(&self, x: &[f64], class: usize) -> (f64, Vec<f64>) {
        self.net.logit_input_gradient(x, class)
    }

    fn output(&self, x: &[f64], class: usize) -> f64 {
        self.net.logits(x)[class]
    }
}

/// `f(x) = sum_c w_c . x + b_c`, one weight vector per class.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSurrogate {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl Explainable for LinearSurrogate {
    fn input_len(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    fn output_and_gradient(&self, x: &[f64], class: usize) -> (f64, Vec<f64>) {
        let w = &self.weights[class];
        (w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.bias[class], w.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionMatrix {
    /// Label frame of the explained window.
    pub window_id: usize,
    pub rows: usize,
    /// Row-major `rows x 5` attributions.
    pub values: Vec<f64>,
    pub base_value: f64,
    pub target: usize,
    /// Model output at the explained input.
    pub output: f64,
}

impl AttributionMatrix {
    pub fn at(&self, t: usize, d: usize) -> f64 {
        self.values[t * FEATURE_COUNT + d]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `|base + sum(phi) - f(x)| / |f(x)|`.
    pub fn completeness_error(&self) -> f64 {
        (self.base_value + self.total() - self.output).abs() / self.output.abs().max(1e-12)
    }
}

/// Attributions averaged over `n_samples` points `x' + alpha (x - x')`,
/// with `x'` taken round-robin from `background`. The `alpha` values used
/// with one background point are stratified over `(0, 1)`: the `j`-th of its
/// `m` draws is uniform on `[j/m, (j+1)/m)`.
pub fn expected_gradients<M: Explainable + ?Sized>(
    model: &M,
    x: &[f64],
    background: &[Vec<f64>],
    n_samples: usize,
    target: usize,
    rng: &mut impl Rng,
) -> Result<AttributionMatrix> {
    if background.is_empty() {
        return Err(HgrError::Config("expected gradients need a nonempty background set".into()));
    }
    if n_samples == 0 {
        return Err(HgrError::Config("n_samples must be positive".into()));
    }
    let n = model.input_len();
    if x.len() != n || background.iter().any(|b| b.len() != n) {
        return Err(HgrError::Shape(format!("attribution input must have {n} values")));
    }
    if x.len() % FEATURE_COUNT != 0 {
        return Err(HgrError::Shape("attribution input is not a whole number of frames".into()));
    }
    let mut phi = vec![0.0; n];
    let mut point = vec![0.0; n];
    for s in 0..n_samples {
        let b = background.len();
        let xb = &background[s % b];
        let m = n_samples / b + usize::from(s % b < n_samples % b);
        let alpha = ((s / b) as f64 + rng.gen::<f64>()) / m as f64;
        for i in 0..n {
            point[i] = xb[i] + alpha * (x[i] - xb[i]);
        }
        let (_, g) = model.output_and_gradient(&point, target);
        for i in 0..n {
            phi[i] += (x[i] - xb[i]) * g[i];
        }
    }
    for p in &mut phi {
        *p /= n_samples as f64;
    }
    crate::nn::ensure_finite(&phi, "attribution")?;
    let base_value = background.iter().map(|b| model.output(b, target)).sum::<f64>() / background.len() as f64;
    Ok(AttributionMatrix {
        window_id: 0,
        rows: n / FEATURE_COUNT,
        values: phi,
        base_value,
        target,
        output: model.output(x, target),
    })
}

/// Label frames whose windows are explained: the tolerance region around
/// the labelled gesture, or around the refined-label anchor when the labels
/// carry no gesture.
pub fn explained_frames(seq: &FeatureSequence, labels: &[usize], gesture_len: usize, amp_ratio: f64) -> Result<Vec<usize>> {
    if labels.len() != seq.len() {
        return Err(HgrError::Shape(format!("{} labels for {} frames", labels.len(), seq.len())));
    }
    let segment = match gesture_segment(labels) {
        Some(s) => s,
        None => {
            let max_peak = seq.frames.iter().map(|f| f.peak).fold(0.0, f64::max);
            // class only affects the produced labels, not the anchor
            let r = refine_labels(&seq.frames, crate::GestureClass::Push, gesture_len, amp_ratio * max_peak)?;
            (r.anchor, (r.anchor + gesture_len - 1).min(seq.len() - 1))
        }
    };
    let (lo, hi) = extended_window(segment, seq.len());
    Ok((lo..=hi).collect())
}

/// One attribution matrix per explained window of a recording, no
/// averaging across windows. Window `t` uses its own RNG stream of `seed`.
pub fn gesture_attributions(
    model: &GruModel,
    seq: &FeatureSequence,
    frames: &[usize],
    background: &[Vec<f64>],
    target: usize,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<AttributionMatrix>> {
    let x = model.normalize(seq);
    let f = WindowLogit { net: &model.net, window_len: model.window_len };
    crate::par::map(frames, |&t| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        let mut m = expected_gradients(&f, &model.window_at(&x, t), background, n_samples, target, &mut rng)?;
        m.window_id = t;
        Ok(m)
    })
    .into_iter()
    .collect()
}

/// Up to `max` normalized windows drawn evenly from the label frames of
/// `seqs`, used as the attribution background.
pub fn background_windows(model: &GruModel, seqs: &[&FeatureSequence], max: usize) -> Vec<Vec<f64>> {
    let total: usize = seqs.iter().map(|s| s.len()).sum();
    if total == 0 || max == 0 {
        return Vec::new();
    }
    let step = total.div_ceil(max).max(1);
    let mut out = Vec::new();
    let mut k = 0;
    for s in seqs {
        let x = model.normalize(s);
        for t in 0..s.len() {
            if k % step == 0 {
                out.push(model.window_at(&x, t));
            }
            k += 1;
        }
    }
    out
}
