use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::normalize::NormStats;
use super::predict::GruModel;
use super::window::WindowedDataset;
use crate::dsp::FEATURE_COUNT;
use crate::nn::activation::{argmax, softmax_in_place};
use crate::nn::{adam_step, flatten, AdamState, GradientSet, GruNet};
use crate::types::GestureClass;
use crate::{HgrError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub hidden: usize,
    pub window_len: usize,
    /// Windows per independently computed gradient chunk.
    pub chunk: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 100, batch_size: 32, lr: 1e-3, hidden: 16, window_len: 22, chunk: 8, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    /// Set for the final epoch only.
    pub train_acc: Option<f64>,
    pub val_loss: Option<f64>,
    pub val_acc: Option<f64>,
}

pub type TrainHistory = Vec<EpochStats>;

/// Extension points used by the continual-learning regularizers.
pub trait TrainHooks {
    /// Adds the gradient of an extra penalty at `params` to `grad` and
    /// returns the penalty value.
    fn penalty(&self, _params: &[f64], _grad: &mut [f64]) -> f64 {
        0.0
    }

    /// Observes one optimizer step: loss gradient and parameters before and
    /// after the update.
    fn after_step(&mut self, _grad: &[f64], _before: &[f64], _after: &[f64]) {}
}

pub struct NoHooks;
impl TrainHooks for NoHooks {}

/// Consecutive train / validation / test ranges over `n` time-ordered items.
pub fn temporal_split(n: usize, val_fraction: f64, test_fraction: f64) -> (Range<usize>, Range<usize>, Range<usize>) {
    let n_test = (n as f64 * test_fraction).round() as usize;
    let n_val = (n as f64 * val_fraction).round() as usize;
    let n_train = n.saturating_sub(n_val + n_test);
    (0..n_train, n_train..n_train + n_val, n_train + n_val..n)
}

fn batch_gradient(net: &GruNet, data: &WindowedDataset, idx: &[usize], chunk: usize) -> Result<(f64, GradientSet)> {
    let w = data.len * FEATURE_COUNT;
    let chunks: Vec<&[usize]> = idx.chunks(chunk.max(1)).collect();
    let parts = crate::par::map(&chunks, |c| {
        let mut windows = Vec::with_capacity(c.len() * w);
        let mut labels = Vec::with_capacity(c.len());
        for &i in c.iter() {
            windows.extend_from_slice(data.window(i));
            labels.push(data.labels[i]);
        }
        net.loss_and_gradient_sum(&windows, &labels, data.len, false)
    });
    let mut total = GradientSet::zeros_like(net);
    let mut loss = 0.0;
    for p in parts {
        let (l, g) = p?;
        loss += l;
        total.add_assign(&g)?;
    }
    let n = idx.len() as f64;
    total.scale(1.0 / n);
    Ok((loss / n, total))
}

/// Mean cross-entropy and window accuracy of `net` on `data`.
pub fn evaluate_windows(net: &GruNet, data: &WindowedDataset) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(HgrError::Data("empty evaluation set".into()));
    }
    let per = crate::par::map_range(data.count(), |i| {
        let mut p = net.logits(data.window(i));
        softmax_in_place(&mut p);
        let y = data.labels[i];
        (-(p[y].max(crate::nn::loss::PROB_FLOOR)).ln(), argmax(&p) == y)
    });
    let n = per.len() as f64;
    let loss = per.iter().map(|x| x.0).sum::<f64>() / n;
    let acc = per.iter().filter(|x| x.1).count() as f64 / n;
    Ok((loss, acc))
}

/// Minibatch Adam on `net`. Each batch is split into fixed chunks whose
/// summed gradients are reduced in order, so results do not depend on the
/// number of worker threads.
pub fn train_network(
    net: &mut GruNet,
    train: &WindowedDataset,
    val: Option<&WindowedDataset>,
    cfg: &TrainConfig,
    hooks: &mut dyn TrainHooks,
) -> Result<TrainHistory> {
    if train.is_empty() {
        return Err(HgrError::Data("no training windows".into()));
    }
    if cfg.batch_size == 0 {
        return Err(HgrError::Config("batch_size must be positive".into()));
    }
    if let Some(&bad) = train.labels.iter().find(|&&y| y >= net.classes()) {
        return Err(HgrError::Label { label: bad, classes: net.classes() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0ff5);
    let mut adam = AdamState::new(net, cfg.lr);
    let mut order: Vec<usize> = (0..train.count()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let (loss, mut grad) = batch_gradient(net, train, batch, cfg.chunk).map_err(|e| match e {
                HgrError::Numeric(d) => HgrError::Training { epoch, detail: d },
                other => other,
            })?;
            let before = flatten(net);
            let loss_grad = grad.flat();
            let mut extra = vec![0.0; before.len()];
            let pen = hooks.penalty(&before, &mut extra);
            grad.add_flat(&extra)?;
            if !(loss + pen).is_finite() || !grad.is_finite() {
                return Err(HgrError::Training { epoch, detail: "non-finite loss or gradient".into() });
            }
            adam_step(net, &grad, &mut adam)?;
            let after = flatten(net);
            hooks.after_step(&loss_grad, &before, &after);
            loss_sum += loss * batch.len() as f64;
        }
        let (train_loss, train_acc) = (loss_sum / train.count() as f64, None);
        let (val_loss, val_acc) = match val.filter(|v| !v.is_empty()) {
            Some(v) => {
                let (l, a) = evaluate_windows(net, v)?;
                (Some(l), Some(a))
            }
            None => (None, None),
        };
        log::debug!("epoch {epoch}: loss {train_loss:.4} val {val_loss:?} acc {val_acc:?}");
        history.push(EpochStats { epoch, train_loss, train_acc, val_loss, val_acc });
    }
    // train accuracy of the final parameters only
    if let Some(last) = history.last_mut() {
        last.train_acc = Some(evaluate_windows(net, train)?.1);
    }
    Ok(history)
}

/// Fresh classifier trained on `train` windows (already normalized with
/// `norm`).
pub fn train_baseline(
    train: &WindowedDataset,
    val: Option<&WindowedDataset>,
    norm: NormStats,
    cfg: &TrainConfig,
    hooks: &mut dyn TrainHooks,
) -> Result<(GruModel, TrainHistory)> {
    let mut classes: Vec<usize> = train.labels.clone();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(HgrError::Data(format!("training needs at least two classes, found {classes:?}")));
    }
    if train.len != cfg.window_len {
        return Err(HgrError::Shape(format!("windows of {} frames, config expects {}", train.len, cfg.window_len)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = GruModel::new(&mut rng, cfg.hidden, GestureClass::COUNT, cfg.window_len, norm);
    let history = train_network(&mut model.net, train, val, cfg, hooks)?;
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_temporal() {
        let (a, b, c) = temporal_split(100, 0.1, 0.1);
        assert_eq!((a, b, c), (0..80, 80..90, 90..100));
        let (a, _, c) = temporal_split(7, 0.1, 0.1);
        assert_eq!(a.len() + c.len() + 1, 7);
    }

    fn toy(n: usize) -> WindowedDataset {
        let mut d = WindowedDataset::empty(4);
        for i in 0..n {
            let y = i % 2;
            let v = if y == 1 { 1.0 } else { -1.0 };
            d.windows.extend(std::iter::repeat(v).take(20));
            d.labels.push(y);
            d.provenance.push((i, 0));
        }
        d
    }

    #[test]
    fn learns_a_separable_toy_problem_deterministically() {
        let cfg = TrainConfig { epochs: 30, window_len: 4, hidden: 4, seed: 3, ..TrainConfig::default() };
        let d = toy(64);
        let (m1, h) = train_baseline(&d, Some(&d), NormStats::identity(), &cfg, &mut NoHooks).unwrap();
        assert!(h.last().unwrap().val_acc.unwrap() > 0.99);
        let (m2, _) = train_baseline(&d, None, NormStats::identity(), &cfg, &mut NoHooks).unwrap();
        assert_eq!(m1, m2);
    }

    #[test]
    fn single_class_is_rejected() {
        let mut d = toy(10);
        d.labels.iter_mut().for_each(|y| *y = 1);
        let cfg = TrainConfig { window_len: 4, ..TrainConfig::default() };
        assert!(matches!(train_baseline(&d, None, NormStats::identity(), &cfg, &mut NoHooks), Err(HgrError::Data(_))));
    }

    #[test]
    fn divergence_reports_epoch() {
        let mut d = toy(8);
        d.windows[0] = f64::NAN;
        let cfg = TrainConfig { window_len: 4, epochs: 2, ..TrainConfig::default() };
        let r = train_baseline(&d, None, NormStats::identity(), &cfg, &mut NoHooks);
        assert!(matches!(r, Err(HgrError::Training { epoch: 0, .. })), "{r:?}");
    }
}
