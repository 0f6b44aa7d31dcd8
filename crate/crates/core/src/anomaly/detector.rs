//! VAE training on nominal recordings and per-recording reconstruction error.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dsp::{FeatureSequence, FEATURE_COUNT};
use crate::model::MinMaxStats;
use crate::nn::{adam_step, AdamState, Mode, Vae, VaeConfig};
use crate::{HgrError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VaeTrainConfig {
    pub vae: VaeConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub patience: usize,
    /// Share of recordings held out for early stopping.
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for VaeTrainConfig {
    fn default() -> Self {
        VaeTrainConfig {
            vae: VaeConfig::default(),
            epochs: 250,
            batch_size: 16,
            lr: 1e-3,
            patience: 20,
            val_fraction: 0.35,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeEpoch {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Mean validation reconstruction error (inference mode).
    pub val_rec: f64,
}

/// Tracks the best validation loss and counts epochs without improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best: f64,
    pub best_epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping { patience, best: f64::INFINITY, best_epoch: 0, stale: 0 }
    }

    /// Records `loss` for `epoch`; returns true when it is a new best.
    pub fn observe(&mut self, epoch: usize, loss: f64) -> bool {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            self.stale = 0;
            true
        } else {
            self.stale += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.stale >= self.patience
    }
}

/// Trained VAE plus the min-max scaling of its input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeDetector {
    pub vae: Vae,
    pub scaling: MinMaxStats,
}

impl VaeDetector {
    pub fn frames(&self) -> usize {
        self.vae.config.input_dim / FEATURE_COUNT
    }

    /// Flattened, scaled VAE input for one recording.
    pub fn input(&self, seq: &FeatureSequence) -> Result<Vec<f64>> {
        recording_input(seq, &self.scaling, self.frames())
    }

    pub fn reconstruct(&self, seq: &FeatureSequence) -> Result<Vec<f64>> {
        let x = self.input(seq)?;
        let n = x.len();
        let x = Array2::from_shape_vec((1, n), x).map_err(|e| HgrError::Shape(e.to_string()))?;
        Ok(self.vae.reconstruct(&x)?.into_raw_vec_and_offset().0)
    }

    /// `||x - x_hat||^2` per recording, scored in parallel blocks.
    pub fn errors(&self, seqs: &[&FeatureSequence]) -> Result<Vec<f64>> {
        let inputs = seqs.iter().map(|s| self.input(s)).collect::<Result<Vec<_>>>()?;
        errors_of(&self.vae, &inputs)
    }

    pub fn error(&self, seq: &FeatureSequence) -> Result<f64> {
        Ok(self.errors(&[seq])?[0])
    }
}

fn recording_input(seq: &FeatureSequence, scaling: &MinMaxStats, frames: usize) -> Result<Vec<f64>> {
    if seq.len() != frames {
        return Err(HgrError::Shape(format!("VAE expects {frames}-frame recordings, got {}", seq.len())));
    }
    Ok(scaling.apply(&seq.matrix()))
}

fn stack(rows: &[&Vec<f64>], width: usize) -> Result<Array2<f64>> {
    let mut data = Vec::with_capacity(rows.len() * width);
    for r in rows {
        data.extend_from_slice(r);
    }
    Array2::from_shape_vec((rows.len(), width), data).map_err(|e| HgrError::Shape(e.to_string()))
}

fn errors_of(vae: &Vae, inputs: &[Vec<f64>]) -> Result<Vec<f64>> {
    let width = vae.config.input_dim;
    let refs: Vec<&Vec<f64>> = inputs.iter().collect();
    let blocks: Vec<&[&Vec<f64>]> = refs.chunks(64).collect();
    let parts = crate::par::map(&blocks, |b| vae.reconstruction_errors(&stack(b, width)?));
    let mut out = Vec::with_capacity(inputs.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

fn eval_loss(vae: &Vae, inputs: &[&Vec<f64>]) -> Result<(f64, f64)> {
    let width = vae.config.input_dim;
    let mut rng = rand::rngs::mock::StepRng::new(0, 0);
    let x = stack(inputs, width)?;
    let noise = Array2::zeros((x.nrows(), vae.config.latent));
    let pass = vae.forward(&x, &noise, Mode::Infer, &mut rng)?;
    Ok((pass.loss(), pass.rec_loss))
}

/// Trains a VAE on nominal recordings with early stopping on a held-out
/// share; the best-validation weights are returned.
pub fn train_vae(seqs: &[&FeatureSequence], cfg: &VaeTrainConfig) -> Result<(VaeDetector, Vec<VaeEpoch>)> {
    if cfg.vae.input_dim % FEATURE_COUNT != 0 {
        return Err(HgrError::Config("VAE input_dim must be a multiple of the feature count".into()));
    }
    if cfg.batch_size == 0 || cfg.epochs == 0 {
        return Err(HgrError::Config("VAE epochs and batch_size must be positive".into()));
    }
    if !(0.0..1.0).contains(&cfg.val_fraction) {
        return Err(HgrError::Config("val_fraction must lie in [0, 1)".into()));
    }
    if seqs.len() < 100 {
        log::warn!("training the VAE on only {} recordings", seqs.len());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..seqs.len()).collect();
    order.shuffle(&mut rng);
    let n_val = (seqs.len() as f64 * cfg.val_fraction).round() as usize;
    let (val_idx, train_idx) = order.split_at(n_val);
    if train_idx.is_empty() || val_idx.is_empty() {
        return Err(HgrError::Data(format!("cannot split {} recordings for VAE training", seqs.len())));
    }
    let frames = cfg.vae.input_dim / FEATURE_COUNT;
    let mats: Vec<Vec<f64>> = train_idx.iter().map(|&i| seqs[i].matrix()).collect();
    let scaling = MinMaxStats::fit(mats.iter().map(|m| m.as_slice()))?;
    let train: Vec<Vec<f64>> =
        train_idx.iter().map(|&i| recording_input(seqs[i], &scaling, frames)).collect::<Result<_>>()?;
    let val: Vec<Vec<f64>> =
        val_idx.iter().map(|&i| recording_input(seqs[i], &scaling, frames)).collect::<Result<_>>()?;
    let val_refs: Vec<&Vec<f64>> = val.iter().collect();

    let mut vae = Vae::new(cfg.vae.clone(), &mut rng);
    let mut adam = AdamState::new(&vae, cfg.lr);
    let mut stop = EarlyStopping::new(cfg.patience);
    let mut best = vae.clone();
    let mut history = Vec::new();
    let mut batch_order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..cfg.epochs {
        batch_order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in batch_order.chunks(cfg.batch_size) {
            let rows: Vec<&Vec<f64>> = batch.iter().map(|&i| &train[i]).collect();
            let x = stack(&rows, cfg.vae.input_dim)?;
            let noise = Array2::from_shape_simple_fn((rows.len(), cfg.vae.latent), || rng.sample(StandardNormal));
            let pass = vae.forward(&x, &noise, Mode::Train, &mut rng).map_err(|e| match e {
                HgrError::Numeric(d) => HgrError::Training { epoch, detail: d },
                other => other,
            })?;
            let grad = vae.backward(&x, &pass);
            if !grad.is_finite() {
                return Err(HgrError::Training { epoch, detail: "non-finite VAE gradient".into() });
            }
            vae.update_running(&pass);
            adam_step(&mut vae, &grad, &mut adam)?;
            loss_sum += pass.loss() * rows.len() as f64;
        }
        let (val_loss, val_rec) = eval_loss(&vae, &val_refs).map_err(|e| match e {
            HgrError::Numeric(d) => HgrError::Training { epoch, detail: d },
            other => other,
        })?;
        let train_loss = loss_sum / train.len() as f64;
        log::debug!("vae epoch {epoch}: loss {train_loss:.3} val {val_loss:.3} rec {val_rec:.3}");
        history.push(VaeEpoch { epoch, train_loss, val_loss, val_rec });
        if stop.observe(epoch, val_loss) {
            best = vae.clone();
        }
        if stop.should_stop() {
            log::info!("vae early stop at epoch {epoch}, best {}", stop.best_epoch);
            break;
        }
    }
    Ok((VaeDetector { vae: best, scaling }, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn early_stop_fires_after_patience_stagnant_epochs() {
        let mut s = EarlyStopping::new(20);
        assert!(s.observe(0, 1.0));
        for e in 1..20 {
            assert!(!s.observe(e, 1.0));
            assert!(!s.should_stop());
        }
        s.observe(20, 1.0);
        assert!(s.should_stop());
        assert_eq!(s.best_epoch, 0);
    }

    #[test]
    fn improvement_resets_patience() {
        let mut s = EarlyStopping::new(2);
        s.observe(0, 3.0);
        s.observe(1, 3.0);
        assert!(s.observe(2, 2.0));
        s.observe(3, 2.5);
        assert!(!s.should_stop());
    }
}
