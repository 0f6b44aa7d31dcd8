use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::importance::{fisher_diagonal, ImportanceWeights, QuadraticPenalty};
use crate::dataset::{windows_of, Recording};
use crate::model::{gesture_accuracy, train_network, GruModel, NoHooks, TrainConfig, TrainHooks};
use crate::nn::Parameters;
use crate::types::GestureClass;
use crate::{HgrError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Plain,
    Er,
    Ewc,
    Si,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Plain, Method::Er, Method::Ewc, Method::Si];

    pub fn name(self) -> &'static str {
        match self {
            Method::Plain => "plain",
            Method::Er => "er",
            Method::Ewc => "ewc",
            Method::Si => "si",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = HgrError;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| HgrError::Config(format!("unknown calibration method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    pub method: Method,
    /// Recordings per class replayed from the original training data.
    pub n_train: usize,
    /// Recordings per class from the target user.
    pub n_user: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub si_lr: f64,
    pub lambda_ewc: f64,
    pub lambda_si: f64,
    pub si_xi: f64,
    /// Upper bound on windows used for the Fisher estimate.
    pub fisher_windows: usize,
    pub chunk: usize,
    pub seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            method: Method::Er,
            n_train: 50,
            n_user: 10,
            epochs: 10,
            batch_size: 32,
            lr: 1e-3,
            si_lr: 1e-4,
            lambda_ewc: 10.0,
            lambda_si: 0.01,
            si_xi: 0.01,
            fisher_windows: 2048,
            chunk: 8,
            seed: 0,
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_user == 0 {
            return Err(HgrError::Config("n_user must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(HgrError::Config("batch_size must be positive".into()));
        }
        if self.lambda_ewc < 0.0 || self.lambda_si < 0.0 || self.si_xi <= 0.0 {
            return Err(HgrError::Config("regularization strengths must be >= 0 and si_xi > 0".into()));
        }
        Ok(())
    }
}

fn take_per_class<'a>(pool: &[&'a Recording], n: usize, rng: &mut ChaCha8Rng, what: &str) -> Result<Vec<&'a Recording>> {
    let mut out = Vec::new();
    if n == 0 {
        return Ok(out);
    }
    for class in GestureClass::ALL {
        let mut candidates: Vec<&Recording> = pool.iter().copied().filter(|r| r.meta.class == class).collect();
        if candidates.len() < n {
            return Err(HgrError::Data(format!(
                "{what} pool has {} recordings of {class}, {n} requested",
                candidates.len()
            )));
        }
        let (chosen, _) = candidates.partial_shuffle(rng, n);
        out.extend_from_slice(chosen);
    }
    Ok(out)
}

/// Stratified selection of `n_train` / `n_user` recordings per class from the
/// two pools, shuffled together.
pub fn build_er_dataset<'a>(
    train_pool: &[&'a Recording],
    user_pool: &[&'a Recording],
    n_train: usize,
    n_user: usize,
    seed: u64,
) -> Result<Vec<&'a Recording>> {
    let mut user_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7a11_7a11);
    let mut mix_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x3141_5926);
    let mut out = take_per_class(user_pool, n_user, &mut user_rng, "user")?;
    out.extend(take_per_class(train_pool, n_train, &mut train_rng, "training")?);
    out.shuffle(&mut mix_rng);
    Ok(out)
}

/// Retrains a copy of `model` on target-user data with the configured
/// method. EWC computes its Fisher weights on the replay pool unless
/// `importance` is given; SI requires `importance` from the baseline trace.
pub fn calibrate(
    model: &GruModel,
    user_pool: &[&Recording],
    train_pool: &[&Recording],
    cfg: &CalibrationConfig,
    importance: Option<&ImportanceWeights>,
) -> Result<GruModel> {
    cfg.validate()?;
    let n_train = if cfg.method == Method::Er { cfg.n_train } else { 0 };
    let selection = build_er_dataset(train_pool, user_pool, n_train, cfg.n_user, cfg.seed)?;
    let data = windows_of(&selection, &model.norm, model.window_len)?;
    let tc = TrainConfig {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        lr: if cfg.method == Method::Si { cfg.si_lr } else { cfg.lr },
        hidden: model.net.hidden_dim(),
        window_len: model.window_len,
        chunk: cfg.chunk,
        seed: cfg.seed,
    };
    let mut out = model.clone();
    let fisher;
    let mut hooks: Box<dyn TrainHooks> = match cfg.method {
        Method::Plain | Method::Er => Box::new(NoHooks),
        Method::Ewc => {
            let w = match importance {
                Some(w) => w,
                None => {
                    let pool = windows_of(train_pool, &model.norm, model.window_len)?;
                    let mut idx: Vec<usize> = (0..pool.count()).collect();
                    if idx.len() > cfg.fisher_windows {
                        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xf15e));
                        idx.truncate(cfg.fisher_windows);
                        idx.sort_unstable();
                    }
                    fisher = fisher_diagonal(&model.net, &pool.select(&idx))?;
                    &fisher
                }
            };
            w.check(model.net.param_count())?;
            Box::new(QuadraticPenalty { lambda: cfg.lambda_ewc, weights: w })
        }
        Method::Si => {
            let w = importance.ok_or_else(|| HgrError::Config("SI calibration needs baseline path importance".into()))?;
            w.check(model.net.param_count())?;
            Box::new(QuadraticPenalty { lambda: cfg.lambda_si, weights: w })
        }
    };
    train_network(&mut out.net, &data, None, &tc, hooks.as_mut())?;
    Ok(out)
}

/// Gesture accuracy of `model` on held-out recordings of the original
/// training distribution.
pub fn forgetting_eval(model: &GruModel, heldout: &[&Recording]) -> Result<f64> {
    let seqs: Vec<_> = heldout.iter().map(|r| r.seq.clone()).collect();
    let preds = model.predict_many(&seqs);
    let truth: Vec<Vec<usize>> = heldout.iter().map(|r| r.label_ids()).collect();
    gesture_accuracy(&preds, &truth)
}
