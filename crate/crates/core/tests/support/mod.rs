//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::collections::BTreeSet;

use hgr_core::dsp::{extract_frame_features, RadarConfig};
use hgr_core::nn::{assign_flat, flatten, GruNet, Mode, Parameters, Vae, VaeConfig};
use hgr_core::sim::{noise_sigma, simulate_frame, Scatterer, TargetState};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-4;
pub const GRAD_TOL: f64 = 1e-4;

pub fn rel_err(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / (fd.abs() + 1e-6)
}

#[derive(Debug, Default)]
pub struct GradReport {
    pub checked: usize,
    pub worst: f64,
    pub failures: Vec<(usize, f64, f64)>,
    /// Sampled indices dropped because a +/- step flips a ReLU.
    pub kinks: usize,
}

impl GradReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn central_differences<P: Parameters>(model: &mut P, analytic: &[f64], indices: &[usize], loss: impl Fn(&P) -> f64) -> GradReport {
    let base = flatten(model);
    let mut r = GradReport::default();
    for &i in indices {
        let mut p = base.clone();
        p[i] = base[i] + FD_STEP;
        assign_flat(model, &p).unwrap();
        let up = loss(model);
        p[i] = base[i] - FD_STEP;
        assign_flat(model, &p).unwrap();
        let down = loss(model);
        let fd = (up - down) / (2.0 * FD_STEP);
        let e = rel_err(analytic[i], fd);
        r.worst = r.worst.max(e);
        if e >= GRAD_TOL {
            r.failures.push((i, analytic[i], fd));
        }
        r.checked += 1;
    }
    assign_flat(model, &base).unwrap();
    r
}

/// Every parameter of a default-size classifier on a random mini-batch.
pub fn gru_gradient_report(seed: u64) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = GruNet::init(&mut rng, 5, 16, 6);
    let len = 22;
    let labels = vec![0usize, 3, 5, 1];
    let windows: Vec<f64> = (0..labels.len() * len * 5).map(|_| rng.gen_range(-1.5..1.5)).collect();
    let (_, g) = net.loss_and_gradients(&windows, &labels, len, false).unwrap();
    let analytic = g.flat();
    let all: Vec<usize> = (0..analytic.len()).collect();
    central_differences(&mut net, &analytic, &all, |m| m.loss_and_gradients(&windows, &labels, len, false).unwrap().0)
}

fn vae_loss(vae: &Vae, x: &Array2<f64>, noise: &Array2<f64>, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    vae.forward(x, noise, Mode::Train, &mut rng).unwrap().loss()
}

fn vae_pattern(vae: &Vae, x: &Array2<f64>, noise: &Array2<f64>, seed: u64) -> Vec<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    vae.forward(x, noise, Mode::Train, &mut rng).unwrap().relu_pattern()
}

/// VAE gradient check with fixed dropout masks and reparameterization
/// noise. `sample = None` checks every parameter; otherwise the first three
/// entries of each tensor plus `k` random ones.
pub fn vae_gradient_report(config: VaeConfig, batch: usize, seed: u64, sample: Option<usize>) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vae = Vae::new(config.clone(), &mut rng);
    let x = Array2::from_shape_fn((batch, config.input_dim), |_| rng.gen_range(0.0..1.0));
    let noise = Array2::from_shape_fn((batch, config.latent), |_| rng.gen_range(-1.0..1.0));
    let dropout_seed = seed + 100;
    let pass = {
        let mut r = ChaCha8Rng::seed_from_u64(dropout_seed);
        vae.forward(&x, &noise, Mode::Train, &mut r).unwrap()
    };
    let analytic = vae.backward(&x, &pass).flat();
    let indices: Vec<usize> = match sample {
        None => (0..analytic.len()).collect(),
        Some(k) => {
            let mut idx = Vec::new();
            let mut offset = 0;
            for t in vae.tensors() {
                idx.extend(offset..offset + t.len().min(3));
                offset += t.len();
            }
            idx.extend((0..k).map(|_| rng.gen_range(0..analytic.len())));
            idx
        }
    };
    let base = flatten(&vae);
    let reference = pass.relu_pattern();
    let smooth: Vec<usize> = indices
        .iter()
        .copied()
        .filter(|&i| {
            [FD_STEP, -FD_STEP].iter().all(|d| {
                let mut p = base.clone();
                p[i] += d;
                assign_flat(&mut vae, &p).unwrap();
                vae_pattern(&vae, &x, &noise, dropout_seed) == reference
            })
        })
        .collect();
    assign_flat(&mut vae, &base).unwrap();
    let mut r = central_differences(&mut vae, &analytic, &smooth, |m| vae_loss(m, &x, &noise, dropout_seed));
    r.kinks = indices.len() - smooth.len();
    r
}

/// One cell of the signal-chain oracle grid.
#[derive(Debug, Clone, Copy)]
pub struct GridTrial {
    pub range: f64,
    pub velocity: f64,
    pub azimuth: f64,
    pub elevation: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct TrialResult {
    pub trial: GridTrial,
    pub range: f64,
    pub velocity: f64,
    pub azimuth: f64,
    pub elevation: f64,
}

impl TrialResult {
    pub fn within(&self, range_tol: f64, vel_tol: f64, angle_tol: f64) -> bool {
        (self.range - self.trial.range).abs() <= range_tol
            && (self.velocity - self.trial.velocity).abs() <= vel_tol
            && (self.azimuth - self.trial.azimuth).abs() <= angle_tol
            && (self.elevation - self.trial.elevation).abs() <= angle_tol
    }
}

/// R x v x angle-config x seeds. Angle configs vary one axis at a time.
pub fn oracle_grid(seeds: u64) -> Vec<GridTrial> {
    let angles = [(-30.0, 0.0), (0.0, 0.0), (30.0, 0.0), (0.0, -30.0), (0.0, 30.0)];
    let mut out = Vec::new();
    for range in [0.3, 0.6, 0.9] {
        for velocity in [-2.0, 0.0, 2.0] {
            for (azimuth, elevation) in angles {
                for seed in 0..seeds {
                    out.push(GridTrial { range, velocity, azimuth, elevation, seed });
                }
            }
        }
    }
    out
}

/// Simulates a single point target at `snr_db` and extracts its features.
pub fn run_trial(t: GridTrial, cfg: &RadarConfig, snr_db: f64) -> TrialResult {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + t.seed);
    let amplitude = 1.0;
    let state = TargetState { range: t.range, radial_velocity: t.velocity, azimuth: t.azimuth, elevation: t.elevation, amplitude };
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let frame = simulate_frame(&[Scatterer { state, phase }], cfg, noise_sigma(amplitude, snr_db), &mut rng).unwrap();
    let f = extract_frame_features(&frame, cfg).unwrap();
    TrialResult { trial: t, range: f.range, velocity: f.doppler, azimuth: f.azimuth, elevation: f.elevation }
}

pub const BG: usize = 0;

/// Frame accuracy by counting mismatches, averaged per recording.
pub fn oracle_acc(pred: &[Vec<usize>], truth: &[Vec<usize>]) -> f64 {
    let mut sum = 0.0;
    for k in 0..pred.len() {
        let mut wrong = 0;
        for t in 0..truth[k].len() {
            if pred[k][t] != truth[k][t] {
                wrong += 1;
            }
        }
        sum += (truth[k].len() - wrong) as f64 / truth[k].len() as f64;
    }
    sum / pred.len() as f64
}

/// Per-recording hit rate over non-background truth frames; recordings with
/// none are ignored.
pub fn oracle_gesture_acc(pred: &[Vec<usize>], truth: &[Vec<usize>]) -> Option<f64> {
    let mut rates = Vec::new();
    for k in 0..pred.len() {
        let (mut n, mut hit) = (0usize, 0usize);
        for t in 0..truth[k].len() {
            if truth[k][t] != BG {
                n += 1;
                hit += usize::from(pred[k][t] == truth[k][t]);
            }
        }
        if n > 0 {
            rates.push(hit as f64 / n as f64);
        }
    }
    (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64)
}

/// dg_acc from its definition: gather frame indices inside
/// `[first - 3, last + 4]` by scanning every frame.
pub fn oracle_dg_acc(pred: &[Vec<usize>], truth: &[Vec<usize>]) -> Option<f64> {
    let mut scores = Vec::new();
    for k in 0..pred.len() {
        let gesture: Vec<i64> = (0..truth[k].len()).filter(|&t| truth[k][t] != BG).map(|t| t as i64).collect();
        let (Some(&first), Some(&last)) = (gesture.iter().min(), gesture.iter().max()) else { continue };
        let mut predicted = BTreeSet::new();
        let mut count = 0;
        for t in 0..pred[k].len() as i64 {
            if t >= first - 3 && t <= last + 4 && pred[k][t as usize] != BG {
                predicted.insert(pred[k][t as usize]);
                count += 1;
            }
        }
        let expected: BTreeSet<usize> = [truth[k][first as usize]].into();
        scores.push(if predicted == expected && count > 4 { 1.0 } else { 0.0 });
    }
    (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Random (pred, truth) pair: one gesture segment (or none) on 100 frames
/// and predictions built from a shifted, clipped and corrupted copy.
pub fn random_pair<R: Rng>(rng: &mut R) -> (Vec<usize>, Vec<usize>) {
    let n = 100;
    let mut truth = vec![BG; n];
    let class = rng.gen_range(1..6);
    let has = rng.gen_bool(0.9);
    let (start, len) = (rng.gen_range(0..90), rng.gen_range(1..=10));
    if has {
        truth[start..(start + len).min(n)].fill(class);
    }
    let mut pred = vec![BG; n];
    let shift: i64 = rng.gen_range(-6..=6);
    let plen = rng.gen_range(0..=12);
    let pclass = if rng.gen_bool(0.8) { class } else { rng.gen_range(1..6) };
    for i in 0..plen {
        let t = start as i64 + shift + i as i64;
        if (0..n as i64).contains(&t) {
            pred[t as usize] = pclass;
        }
    }
    for _ in 0..rng.gen_range(0..4) {
        let t = rng.gen_range(0..n);
        pred[t] = rng.gen_range(0..6);
    }
    (pred, truth)
}

/// Smallest configuration that exercises every pipeline stage.
pub fn tiny_config(out: &std::path::Path) -> hgr_core::io::ExperimentConfig {
    let mut c = hgr_core::io::ExperimentConfig::default();
    c.out_dir = out.to_path_buf();
    c.corpus.train_users = 1;
    c.corpus.per_class = 4;
    c.corpus.shifted_users = 1;
    c.corpus.pool_per_class = 3;
    c.corpus.assessment_per_class = 2;
    c.corpus.calibration_per_class = 3;
    c.corpus.anomalies_per_kind = 2;
    c.train.epochs = 1;
    c.calibration.n_train = 2;
    c.calibration.n_user = 2;
    c.calibration.epochs = 1;
    c.sweep.n_train = vec![2];
    c.sweep.n_user = vec![1, 2];
    c.sweep.runs = 1;
    c.vae.epochs = 2;
    c.anomaly.lof_k = 3;
    c.explain.n_samples = 8;
    c.explain.background = 8;
    c.explain.srv_n = 2;
    c
}

/// Relative path -> bytes of every file below `root`.
pub fn snapshot(root: &std::path::Path) -> std::collections::BTreeMap<std::path::PathBuf, Vec<u8>> {
    walkdir::WalkDir::new(root)
        .into_iter()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().is_file())
        .map(|e| (e.path().strip_prefix(root).unwrap().to_path_buf(), std::fs::read(e.path()).unwrap()))
        .collect()
}
