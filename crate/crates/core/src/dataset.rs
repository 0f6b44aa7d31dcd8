//! Synthetic corpora: per-user recording plans, simulation and feature
//! extraction with refined labels.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::{extract_recording, refine_labels, FeatureSequence, RadarConfig, RadarCube};
use crate::model::{window_many, NormStats, WindowedDataset};
use crate::sim::{sample_spec, synthesize_recording, GroundTruth, KinematicsConfig, TrajectorySpec, UserStyle};
use crate::types::{AnomalyKind, GestureClass, RecordingMeta, Source};
use crate::Result;

/// Features, refined labels and construction truth of one recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    pub meta: RecordingMeta,
    /// Features with labels from closest-approach refinement.
    pub seq: FeatureSequence,
    /// Labels anchored on the true trajectory.
    pub truth_labels: Vec<GestureClass>,
}

impl Recording {
    pub fn label_ids(&self) -> Vec<usize> {
        self.seq.label_ids().expect("recordings carry labels")
    }

    pub fn has_gesture(&self) -> bool {
        self.seq.labels.as_ref().is_some_and(|l| l.iter().any(|c| *c != GestureClass::Background))
    }
}

/// Ordered plan of recordings for one user.
pub fn plan_user(
    style: &UserStyle,
    per_class: usize,
    include_background: bool,
    anomalies: &[(AnomalyKind, usize)],
    kin: &KinematicsConfig,
    seed: u64,
) -> Vec<TrajectorySpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jobs: Vec<(GestureClass, AnomalyKind)> = Vec::new();
    let classes: &[GestureClass] = if include_background { &GestureClass::ALL } else { &GestureClass::GESTURES };
    for &c in classes {
        jobs.extend(std::iter::repeat((c, AnomalyKind::None)).take(per_class));
    }
    for &(kind, n) in anomalies {
        for i in 0..n {
            jobs.push((GestureClass::GESTURES[i % GestureClass::GESTURES.len()], kind));
        }
    }
    // recording order stands in for acquisition time
    jobs.shuffle(&mut rng);
    jobs.into_iter().map(|(c, a)| sample_spec(c, a, style, kin, &mut rng)).collect()
}

/// Simulates and featurizes one planned recording.
pub fn realize(spec: &TrajectorySpec, index: usize, cfg: &RadarConfig, kin: &KinematicsConfig) -> Result<(RadarCube, GroundTruth, Recording)> {
    let (cube, gt) = synthesize_recording(spec, cfg, kin)?;
    let rec = featurize(&cube, &gt, index, cfg, kin)?;
    Ok((cube, gt, rec))
}

/// Feature extraction plus label refinement for a simulated cube.
pub fn featurize(cube: &RadarCube, gt: &GroundTruth, index: usize, cfg: &RadarConfig, kin: &KinematicsConfig) -> Result<Recording> {
    let frames = extract_recording(cube, cfg)?;
    let labels = if gt.class == GestureClass::Background {
        vec![GestureClass::Background; frames.len()]
    } else {
        let max_peak = frames.iter().map(|f| f.peak).fold(0.0, f64::max);
        refine_labels(&frames, gt.class, kin.gesture_len, cfg.amp_threshold_ratio * max_peak)?.labels
    };
    let meta = RecordingMeta {
        id: format!("{}-{index:04}", gt.user),
        user: gt.user.clone(),
        location: "sim".into(),
        class: gt.class,
        anomaly: gt.anomaly,
        source: Source::Synthetic,
        seed: gt.seed,
    };
    let mut seq = FeatureSequence::new(frames).with_labels(labels)?;
    seq.meta = Some(meta.clone());
    Ok(Recording { meta, seq, truth_labels: gt.labels.clone() })
}

/// Simulates every planned recording (in parallel) and keeps only features.
pub fn simulate_features(specs: &[TrajectorySpec], cfg: &RadarConfig, kin: &KinematicsConfig) -> Result<Vec<Recording>> {
    let idx: Vec<usize> = (0..specs.len()).collect();
    crate::par::map(&idx, |&i| realize(&specs[i], i, cfg, kin).map(|r| r.2)).into_iter().collect()
}

/// Windows of recordings normalized with `norm`, labelled by refined labels.
pub fn windows_of(recs: &[&Recording], norm: &NormStats, window_len: usize) -> Result<WindowedDataset> {
    let prepared: Vec<(Vec<f64>, Vec<usize>)> = recs.iter().map(|r| (norm.apply(&r.seq.matrix()), r.label_ids())).collect();
    window_many(&prepared, window_len, 1)
}

pub fn fit_norm(recs: &[&Recording]) -> Result<NormStats> {
    let mats: Vec<Vec<f64>> = recs.iter().map(|r| r.seq.matrix()).collect();
    NormStats::fit(mats.iter().map(|m| m.as_slice()))
}
