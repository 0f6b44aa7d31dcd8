//! Corpus plans and the on-disk layout
//! `<root>/<user>/<class>/<recording_id>.npy` with a `.json` sidecar.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::{derive_seed, npy, read_json, write_json};
use crate::dataset::{realize, Recording};
use crate::dsp::{extract_recording, refine_labels, FeatureSequence, RadarConfig, RadarCube};
use crate::sim::{KinematicsConfig, TrajectorySpec, UserStyle};
use crate::types::{AnomalyKind, GestureClass, RecordingMeta, Source};
use crate::{dataset, HgrError, Result};

/// What a recording is used for in an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    /// Baseline training users; split temporally into train / val / forget.
    Train,
    /// Calibration pool of a shifted user.
    Pool,
    /// Held-out recordings of a shifted user.
    Assessment,
    /// Nominal gestures of a training user for thresholds and SRVs.
    Calibration,
    Anomaly,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::Pool => "pool",
            Role::Assessment => "assessment",
            Role::Calibration => "calibration",
            Role::Anomaly => "anomaly",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedRecording {
    pub id: String,
    pub role: Role,
    pub spec: TrajectorySpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusPlan {
    pub typical_users: Vec<UserStyle>,
    pub shifted_users: Vec<UserStyle>,
    pub recordings: Vec<PlannedRecording>,
}

/// Sidecar stored next to each cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub meta: RecordingMeta,
    #[serde(default)]
    pub role: Option<Role>,
    /// Per-frame construction labels (synthetic only).
    #[serde(default)]
    pub truth_labels: Option<Vec<GestureClass>>,
    #[serde(default)]
    pub anchor: Option<usize>,
}

/// Featurized recording tagged with its role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub role: Role,
    pub recording: Recording,
}

pub fn plan_corpus(cfg: &ExperimentConfig) -> CorpusPlan {
    let c = &cfg.corpus;
    let kin = &cfg.kinematics;
    let mut user_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "users", 0));
    let typical: Vec<UserStyle> = (0..c.train_users).map(|i| UserStyle::typical(&format!("U{i}"), &mut user_rng)).collect();
    let shifted: Vec<UserStyle> = (0..c.shifted_users).map(|i| UserStyle::shifted(&format!("S{i}"), &mut user_rng)).collect();
    let mut recordings = Vec::new();
    let mut push = |role: Role, user: &UserStyle, specs: Vec<TrajectorySpec>| {
        for (k, spec) in specs.into_iter().enumerate() {
            recordings.push(PlannedRecording { id: format!("{}-{}-{k:04}", user.id, role.name()), role, spec });
        }
    };
    let anomalies = [
        (AnomalyKind::Fast, c.anomalies_per_kind),
        (AnomalyKind::Slow, c.anomalies_per_kind),
        (AnomalyKind::Wrist, c.anomalies_per_kind),
    ];
    for (i, u) in typical.iter().enumerate() {
        let i = i as u64;
        push(Role::Train, u, dataset::plan_user(u, c.per_class, true, &[], kin, derive_seed(cfg.seed, "plan-train", i)));
        push(Role::Calibration, u, dataset::plan_user(u, c.calibration_per_class, false, &[], kin, derive_seed(cfg.seed, "plan-calibration", i)));
        push(Role::Anomaly, u, dataset::plan_user(u, 0, false, &anomalies, kin, derive_seed(cfg.seed, "plan-anomaly", i)));
    }
    for (i, u) in shifted.iter().enumerate() {
        let i = i as u64;
        push(Role::Pool, u, dataset::plan_user(u, c.pool_per_class, true, &[], kin, derive_seed(cfg.seed, "plan-pool", i)));
        push(Role::Assessment, u, dataset::plan_user(u, c.assessment_per_class, true, &[], kin, derive_seed(cfg.seed, "plan-assessment", i)));
    }
    CorpusPlan { typical_users: typical, shifted_users: shifted, recordings }
}

fn with_id(mut rec: Recording, id: &str) -> Recording {
    rec.meta.id = id.to_string();
    if let Some(m) = rec.seq.meta.as_mut() {
        m.id = id.to_string();
    }
    rec
}

/// Simulates and featurizes the whole plan in memory.
pub fn synthesize_plan(plan: &CorpusPlan, radar: &RadarConfig, kin: &KinematicsConfig) -> Result<Vec<CorpusEntry>> {
    let idx: Vec<usize> = (0..plan.recordings.len()).collect();
    crate::par::map(&idx, |&i| {
        let p = &plan.recordings[i];
        let (_, _, rec) = realize(&p.spec, i, radar, kin)?;
        Ok(CorpusEntry { role: p.role, recording: with_id(rec, &p.id) })
    })
    .into_iter()
    .collect()
}

pub fn cube_path(root: &Path, meta: &RecordingMeta) -> PathBuf {
    root.join(&meta.user).join(meta.class.name()).join(format!("{}.npy", meta.id))
}

/// Simulates the plan and writes every cube with its sidecar.
pub fn write_plan_cubes(plan: &CorpusPlan, root: &Path, radar: &RadarConfig, kin: &KinematicsConfig) -> Result<usize> {
    let idx: Vec<usize> = (0..plan.recordings.len()).collect();
    let written = crate::par::map(&idx, |&i| -> Result<()> {
        let p = &plan.recordings[i];
        let (cube, gt, rec) = realize(&p.spec, i, radar, kin)?;
        let rec = with_id(rec, &p.id);
        let path = cube_path(root, &rec.meta);
        npy::write_npy(&cube, &path)?;
        let side = Sidecar { meta: rec.meta, role: Some(p.role), truth_labels: Some(gt.labels), anchor: gt.anchor };
        write_json(&path.with_extension("json"), &side)
    });
    written.into_iter().collect::<Result<Vec<()>>>().map(|v| v.len())
}

/// Every `.npy` file below `root`, sorted.
pub fn list_cubes(root: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            HgrError::io(path, e.into())
        })?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|e| e == "npy") {
            out.push(entry.into_path());
        }
    }
    Ok(out)
}

/// Metadata for a cube without a sidecar, read from its position in the
/// layout.
fn meta_from_path(root: &Path, path: &Path) -> Result<RecordingMeta> {
    let rel = path.strip_prefix(root).unwrap_or(path);
    let parts: Vec<String> = rel.iter().map(|s| s.to_string_lossy().into_owned()).collect();
    if parts.len() != 3 {
        return Err(HgrError::Data(format!("{} is not laid out as <user>/<class>/<id>.npy", path.display())));
    }
    Ok(RecordingMeta {
        id: path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        user: parts[0].clone(),
        location: String::new(),
        class: parts[1].parse()?,
        anomaly: AnomalyKind::None,
        source: Source::Real,
        seed: 0,
    })
}

/// Extracts features from a stored cube and refines labels around the
/// intended class.
pub fn featurize_cube(cube: &RadarCube, meta: RecordingMeta, truth: Option<Vec<GestureClass>>, radar: &RadarConfig, kin: &KinematicsConfig) -> Result<Recording> {
    let frames = extract_recording(cube, radar)?;
    let labels = if meta.class == GestureClass::Background {
        vec![GestureClass::Background; frames.len()]
    } else {
        let max_peak = frames.iter().map(|f| f.peak).fold(0.0, f64::max);
        refine_labels(&frames, meta.class, kin.gesture_len, radar.amp_threshold_ratio * max_peak)?.labels
    };
    let truth_labels = truth.unwrap_or_else(|| labels.clone());
    let mut seq = FeatureSequence::new(frames).with_labels(labels)?;
    seq.meta = Some(meta.clone());
    Ok(Recording { meta, seq, truth_labels })
}

/// Assigns roles to recordings that carry none: the first `train_users`
/// users (sorted) train the baseline; for the others each class is split
/// in half into calibration pool and assessment by recording order.
fn assign_roles(items: &mut [(Option<Role>, Recording)], train_users: usize) {
    let mut users: Vec<String> = items.iter().map(|(_, r)| r.meta.user.clone()).collect();
    users.sort();
    users.dedup();
    let train: Vec<&String> = users.iter().take(train_users).collect();
    let mut seen: std::collections::HashMap<(String, GestureClass), usize> = Default::default();
    let mut totals: std::collections::HashMap<(String, GestureClass), usize> = Default::default();
    for (_, r) in items.iter() {
        *totals.entry((r.meta.user.clone(), r.meta.class)).or_default() += 1;
    }
    for (role, r) in items.iter_mut() {
        if role.is_some() {
            continue;
        }
        *role = Some(if r.meta.anomaly != AnomalyKind::None {
            Role::Anomaly
        } else if train.contains(&&r.meta.user) {
            Role::Train
        } else {
            let key = (r.meta.user.clone(), r.meta.class);
            let k = seen.entry(key.clone()).or_default();
            *k += 1;
            if *k <= totals[&key].div_ceil(2) { Role::Pool } else { Role::Assessment }
        });
    }
}

/// Loads and featurizes every cube under `root`. Also returns how many
/// files were stored with each dtype.
pub fn load_corpus(
    root: &Path,
    radar: &RadarConfig,
    kin: &KinematicsConfig,
    lenient: bool,
    train_users: usize,
) -> Result<(Vec<CorpusEntry>, BTreeMap<String, usize>)> {
    let paths = list_cubes(root)?;
    if paths.is_empty() {
        return Err(HgrError::Data(format!("no .npy cubes under {}", root.display())));
    }
    let shape = [kin.frames, radar.rx, radar.chirps, radar.samples];
    let loaded = crate::par::map(&paths, |p| -> Result<(Option<Role>, npy::NpyDtype, Recording)> {
        let side_path = p.with_extension("json");
        let side: Option<Sidecar> = if side_path.exists() { Some(read_json(&side_path)?) } else { None };
        let (meta, role, truth) = match side {
            Some(s) => (s.meta, s.role, s.truth_labels),
            None => (meta_from_path(root, p)?, None, None),
        };
        let (cube, dtype) = npy::read_cube(p, Some(shape), lenient)?;
        Ok((role, dtype, featurize_cube(&cube, meta, truth, radar, kin)?))
    });
    let loaded = loaded.into_iter().collect::<Result<Vec<_>>>()?;
    let mut dtypes: BTreeMap<String, usize> = BTreeMap::new();
    let mut items = Vec::with_capacity(loaded.len());
    for (role, dtype, rec) in loaded {
        *dtypes.entry(format!("{dtype:?}").to_lowercase()).or_default() += 1;
        items.push((role, rec));
    }
    let mut ids: Vec<&str> = items.iter().map(|(_, r)| r.meta.id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(HgrError::Data(format!("recording id `{}` is not unique", w[0])));
    }
    assign_roles(&mut items, train_users);
    let entries = items.into_iter().map(|(role, recording)| CorpusEntry { role: role.expect("assigned"), recording }).collect();
    Ok((entries, dtypes))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.corpus.train_users = 1;
        cfg.corpus.per_class = 1;
        cfg.corpus.shifted_users = 1;
        cfg.corpus.pool_per_class = 1;
        cfg.corpus.assessment_per_class = 0;
        cfg.corpus.calibration_per_class = 0;
        cfg.corpus.anomalies_per_kind = 1;
        cfg
    }

    #[test]
    fn plan_is_seeded_and_ids_unique() {
        let cfg = small();
        let a = plan_corpus(&cfg);
        assert_eq!(a, plan_corpus(&cfg));
        assert_eq!(a.recordings.len(), 6 + 3 + 6);
        let mut ids: Vec<_> = a.recordings.iter().map(|r| r.id.clone()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), a.recordings.len());
    }

    #[test]
    fn cubes_on_disk_match_in_memory_features() {
        let mut cfg = small();
        cfg.corpus.shifted_users = 0;
        cfg.corpus.anomalies_per_kind = 0;
        let plan = plan_corpus(&cfg);
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(write_plan_cubes(&plan, dir.path(), &cfg.radar, &cfg.kinematics).unwrap(), 6);
        assert!(dir.path().join("U0/Push").is_dir());
        let (mut disk, dtypes) = load_corpus(dir.path(), &cfg.radar, &cfg.kinematics, false, 1).unwrap();
        assert_eq!(dtypes.get("f32"), Some(&6));
        let mut mem = synthesize_plan(&plan, &cfg.radar, &cfg.kinematics).unwrap();
        disk.sort_by(|a, b| a.recording.meta.id.cmp(&b.recording.meta.id));
        mem.sort_by(|a, b| a.recording.meta.id.cmp(&b.recording.meta.id));
        assert_eq!(disk, mem);
    }

    #[test]
    fn roles_without_sidecars() {
        let cfg = small();
        let mk = |user: &str, id: &str| {
            let mut r = synthesize_plan(
                &CorpusPlan { recordings: vec![plan_corpus(&cfg).recordings[0].clone()], typical_users: vec![], shifted_users: vec![] },
                &cfg.radar,
                &cfg.kinematics,
            )
            .unwrap()
            .remove(0)
            .recording;
            r.meta.user = user.into();
            r.meta.id = id.into();
            (None, r)
        };
        let mut items = vec![mk("a", "1"), mk("b", "2"), mk("b", "3"), mk("b", "4")];
        assign_roles(&mut items, 1);
        let roles: Vec<Role> = items.iter().map(|x| x.0.unwrap()).collect();
        assert_eq!(roles, [Role::Train, Role::Pool, Role::Pool, Role::Assessment]);
    }
}
