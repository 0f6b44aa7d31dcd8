//! Stage executor. Each stage writes its artifacts under
//! `<out_dir>/<stage>/` plus a `stamp.json` holding the hash of its settings
//! and of its input artifacts; a stage whose stamp matches is skipped.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, Stage};
use super::corpus::{load_corpus, plan_corpus, synthesize_plan, write_plan_cubes, CorpusEntry, CorpusPlan, Role};
use super::prompt::{prompt_intended_class, PromptMode};
use super::report::{emit_report, sweep_table, ReportFormat, ReportRow};
use super::{atomic_write, derive_seed, load_gru, load_vae, read_json, save_gru, save_vae, write_json};
use crate::anomaly::{
    baseline_vector, judge, train_vae, user_threshold, verdicts_csv, AnomalyVerdict, IsolationForest, Lof, UserThreshold,
};
use crate::calibration::{calibrate, forgetting_eval, run_sweep, si_path_importance, ImportanceWeights, Method, SiTracker, SweepUser};
use crate::dataset::{fit_norm, windows_of, Recording};
use crate::explain::{
    background_windows, characterization_csv, characterize, compute_srv, explained_frames, gesture_attributions,
    global_attribution, Srv,
};
use crate::model::{temporal_split, train_baseline, MetricsReport};
use crate::types::{AnomalyKind, GestureClass};
use crate::{HgrError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stamp {
    pub stage: Stage,
    pub settings_hash: String,
    pub input_hash: String,
    pub config_hash: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageOutcome {
    Ran,
    Skipped,
}

/// Temporal train / val / forget split of the baseline users.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SplitIds {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub forget: Vec<String>,
}

/// Git-style content hash over files: each contributes
/// `blob <len>\0<bytes>` in the given order.
pub fn content_hash(paths: &[PathBuf]) -> Result<String> {
    let mut h = Sha256::new();
    for p in paths {
        let bytes = std::fs::read(p).map_err(|e| HgrError::io(p, e))?;
        h.update(format!("blob {}\0", bytes.len()).as_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

pub struct Pipeline {
    pub cfg: ExperimentConfig,
    pub prompt: PromptMode,
    /// Re-run stages even when their stamp matches.
    pub force: bool,
}

impl Pipeline {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Pipeline { cfg, prompt: PromptMode::Batch, force: false })
    }

    pub fn stage_dir(&self, stage: Stage) -> PathBuf {
        self.cfg.out_dir.join(stage.name())
    }

    fn artifact(&self, stage: Stage, name: &str) -> PathBuf {
        self.stage_dir(stage).join(name)
    }

    /// Path of an upstream artifact, or a dependency error naming `stage`.
    fn require(&self, stage: Stage, name: &str) -> Result<PathBuf> {
        let p = self.artifact(stage, name);
        if !p.exists() || !self.artifact(stage, "stamp.json").exists() {
            return Err(HgrError::Dependency { stage: stage.name().into(), detail: format!("{} not found; run `{stage}` first", p.display()) });
        }
        Ok(p)
    }

    /// Artifacts a stage hashes as its inputs.
    fn inputs(&self, stage: Stage) -> Result<Vec<PathBuf>> {
        Ok(match stage {
            Stage::Simulate => vec![],
            // an external corpus is identified by its path in the settings hash
            Stage::Preprocess if self.cfg.corpus_root().is_some() => vec![],
            Stage::Preprocess => vec![self.require(Stage::Simulate, "plan.json")?],
            Stage::Train => vec![self.require(Stage::Preprocess, "features.json")?],
            Stage::Calibrate | Stage::Sweep | Stage::Detect => vec![
                self.require(Stage::Preprocess, "features.json")?,
                self.require(Stage::Train, "model.hgr")?,
                self.require(Stage::Train, "split.json")?,
            ],
            Stage::Explain => vec![
                self.require(Stage::Preprocess, "features.json")?,
                self.require(Stage::Train, "model.hgr")?,
                self.require(Stage::Train, "split.json")?,
                self.require(Stage::Detect, "verdicts.json")?,
            ],
            Stage::Report => {
                let mut v = Vec::new();
                for s in Stage::PIPELINE.iter().chain(&[Stage::Sweep]) {
                    let p = self.artifact(*s, "rows.json");
                    if p.exists() {
                        v.push(p);
                    }
                }
                if v.is_empty() {
                    return Err(HgrError::Dependency { stage: "report".into(), detail: "no stage has produced report rows yet".into() });
                }
                v
            }
        })
    }

    fn settings_hash(&self, stage: Stage) -> String {
        let mut s = self.cfg.stage_hash(stage);
        if stage == Stage::Explain {
            // the intended class can come from a person
            s.push_str(&format!("{:?}", self.prompt));
        }
        super::sha256_hex(s.as_bytes())
    }

    /// Runs `stage` unless its stamp matches the current settings and inputs.
    pub fn run_stage(&self, stage: Stage) -> Result<StageOutcome> {
        let inputs = self.inputs(stage)?;
        let stamp = Stamp {
            stage,
            settings_hash: self.settings_hash(stage),
            input_hash: content_hash(&inputs)?,
            config_hash: self.cfg.config_hash(),
        };
        let stamp_path = self.artifact(stage, "stamp.json");
        if !self.force && stamp_path.exists() {
            if let Ok(old) = read_json::<Stamp>(&stamp_path) {
                if old.settings_hash == stamp.settings_hash && old.input_hash == stamp.input_hash {
                    log::info!("{stage}: up to date, skipped");
                    return Ok(StageOutcome::Skipped);
                }
            }
        }
        let _ = std::fs::remove_file(&stamp_path);
        let t0 = std::time::Instant::now();
        match stage {
            Stage::Simulate => self.simulate()?,
            Stage::Preprocess => self.preprocess()?,
            Stage::Train => self.train(&stamp)?,
            Stage::Calibrate => self.calibrate(&stamp)?,
            Stage::Sweep => self.sweep(&stamp)?,
            Stage::Detect => self.detect(&stamp)?,
            Stage::Explain => self.explain(&stamp)?,
            Stage::Report => self.report()?,
        }
        write_json(&stamp_path, &stamp)?;
        log::info!("{stage}: done in {:.1} s", t0.elapsed().as_secs_f64());
        Ok(StageOutcome::Ran)
    }

    pub fn run(&self, stages: &[Stage]) -> Result<Vec<(Stage, StageOutcome)>> {
        let mut order = stages.to_vec();
        order.sort();
        order.dedup();
        order.into_iter().map(|s| self.run_stage(s).map(|o| (s, o))).collect()
    }

    fn rows(&self, stamp: &Stamp, out: &mut Vec<ReportRow>, metric: impl Into<String>, value: f64, std: Option<f64>) {
        out.push(ReportRow::new(stamp.stage.name(), metric, value, std, &stamp.config_hash, &stamp.input_hash));
    }

    fn features(&self) -> Result<Vec<CorpusEntry>> {
        read_json(&self.require(Stage::Preprocess, "features.json")?)
    }

    fn simulate(&self) -> Result<()> {
        let plan = plan_corpus(&self.cfg);
        write_json(&self.artifact(Stage::Simulate, "plan.json"), &plan)?;
        if self.cfg.corpus.write_cubes {
            let n = write_plan_cubes(&plan, &self.artifact(Stage::Simulate, "corpus"), &self.cfg.radar, &self.cfg.kinematics)?;
            log::info!("simulate: wrote {n} cubes");
        }
        Ok(())
    }

    fn preprocess(&self) -> Result<()> {
        let c = &self.cfg;
        let (entries, dtypes) = if let Some(root) = c.corpus_root() {
            load_corpus(&root, &c.radar, &c.kinematics, c.corpus.lenient_npy, c.corpus.train_users)?
        } else if c.corpus.write_cubes {
            load_corpus(&self.artifact(Stage::Simulate, "corpus"), &c.radar, &c.kinematics, c.corpus.lenient_npy, c.corpus.train_users)?
        } else {
            // cubes were not kept; simulation is deterministic so re-run it
            let plan: CorpusPlan = read_json(&self.artifact(Stage::Simulate, "plan.json"))?;
            (synthesize_plan(&plan, &c.radar, &c.kinematics)?, BTreeMap::new())
        };
        if !dtypes.is_empty() {
            log::info!("preprocess: stored dtypes {dtypes:?}");
            write_json(&self.artifact(Stage::Preprocess, "dtypes.json"), &dtypes)?;
        }
        write_json(&self.artifact(Stage::Preprocess, "features.json"), &entries)
    }

    fn split(&self, entries: &[CorpusEntry]) -> SplitIds {
        let mut by_user: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for e in entries.iter().filter(|e| e.role == Role::Train) {
            by_user.entry(&e.recording.meta.user).or_default().push(&e.recording.meta.id);
        }
        let mut out = SplitIds::default();
        for ids in by_user.values() {
            let (a, b, c) = temporal_split(ids.len(), self.cfg.split.val, self.cfg.split.forget);
            out.train.extend(ids[a].iter().map(|s| s.to_string()));
            out.val.extend(ids[b].iter().map(|s| s.to_string()));
            out.forget.extend(ids[c].iter().map(|s| s.to_string()));
        }
        out
    }

    fn train(&self, stamp: &Stamp) -> Result<()> {
        let entries = self.features()?;
        let split = self.split(&entries);
        let pick = |ids: &[String]| -> Vec<&Recording> { select(&entries, ids) };
        let (train, val, forget) = (pick(&split.train), pick(&split.val), pick(&split.forget));
        let mut tc = self.cfg.train.clone();
        tc.seed = derive_seed(self.cfg.seed, "train", tc.seed);
        let norm = fit_norm(&train)?;
        let wt = windows_of(&train, &norm, tc.window_len)?;
        let wv = if val.is_empty() { None } else { Some(windows_of(&val, &norm, tc.window_len)?) };
        let mut si = SiTracker::default();
        let (model, history) = train_baseline(&wt, wv.as_ref(), norm, &tc, &mut si)?;
        let importance = si_path_importance(&si, self.cfg.calibration.si_xi)?;
        save_gru(&model, &self.artifact(Stage::Train, "model.hgr"))?;
        // downstream stages see the stored (float32) parameters
        let model = load_gru(&self.artifact(Stage::Train, "model.hgr"))?;
        write_json(&self.artifact(Stage::Train, "si_importance.json"), &importance)?;
        write_json(&self.artifact(Stage::Train, "history.json"), &history)?;
        write_json(&self.artifact(Stage::Train, "split.json"), &split)?;
        let mut rows = Vec::new();
        for (name, set) in [("val", &val), ("forget", &forget)] {
            if set.is_empty() {
                continue;
            }
            let m = evaluate(&model, set)?;
            self.rows(stamp, &mut rows, format!("{name}/acc"), m.acc, None);
            self.rows(stamp, &mut rows, format!("{name}/gesture_acc"), m.gesture_acc, None);
            self.rows(stamp, &mut rows, format!("{name}/dg_acc"), m.dg_acc, None);
        }
        if let Some(last) = history.last() {
            self.rows(stamp, &mut rows, "final_train_loss", last.train_loss, None);
        }
        write_json(&self.artifact(Stage::Train, "rows.json"), &rows)
    }

    fn load_train(&self) -> Result<(Vec<CorpusEntry>, crate::model::GruModel, SplitIds)> {
        let entries = self.features()?;
        let model = load_gru(&self.require(Stage::Train, "model.hgr")?)?;
        let split: SplitIds = read_json(&self.require(Stage::Train, "split.json")?)?;
        Ok((entries, model, split))
    }

    fn si_importance(&self, needed: bool) -> Result<Option<ImportanceWeights>> {
        if !needed {
            return Ok(None);
        }
        Ok(Some(read_json(&self.require(Stage::Train, "si_importance.json")?)?))
    }

    fn shifted_users(entries: &[CorpusEntry]) -> Vec<String> {
        let mut users: Vec<String> = entries.iter().filter(|e| e.role == Role::Pool).map(|e| e.recording.meta.user.clone()).collect();
        users.sort();
        users.dedup();
        users
    }

    fn calibrate(&self, stamp: &Stamp) -> Result<()> {
        let (entries, model, split) = self.load_train()?;
        let train_pool = select(&entries, &split.train);
        let forget = select(&entries, &split.forget);
        let mut cc = self.cfg.calibration.clone();
        cc.seed = derive_seed(self.cfg.seed, "calibrate", cc.seed);
        let si = self.si_importance(cc.method == Method::Si)?;
        let users = Self::shifted_users(&entries);
        if users.is_empty() {
            return Err(HgrError::Data("corpus has no calibration-pool users".into()));
        }
        let mut rows = Vec::new();
        let (mut before, mut after, mut retained) = (Vec::new(), Vec::new(), Vec::new());
        for user in &users {
            let pool = by_role_user(&entries, Role::Pool, user);
            let assessment = by_role_user(&entries, Role::Assessment, user);
            let calibrated = calibrate(&model, &pool, &train_pool, &cc, si.as_ref())?;
            let path = self.artifact(Stage::Calibrate, &format!("{user}.hgr"));
            save_gru(&calibrated, &path)?;
            let calibrated = load_gru(&path)?;
            if !assessment.is_empty() {
                let b = forgetting_eval(&model, &assessment)?;
                let a = forgetting_eval(&calibrated, &assessment)?;
                self.rows(stamp, &mut rows, format!("baseline_user_gesture_acc/{user}"), b, None);
                self.rows(stamp, &mut rows, format!("calibrated_user_gesture_acc/{user}"), a, None);
                before.push(b);
                after.push(a);
            }
            if !forget.is_empty() {
                let f = forgetting_eval(&calibrated, &forget)?;
                self.rows(stamp, &mut rows, format!("forget_gesture_acc/{user}"), f, None);
                retained.push(f);
            }
        }
        for (name, v) in [("baseline_user_gesture_acc", &before), ("calibrated_user_gesture_acc", &after), ("forget_gesture_acc", &retained)] {
            if let Some((m, s)) = mean_std(v) {
                self.rows(stamp, &mut rows, format!("{name}/mean"), m, Some(s));
            }
        }
        write_json(&self.artifact(Stage::Calibrate, "rows.json"), &rows)
    }

    fn sweep(&self, stamp: &Stamp) -> Result<()> {
        let (entries, model, split) = self.load_train()?;
        let train_pool = select(&entries, &split.train);
        let forget = select(&entries, &split.forget);
        let users: Vec<SweepUser> = Self::shifted_users(&entries)
            .into_iter()
            .map(|u| SweepUser {
                pool: by_role_user(&entries, Role::Pool, &u),
                assessment: by_role_user(&entries, Role::Assessment, &u),
                id: u,
            })
            .collect();
        let mut base = self.cfg.calibration.clone();
        base.seed = derive_seed(self.cfg.seed, "sweep", base.seed);
        let si = self.si_importance(self.cfg.sweep.methods.contains(&Method::Si))?;
        let result = run_sweep(&model, &self.cfg.sweep, &users, &train_pool, &forget, &base, None, si.as_ref())?;
        let baseline = users
            .iter()
            .map(|u| Ok((u.id.clone(), forgetting_eval(&model, &u.assessment)?)))
            .collect::<Result<Vec<_>>>()?;
        atomic_write(&self.artifact(Stage::Sweep, "runs.csv"), result.rows_csv().as_bytes())?;
        atomic_write(&self.artifact(Stage::Sweep, "cells.csv"), result.cells_csv().as_bytes())?;
        atomic_write(&self.artifact(Stage::Sweep, "table.csv"), sweep_table(&result, &baseline).as_bytes())?;
        let mut rows = Vec::new();
        for (u, b) in &baseline {
            self.rows(stamp, &mut rows, format!("baseline_user_gesture_acc/{u}"), *b, None);
        }
        for c in &result.cells {
            let key = format!("{}-{}-{}/{}", c.method, c.n_train, c.n_user, c.user);
            self.rows(stamp, &mut rows, format!("user_gesture_acc/{key}"), c.user_mean, Some(c.user_std));
            self.rows(stamp, &mut rows, format!("forget_gesture_acc/{key}"), c.forget_mean, Some(c.forget_std));
        }
        write_json(&self.artifact(Stage::Sweep, "rows.json"), &rows)
    }

    fn detect(&self, stamp: &Stamp) -> Result<()> {
        let (entries, model, split) = self.load_train()?;
        let nominal: Vec<&Recording> = select(&entries, &split.train).into_iter().filter(|r| r.has_gesture()).collect();
        let seqs: Vec<_> = nominal.iter().map(|r| &r.seq).collect();
        let mut vc = self.cfg.vae.clone();
        vc.seed = derive_seed(self.cfg.seed, "detect", vc.seed);
        let (det, history) = train_vae(&seqs, &vc)?;
        save_vae(&det, &self.artifact(Stage::Detect, "vae.hgr"))?;
        let det = load_vae(&self.artifact(Stage::Detect, "vae.hgr"))?;
        write_json(&self.artifact(Stage::Detect, "vae_history.json"), &history)?;

        let ac = &self.cfg.anomaly;
        let mut forest_cfg = ac.forest.clone();
        forest_cfg.seed = derive_seed(self.cfg.seed, "forest", forest_cfg.seed);
        let train_vecs: Vec<Vec<f64>> = seqs.iter().map(|s| baseline_vector(s, &det.scaling, ac.baseline_input)).collect();
        let forest = IsolationForest::fit(&train_vecs, &forest_cfg)?;
        let lof = Lof::fit(&train_vecs, ac.lof_k, ac.lof_threshold)?;

        let mut thresholds: BTreeMap<String, UserThreshold> = BTreeMap::new();
        let calib: Vec<&Recording> = entries.iter().filter(|e| e.role == Role::Calibration).map(|e| &e.recording).collect();
        let mut users: Vec<&str> = calib.iter().map(|r| r.meta.user.as_str()).collect();
        users.sort_unstable();
        users.dedup();
        for u in &users {
            let s: Vec<_> = calib.iter().filter(|r| r.meta.user == *u).map(|r| &r.seq).collect();
            thresholds.insert(u.to_string(), user_threshold(u, &det.errors(&s)?, ac.percentile)?);
        }
        write_json(&self.artifact(Stage::Detect, "thresholds.json"), &thresholds)?;

        let judged: Vec<&Recording> = entries
            .iter()
            .filter(|e| matches!(e.role, Role::Calibration | Role::Anomaly) && thresholds.contains_key(&e.recording.meta.user))
            .map(|e| &e.recording)
            .collect();
        let errors = det.errors(&judged.iter().map(|r| &r.seq).collect::<Vec<_>>())?;
        let mut verdicts = Vec::with_capacity(judged.len());
        let mut baselines = String::from("recording_id,user,iforest_score,iforest_flagged,lof_score,lof_flagged\n");
        let mut flags = Vec::with_capacity(judged.len());
        for (r, e) in judged.iter().zip(&errors) {
            let pred = model.predict_frames(&r.seq);
            let v = judge(&r.meta.id, &r.meta.user, &pred, &r.label_ids(), *e, &thresholds[&r.meta.user], r.meta.anomaly)?;
            let x = baseline_vector(&r.seq, &det.scaling, ac.baseline_input);
            let (fs, ff, ls, lf) = (forest.score(&x)?, forest.flags(&x)?, lof.score(&x)?, lof.flags(&x)?);
            baselines.push_str(&format!("{},{},{fs:.6},{ff},{ls:.6},{lf}\n", r.meta.id, r.meta.user));
            flags.push((ff, lf));
            verdicts.push(v);
        }
        atomic_write(&self.artifact(Stage::Detect, "verdicts.csv"), verdicts_csv(&verdicts).as_bytes())?;
        atomic_write(&self.artifact(Stage::Detect, "baselines.csv"), baselines.as_bytes())?;
        write_json(&self.artifact(Stage::Detect, "verdicts.json"), &verdicts)?;

        let mut rows = Vec::new();
        for u in &users {
            let cal: Vec<&AnomalyVerdict> = verdicts.iter().filter(|v| v.user == *u && v.truth == AnomalyKind::None).collect();
            if !cal.is_empty() {
                let fpr = cal.iter().filter(|v| v.vae_flagged).count() as f64 / cal.len() as f64;
                self.rows(stamp, &mut rows, format!("vae_fpr/{u}"), fpr, None);
            }
        }
        for kind in AnomalyKind::ANOMALOUS {
            let k: Vec<&AnomalyVerdict> = verdicts.iter().filter(|v| v.truth == kind).collect();
            if !k.is_empty() {
                let tpr = k.iter().filter(|v| v.vae_flagged).count() as f64 / k.len() as f64;
                self.rows(stamp, &mut rows, format!("vae_tpr/{kind}"), tpr, None);
            }
        }
        let anomalous: Vec<usize> = (0..verdicts.len()).filter(|&i| verdicts[i].truth != AnomalyKind::None).collect();
        if !anomalous.is_empty() {
            let n = anomalous.len() as f64;
            let count = |f: &dyn Fn(usize) -> bool| anomalous.iter().filter(|&&i| f(i)).count() as f64 / n;
            let cond = count(&|i| verdicts[i].condition_flagged());
            self.rows(stamp, &mut rows, "detected/condition", cond, None);
            self.rows(stamp, &mut rows, "detected/condition+vae", count(&|i| verdicts[i].flagged()), None);
            self.rows(stamp, &mut rows, "detected/condition+iforest", count(&|i| verdicts[i].condition_flagged() || flags[i].0), None);
            self.rows(stamp, &mut rows, "detected/condition+lof", count(&|i| verdicts[i].condition_flagged() || flags[i].1), None);
        }
        write_json(&self.artifact(Stage::Detect, "rows.json"), &rows)
    }

    fn explain(&self, stamp: &Stamp) -> Result<()> {
        let (entries, model, split) = self.load_train()?;
        let verdicts: Vec<AnomalyVerdict> = read_json(&self.require(Stage::Detect, "verdicts.json")?)?;
        let ec = &self.cfg.explain;
        let gesture_len = self.cfg.kinematics.gesture_len;
        let amp = self.cfg.radar.amp_threshold_ratio;
        let train = select(&entries, &split.train);
        let bg = background_windows(&model, &train.iter().map(|r| &r.seq).collect::<Vec<_>>(), ec.background);
        let seed = derive_seed(self.cfg.seed, "explain", 0);
        let matrices_of = |r: &Recording, class: GestureClass| {
            let frames = explained_frames(&r.seq, &r.label_ids(), gesture_len, amp)?;
            gesture_attributions(&model, &r.seq, &frames, &bg, class.index(), ec.n_samples, seed)
        };
        let global_of = |r: &Recording, class: GestureClass| global_attribution(&matrices_of(r, class)?);

        // reference envelopes from each user's first srv_n nominal gestures per class
        let calib: Vec<&Recording> = entries.iter().filter(|e| e.role == Role::Calibration).map(|e| &e.recording).collect();
        let mut users: Vec<&str> = calib.iter().map(|r| r.meta.user.as_str()).collect();
        users.sort_unstable();
        users.dedup();
        let groups: Vec<(String, Vec<&str>)> =
            if ec.pooled { vec![("pooled".into(), users.clone())] } else { users.iter().map(|u| (u.to_string(), vec![*u])).collect() };
        let mut srvs: BTreeMap<String, Srv> = BTreeMap::new();
        for (name, members) in &groups {
            let mut chosen: Vec<&Recording> = Vec::new();
            for c in GestureClass::GESTURES {
                for u in members {
                    chosen.extend(calib.iter().filter(|r| r.meta.user == *u && r.meta.class == c).take(ec.srv_n.div_ceil(members.len())));
                }
            }
            let per = crate::par::map(&chosen, |r| global_of(r, r.meta.class).map(|g| (r.meta.class, g)));
            let per = per.into_iter().collect::<Result<Vec<_>>>()?;
            srvs.insert(name.clone(), compute_srv(&per, &GestureClass::GESTURES, ec.srv_n)?);
        }
        write_json(&self.artifact(Stage::Explain, "srv.json"), &srvs)?;

        let by_id: BTreeMap<&str, &Recording> = entries.iter().map(|e| (e.recording.meta.id.as_str(), &e.recording)).collect();
        let stdin = std::io::stdin();
        let mut input = stdin.lock();
        let mut output = std::io::stderr();
        let mut out_rows = Vec::new();
        let mut feedback = String::new();
        let export_dir = self.artifact(Stage::Explain, "attributions");
        if export_dir.exists() {
            std::fs::remove_dir_all(&export_dir).map_err(|e| HgrError::io(&export_dir, e))?;
        }
        for v in verdicts.iter().filter(|v| v.flagged()) {
            let r = by_id.get(v.recording_id.as_str()).ok_or_else(|| HgrError::Data(format!("verdict for unknown recording {}", v.recording_id)))?;
            let intended = intended(&self.prompt, r, &mut input, &mut output)?;
            let srv = &srvs[if ec.pooled { "pooled" } else { r.meta.user.as_str() }];
            let matrices = matrices_of(r, intended)?;
            let rep = characterize(&global_attribution(&matrices)?, intended, srv)?;
            let export = AttributionExport { recording_id: &r.meta.id, user: &r.meta.user, matrices: &matrices, report: &rep };
            write_json(&self.artifact(Stage::Explain, &format!("attributions/{}.json", r.meta.id)), &export)?;
            feedback.push_str(&format!("{}: {}\n", r.meta.id, rep.message));
            out_rows.push((r.meta.id.clone(), r.meta.user.clone(), r.meta.anomaly.to_string(), rep));
        }
        atomic_write(&self.artifact(Stage::Explain, "characterization.csv"), characterization_csv(&out_rows).as_bytes())?;
        atomic_write(&self.artifact(Stage::Explain, "feedback.txt"), feedback.as_bytes())?;

        let mut rows = Vec::new();
        let anomalous: Vec<_> = out_rows.iter().filter(|r| r.2 != AnomalyKind::None.to_string()).collect();
        if !anomalous.is_empty() {
            let dev = anomalous.iter().filter(|r| r.3.has_deviation()).count() as f64 / anomalous.len() as f64;
            self.rows(stamp, &mut rows, "deviation_rate", dev, None);
        }
        for kind in AnomalyKind::ANOMALOUS {
            let k: Vec<_> = anomalous.iter().filter(|r| r.2 == kind.to_string()).collect();
            if !k.is_empty() {
                let want = crate::explain::Diagnosis::expected_for(kind);
                let acc = k.iter().filter(|r| Some(r.3.diagnosis) == want).count() as f64 / k.len() as f64;
                self.rows(stamp, &mut rows, format!("diagnosis_acc/{kind}"), acc, None);
            }
        }
        write_json(&self.artifact(Stage::Explain, "rows.json"), &rows)
    }

    fn report(&self) -> Result<()> {
        let mut rows: Vec<ReportRow> = Vec::new();
        for p in self.inputs(Stage::Report)? {
            rows.extend(read_json::<Vec<ReportRow>>(&p)?);
        }
        emit_report(&rows, &self.stage_dir(Stage::Report), "report", ReportFormat::Both)?;
        Ok(())
    }
}

/// Per-recording attribution dump written by the explain stage.
#[derive(Serialize)]
struct AttributionExport<'a> {
    recording_id: &'a str,
    user: &'a str,
    matrices: &'a [crate::explain::AttributionMatrix],
    report: &'a crate::explain::CharacterizationReport,
}

fn intended<R: BufRead, W: Write>(mode: &PromptMode, r: &Recording, input: &mut R, output: &mut W) -> Result<GestureClass> {
    prompt_intended_class(&r.meta, &GestureClass::GESTURES, mode, input, output)
}

fn select<'a>(entries: &'a [CorpusEntry], ids: &[String]) -> Vec<&'a Recording> {
    let index: BTreeMap<&str, &Recording> = entries.iter().map(|e| (e.recording.meta.id.as_str(), &e.recording)).collect();
    ids.iter().filter_map(|id| index.get(id.as_str()).copied()).collect()
}

fn by_role_user<'a>(entries: &'a [CorpusEntry], role: Role, user: &str) -> Vec<&'a Recording> {
    entries.iter().filter(|e| e.role == role && e.recording.meta.user == user).map(|e| &e.recording).collect()
}

fn evaluate(model: &crate::model::GruModel, recs: &[&Recording]) -> Result<MetricsReport> {
    let seqs: Vec<_> = recs.iter().map(|r| r.seq.clone()).collect();
    let truth: Vec<Vec<usize>> = recs.iter().map(|r| r.label_ids()).collect();
    MetricsReport::evaluate(&model.predict_many(&seqs), &truth)
}

fn mean_std(v: &[f64]) -> Option<(f64, f64)> {
    if v.is_empty() {
        return None;
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    Some((m, var.sqrt()))
}

/// Validates `cfg` and runs `stages` (every pipeline stage when empty),
/// returning the rows of the final report when one was produced.
pub fn run_experiment(cfg: ExperimentConfig, stages: &[Stage], prompt: PromptMode) -> Result<Vec<ReportRow>> {
    let mut p = Pipeline::new(cfg)?;
    p.prompt = prompt;
    let stages = if stages.is_empty() { Stage::PIPELINE.to_vec() } else { stages.to_vec() };
    p.run(&stages)?;
    let report = p.artifact(Stage::Report, "report.json");
    if stages.contains(&Stage::Report) && report.exists() {
        read_json(&report)
    } else {
        Ok(Vec::new())
    }
}
