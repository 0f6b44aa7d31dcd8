//! Experiment configuration (TOML) and its content hash.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::anomaly::{BaselineInput, IsolationForestConfig, VaeTrainConfig};
use crate::calibration::{CalibrationConfig, SweepGrid};
use crate::dsp::RadarConfig;
use crate::model::TrainConfig;
use crate::sim::KinematicsConfig;
use crate::{HgrError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Simulate,
    Preprocess,
    Train,
    Calibrate,
    Sweep,
    Detect,
    Explain,
    Report,
}

impl Stage {
    pub const PIPELINE: [Stage; 7] =
        [Stage::Simulate, Stage::Preprocess, Stage::Train, Stage::Calibrate, Stage::Detect, Stage::Explain, Stage::Report];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Simulate => "simulate",
            Stage::Preprocess => "preprocess",
            Stage::Train => "train",
            Stage::Calibrate => "calibrate",
            Stage::Sweep => "sweep",
            Stage::Detect => "detect",
            Stage::Explain => "explain",
            Stage::Report => "report",
        }
    }

    /// Stages whose artifacts this stage reads.
    pub fn upstream(self) -> &'static [Stage] {
        match self {
            Stage::Simulate => &[],
            Stage::Preprocess => &[Stage::Simulate],
            Stage::Train => &[Stage::Preprocess],
            Stage::Calibrate | Stage::Sweep | Stage::Detect => &[Stage::Preprocess, Stage::Train],
            Stage::Explain => &[Stage::Preprocess, Stage::Train, Stage::Detect],
            Stage::Report => &[],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = HgrError;
    fn from_str(s: &str) -> Result<Self> {
        Stage::PIPELINE
            .iter()
            .chain(&[Stage::Sweep])
            .find(|st| st.name() == s)
            .copied()
            .ok_or_else(|| HgrError::Config(format!("unknown stage `{s}`")))
    }
}

/// Sizes of the synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    /// Users whose recordings train the baseline.
    pub train_users: usize,
    pub per_class: usize,
    /// Users with shifted execution style, used for calibration.
    pub shifted_users: usize,
    pub pool_per_class: usize,
    pub assessment_per_class: usize,
    /// Nominal gestures per class used for anomaly thresholds and SRVs.
    pub calibration_per_class: usize,
    pub anomalies_per_kind: usize,
    /// Read NPY cubes from here instead of simulating (the RADAR_HGR_DATA
    /// environment variable overrides it).
    pub root: Option<PathBuf>,
    pub write_cubes: bool,
    pub lenient_npy: bool,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            train_users: 2,
            per_class: 100,
            shifted_users: 3,
            pool_per_class: 100,
            assessment_per_class: 20,
            calibration_per_class: 20,
            anomalies_per_kind: 30,
            root: None,
            write_cubes: false,
            lenient_npy: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub train: f64,
    pub val: f64,
    pub forget: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { train: 0.8, val: 0.1, forget: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnomalyConfig {
    pub percentile: f64,
    pub forest: IsolationForestConfig,
    pub lof_k: usize,
    pub lof_threshold: f64,
    pub baseline_input: BaselineInput,
}

impl Default for AnomalyConfig {
    fn default() -> Self {
        AnomalyConfig {
            percentile: 90.0,
            forest: IsolationForestConfig::default(),
            lof_k: 35,
            lof_threshold: 1.5,
            baseline_input: BaselineInput::Flattened,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExplainConfig {
    pub n_samples: usize,
    pub background: usize,
    /// Nominal gestures per class in each SRV.
    pub srv_n: usize,
    /// One SRV over all users instead of one per user.
    pub pooled: bool,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig { n_samples: 256, background: 64, srv_n: 10, pooled: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub radar: RadarConfig,
    pub kinematics: KinematicsConfig,
    pub corpus: CorpusConfig,
    pub split: SplitConfig,
    pub train: TrainConfig,
    pub calibration: CalibrationConfig,
    pub sweep: SweepGrid,
    pub vae: VaeTrainConfig,
    pub anomaly: AnomalyConfig,
    pub explain: ExplainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            out_dir: PathBuf::from("runs/default"),
            radar: RadarConfig::default(),
            kinematics: KinematicsConfig::default(),
            corpus: CorpusConfig::default(),
            split: SplitConfig::default(),
            train: TrainConfig::default(),
            calibration: CalibrationConfig::default(),
            sweep: SweepGrid::default(),
            vae: VaeTrainConfig::default(),
            anomaly: AnomalyConfig::default(),
            explain: ExplainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| HgrError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HgrError::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| HgrError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.split;
        if [s.train, s.val, s.forget].iter().any(|v| !(0.0..=1.0).contains(v)) || ((s.train + s.val + s.forget) - 1.0).abs() > 1e-9 {
            return Err(HgrError::Config(format!("split ratios {}/{}/{} must be in [0,1] and sum to 1", s.train, s.val, s.forget)));
        }
        self.radar.validate()?;
        self.calibration.validate()?;
        if self.corpus.train_users == 0 {
            return Err(HgrError::Config("corpus.train_users must be positive".into()));
        }
        if !(0.0..=100.0).contains(&self.anomaly.percentile) {
            return Err(HgrError::Config("anomaly.percentile must lie in [0, 100]".into()));
        }
        if self.explain.n_samples == 0 || self.explain.background == 0 || self.explain.srv_n == 0 {
            return Err(HgrError::Config("explain sizes must be positive".into()));
        }
        if let Some(root) = &self.corpus.root {
            if !root.exists() {
                return Err(HgrError::Config(format!("corpus root {} does not exist", root.display())));
            }
        }
        Ok(())
    }

    /// Corpus root: RADAR_HGR_DATA, else `corpus.root`.
    pub fn corpus_root(&self) -> Option<PathBuf> {
        std::env::var_os("RADAR_HGR_DATA").map(PathBuf::from).or_else(|| self.corpus.root.clone())
    }

    /// SHA-256 of the canonical JSON of the settings that affect `stage`
    /// (output directory excluded).
    pub fn stage_hash(&self, stage: Stage) -> String {
        let mut v = serde_json::Map::new();
        v.insert("seed".into(), self.seed.into());
        let put = |v: &mut serde_json::Map<String, serde_json::Value>, k: &str, x: serde_json::Value| {
            v.insert(k.into(), x);
        };
        let j = |x: &dyn erased::ToJson| x.to_json();
        match stage {
            Stage::Simulate | Stage::Preprocess => {
                put(&mut v, "radar", j(&self.radar));
                put(&mut v, "kinematics", j(&self.kinematics));
                put(&mut v, "corpus", j(&self.corpus));
                if stage == Stage::Preprocess {
                    put(&mut v, "data_root", serde_json::to_value(self.corpus_root()).unwrap_or_default());
                }
            }
            Stage::Train => {
                put(&mut v, "split", j(&self.split));
                put(&mut v, "train", j(&self.train));
            }
            Stage::Calibrate => put(&mut v, "calibration", j(&self.calibration)),
            Stage::Sweep => {
                put(&mut v, "calibration", j(&self.calibration));
                put(&mut v, "sweep", j(&self.sweep));
            }
            Stage::Detect => {
                put(&mut v, "vae", j(&self.vae));
                put(&mut v, "anomaly", j(&self.anomaly));
            }
            Stage::Explain => put(&mut v, "explain", j(&self.explain)),
            Stage::Report => {}
        }
        super::sha256_hex(serde_json::Value::Object(v).to_string().as_bytes())
    }

    /// Hash of the complete configuration.
    pub fn config_hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        super::sha256_hex(serde_json::to_string(&c).unwrap_or_default().as_bytes())
    }
}

mod erased {
    pub trait ToJson {
        fn to_json(&self) -> serde_json::Value;
    }
    impl<T: serde::Serialize> ToJson for T {
        fn to_json(&self) -> serde_json::Value {
            serde_json::to_value(self).unwrap_or_default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let c = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.config_hash(), c.config_hash());
    }

    #[test]
    fn bad_ratios_rejected() {
        let err = ExperimentConfig::from_toml("[split]\ntrain = 0.7\nval = 0.1\nforget = 0.1\n").unwrap_err();
        assert!(matches!(err, HgrError::Config(_)));
    }

    #[test]
    fn stage_hash_tracks_relevant_sections() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.explain.n_samples = 512;
        assert_eq!(a.stage_hash(Stage::Train), b.stage_hash(Stage::Train));
        assert_ne!(a.stage_hash(Stage::Explain), b.stage_hash(Stage::Explain));
        b.out_dir = "elsewhere".into();
        assert_eq!(a.stage_hash(Stage::Train), b.stage_hash(Stage::Train));
    }
}
