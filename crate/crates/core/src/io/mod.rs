//! Files and orchestration: NPY cubes, model containers, experiment config,
//! on-disk corpus layout, the stage pipeline and report emission.

pub mod config;
pub mod corpus;
pub mod model_file;
pub mod npy;
pub mod pipeline;
pub mod prompt;
pub mod report;

use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::{HgrError, Result};

pub use config::{ExperimentConfig, Stage};
pub use model_file::{load_gru, load_vae, round_to_f32, save_gru, save_vae};
pub use npy::{read_cube, read_npy, write_npy, NpyArray, NpyDtype};
pub use pipeline::{run_experiment, Pipeline, StageOutcome};
pub use prompt::{prompt_intended_class, PromptMode};
pub use report::{emit_report, ReportFormat, ReportRow};

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| HgrError::io(dir, e))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let mut f = std::fs::File::create(&tmp).map_err(|e| HgrError::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| HgrError::io(&tmp, e))?;
    f.sync_all().map_err(|e| HgrError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| HgrError::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Stable sub-seed for `(base, stage, index)`.
pub fn derive_seed(base: u64, stage: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    h.update(stage.as_bytes());
    h.update(index.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| HgrError::Data(e.to_string()))?;
    s.push('\n');
    atomic_write(path, s.as_bytes())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| HgrError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| HgrError::Data(format!("{}: {e}", path.display())))
}
