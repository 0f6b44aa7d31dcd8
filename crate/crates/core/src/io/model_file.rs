//! Versioned model container: magic, JSON header, float32 parameter blob.
//!
//! Layout: `HGRMODEL` | u32 LE header length | header JSON | blob. The
//! header lists every tensor (name, length) in blob order and the SHA-256 of
//! the blob.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::anomaly::VaeDetector;
use crate::dsp::FEATURE_COUNT;
use crate::model::{GruModel, MinMaxStats, NormStats};
use crate::nn::{assign_flat, GruNet, Parameters, Vae, VaeConfig};
use crate::{HgrError, Result};

const MAGIC: &[u8; 8] = b"HGRMODEL";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub format_version: u32,
    pub kind: String,
    pub architecture: serde_json::Value,
    pub normalization: serde_json::Value,
    pub tensors: Vec<TensorSpec>,
    pub blob_bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruArchitecture {
    pub input_dim: usize,
    pub gru_hidden: usize,
    pub dense_out: usize,
    pub window_len: usize,
}

fn encode(kind: &str, architecture: serde_json::Value, normalization: serde_json::Value, tensors: Vec<(String, Vec<f64>)>) -> Result<Vec<u8>> {
    let mut blob = Vec::new();
    let mut specs = Vec::new();
    for (name, values) in &tensors {
        for v in values {
            blob.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        specs.push(TensorSpec { name: name.clone(), len: values.len() });
    }
    let header = ModelHeader {
        format_version: FORMAT_VERSION,
        kind: kind.to_string(),
        architecture,
        normalization,
        tensors: specs,
        blob_bytes: blob.len(),
        sha256: hex::encode(Sha256::digest(&blob)),
    };
    let json = serde_json::to_vec(&header).map_err(|e| HgrError::Corrupt(e.to_string()))?;
    let mut out = Vec::with_capacity(12 + json.len() + blob.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&blob);
    Ok(out)
}

/// Parses a container into its header and one `f64` vector per tensor.
pub fn decode(bytes: &[u8]) -> Result<(ModelHeader, Vec<Vec<f64>>)> {
    if bytes.len() < 12 || &bytes[..8] != MAGIC {
        return Err(HgrError::Corrupt("missing model magic".into()));
    }
    let hl = u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize;
    let json = bytes.get(12..12 + hl).ok_or_else(|| HgrError::Corrupt("truncated header".into()))?;
    let raw: serde_json::Value = serde_json::from_slice(json).map_err(|e| HgrError::Corrupt(format!("header: {e}")))?;
    let found = raw.get("format_version").and_then(|v| v.as_u64()).ok_or_else(|| HgrError::Corrupt("header lacks format_version".into()))?;
    if found != u64::from(FORMAT_VERSION) {
        return Err(HgrError::Version { found: found as u32, expected: FORMAT_VERSION });
    }
    let header: ModelHeader = serde_json::from_value(raw).map_err(|e| HgrError::Corrupt(format!("header: {e}")))?;
    let blob = &bytes[12 + hl..];
    if blob.len() != header.blob_bytes {
        return Err(HgrError::Corrupt(format!("blob has {} bytes, header declares {}", blob.len(), header.blob_bytes)));
    }
    if hex::encode(Sha256::digest(blob)) != header.sha256 {
        return Err(HgrError::Corrupt("blob checksum mismatch".into()));
    }
    let total: usize = header.tensors.iter().map(|t| t.len).sum();
    if total * 4 != blob.len() {
        return Err(HgrError::Corrupt("tensor table does not match the blob".into()));
    }
    let mut values = blob.chunks_exact(4).map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])));
    let tensors = header.tensors.iter().map(|t| values.by_ref().take(t.len).collect()).collect();
    Ok((header, tensors))
}

fn named(p: &dyn Parameters) -> Vec<(String, Vec<f64>)> {
    p.tensor_names().into_iter().zip(p.tensors()).map(|(n, t)| (n, t.to_vec())).collect()
}

fn to_json<T: Serialize>(v: &T) -> Result<serde_json::Value> {
    serde_json::to_value(v).map_err(|e| HgrError::Corrupt(e.to_string()))
}

fn from_json<T: serde::de::DeserializeOwned>(v: &serde_json::Value, what: &str) -> Result<T> {
    serde_json::from_value(v.clone()).map_err(|e| HgrError::Corrupt(format!("{what}: {e}")))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| HgrError::io(path, e))
}

fn expect_kind(h: &ModelHeader, kind: &str) -> Result<()> {
    if h.kind != kind {
        return Err(HgrError::Corrupt(format!("expected a {kind} model, found {}", h.kind)));
    }
    Ok(())
}

pub fn gru_bytes(model: &GruModel) -> Result<Vec<u8>> {
    let arch = GruArchitecture {
        input_dim: model.net.input_dim(),
        gru_hidden: model.net.hidden_dim(),
        dense_out: model.net.classes(),
        window_len: model.window_len,
    };
    encode("gru_classifier", to_json(&arch)?, to_json(&model.norm)?, named(&model.net))
}

pub fn gru_from_bytes(bytes: &[u8]) -> Result<GruModel> {
    let (header, tensors) = decode(bytes)?;
    expect_kind(&header, "gru_classifier")?;
    let arch: GruArchitecture = from_json(&header.architecture, "architecture")?;
    let norm: NormStats = from_json(&header.normalization, "normalization")?;
    if arch.input_dim != FEATURE_COUNT {
        return Err(HgrError::Corrupt(format!("classifier input_dim {} (want {FEATURE_COUNT})", arch.input_dim)));
    }
    let mut net = GruNet::zeros(arch.input_dim, arch.gru_hidden, arch.dense_out);
    assign_named(&mut net, &header, &tensors)?;
    Ok(GruModel { net, norm, window_len: arch.window_len })
}

fn assign_named(p: &mut dyn Parameters, header: &ModelHeader, tensors: &[Vec<f64>]) -> Result<usize> {
    let names = p.tensor_names();
    if header.tensors.len() < names.len() || header.tensors.iter().zip(&names).any(|(t, n)| &t.name != n) {
        return Err(HgrError::Corrupt("tensor names do not match the architecture".into()));
    }
    let flat: Vec<f64> = tensors[..names.len()].concat();
    assign_flat(p, &flat).map_err(|e| HgrError::Corrupt(e.to_string()))?;
    Ok(names.len())
}

pub fn save_gru(model: &GruModel, path: &Path) -> Result<()> {
    super::atomic_write(path, &gru_bytes(model)?)
}

pub fn load_gru(path: &Path) -> Result<GruModel> {
    gru_from_bytes(&read(path)?)
}

/// Rounds every parameter to float32 precision, the precision it is stored
/// with, so a saved and reloaded model computes the same outputs.
pub fn round_to_f32(p: &mut dyn Parameters) {
    for t in p.tensors_mut() {
        for v in t.iter_mut() {
            *v = f64::from(*v as f32);
        }
    }
}

pub fn vae_bytes(det: &VaeDetector) -> Result<Vec<u8>> {
    let mut tensors = named(&det.vae);
    let bns = det.vae.encoder.iter().chain(&det.vae.decoder).map(|b| &b.bn);
    for (i, bn) in bns.enumerate() {
        tensors.push((format!("state.bn{i}.running_mean"), bn.running_mean.to_vec()));
        tensors.push((format!("state.bn{i}.running_var"), bn.running_var.to_vec()));
    }
    encode("vae", to_json(&det.vae.config)?, to_json(&det.scaling)?, tensors)
}

pub fn vae_from_bytes(bytes: &[u8]) -> Result<VaeDetector> {
    let (header, tensors) = decode(bytes)?;
    expect_kind(&header, "vae")?;
    let config: VaeConfig = from_json(&header.architecture, "architecture")?;
    let scaling: MinMaxStats = from_json(&header.normalization, "normalization")?;
    let mut rng = rand::rngs::mock::StepRng::new(0, 1);
    let mut vae = Vae::new(config, &mut rng);
    let used = assign_named(&mut vae, &header, &tensors)?;
    let mut state = tensors[used..].iter();
    let n_bn = vae.encoder.len() + vae.decoder.len();
    if tensors.len() - used != 2 * n_bn {
        return Err(HgrError::Corrupt("missing batch-norm running statistics".into()));
    }
    for block in vae.encoder.iter_mut().chain(vae.decoder.iter_mut()) {
        for target in [&mut block.bn.running_mean, &mut block.bn.running_var] {
            let v = state.next().expect("counted above");
            if v.len() != target.len() {
                return Err(HgrError::Corrupt("batch-norm statistics length".into()));
            }
            target.assign(&ndarray::ArrayView1::from(v.as_slice()));
        }
    }
    Ok(VaeDetector { vae, scaling })
}

pub fn save_vae(det: &VaeDetector, path: &Path) -> Result<()> {
    super::atomic_write(path, &vae_bytes(det)?)
}

pub fn load_vae(path: &Path) -> Result<VaeDetector> {
    vae_from_bytes(&read(path)?)
}
