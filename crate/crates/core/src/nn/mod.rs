//! Hand-differentiated neural-network primitives: dense layers, a GRU cell,
//! batch norm, dropout, losses, Adam, and the two fixed architectures used by
//! the pipeline (the GRU gesture classifier and the dense VAE).

pub mod activation;
pub mod adam;
pub mod batchnorm;
pub mod dense;
pub mod dropout;
pub mod gru;
pub mod loss;
pub mod params;
pub mod vae;

pub use activation::{relu, sigmoid, softmax};
pub use adam::{adam_step, AdamState};
pub use batchnorm::{batchnorm_forward, BatchNorm, BatchNormCache};
pub use dense::{dense_forward, DenseParams};
pub use dropout::dropout_apply;
pub use gru::{gru_step, GruNet, GruParams};
pub use loss::sparse_ce_loss;
pub use params::{assign_flat, flatten, GradientSet, Parameters};
pub use vae::{reparameterize, Vae, VaeConfig};

/// Row-major real matrix.
pub type Matrix = ndarray::Array2<f64>;

/// Train or inference behavior for layers with mode-dependent semantics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> crate::Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(crate::HgrError::Numeric(what.to_string()))
    }
}

/// Glorot-uniform initialisation for a `fan_in x fan_out` kernel.
pub(crate) fn glorot_uniform<R: rand::Rng>(rng: &mut R, fan_in: usize, fan_out: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..fan_in * fan_out).map(|_| rng.gen_range(-limit..limit)).collect()
}
