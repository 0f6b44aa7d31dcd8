//! Dense variational autoencoder: `Dense -> BatchNorm -> ReLU [-> Dropout]`
//! blocks in the encoder, Gaussian heads, a mirrored decoder and a sigmoid
//! output layer. Loss per sample is the summed squared reconstruction error
//! plus the KL divergence to the standard normal, averaged over the batch.

use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::batchnorm::{BatchNorm, BatchNormCache};
use super::dense::DenseParams;
use super::dropout::dropout_mask;
use super::params::{GradientSet, Parameters};
use super::Mode;
use crate::{HgrError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeConfig {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub latent: usize,
    pub dropout: f64,
    /// Encoder block indices followed by dropout.
    pub dropout_layers: Vec<usize>,
}

impl Default for VaeConfig {
    fn default() -> Self {
        VaeConfig { input_dim: 500, hidden: vec![512, 256, 128, 64], latent: 16, dropout: 0.3, dropout_layers: vec![0, 1] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub dense: DenseParams,
    pub bn: BatchNorm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vae {
    pub config: VaeConfig,
    pub encoder: Vec<Block>,
    pub mu_head: DenseParams,
    pub logvar_head: DenseParams,
    pub decoder: Vec<Block>,
    pub output: DenseParams,
}

#[derive(Debug, Clone)]
struct BlockCache {
    input: Array2<f64>,
    bn: BatchNormCache,
    /// ReLU derivative times dropout scale.
    gate: Array2<f64>,
}

/// Forward intermediates of one batch.
#[derive(Debug, Clone)]
pub struct VaePass {
    pub recon: Array2<f64>,
    pub mu: Array2<f64>,
    pub logvar: Array2<f64>,
    pub z: Array2<f64>,
    noise: Array2<f64>,
    enc: Vec<BlockCache>,
    dec: Vec<BlockCache>,
    enc_out: Array2<f64>,
    dec_out: Array2<f64>,
    /// Mean per-sample summed squared error.
    pub rec_loss: f64,
    /// Mean per-sample KL term.
    pub kl: f64,
}

impl VaePass {
    pub fn loss(&self) -> f64 {
        self.rec_loss + self.kl
    }

    /// On/off state of every ReLU unit in the pass (encoder then decoder).
    pub fn relu_pattern(&self) -> Vec<bool> {
        self.enc.iter().chain(&self.dec).flat_map(|c| c.gate.iter().map(|g| *g > 0.0)).collect()
    }
}

/// `z = mu + exp(0.5 logvar) * noise`.
pub fn reparameterize(mu: &[f64], logvar: &[f64], noise: &[f64]) -> Result<Vec<f64>> {
    if mu.len() != logvar.len() || mu.len() != noise.len() {
        return Err(HgrError::Shape("reparameterize inputs differ in length".into()));
    }
    Ok(mu.iter().zip(logvar).zip(noise).map(|((m, lv), e)| m + (0.5 * lv).exp() * e).collect())
}

impl Vae {
    pub fn new<R: Rng>(config: VaeConfig, rng: &mut R) -> Self {
        let mut dims = vec![config.input_dim];
        dims.extend(&config.hidden);
        let encoder = dims
            .windows(2)
            .map(|w| Block { dense: DenseParams::glorot(rng, w[0], w[1]), bn: BatchNorm::new(w[1]) })
            .collect();
        let top = *dims.last().expect("nonempty");
        let mu_head = DenseParams::glorot(rng, top, config.latent);
        let logvar_head = DenseParams::glorot(rng, top, config.latent);
        let mut ddims = vec![config.latent];
        ddims.extend(config.hidden.iter().rev());
        let decoder = ddims
            .windows(2)
            .map(|w| Block { dense: DenseParams::glorot(rng, w[0], w[1]), bn: BatchNorm::new(w[1]) })
            .collect();
        let output = DenseParams::glorot(rng, *ddims.last().expect("nonempty"), config.input_dim);
        Vae { config, encoder, mu_head, logvar_head, decoder, output }
    }

    fn block_forward<R: Rng>(
        block: &Block,
        input: Array2<f64>,
        mode: Mode,
        dropout: Option<f64>,
        rng: &mut R,
    ) -> Result<(Array2<f64>, BlockCache)> {
        let pre = block.dense.forward_batch(&input);
        let (y, bn) = block.bn.forward(&pre, mode)?;
        let mut gate = y.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
        if let Some(rate) = dropout {
            let mask = dropout_mask(gate.len(), rate, rng, mode)?;
            Zip::from(&mut gate).and(&Array1::from(mask).into_shape_with_order(y.raw_dim()).expect("shape")).for_each(
                |g, m| *g *= m,
            );
        }
        let out = &y * &gate;
        Ok((out, BlockCache { input, bn, gate }))
    }

    /// Full forward pass. `noise` is `batch x latent`; in inference mode the
    /// latent code is the posterior mean and `noise` is ignored.
    pub fn forward<R: Rng>(&self, x: &Array2<f64>, noise: &Array2<f64>, mode: Mode, rng: &mut R) -> Result<VaePass> {
        if x.ncols() != self.config.input_dim {
            return Err(HgrError::Shape(format!("VAE input width {} (want {})", x.ncols(), self.config.input_dim)));
        }
        let mut h = x.clone();
        let mut enc = Vec::with_capacity(self.encoder.len());
        for (i, block) in self.encoder.iter().enumerate() {
            let rate = self.config.dropout_layers.contains(&i).then_some(self.config.dropout);
            let (out, cache) = Self::block_forward(block, h, mode, rate, rng)?;
            enc.push(cache);
            h = out;
        }
        let mu = self.mu_head.forward_batch(&h);
        let logvar = self.logvar_head.forward_batch(&h);
        let noise = match mode {
            Mode::Train => {
                if noise.dim() != mu.dim() {
                    return Err(HgrError::Shape("VAE noise must be batch x latent".into()));
                }
                noise.clone()
            }
            Mode::Infer => Array2::zeros(mu.dim()),
        };
        let z = &mu + &(logvar.mapv(|lv| (0.5 * lv).exp()) * &noise);
        let enc_out = h;
        let mut h = z.clone();
        let mut dec = Vec::with_capacity(self.decoder.len());
        for block in &self.decoder {
            let (out, cache) = Self::block_forward(block, h, mode, None, rng)?;
            dec.push(cache);
            h = out;
        }
        let recon = self.output.forward_batch(&h).mapv(super::sigmoid);
        let dec_out = h;
        let b = x.nrows().max(1) as f64;
        let rec_loss = (&recon - x).mapv(|d| d * d).sum() / b;
        let kl = -0.5 * Zip::from(&mu).and(&logvar).fold(0.0, |acc, m, lv| acc + 1.0 + lv - m * m - lv.exp()) / b;
        if !rec_loss.is_finite() || !kl.is_finite() {
            return Err(HgrError::Numeric("VAE loss".into()));
        }
        Ok(VaePass { recon, mu, logvar, z, noise, enc, dec, enc_out, dec_out, rec_loss, kl })
    }

    /// Folds train-mode batch statistics of `pass` into the running averages.
    pub fn update_running(&mut self, pass: &VaePass) {
        for (block, cache) in self.encoder.iter_mut().zip(&pass.enc) {
            block.bn.update_running(&cache.bn);
        }
        for (block, cache) in self.decoder.iter_mut().zip(&pass.dec) {
            block.bn.update_running(&cache.bn);
        }
    }

    fn block_backward(block: &Block, cache: &BlockCache, dout: &Array2<f64>, out: &mut [Vec<f64>]) -> Array2<f64> {
        let dy = dout * &cache.gate;
        let (dpre, dgamma, dbeta) = block.bn.backward(&dy, &cache.bn);
        let (dw, db, dx) = block.dense.backward_batch(&cache.input, &dpre);
        out[0] = dw.into_raw_vec_and_offset().0;
        out[1] = db.to_vec();
        out[2] = dgamma.to_vec();
        out[3] = dbeta.to_vec();
        dx
    }

    /// Gradient of [`VaePass::loss`] with respect to every parameter.
    pub fn backward(&self, x: &Array2<f64>, pass: &VaePass) -> GradientSet {
        let mut g = GradientSet::zeros_like(self);
        let b = x.nrows().max(1) as f64;
        let ne = self.encoder.len();
        let nd = self.decoder.len();
        let head = 4 * ne;
        let dec0 = head + 4;
        let out_idx = dec0 + 4 * nd;

        let drecon = (&pass.recon - x) * (2.0 / b);
        let dlogit = drecon * &pass.recon.mapv(|r| r * (1.0 - r));
        let (dw, db, mut dh) = self.output.backward_batch(&pass.dec_out, &dlogit);
        g.tensors[out_idx] = dw.into_raw_vec_and_offset().0;
        g.tensors[out_idx + 1] = db.to_vec();
        for i in (0..nd).rev() {
            let range = dec0 + 4 * i..dec0 + 4 * i + 4;
            dh = Self::block_backward(&self.decoder[i], &pass.dec[i], &dh, &mut g.tensors[range]);
        }
        // dh is now dL/dz
        let sigma = pass.logvar.mapv(|lv| (0.5 * lv).exp());
        let dmu = &dh + &(&pass.mu / b);
        let dlogvar = &dh * &pass.noise * &sigma * 0.5 + &pass.logvar.mapv(|lv| -0.5 * (1.0 - lv.exp()) / b);
        let (dw, db, dh_mu) = self.mu_head.backward_batch(&pass.enc_out, &dmu);
        g.tensors[head] = dw.into_raw_vec_and_offset().0;
        g.tensors[head + 1] = db.to_vec();
        let (dw, db, dh_lv) = self.logvar_head.backward_batch(&pass.enc_out, &dlogvar);
        g.tensors[head + 2] = dw.into_raw_vec_and_offset().0;
        g.tensors[head + 3] = db.to_vec();
        let mut dh = dh_mu + dh_lv;
        for i in (0..ne).rev() {
            dh = Self::block_backward(&self.encoder[i], &pass.enc[i], &dh, &mut g.tensors[4 * i..4 * i + 4]);
        }
        g
    }

    /// Inference-mode reconstruction (`z = mu`).
    pub fn reconstruct(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        let noise = Array2::zeros((x.nrows(), self.config.latent));
        Ok(self.forward(x, &noise, Mode::Infer, &mut rng)?.recon)
    }

    /// Per-row `||x - x_hat||^2` in inference mode.
    pub fn reconstruction_errors(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        let r = self.reconstruct(x)?;
        Ok((&r - x).mapv(|d| d * d).sum_axis(Axis(1)).to_vec())
    }
}

fn block_tensors(b: &Block) -> [&[f64]; 4] {
    [
        b.dense.weights.as_slice().expect("layout"),
        b.dense.bias.as_slice().expect("layout"),
        b.bn.gamma.as_slice().expect("layout"),
        b.bn.beta.as_slice().expect("layout"),
    ]
}

impl Parameters for Vae {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut v = Vec::new();
        for b in &self.encoder {
            v.extend(block_tensors(b));
        }
        for d in [&self.mu_head, &self.logvar_head] {
            v.push(d.weights.as_slice().expect("layout"));
            v.push(d.bias.as_slice().expect("layout"));
        }
        for b in &self.decoder {
            v.extend(block_tensors(b));
        }
        v.push(self.output.weights.as_slice().expect("layout"));
        v.push(self.output.bias.as_slice().expect("layout"));
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = Vec::new();
        fn push_block<'a>(v: &mut Vec<&'a mut [f64]>, b: &'a mut Block) {
            v.push(b.dense.weights.as_slice_mut().expect("layout"));
            v.push(b.dense.bias.as_slice_mut().expect("layout"));
            v.push(b.bn.gamma.as_slice_mut().expect("layout"));
            v.push(b.bn.beta.as_slice_mut().expect("layout"));
        }
        for b in &mut self.encoder {
            push_block(&mut v, b);
        }
        v.push(self.mu_head.weights.as_slice_mut().expect("layout"));
        v.push(self.mu_head.bias.as_slice_mut().expect("layout"));
        v.push(self.logvar_head.weights.as_slice_mut().expect("layout"));
        v.push(self.logvar_head.bias.as_slice_mut().expect("layout"));
        for b in &mut self.decoder {
            push_block(&mut v, b);
        }
        v.push(self.output.weights.as_slice_mut().expect("layout"));
        v.push(self.output.bias.as_slice_mut().expect("layout"));
        v
    }

    fn tensor_names(&self) -> Vec<String> {
        let mut v = Vec::new();
        for i in 0..self.encoder.len() {
            for n in ["kernel", "bias", "gamma", "beta"] {
                v.push(format!("encoder.{i}.{n}"));
            }
        }
        for n in ["mu.kernel", "mu.bias", "logvar.kernel", "logvar.bias"] {
            v.push(n.to_string());
        }
        for i in 0..self.decoder.len() {
            for n in ["kernel", "bias", "gamma", "beta"] {
                v.push(format!("decoder.{i}.{n}"));
            }
        }
        v.push("output.kernel".into());
        v.push("output.bias".into());
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn reparameterize_cases() {
        assert_eq!(reparameterize(&[1.0, 2.0], &[0.3, -1.0], &[0.0, 0.0]).unwrap(), vec![1.0, 2.0]);
        assert_eq!(reparameterize(&[1.0], &[0.0], &[0.5]).unwrap(), vec![1.5]);
        let z = reparameterize(&[0.0], &[4f64.ln()], &[1.0]).unwrap();
        assert!((z[0] - 2.0).abs() < 1e-12);
        assert!(reparameterize(&[0.0], &[0.0, 1.0], &[1.0]).is_err());
    }

    #[test]
    fn shapes_and_output_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let vae = Vae::new(VaeConfig::default(), &mut rng);
        let x = Array2::from_shape_fn((4, 500), |(i, j)| ((i * 7 + j) % 11) as f64 / 10.0);
        let noise = Array2::from_shape_fn((4, 16), |(i, j)| (i as f64 - j as f64) / 10.0);
        let pass = vae.forward(&x, &noise, Mode::Train, &mut rng).unwrap();
        assert_eq!(pass.recon.dim(), (4, 500));
        assert!(pass.recon.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(pass.mu.dim(), (4, 16));
        let g = vae.backward(&x, &pass);
        g.check_shapes(&vae).unwrap();
        assert!(g.is_finite());
    }
}
