use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::Mode;
use crate::{HgrError, Result};

/// Batch normalization over the feature axis of a `batch x features` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    pub momentum: f64,
    pub eps: f64,
}

#[derive(Debug, Clone)]
pub struct BatchNormCache {
    pub xhat: Array2<f64>,
    pub inv_std: Array1<f64>,
    pub mode: Mode,
    /// Batch statistics (train mode only), applied to the running averages
    /// by [`BatchNorm::update_running`].
    pub batch_mean: Option<Array1<f64>>,
    pub batch_var: Option<Array1<f64>>,
}

impl BatchNorm {
    pub fn new(features: usize) -> Self {
        BatchNorm {
            gamma: Array1::ones(features),
            beta: Array1::zeros(features),
            running_mean: Array1::zeros(features),
            running_var: Array1::ones(features),
            momentum: 0.99,
            eps: 1e-5,
        }
    }

    pub fn features(&self) -> usize {
        self.gamma.len()
    }

    /// Pure forward pass; running statistics are left untouched.
    pub fn forward(&self, x: &Array2<f64>, mode: Mode) -> Result<(Array2<f64>, BatchNormCache)> {
        if x.ncols() != self.features() {
            return Err(HgrError::Shape(format!("batchnorm {} features, input {}", self.features(), x.ncols())));
        }
        let (mean, var, batch) = match mode {
            Mode::Train => {
                if x.nrows() == 0 {
                    return Err(HgrError::Batch("empty batch in train mode".into()));
                }
                let mean = x.mean_axis(Axis(0)).expect("nonempty");
                let var = x.var_axis(Axis(0), 0.0);
                (mean.clone(), var.clone(), Some((mean, var)))
            }
            Mode::Infer => (self.running_mean.clone(), self.running_var.clone(), None),
        };
        let inv_std = var.mapv(|v| 1.0 / (v + self.eps).sqrt());
        let xhat = (x - &mean) * &inv_std;
        let y = &xhat * &self.gamma + &self.beta;
        let (batch_mean, batch_var) = match batch {
            Some((m, v)) => (Some(m), Some(v)),
            None => (None, None),
        };
        Ok((y, BatchNormCache { xhat, inv_std, mode, batch_mean, batch_var }))
    }

    pub fn update_running(&mut self, cache: &BatchNormCache) {
        if let (Some(m), Some(v)) = (&cache.batch_mean, &cache.batch_var) {
            let k = self.momentum;
            self.running_mean = &self.running_mean * k + m * (1.0 - k);
            self.running_var = &self.running_var * k + v * (1.0 - k);
        }
    }

    /// Returns `(dx, dgamma, dbeta)`.
    pub fn backward(&self, dy: &Array2<f64>, cache: &BatchNormCache) -> (Array2<f64>, Array1<f64>, Array1<f64>) {
        let dbeta = dy.sum_axis(Axis(0));
        let dgamma = (dy * &cache.xhat).sum_axis(Axis(0));
        let dxhat = dy * &self.gamma;
        let dx = match cache.mode {
            Mode::Infer => dxhat * &cache.inv_std,
            Mode::Train => {
                let n = dy.nrows() as f64;
                let sum_dxhat = dxhat.sum_axis(Axis(0));
                let sum_dxhat_xhat = (&dxhat * &cache.xhat).sum_axis(Axis(0));
                let t = &dxhat * n - &sum_dxhat - &cache.xhat * &sum_dxhat_xhat;
                t * &cache.inv_std / n
            }
        };
        (dx, dgamma, dbeta)
    }
}

/// Forward pass that also folds the batch statistics into the running
/// averages in train mode.
pub fn batchnorm_forward(x: &Array2<f64>, bn: &mut BatchNorm, mode: Mode) -> Result<Array2<f64>> {
    let (y, cache) = bn.forward(x, mode)?;
    bn.update_running(&cache);
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn constant_batch_goes_to_beta() {
        let mut bn = BatchNorm::new(2);
        bn.gamma = array![2.0, 3.0];
        bn.beta = array![0.5, -1.0];
        let y = batchnorm_forward(&array![[4.0, 1.0], [4.0, 1.0], [4.0, 1.0]], &mut bn, Mode::Train).unwrap();
        for row in y.rows() {
            assert!((row[0] - 0.5).abs() < 1e-12 && (row[1] + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_variance_batch() {
        let mut bn = BatchNorm::new(1);
        let y = batchnorm_forward(&array![[-1.0], [1.0]], &mut bn, Mode::Train).unwrap();
        assert!((y[[0, 0]] + 1.0).abs() < 1e-4 && (y[[1, 0]] - 1.0).abs() < 1e-4);
        // running stats moved by (1 - momentum)
        assert!((bn.running_var[0] - (0.99 + 0.01)).abs() < 1e-12);
        assert!(bn.running_mean[0].abs() < 1e-12);
    }

    #[test]
    fn infer_identity_with_default_stats() {
        let mut bn = BatchNorm::new(3);
        bn.eps = 0.0;
        let x = array![[1.0, -2.0, 3.5]];
        assert_eq!(batchnorm_forward(&x, &mut bn, Mode::Infer).unwrap(), x);
    }

    #[test]
    fn empty_train_batch_rejected() {
        let mut bn = BatchNorm::new(3);
        let x = Array2::<f64>::zeros((0, 3));
        assert!(matches!(batchnorm_forward(&x, &mut bn, Mode::Train), Err(HgrError::Batch(_))));
    }
}
