use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{HgrError, Result};

/// Fully connected layer `y = x W + b`, `W` is `in x out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseParams {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseParams {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        DenseParams { weights: Array2::zeros((inputs, outputs)), bias: Array1::zeros(outputs) }
    }

    pub fn glorot<R: Rng>(rng: &mut R, inputs: usize, outputs: usize) -> Self {
        let w = super::glorot_uniform(rng, inputs, outputs);
        DenseParams {
            weights: Array2::from_shape_vec((inputs, outputs), w).expect("shape"),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.ncols()
    }

    /// Batched forward over rows of `x`.
    pub fn forward_batch(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut y = x.dot(&self.weights);
        y += &self.bias;
        y
    }

    /// Returns `(dW, db, dx)` for upstream gradient `dy`.
    pub fn backward_batch(&self, x: &Array2<f64>, dy: &Array2<f64>) -> (Array2<f64>, Array1<f64>, Array2<f64>) {
        let dw = x.t().dot(dy);
        let db = dy.sum_axis(Axis(0));
        let dx = dy.dot(&self.weights.t());
        (dw, db, dx)
    }
}

pub fn dense_forward(x: &[f64], p: &DenseParams) -> Result<Vec<f64>> {
    if x.len() != p.inputs() || p.bias.len() != p.outputs() {
        return Err(HgrError::Shape(format!(
            "dense input {} vs weights {}x{} / bias {}",
            x.len(),
            p.inputs(),
            p.outputs(),
            p.bias.len()
        )));
    }
    let mut y = p.bias.to_vec();
    for (i, xi) in x.iter().enumerate() {
        for (j, yj) in y.iter_mut().enumerate() {
            *yj += xi * p.weights[[i, j]];
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn identity_and_hand_multiply() {
        let p = DenseParams { weights: Array2::eye(2), bias: Array1::zeros(2) };
        assert_eq!(dense_forward(&[1.0, 0.0], &p).unwrap(), vec![1.0, 0.0]);

        let p = DenseParams { weights: array![[1.0, 1.0], [1.0, -1.0]], bias: array![0.5, 0.5] };
        assert_eq!(dense_forward(&[1.0, 2.0], &p).unwrap(), vec![3.5, -0.5]);
        assert_eq!(dense_forward(&[0.0, 0.0], &p).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let p = DenseParams::zeros(3, 2);
        assert!(matches!(dense_forward(&[1.0], &p), Err(HgrError::Shape(_))));
    }

    #[test]
    fn batch_matches_single() {
        let p = DenseParams { weights: array![[1.0, 1.0], [1.0, -1.0]], bias: array![0.5, 0.5] };
        let y = p.forward_batch(&array![[1.0, 2.0], [0.0, 0.0]]);
        assert_eq!(y, array![[3.5, -0.5], [0.5, 0.5]]);
    }
}
