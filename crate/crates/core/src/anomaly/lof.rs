//! Local outlier factor with brute-force neighbor search.

use serde::{Deserialize, Serialize};

use crate::{HgrError, Result};

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// The `k` nearest training points to `query` as `(index, distance)`, sorted
/// by distance then index. `exclude` drops one training index (the query
/// itself when scoring training points).
pub fn knn(data: &[Vec<f64>], query: &[f64], k: usize, exclude: Option<usize>) -> Vec<(usize, f64)> {
    let mut d: Vec<(usize, f64)> =
        data.iter().enumerate().filter(|(i, _)| Some(*i) != exclude).map(|(i, x)| (i, euclidean(x, query))).collect();
    d.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    d.truncate(k);
    d
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lof {
    train: Vec<Vec<f64>>,
    pub k: usize,
    k_distance: Vec<f64>,
    lrd: Vec<f64>,
    /// LOF values above this are flagged.
    pub threshold: f64,
}

fn lrd_of(neigh: &[(usize, f64)], k_distance: &[f64]) -> f64 {
    let reach = neigh.iter().map(|&(j, d)| d.max(k_distance[j])).sum::<f64>() / neigh.len() as f64;
    1.0 / (reach + 1e-10)
}

impl Lof {
    pub fn fit(data: &[Vec<f64>], k: usize, threshold: f64) -> Result<Self> {
        if k == 0 || data.len() < k + 1 {
            return Err(HgrError::Config(format!("LOF with k={k} needs at least {} points, got {}", k + 1, data.len())));
        }
        let dim = data[0].len();
        if data.iter().any(|x| x.len() != dim) {
            return Err(HgrError::Shape("LOF inputs differ in length".into()));
        }
        let neigh = crate::par::map_range(data.len(), |i| knn(data, &data[i], k, Some(i)));
        let k_distance: Vec<f64> = neigh.iter().map(|n| n[k - 1].1).collect();
        let lrd = neigh.iter().map(|n| lrd_of(n, &k_distance)).collect();
        Ok(Lof { train: data.to_vec(), k, k_distance, lrd, threshold })
    }

    /// LOF of a new point relative to the training set.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.train[0].len() {
            return Err(HgrError::Shape("LOF query width".into()));
        }
        Ok(self.score_neighbors(&knn(&self.train, x, self.k, None)))
    }

    fn score_neighbors(&self, neigh: &[(usize, f64)]) -> f64 {
        let own = lrd_of(neigh, &self.k_distance);
        neigh.iter().map(|&(j, _)| self.lrd[j]).sum::<f64>() / neigh.len() as f64 / own
    }

    /// LOF of every training point with itself excluded from its neighbors.
    pub fn train_scores(&self) -> Vec<f64> {
        crate::par::map_range(self.train.len(), |i| {
            self.score_neighbors(&knn(&self.train, &self.train[i], self.k, Some(i)))
        })
    }

    pub fn scores(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        crate::par::map(xs, |x| self.score(x)).into_iter().collect()
    }

    pub fn flags(&self, x: &[f64]) -> Result<bool> {
        Ok(self.score(x)? > self.threshold)
    }
}
