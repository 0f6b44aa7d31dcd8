//! Isolation forest over fixed-length feature vectors.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::verdict::nearest_rank;
use crate::{HgrError, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IsolationForestConfig {
    pub n_trees: usize,
    pub max_samples: usize,
    pub contamination: f64,
    pub seed: u64,
}

impl Default for IsolationForestConfig {
    fn default() -> Self {
        IsolationForestConfig { n_trees: 250, max_samples: 256, contamination: 0.055, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf { size: usize },
    Split { feature: usize, value: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationForest {
    trees: Vec<Vec<Node>>,
    sample_size: usize,
    dim: usize,
    /// Scores above this value are flagged.
    pub threshold: f64,
}

/// Average unsuccessful-search path length of a binary search tree with `n`
/// points.
pub fn average_path_length(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let m = (n - 1) as f64;
            2.0 * (m.ln() + EULER_GAMMA) - 2.0 * m / n as f64
        }
    }
}

fn grow<R: Rng>(data: &[Vec<f64>], idx: &mut [usize], depth: usize, limit: usize, nodes: &mut Vec<Node>, rng: &mut R) -> usize {
    let me = nodes.len();
    nodes.push(Node::Leaf { size: idx.len() });
    if depth >= limit || idx.len() <= 1 {
        return me;
    }
    let dim = data[idx[0]].len();
    let ranges: Vec<(usize, f64, f64)> = (0..dim)
        .filter_map(|f| {
            let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                (lo.min(data[i][f]), hi.max(data[i][f]))
            });
            (hi > lo).then_some((f, lo, hi))
        })
        .collect();
    let Some(&(feature, lo, hi)) = ranges.choose(rng) else {
        return me;
    };
    let value = rng.gen_range(lo..hi);
    let mut split = 0;
    for j in 0..idx.len() {
        if data[idx[j]][feature] < value {
            idx.swap(j, split);
            split += 1;
        }
    }
    let (l, r) = idx.split_at_mut(split);
    let left = grow(data, l, depth + 1, limit, nodes, rng);
    let right = grow(data, r, depth + 1, limit, nodes, rng);
    nodes[me] = Node::Split { feature, value, left, right };
    me
}

impl IsolationForest {
    pub fn fit(data: &[Vec<f64>], cfg: &IsolationForestConfig) -> Result<Self> {
        if data.is_empty() {
            return Err(HgrError::Data("isolation forest needs training points".into()));
        }
        if cfg.n_trees == 0 || cfg.max_samples == 0 {
            return Err(HgrError::Config("n_trees and max_samples must be positive".into()));
        }
        if !(0.0..0.5).contains(&cfg.contamination) {
            return Err(HgrError::Config(format!("contamination {} outside [0, 0.5)", cfg.contamination)));
        }
        let dim = data[0].len();
        if data.iter().any(|x| x.len() != dim) {
            return Err(HgrError::Shape("isolation forest inputs differ in length".into()));
        }
        let sample_size = cfg.max_samples.min(data.len());
        let limit = (sample_size as f64).log2().ceil().max(1.0) as usize;
        let trees = crate::par::map_range(cfg.n_trees, |t| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(t as u64);
            let mut idx = rand::seq::index::sample(&mut rng, data.len(), sample_size).into_vec();
            let mut nodes = Vec::new();
            grow(data, &mut idx, 0, limit, &mut nodes, &mut rng);
            nodes
        });
        let mut forest = IsolationForest { trees, sample_size, dim, threshold: f64::INFINITY };
        let scores = forest.scores(data)?;
        forest.threshold = nearest_rank(&scores, 100.0 * (1.0 - cfg.contamination))?;
        Ok(forest)
    }

    fn path_length(tree: &[Node], x: &[f64]) -> f64 {
        let mut node = 0;
        let mut depth = 0.0;
        loop {
            match tree[node] {
                Node::Leaf { size } => return depth + average_path_length(size),
                Node::Split { feature, value, left, right } => {
                    node = if x[feature] < value { left } else { right };
                    depth += 1.0;
                }
            }
        }
    }

    /// `2^(-E[h(x)] / c(n))`, in (0, 1); larger is more anomalous.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(HgrError::Shape(format!("isolation forest input of {} (want {})", x.len(), self.dim)));
        }
        let mean = self.trees.iter().map(|t| Self::path_length(t, x)).sum::<f64>() / self.trees.len() as f64;
        let c = average_path_length(self.sample_size).max(f64::MIN_POSITIVE);
        Ok(2f64.powf(-mean / c))
    }

    pub fn scores(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        crate::par::map(xs, |x| self.score(x)).into_iter().collect()
    }

    pub fn flags(&self, x: &[f64]) -> Result<bool> {
        Ok(self.score(x)? > self.threshold)
    }
}
