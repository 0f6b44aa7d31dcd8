use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::importance::{fisher_diagonal, ImportanceWeights};
use super::retrain::{calibrate, forgetting_eval, CalibrationConfig, Method};
use crate::dataset::{windows_of, Recording};
use crate::model::GruModel;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepGrid {
    pub n_train: Vec<usize>,
    pub n_user: Vec<usize>,
    pub methods: Vec<Method>,
    pub runs: usize,
}

impl Default for SweepGrid {
    fn default() -> Self {
        let n = vec![5, 10, 25, 50, 100];
        SweepGrid { n_train: n.clone(), n_user: n, methods: vec![Method::Er], runs: 6 }
    }
}

impl SweepGrid {
    pub fn job_count(&self, users: usize) -> usize {
        self.n_train.len() * self.n_user.len() * self.methods.len() * users * self.runs
    }
}

/// Calibration pool and assessment recordings of one target user.
pub struct SweepUser<'a> {
    pub id: String,
    pub pool: Vec<&'a Recording>,
    pub assessment: Vec<&'a Recording>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: Method,
    pub n_train: usize,
    pub n_user: usize,
    pub user: String,
    pub run: usize,
    pub seed: u64,
    pub user_gesture_acc: f64,
    pub forget_gesture_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub method: Method,
    pub n_train: usize,
    pub n_user: usize,
    pub user: String,
    pub runs: usize,
    pub user_mean: f64,
    pub user_std: f64,
    pub forget_mean: f64,
    pub forget_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub cells: Vec<SweepCell>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, var.sqrt())
}

impl SweepResult {
    /// Aggregates rows into per-cell means and sample standard deviations,
    /// keeping the first-seen cell order.
    pub fn aggregate(rows: Vec<SweepRow>) -> Self {
        let mut keys: Vec<(Method, usize, usize, String)> = Vec::new();
        for r in &rows {
            let k = (r.method, r.n_train, r.n_user, r.user.clone());
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        let cells = keys
            .into_iter()
            .map(|(method, n_train, n_user, user)| {
                let sel: Vec<&SweepRow> = rows
                    .iter()
                    .filter(|r| r.method == method && r.n_train == n_train && r.n_user == n_user && r.user == user)
                    .collect();
                let (user_mean, user_std) = mean_std(&sel.iter().map(|r| r.user_gesture_acc).collect::<Vec<_>>());
                let (forget_mean, forget_std) = mean_std(&sel.iter().map(|r| r.forget_gesture_acc).collect::<Vec<_>>());
                SweepCell { method, n_train, n_user, user, runs: sel.len(), user_mean, user_std, forget_mean, forget_std }
            })
            .collect();
        SweepResult { rows, cells }
    }

    pub fn rows_csv(&self) -> String {
        let mut s = String::from("method,n_train,n_user,user,run,seed,user_gesture_acc,forget_gesture_acc\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{:.6},{:.6}",
                r.method, r.n_train, r.n_user, r.user, r.run, r.seed, r.user_gesture_acc, r.forget_gesture_acc
            );
        }
        s
    }

    pub fn cells_csv(&self) -> String {
        let mut s = String::from("method,n_train,n_user,user,runs,user_mean,user_std,forget_mean,forget_std\n");
        for c in &self.cells {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{:.6},{:.6},{:.6},{:.6}",
                c.method, c.n_train, c.n_user, c.user, c.runs, c.user_mean, c.user_std, c.forget_mean, c.forget_std
            );
        }
        s
    }

    pub fn cell(&self, method: Method, n_train: usize, n_user: usize, user: &str) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.method == method && c.n_train == n_train && c.n_user == n_user && c.user == user)
    }
}

/// Calibrates every (method, n_train, n_user, user, run) job; run `r` uses
/// seed `base.seed + r`.
#[allow(clippy::too_many_arguments)]
pub fn run_sweep(
    model: &GruModel,
    grid: &SweepGrid,
    users: &[SweepUser<'_>],
    train_pool: &[&Recording],
    forget_set: &[&Recording],
    base: &CalibrationConfig,
    fisher: Option<&ImportanceWeights>,
    si: Option<&ImportanceWeights>,
) -> Result<SweepResult> {
    let owned_fisher;
    let fisher = match fisher {
        Some(f) => Some(f),
        None if grid.methods.contains(&Method::Ewc) => {
            let pool = windows_of(train_pool, &model.norm, model.window_len)?;
            let take = pool.count().min(base.fisher_windows);
            let step = (pool.count() / take.max(1)).max(1);
            let idx: Vec<usize> = (0..pool.count()).step_by(step).take(take).collect();
            owned_fisher = fisher_diagonal(&model.net, &pool.select(&idx))?;
            Some(&owned_fisher)
        }
        None => None,
    };
    let mut jobs = Vec::new();
    for &method in &grid.methods {
        for &n_train in &grid.n_train {
            for &n_user in &grid.n_user {
                for (u, _) in users.iter().enumerate() {
                    for run in 0..grid.runs {
                        jobs.push((method, n_train, n_user, u, run));
                    }
                }
            }
        }
    }
    let rows = crate::par::map(&jobs, |&(method, n_train, n_user, u, run)| -> Result<SweepRow> {
        let user = &users[u];
        let cfg = CalibrationConfig { method, n_train, n_user, seed: base.seed + run as u64, ..base.clone() };
        let importance = match method {
            Method::Ewc => fisher,
            Method::Si => si,
            _ => None,
        };
        let m = calibrate(model, &user.pool, train_pool, &cfg, importance)?;
        Ok(SweepRow {
            method,
            n_train,
            n_user,
            user: user.id.clone(),
            run,
            seed: cfg.seed,
            user_gesture_acc: forgetting_eval(&m, &user.assessment)?,
            forget_gesture_acc: forgetting_eval(&m, forget_set)?,
        })
    });
    Ok(SweepResult::aggregate(rows.into_iter().collect::<Result<Vec<_>>>()?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn job_counting() {
        let g = SweepGrid { n_train: vec![5, 10], n_user: vec![5, 10], methods: vec![Method::Er, Method::Plain], runs: 6 };
        assert_eq!(g.job_count(2), 96);
    }

    #[test]
    fn aggregates_recompute() {
        let row = |run, u| SweepRow {
            method: Method::Er,
            n_train: 5,
            n_user: 5,
            user: "x".into(),
            run,
            seed: run as u64,
            user_gesture_acc: u,
            forget_gesture_acc: 1.0 - u,
        };
        let r = SweepResult::aggregate(vec![row(0, 0.5), row(1, 0.7), row(2, 0.9)]);
        let c = &r.cells[0];
        assert_eq!(c.runs, 3);
        assert!((c.user_mean - 0.7).abs() < 1e-12);
        assert!((c.user_std - 0.2).abs() < 1e-12);
        assert!((c.forget_mean - 0.3).abs() < 1e-12);
    }
}
