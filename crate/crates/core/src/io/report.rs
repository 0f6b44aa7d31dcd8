//! Report rows and their CSV / JSON emission.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::atomic_write;
use crate::calibration::{Method, SweepResult};
use crate::{HgrError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub experiment: String,
    pub metric: String,
    pub value: f64,
    pub std: Option<f64>,
    pub config_hash: String,
    /// Hash of the artifacts the value was computed from.
    pub input_hash: String,
}

impl ReportRow {
    pub fn new(experiment: &str, metric: impl Into<String>, value: f64, std: Option<f64>, config_hash: &str, input_hash: &str) -> Self {
        ReportRow {
            experiment: experiment.to_string(),
            metric: metric.into(),
            value,
            std,
            config_hash: config_hash.to_string(),
            input_hash: input_hash.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
    #[default]
    Both,
}

pub fn rows_to_csv(rows: &[ReportRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| HgrError::Data(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| HgrError::Data(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| HgrError::Data(e.to_string()))
}

pub fn rows_from_csv(text: &str) -> Result<Vec<ReportRow>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .map(|r| r.map_err(|e| HgrError::Data(e.to_string())))
        .collect()
}

/// Writes `<dir>/<stem>.csv` and/or `<dir>/<stem>.json`.
pub fn emit_report(rows: &[ReportRow], dir: &Path, stem: &str, format: ReportFormat) -> Result<Vec<PathBuf>> {
    if rows.is_empty() {
        return Err(HgrError::Data("report has no rows".into()));
    }
    if let Some(bad) = rows.iter().find(|r| !r.value.is_finite() || r.std.is_some_and(|s| !s.is_finite())) {
        return Err(HgrError::Numeric(format!("{}/{} = {}", bad.experiment, bad.metric, bad.value)));
    }
    let mut out = Vec::new();
    if format != ReportFormat::Json {
        let p = dir.join(format!("{stem}.csv"));
        atomic_write(&p, rows_to_csv(rows)?.as_bytes())?;
        out.push(p);
    }
    if format != ReportFormat::Csv {
        let p = dir.join(format!("{stem}.json"));
        super::write_json(&p, &rows)?;
        out.push(p);
    }
    Ok(out)
}

/// Per-user summary of a sweep: uncalibrated accuracy, then the range of
/// cell means with replay (ER, n_train > 0) and without (plain retraining
/// or no replayed data). Empty ranges are left blank.
pub fn sweep_table(sweep: &SweepResult, baseline: &[(String, f64)]) -> String {
    let mut s = String::from("user,baseline,with_er_min,with_er_max,without_er_min,without_er_max\n");
    let range = |vals: Vec<f64>| -> (String, String) {
        if vals.is_empty() {
            return (String::new(), String::new());
        }
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (format!("{lo:.4}"), format!("{hi:.4}"))
    };
    for (user, base) in baseline {
        let cells = sweep.cells.iter().filter(|c| &c.user == user);
        let (with, without): (Vec<_>, Vec<_>) = cells.partition(|c| c.method == Method::Er && c.n_train > 0);
        let with = range(with.iter().map(|c| c.user_mean).collect());
        let without = range(without.iter().filter(|c| matches!(c.method, Method::Er | Method::Plain)).map(|c| c.user_mean).collect());
        s.push_str(&format!("{user},{base:.4},{},{},{},{}\n", with.0, with.1, without.0, without.1));
    }
    s
}
