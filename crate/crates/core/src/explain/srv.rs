//! Global attributions, SHAP reference values and characterization.

use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::attribution::AttributionMatrix;
use crate::dsp::{FEATURE_COUNT, FEATURE_NAMES};
use crate::types::{AnomalyKind, GestureClass};
use crate::{HgrError, Result};

const RANGE: usize = 0;
const DOPPLER: usize = 1;

/// Mean absolute attribution per feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalAttribution {
    pub values: [f64; FEATURE_COUNT],
    /// Label frames of the aggregated windows.
    pub windows: Vec<usize>,
}

impl GlobalAttribution {
    /// `I_{j+1} - I_j` over the fixed feature order.
    pub fn slopes(&self) -> [f64; FEATURE_COUNT - 1] {
        slopes(&self.values)
    }
}

fn slopes(v: &[f64; FEATURE_COUNT]) -> [f64; FEATURE_COUNT - 1] {
    std::array::from_fn(|j| v[j + 1] - v[j])
}

pub fn global_attribution(matrices: &[AttributionMatrix]) -> Result<GlobalAttribution> {
    let cells: usize = matrices.iter().map(|m| m.rows).sum();
    if cells == 0 {
        return Err(HgrError::Data("global attribution of no windows".into()));
    }
    let mut values = [0.0; FEATURE_COUNT];
    for m in matrices {
        for (i, v) in m.values.iter().enumerate() {
            values[i % FEATURE_COUNT] += v.abs();
        }
    }
    for v in &mut values {
        *v /= cells as f64;
    }
    Ok(GlobalAttribution { values, windows: matrices.iter().map(|m| m.window_id).collect() })
}

/// Mean signed attribution per feature (diagnostic only).
pub fn signed_attribution(matrices: &[AttributionMatrix]) -> [f64; FEATURE_COUNT] {
    let cells: usize = matrices.iter().map(|m| m.rows).sum::<usize>().max(1);
    let mut values = [0.0; FEATURE_COUNT];
    for m in matrices {
        for (i, v) in m.values.iter().enumerate() {
            values[i % FEATURE_COUNT] += v;
        }
    }
    values.map(|v| v / cells as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSrv {
    pub class: GestureClass,
    pub min: [f64; FEATURE_COUNT],
    pub max: [f64; FEATURE_COUNT],
    pub median: [f64; FEATURE_COUNT],
    pub slopes: [f64; FEATURE_COUNT - 1],
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Srv {
    pub classes: Vec<ClassSrv>,
}

impl Srv {
    pub fn class(&self, c: GestureClass) -> Option<&ClassSrv> {
        self.classes.iter().find(|s| s.class == c)
    }
}

/// Envelope of the first `n` per-gesture global attributions of each class.
pub fn compute_srv(per_gesture: &[(GestureClass, GlobalAttribution)], classes: &[GestureClass], n: usize) -> Result<Srv> {
    if n == 0 {
        return Err(HgrError::Config("SRV needs n >= 1".into()));
    }
    let mut out = Vec::new();
    for &class in classes {
        let items: Vec<&GlobalAttribution> =
            per_gesture.iter().filter(|(c, _)| *c == class).map(|(_, g)| g).take(n).collect();
        if items.len() < n {
            return Err(HgrError::Data(format!("class {class}: {} nominal gestures, SRV needs {n}", items.len())));
        }
        let mut min = [f64::INFINITY; FEATURE_COUNT];
        let mut max = [f64::NEG_INFINITY; FEATURE_COUNT];
        for g in &items {
            for j in 0..FEATURE_COUNT {
                min[j] = min[j].min(g.values[j]);
                max[j] = max[j].max(g.values[j]);
            }
        }
        let median: [f64; FEATURE_COUNT] = std::array::from_fn(|j| (min[j] + max[j]) / 2.0);
        out.push(ClassSrv { class, min, max, median, slopes: slopes(&median), n });
    }
    Ok(Srv { classes: out })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Deviation {
    AboveMax,
    BelowMin,
    InRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Diagnosis {
    TooFast,
    TooSlow,
    TooFarOrWrist,
    Inconclusive,
}

impl Diagnosis {
    pub fn name(self) -> &'static str {
        match self {
            Diagnosis::TooFast => "too_fast",
            Diagnosis::TooSlow => "too_slow",
            Diagnosis::TooFarOrWrist => "too_far_or_wrist",
            Diagnosis::Inconclusive => "inconclusive",
        }
    }

    /// Diagnosis that names the cause of an anomaly of `kind`.
    pub fn expected_for(kind: AnomalyKind) -> Option<Diagnosis> {
        match kind {
            AnomalyKind::Fast => Some(Diagnosis::TooFast),
            AnomalyKind::Slow => Some(Diagnosis::TooSlow),
            AnomalyKind::Wrist => Some(Diagnosis::TooFarOrWrist),
            AnomalyKind::None => None,
        }
    }
}

impl fmt::Display for Diagnosis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationReport {
    pub intended: GestureClass,
    pub global: GlobalAttribution,
    pub deviations: [Deviation; FEATURE_COUNT],
    /// Feature pairs `(j, j+1)` whose slope sign differs from the SRV.
    pub slope_changes: Vec<(usize, usize)>,
    pub diagnosis: Diagnosis,
    pub message: String,
}

impl CharacterizationReport {
    pub fn has_deviation(&self) -> bool {
        self.deviations.iter().any(|d| *d != Deviation::InRange)
    }
}

pub fn characterize(global: &GlobalAttribution, intended: GestureClass, srv: &Srv) -> Result<CharacterizationReport> {
    if intended == GestureClass::Background {
        return Err(HgrError::Input("intended class must be a gesture".into()));
    }
    let env = srv.class(intended).ok_or_else(|| HgrError::Input(format!("no reference values for class {intended}")))?;
    let deviations: [Deviation; FEATURE_COUNT] = std::array::from_fn(|j| {
        let v = global.values[j];
        if v > env.max[j] {
            Deviation::AboveMax
        } else if v < env.min[j] {
            Deviation::BelowMin
        } else {
            Deviation::InRange
        }
    });
    let own = global.slopes();
    let slope_changes: Vec<(usize, usize)> =
        (0..FEATURE_COUNT - 1).filter(|&j| own[j].signum() != env.slopes[j].signum()).map(|j| (j, j + 1)).collect();
    let diagnosis = if deviations[DOPPLER] == Deviation::AboveMax && slope_changes.contains(&(RANGE, DOPPLER)) {
        Diagnosis::TooFast
    } else if deviations[DOPPLER] == Deviation::BelowMin {
        Diagnosis::TooSlow
    } else if deviations[RANGE] == Deviation::BelowMin {
        Diagnosis::TooFarOrWrist
    } else {
        Diagnosis::Inconclusive
    };
    let mut report = CharacterizationReport {
        intended,
        global: global.clone(),
        deviations,
        slope_changes,
        diagnosis,
        message: String::new(),
    };
    report.message = render_feedback(&report);
    Ok(report)
}

fn deviation_list(report: &CharacterizationReport) -> String {
    let parts: Vec<String> = report
        .deviations
        .iter()
        .enumerate()
        .filter_map(|(j, d)| match d {
            Deviation::AboveMax => Some(format!("{} above nominal range", FEATURE_NAMES[j])),
            Deviation::BelowMin => Some(format!("{} below nominal range", FEATURE_NAMES[j])),
            Deviation::InRange => None,
        })
        .collect();
    if parts.is_empty() {
        "no feature outside its nominal range".to_string()
    } else {
        parts.join(", ")
    }
}

pub fn render_feedback(report: &CharacterizationReport) -> String {
    let g = report.intended;
    let devs = deviation_list(report);
    match report.diagnosis {
        Diagnosis::TooFast => format!(
            "Your {g} looked faster than usual ({devs}). Please try performing the gesture more slowly."
        ),
        Diagnosis::TooSlow => format!(
            "Your {g} looked slower than usual ({devs}). Please try performing the gesture in one brisk, continuous motion."
        ),
        Diagnosis::TooFarOrWrist => format!(
            "Your {g} was hard to see ({devs}). Please perform the gesture closer to the radar with an extended arm."
        ),
        Diagnosis::Inconclusive => format!("Your {g} differed from your usual execution: {devs}."),
    }
}

/// One CSV line per characterized gesture.
pub fn characterization_csv(rows: &[(String, String, String, CharacterizationReport)]) -> String {
    let mut s = String::from("recording_id,user,truth_anomaly_kind,intended,diagnosis,deviation_found");
    for name in FEATURE_NAMES {
        let _ = write!(s, ",I_{name}");
    }
    s.push('\n');
    for (id, user, kind, r) in rows {
        let _ = write!(s, "{id},{user},{kind},{},{},{}", r.intended, r.diagnosis, r.has_deviation());
        for v in r.global.values {
            let _ = write!(s, ",{v:.6}");
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ga(v: [f64; 5]) -> GlobalAttribution {
        GlobalAttribution { values: v, windows: vec![] }
    }

    #[test]
    fn global_takes_absolute_values() {
        let m = AttributionMatrix {
            window_id: 0,
            rows: 2,
            values: vec![0.5, 0.0, 0.0, 0.0, 0.0, -0.5, 0.0, 0.0, 0.0, 0.0],
            base_value: 0.0,
            target: 1,
            output: 0.0,
        };
        let g = global_attribution(&[m]).unwrap();
        assert_eq!(g.values[0], 0.5);
    }

    #[test]
    fn srv_median_and_slope() {
        let items = vec![
            (GestureClass::Push, ga([0.2, 0.3, 0.1, 0.1, 0.1])),
            (GestureClass::Push, ga([0.4, 0.3, 0.1, 0.1, 0.1])),
        ];
        let srv = compute_srv(&items, &[GestureClass::Push], 2).unwrap();
        let c = srv.class(GestureClass::Push).unwrap();
        assert!((c.median[0] - 0.3).abs() < 1e-15);
        assert!(c.slopes[0].abs() < 1e-15);
        let srv = compute_srv(&[(GestureClass::Push, ga([0.5, 0.3, 0.0, 0.0, 0.0]))], &[GestureClass::Push], 1).unwrap();
        assert!((srv.classes[0].slopes[0] + 0.2).abs() < 1e-15);
        assert!(matches!(compute_srv(&items, &[GestureClass::Push], 3), Err(HgrError::Data(_))));
    }

    #[test]
    fn diagnosis_rules() {
        let items = vec![
            (GestureClass::SwipeLeft, ga([0.5, 0.3, 0.2, 0.1, 0.1])),
            (GestureClass::SwipeLeft, ga([0.6, 0.4, 0.3, 0.1, 0.1])),
        ];
        let srv = compute_srv(&items, &[GestureClass::SwipeLeft], 2).unwrap();
        let fast = characterize(&ga([0.55, 0.9, 0.25, 0.1, 0.1]), GestureClass::SwipeLeft, &srv).unwrap();
        assert_eq!(fast.diagnosis, Diagnosis::TooFast);
        assert!(fast.message.contains("more slowly"));
        let slow = characterize(&ga([0.55, 0.1, 0.25, 0.1, 0.1]), GestureClass::SwipeLeft, &srv).unwrap();
        assert_eq!(slow.diagnosis, Diagnosis::TooSlow);
        let far = characterize(&ga([0.3, 0.35, 0.25, 0.1, 0.1]), GestureClass::SwipeLeft, &srv).unwrap();
        assert_eq!(far.diagnosis, Diagnosis::TooFarOrWrist);
        assert!(far.message.contains("closer to the radar with an extended arm"));
        let none = characterize(&ga([0.55, 0.35, 0.25, 0.1, 0.1]), GestureClass::SwipeLeft, &srv).unwrap();
        assert_eq!(none.diagnosis, Diagnosis::Inconclusive);
        assert!(!none.has_deviation());
        assert!(matches!(characterize(&none.global, GestureClass::Background, &srv), Err(HgrError::Input(_))));
    }
}
