use serde::{Deserialize, Serialize};

use crate::types::GestureClass;
use crate::{HgrError, Result};

const BG: usize = 0;

fn check_pairs(pred: &[Vec<usize>], truth: &[Vec<usize>]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(HgrError::Shape(format!("{} predictions for {} recordings", pred.len(), truth.len())));
    }
    for (i, (p, t)) in pred.iter().zip(truth).enumerate() {
        if p.len() != t.len() {
            return Err(HgrError::Shape(format!("recording {i}: {} predictions for {} frames", p.len(), t.len())));
        }
    }
    if pred.is_empty() {
        return Err(HgrError::Data("no recordings to score".into()));
    }
    Ok(())
}

/// Frame accuracy averaged per recording, then over recordings.
pub fn accuracy(pred: &[Vec<usize>], truth: &[Vec<usize>]) -> Result<f64> {
    check_pairs(pred, truth)?;
    let mut total = 0.0;
    for (p, t) in pred.iter().zip(truth) {
        let hits = p.iter().zip(t).filter(|(a, b)| a == b).count();
        total += if t.is_empty() { 0.0 } else { hits as f64 / t.len() as f64 };
    }
    Ok(total / pred.len() as f64)
}

/// Accuracy restricted to frames whose truth is not Background. Recordings
/// without gesture frames are skipped.
pub fn gesture_accuracy(pred: &[Vec<usize>], truth: &[Vec<usize>]) -> Result<f64> {
    check_pairs(pred, truth)?;
    let mut total = 0.0;
    let mut used = 0usize;
    for (p, t) in pred.iter().zip(truth) {
        let frames: Vec<usize> = (0..t.len()).filter(|&i| t[i] != BG).collect();
        if frames.is_empty() {
            continue;
        }
        used += 1;
        total += frames.iter().filter(|&&i| p[i] == t[i]).count() as f64 / frames.len() as f64;
    }
    if used < pred.len() {
        log::warn!("gesture accuracy: skipped {} recordings without gesture frames", pred.len() - used);
    }
    if used == 0 {
        return Err(HgrError::Data("no recording contains gesture frames".into()));
    }
    Ok(total / used as f64)
}

/// First and last non-Background truth frame.
pub fn gesture_segment(truth: &[usize]) -> Option<(usize, usize)> {
    let first = truth.iter().position(|&c| c != BG)?;
    let last = truth.iter().rposition(|&c| c != BG)?;
    Some((first, last))
}

/// Tolerance region `[start - 3, end + 4]`, inclusive and clamped.
pub fn extended_window(segment: (usize, usize), len: usize) -> (usize, usize) {
    (segment.0.saturating_sub(3), (segment.1 + 4).min(len.saturating_sub(1)))
}

fn dg_hit(p: &[usize], t: &[usize]) -> Option<bool> {
    let seg = gesture_segment(t)?;
    let class = t[seg.0];
    let (lo, hi) = extended_window(seg, t.len());
    let inside: Vec<usize> = p[lo..=hi].iter().copied().filter(|&c| c != BG).collect();
    let single = !inside.is_empty() && inside.iter().all(|&c| c == class);
    Some(single && inside.len() > 4)
}

/// Recording-level score: the only non-Background class predicted in the
/// tolerance region is the true one, on more than four frames.
pub fn dynamic_gesture_accuracy(pred: &[Vec<usize>], truth: &[Vec<usize>]) -> Result<f64> {
    check_pairs(pred, truth)?;
    let hits: Vec<bool> = pred.iter().zip(truth).filter_map(|(p, t)| dg_hit(p, t)).collect();
    if hits.is_empty() {
        return Err(HgrError::Data("no recording contains gesture frames".into()));
    }
    Ok(hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub acc: f64,
    pub gesture_acc: f64,
    pub dg_acc: f64,
    /// `confusion[truth][pred]` frame counts.
    pub confusion: Vec<Vec<u64>>,
}

impl MetricsReport {
    pub fn evaluate(pred: &[Vec<usize>], truth: &[Vec<usize>]) -> Result<Self> {
        let acc = accuracy(pred, truth)?;
        let gesture_acc = gesture_accuracy(pred, truth).unwrap_or(0.0);
        let dg_acc = dynamic_gesture_accuracy(pred, truth).unwrap_or(0.0);
        let k = GestureClass::COUNT;
        let mut confusion = vec![vec![0u64; k]; k];
        for (p, t) in pred.iter().zip(truth) {
            for (&a, &b) in p.iter().zip(t) {
                if a >= k || b >= k {
                    return Err(HgrError::Label { label: a.max(b), classes: k });
                }
                confusion[b][a] += 1;
            }
        }
        Ok(MetricsReport { acc, gesture_acc, dg_acc, confusion })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truth(start: usize, class: usize) -> Vec<usize> {
        let mut t = vec![0; 100];
        t[start..start + 10].fill(class);
        t
    }

    #[test]
    fn all_background_predictor() {
        let t = vec![truth(40, 2)];
        let p = vec![vec![0; 100]];
        assert!((accuracy(&p, &t).unwrap() - 0.9).abs() < 1e-12);
        assert_eq!(gesture_accuracy(&p, &t).unwrap(), 0.0);
        assert_eq!(dynamic_gesture_accuracy(&p, &t).unwrap(), 0.0);
    }

    #[test]
    fn perfect_and_wrong() {
        let t = vec![truth(40, 2)];
        assert_eq!(accuracy(&t, &t).unwrap(), 1.0);
        let p = vec![t[0].iter().map(|c| (c + 1) % 6).collect()];
        assert_eq!(accuracy(&p, &t).unwrap(), 0.0);
    }

    #[test]
    fn half_gesture_frames() {
        let t = vec![truth(40, 3)];
        let mut p = vec![0; 100];
        p[40..45].fill(3);
        assert_eq!(gesture_accuracy(&[p], &t).unwrap(), 0.5);
    }

    #[test]
    fn dg_cases() {
        let t = vec![truth(40, 5)];
        let mut p = vec![0; 100];
        p[42..48].fill(5); // shifted by 2, six frames
        assert_eq!(dynamic_gesture_accuracy(&[p.clone()], &t).unwrap(), 1.0);
        let mut short = vec![0; 100];
        short[42..45].fill(5);
        assert_eq!(dynamic_gesture_accuracy(&[short], &t).unwrap(), 0.0);
        p[46] = 1;
        assert_eq!(dynamic_gesture_accuracy(&[p], &t).unwrap(), 0.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(accuracy(&[vec![0; 3]], &[vec![0; 4]]), Err(HgrError::Shape(_))));
    }

    #[test]
    fn extended_window_counts_seventeen() {
        let (lo, hi) = extended_window((40, 49), 100);
        assert_eq!(hi - lo + 1, 17);
        assert_eq!(extended_window((1, 10), 12), (0, 11));
    }
}
