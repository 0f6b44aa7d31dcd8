use super::FrameFeatures;
use crate::types::GestureClass;
use crate::{HgrError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RefinedLabels {
    pub labels: Vec<GestureClass>,
    pub anchor: usize,
    /// True when no frame reached the amplitude threshold.
    pub fallback: bool,
}

/// Anchors a `gesture_len`-frame label at the closest frame whose peak is at
/// least `amp_threshold`; every other frame is Background.
pub fn refine_labels(
    frames: &[FrameFeatures],
    class: GestureClass,
    gesture_len: usize,
    amp_threshold: f64,
) -> Result<RefinedLabels> {
    let t = frames.len();
    if gesture_len == 0 || t < gesture_len {
        return Err(HgrError::Shape(format!("{t} frames cannot hold a {gesture_len}-frame gesture")));
    }
    let closest = |pred: &dyn Fn(&FrameFeatures) -> bool| {
        frames
            .iter()
            .enumerate()
            .filter(|(_, f)| pred(f))
            .min_by(|a, b| a.1.range.total_cmp(&b.1.range).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i)
    };
    let (anchor, fallback) = match closest(&|f| f.peak >= amp_threshold) {
        Some(i) => (i, false),
        None => {
            log::warn!("no frame reaches the label amplitude threshold {amp_threshold}; anchoring at global minimum range");
            (closest(&|_| true).unwrap_or(0), true)
        }
    };
    let anchor = anchor.min(t - gesture_len);
    let mut labels = vec![GestureClass::Background; t];
    labels[anchor..anchor + gesture_len].fill(class);
    Ok(RefinedLabels { labels, anchor, fallback })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(ranges: &[f64], peaks: &[f64]) -> Vec<FrameFeatures> {
        ranges.iter().zip(peaks).map(|(&range, &peak)| FrameFeatures { range, peak, ..Default::default() }).collect()
    }

    #[test]
    fn anchors_at_closest_strong_frame() {
        let mut ranges = vec![1.0; 100];
        let mut peaks = vec![0.1; 100];
        for (i, r) in ranges.iter_mut().enumerate().skip(38).take(10) {
            *r = 0.5 - 0.01 * (4.0 - (i as f64 - 42.0).abs());
        }
        peaks[38..48].fill(2.0);
        ranges[3] = 0.05; // spurious close detection in a weak frame
        let r = refine_labels(&seq(&ranges, &peaks), GestureClass::Push, 10, 1.0).unwrap();
        assert_eq!(r.anchor, 42);
        assert!(!r.fallback);
        assert!(r.labels[42..52].iter().all(|&c| c == GestureClass::Push));
        assert_eq!(r.labels.iter().filter(|&&c| c != GestureClass::Background).count(), 10);
    }

    #[test]
    fn all_noise_falls_back() {
        let ranges: Vec<f64> = (0..30).map(|i| 1.0 - i as f64 * 0.01).collect();
        let r = refine_labels(&seq(&ranges, &[0.0; 30]), GestureClass::SwipeUp, 10, 1.0).unwrap();
        assert!(r.fallback);
        assert_eq!(r.anchor, 20); // clamped so the run fits
    }

    #[test]
    fn too_short() {
        assert!(refine_labels(&seq(&[1.0; 5], &[1.0; 5]), GestureClass::Push, 10, 0.0).is_err());
    }
}
