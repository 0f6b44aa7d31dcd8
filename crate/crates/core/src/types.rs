//! Identifiers shared across the pipeline.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::HgrError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GestureClass {
    Background = 0,
    SwipeLeft = 1,
    SwipeRight = 2,
    SwipeUp = 3,
    SwipeDown = 4,
    Push = 5,
}

impl GestureClass {
    pub const COUNT: usize = 6;
    pub const ALL: [GestureClass; 6] = [
        GestureClass::Background,
        GestureClass::SwipeLeft,
        GestureClass::SwipeRight,
        GestureClass::SwipeUp,
        GestureClass::SwipeDown,
        GestureClass::Push,
    ];
    pub const GESTURES: [GestureClass; 5] = [
        GestureClass::SwipeLeft,
        GestureClass::SwipeRight,
        GestureClass::SwipeUp,
        GestureClass::SwipeDown,
        GestureClass::Push,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self, HgrError> {
        Self::ALL.get(i).copied().ok_or(HgrError::Label { label: i, classes: Self::COUNT })
    }

    pub fn name(self) -> &'static str {
        match self {
            GestureClass::Background => "Background",
            GestureClass::SwipeLeft => "SwipeLeft",
            GestureClass::SwipeRight => "SwipeRight",
            GestureClass::SwipeUp => "SwipeUp",
            GestureClass::SwipeDown => "SwipeDown",
            GestureClass::Push => "Push",
        }
    }
}

impl fmt::Display for GestureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GestureClass {
    type Err = HgrError;
    fn from_str(s: &str) -> Result<Self, HgrError> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| HgrError::Config(format!("unknown gesture class `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnomalyKind {
    #[default]
    None,
    Fast,
    Slow,
    Wrist,
}

impl AnomalyKind {
    pub const ANOMALOUS: [AnomalyKind; 3] = [AnomalyKind::Fast, AnomalyKind::Slow, AnomalyKind::Wrist];

    pub fn name(self) -> &'static str {
        match self {
            AnomalyKind::None => "none",
            AnomalyKind::Fast => "fast",
            AnomalyKind::Slow => "slow",
            AnomalyKind::Wrist => "wrist",
        }
    }
}

impl fmt::Display for AnomalyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Real,
    #[default]
    Synthetic,
}

/// Provenance of one recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingMeta {
    pub id: String,
    pub user: String,
    pub location: String,
    /// Intended gesture class.
    pub class: GestureClass,
    #[serde(default)]
    pub anomaly: AnomalyKind,
    #[serde(default)]
    pub source: Source,
    #[serde(default)]
    pub seed: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_round_trip() {
        for c in GestureClass::ALL {
            assert_eq!(GestureClass::from_index(c.index()).unwrap(), c);
            assert_eq!(c.name().parse::<GestureClass>().unwrap(), c);
        }
        assert_eq!(GestureClass::Background.index(), 0);
        assert!(GestureClass::from_index(6).is_err());
    }
}
