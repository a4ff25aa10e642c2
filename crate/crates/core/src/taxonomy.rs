use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Number of trainable action classes.
pub const NUM_CLASSES: usize = 10;

/// The ten basic surgical actions.
///
/// Discriminants follow alphabetical order and double as the integer coding used
/// by the agreement statistics and as the class index of the classifier output.
/// Stapling has no class of its own and must never be recorded as `Clipping`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum ActionClass {
    Aspiration = 0,
    Clipping = 1,
    Coagulation = 2,
    Dissection = 3,
    KnotTying = 4,
    NeedleGrasping = 5,
    NeedlePuncture = 6,
    Packaging = 7,
    SuturePulling = 8,
    TissueRetraction = 9,
}

impl ActionClass {
    pub const ALL: [ActionClass; NUM_CLASSES] = [
        ActionClass::Aspiration,
        ActionClass::Clipping,
        ActionClass::Coagulation,
        ActionClass::Dissection,
        ActionClass::KnotTying,
        ActionClass::NeedleGrasping,
        ActionClass::NeedlePuncture,
        ActionClass::Packaging,
        ActionClass::SuturePulling,
        ActionClass::TissueRetraction,
    ];

    /// Largest class of the reference corpus; the default target of the
    /// imbalance compensation head.
    pub const DOMINANT: ActionClass = ActionClass::Dissection;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    /// Canonical identifier used in files (`KnotTying`, `TissueRetraction`, ...).
    pub fn name(self) -> &'static str {
        match self {
            ActionClass::Aspiration => "Aspiration",
            ActionClass::Clipping => "Clipping",
            ActionClass::Coagulation => "Coagulation",
            ActionClass::Dissection => "Dissection",
            ActionClass::KnotTying => "KnotTying",
            ActionClass::NeedleGrasping => "NeedleGrasping",
            ActionClass::NeedlePuncture => "NeedlePuncture",
            ActionClass::Packaging => "Packaging",
            ActionClass::SuturePulling => "SuturePulling",
            ActionClass::TissueRetraction => "TissueRetraction",
        }
    }

    /// Human-readable label (`Knot-tying`, `Tissue Retraction`, ...).
    pub fn display_name(self) -> &'static str {
        match self {
            ActionClass::Aspiration => "Aspiration",
            ActionClass::Clipping => "Clipping",
            ActionClass::Coagulation => "Coagulation",
            ActionClass::Dissection => "Dissection",
            ActionClass::KnotTying => "Knot-tying",
            ActionClass::NeedleGrasping => "Needle Grasping",
            ActionClass::NeedlePuncture => "Needle Puncture",
            ActionClass::Packaging => "Packaging",
            ActionClass::SuturePulling => "Suture Pulling",
            ActionClass::TissueRetraction => "Tissue Retraction",
        }
    }
}

/// Lower-cases and drops everything but ASCII letters and digits, so that
/// `Knot-tying`, `knot_tying` and `KnotTying` compare equal.
pub fn normalize_token(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .map(|c| c.to_ascii_lowercase())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown {kind} `{token}`")]
pub struct ParseLabelError {
    pub kind: &'static str,
    pub token: String,
}

impl FromStr for ActionClass {
    type Err = ParseLabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = normalize_token(s);
        ActionClass::ALL
            .iter()
            .copied()
            .find(|a| normalize_token(a.name()) == key)
            .ok_or_else(|| ParseLabelError {
                kind: "action",
                token: s.to_string(),
            })
    }
}

impl fmt::Display for ActionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for ActionClass {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for ActionClass {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The six procedures of the reference corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SurgeryType {
    Cholecystectomy,
    Gastrectomy,
    Hysterectomy,
    IntestinalResection,
    Nephrectomy,
    Prostatectomy,
}

impl SurgeryType {
    pub const ALL: [SurgeryType; 6] = [
        SurgeryType::Cholecystectomy,
        SurgeryType::Gastrectomy,
        SurgeryType::Hysterectomy,
        SurgeryType::IntestinalResection,
        SurgeryType::Nephrectomy,
        SurgeryType::Prostatectomy,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            SurgeryType::Cholecystectomy => "Cholecystectomy",
            SurgeryType::Gastrectomy => "Gastrectomy",
            SurgeryType::Hysterectomy => "Hysterectomy",
            SurgeryType::IntestinalResection => "IntestinalResection",
            SurgeryType::Nephrectomy => "Nephrectomy",
            SurgeryType::Prostatectomy => "Prostatectomy",
        }
    }
}

impl FromStr for SurgeryType {
    type Err = ParseLabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = normalize_token(s);
        SurgeryType::ALL
            .iter()
            .copied()
            .find(|t| normalize_token(t.name()) == key)
            .ok_or_else(|| ParseLabelError {
                kind: "surgery type",
                token: s.to_string(),
            })
    }
}

impl fmt::Display for SurgeryType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for SurgeryType {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for SurgeryType {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
