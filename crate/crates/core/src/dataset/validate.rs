use serde::{Deserialize, Serialize};

use super::{ClipRecord, DatasetError};
use crate::ActionClass;

/// Shortest admissible clip, seconds.
pub const MIN_CLIP_S: f64 = 2.0;
/// Longest admissible clip, seconds.
pub const MAX_CLIP_S: f64 = 40.0;
/// Minimum persistence of an annotated action, seconds.
pub const MIN_ACTION_S: f64 = 2.0;

/// Machine-checkable clip criteria. Centering of the action in the surgical
/// field is a manual review item and has no code here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Violation {
    DurationOutOfRange,
    TooShortAction,
    IllegalCoOccurrence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub clip_id: String,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks a single clip against the duration and co-occurrence rules.
///
/// Returns every violated criterion; an empty list means the clip is valid.
/// Records whose interval is empty or reversed, or whose frame rate is not
/// positive, are rejected outright as malformed.
pub fn validate_clip(record: &ClipRecord) -> Result<ValidationReport, DatasetError> {
    let malformed = |reason: &str| DatasetError::MalformedRecord {
        clip_id: record.clip_id.clone(),
        reason: reason.to_string(),
    };
    if !(record.start_s.is_finite() && record.end_s.is_finite()) || record.start_s < 0.0 {
        return Err(malformed("timestamps must be finite and non-negative"));
    }
    if record.end_s <= record.start_s {
        return Err(malformed("end_s must be greater than start_s"));
    }
    if !(record.fps_native > 0.0 && record.fps_native.is_finite()) {
        return Err(malformed("fps_native must be positive"));
    }

    let duration = record.duration_s();
    let mut violations = Vec::new();
    if !(MIN_CLIP_S..=MAX_CLIP_S).contains(&duration) {
        violations.push(Violation::DurationOutOfRange);
    }
    if duration < MIN_ACTION_S {
        violations.push(Violation::TooShortAction);
    }
    // Retraction is the only action allowed to co-occur, so it cannot co-occur with itself.
    if record.co_occurring_retraction && record.action == ActionClass::TissueRetraction {
        violations.push(Violation::IllegalCoOccurrence);
    }
    Ok(ValidationReport {
        clip_id: record.clip_id.clone(),
        violations,
    })
}
