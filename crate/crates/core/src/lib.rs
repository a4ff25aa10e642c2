//! Core types and analytics for basic surgical action (BSA) recognition.
//!
//! * [`taxonomy`]: the closed ten-class action vocabulary and the six procedures.
//! * [`dataset`]: clip manifests, the clip-validity protocol, frame sampling and
//!   video-level fold splitting.
//! * [`metrics`]: one-vs-all ROC analysis, Youden thresholds, confusion matrices and
//!   bootstrap confidence intervals.
//! * [`agreement`]: two-rater agreement statistics.
//! * [`skill`]: action barcodes and the skill factors derived from them.

pub mod agreement;
pub mod dataset;
pub mod metrics;
pub mod skill;
pub mod taxonomy;

pub use taxonomy::{ActionClass, SurgeryType, NUM_CLASSES};
