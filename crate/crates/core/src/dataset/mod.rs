//! Clip manifests and the dataset protocol.

mod folds;
mod frames;
mod manifest;
mod validate;

use thiserror::Error;

pub use folds::{split_folds, FoldAssignment};
pub use frames::{plan_frame_indices, FrameIndexPlan, FrameMode, PLAN_LEN, SAMPLING_STRIDE, WINDOW_LEN};
pub use manifest::{class_histogram, ClassHistogram, ClipRecord, Manifest, MANIFEST_SCHEMA_VERSION};
pub use validate::{validate_clip, ValidationReport, Violation, MAX_CLIP_S, MIN_ACTION_S, MIN_CLIP_S};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("malformed record `{clip_id}`: {reason}")]
    MalformedRecord { clip_id: String, reason: String },
    #[error("clip has {n_frames} frames at 1 fps; at least 2 are required")]
    ClipTooShort { n_frames: usize },
    #[error("cannot split {videos} videos into {k} folds")]
    TooFewVideos { videos: usize, k: usize },
    #[error("fold count must be at least 2, got {0}")]
    InvalidFoldCount(usize),
    #[error("duplicate clip id `{0}`")]
    DuplicateClipId(String),
    #[error("video `{video_id}` is listed under both {first} and {second}")]
    InconsistentSurgery {
        video_id: String,
        first: crate::SurgeryType,
        second: crate::SurgeryType,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
