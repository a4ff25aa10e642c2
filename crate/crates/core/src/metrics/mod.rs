//! Evaluation metrics over per-sample class-probability rows.
//!
//! Conventions, fixed for every function here:
//! * a sample is *predicted positive* for class k when its class-k score is `>=` the threshold;
//! * Youden ties resolve to the smallest maximizing threshold;
//! * confidence intervals are nonparametric percentile bootstraps over samples;
//! * "overall" figures are unweighted (macro) means over classes.

mod bootstrap;
mod confusion;
mod groupwise;
mod roc;
mod scores;

use thiserror::Error;

pub use bootstrap::{bootstrap_ci, percentile, MetricWithCI, CI_METHOD, DEFAULT_RESAMPLES};
pub use confusion::{aggregate_folds, confusion_matrix, ConfusionMatrix};
pub use groupwise::{
    groupwise, statistic_by_name, Accuracy, Auroc, GroupKey, GroupRow, GroupTable, Statistic, YoudenSensitivity,
    YoudenSpecificity, STATISTIC_NAMES,
};
pub use roc::{
    auroc, corrected_sens_spec, mann_whitney_auc, roc_curve_ova, youden_operating_points, youden_threshold,
    OperatingPoint, RocCurve, RocPoint, YoudenSummary,
};
pub use scores::{ScoreMatrix, ScoreRow, ROW_SUM_TOLERANCE};

use crate::ActionClass;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("class {class} has {positives} positive and {negatives} negative samples; both are required")]
    DegenerateClass {
        class: ActionClass,
        positives: usize,
        negatives: usize,
    },
    #[error("length mismatch: {left} predictions vs {right} labels")]
    LengthMismatch { left: usize, right: usize },
    #[error("no data")]
    EmptyData,
    #[error("all {0} bootstrap resamples were degenerate")]
    NoValidResamples(usize),
    #[error("unknown group key `{0}`")]
    UnknownGroupKey(String),
    #[error("unknown statistic `{0}`")]
    UnknownStatistic(String),
    #[error("row `{sample_id}`: {message}")]
    InvalidRow { sample_id: String, message: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
