use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape mismatch in {what}: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        what: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("non-finite activation in {stage}")]
    NonFiniteActivation { stage: String },
    #[error("alpha[{index}] = {value} is below 1")]
    InvalidAlpha { index: usize, value: f64 },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("label {label} outside 0..{n_classes}")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("unknown {kind} `{name}` (known: {known})")]
    UnknownVariant {
        kind: &'static str,
        name: String,
        known: String,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn shape_err(what: &str, expected: &[usize], got: &[usize]) -> ModelError {
    ModelError::ShapeMismatch {
        what: what.to_string(),
        expected: expected.to_vec(),
        got: got.to_vec(),
    }
}
