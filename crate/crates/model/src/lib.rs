//! Desk-scale video action classifier.
//!
//! Frames are cut into `P x P` patches, linearly embedded, and passed through
//! encoder blocks that apply temporal attention (same patch across frames),
//! then spatial attention (all patches of a frame), then an MLP. The class
//! token feeds an evidence head and an imbalance head; their outputs combine
//! into Dirichlet concentrations. Every gradient is computed by hand in `f64`.

pub mod checkpoint;
pub mod clip;
pub mod config;
pub mod encoder;
pub mod gradcheck;
mod error;
pub mod heads;
pub mod layers;
pub mod loss;
pub mod optim;
pub mod params;
pub mod synthetic;
pub mod train;

pub use clip::ClipTensor;
pub use config::{ModelConfig, TrainConfig};
pub use encoder::{forward, predict, DirichletOutput};
pub use error::ModelError;
pub use params::ModelParams;
