//! Self-describing JSON checkpoints: config plus named flat tensors.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::shape_err;
use crate::{ModelConfig, ModelError, ModelParams, TrainConfig};

pub const CHECKPOINT_FORMAT: &str = "bsa-model-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    config: ModelConfig,
    #[serde(default)]
    train: Option<TrainConfig>,
    tensors: Vec<TensorRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub train: Option<TrainConfig>,
    pub params: ModelParams,
}

impl Checkpoint {
    pub fn write<W: Write>(&self, writer: W) -> Result<(), ModelError> {
        let file = CheckpointFile {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            train: self.train.clone(),
            tensors: self
                .params
                .tensors()
                .into_iter()
                .map(|t| TensorRecord {
                    name: t.name,
                    shape: t.shape,
                    data: t.data.to_vec(),
                })
                .collect(),
        };
        serde_json::to_writer(writer, &file)?;
        Ok(())
    }

    pub fn read<R: Read>(reader: R) -> Result<Self, ModelError> {
        let file: CheckpointFile = serde_json::from_reader(reader)?;
        if file.format != CHECKPOINT_FORMAT {
            return Err(ModelError::Checkpoint(format!("unexpected format `{}`", file.format)));
        }
        if file.version != CHECKPOINT_VERSION {
            return Err(ModelError::Checkpoint(format!("unsupported version {}", file.version)));
        }
        file.config.validate()?;
        let mut params = ModelParams::zeros_like(&file.config);
        let slots = params.tensors_mut();
        if slots.len() != file.tensors.len() {
            return Err(ModelError::Checkpoint(format!(
                "expected {} tensors, found {}",
                slots.len(),
                file.tensors.len()
            )));
        }
        for ((name, shape, dst), rec) in slots.into_iter().zip(&file.tensors) {
            if name != rec.name {
                return Err(ModelError::Checkpoint(format!("expected tensor `{name}`, found `{}`", rec.name)));
            }
            if shape != rec.shape || dst.len() != rec.data.len() {
                return Err(shape_err(&name, &shape, &rec.shape));
            }
            dst.copy_from_slice(&rec.data);
        }
        Ok(Checkpoint {
            config: file.config,
            train: file.train,
            params,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        Self::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}
