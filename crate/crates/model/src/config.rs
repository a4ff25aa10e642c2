use bsa_core::{ActionClass, NUM_CLASSES};
use serde::{Deserialize, Serialize};

use crate::ModelError;

/// Architecture and input geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Patch side length P.
    pub patch: usize,
    /// Embedding width D.
    pub dim: usize,
    /// Number of encoder blocks L.
    pub depth: usize,
    pub n_heads: usize,
    pub n_classes: usize,
    /// Class whose evidence is scaled by `w_p`.
    pub dominant_index: usize,
    /// Frames per clip T.
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    /// MLP hidden width as a multiple of D.
    #[serde(default = "default_mlp_ratio")]
    pub mlp_ratio: usize,
}

fn default_mlp_ratio() -> usize {
    4
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            patch: 16,
            dim: 64,
            depth: 2,
            n_heads: 4,
            n_classes: NUM_CLASSES,
            dominant_index: ActionClass::DOMINANT.index(),
            frames: 16,
            height: 64,
            width: 64,
            mlp_ratio: 4,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |m: String| Err(ModelError::InvalidConfig(m));
        if self.patch == 0 || self.dim == 0 || self.depth == 0 || self.n_heads == 0 || self.frames == 0 {
            return fail("patch, dim, depth, n_heads and frames must be at least 1".into());
        }
        if self.dim % self.n_heads != 0 {
            return fail(format!("dim {} not divisible by n_heads {}", self.dim, self.n_heads));
        }
        if self.height % self.patch != 0 || self.width % self.patch != 0 || self.height == 0 || self.width == 0 {
            return fail(format!(
                "frame {}x{} not divisible by patch {}",
                self.height, self.width, self.patch
            ));
        }
        if self.n_classes < 2 || self.dominant_index >= self.n_classes {
            return fail(format!(
                "need n_classes >= 2 and dominant_index < n_classes (got {} / {})",
                self.n_classes, self.dominant_index
            ));
        }
        if self.mlp_ratio == 0 {
            return fail("mlp_ratio must be at least 1".into());
        }
        Ok(())
    }

    /// Patches per frame N.
    pub fn patches_per_frame(&self) -> usize {
        (self.height / self.patch) * (self.width / self.patch)
    }

    /// Token count N*T + 1.
    pub fn tokens(&self) -> usize {
        self.patches_per_frame() * self.frames + 1
    }

    pub fn patch_len(&self) -> usize {
        self.patch * self.patch * 3
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.n_heads
    }

    pub fn hidden(&self) -> usize {
        self.dim * self.mlp_ratio
    }
}

/// Optimiser and schedule settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// The KL weight ramps as `min(1, epoch / anneal_epochs)`.
    pub anneal_epochs: usize,
    pub seed: u64,
    /// Name in the loss registry.
    pub loss: String,
    /// Name in the head-composition registry.
    pub composition: String,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 16,
            lr: 0.005,
            momentum: 0.9,
            weight_decay: 0.001,
            anneal_epochs: 10,
            seed: 0,
            loss: "mse".into(),
            composition: "dual".into(),
        }
    }
}
