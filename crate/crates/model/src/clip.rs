use bsa_core::dataset::{plan_frame_indices, DatasetError, FrameMode};
use ndarray::{s, Array2, Array4, ArrayView3, Axis};

use crate::error::shape_err;
use crate::{ModelConfig, ModelError};

/// `T x H x W x 3` frame stack with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipTensor {
    pub frames: Array4<f64>,
}

impl ClipTensor {
    pub fn new(frames: Array4<f64>) -> Result<Self, ModelError> {
        if frames.shape()[3] != 3 {
            return Err(shape_err("clip channels", &[3], &[frames.shape()[3]]));
        }
        Ok(ClipTensor { frames })
    }

    pub fn zeros(t: usize, h: usize, w: usize) -> Self {
        ClipTensor {
            frames: Array4::zeros((t, h, w, 3)),
        }
    }

    /// Samples the 16-frame plan out of a 1 fps frame sequence.
    pub fn sample_from(video: &[ArrayView3<f64>], mode: FrameMode, seed: u64) -> Result<Self, DatasetError> {
        let plan = plan_frame_indices(video.len(), mode, seed)?;
        let views: Vec<_> = plan.zero_based().into_iter().map(|i| video[i]).collect();
        let frames = ndarray::stack(Axis(0), &views).expect("frames share a shape");
        Ok(ClipTensor { frames })
    }

    pub fn t(&self) -> usize {
        self.frames.shape()[0]
    }

    pub fn check(&self, config: &ModelConfig) -> Result<(), ModelError> {
        let want = [config.frames, config.height, config.width, 3];
        if self.frames.shape() != want {
            return Err(shape_err("clip", &want, self.frames.shape()));
        }
        Ok(())
    }

    /// Rows are patches in `(t, py, px)` order; each row is the patch flattened
    /// as `(dy, dx, channel)`.
    pub fn patches(&self, config: &ModelConfig) -> Result<Array2<f64>, ModelError> {
        self.check(config)?;
        let p = config.patch;
        let (gh, gw) = (config.height / p, config.width / p);
        let mut out = Array2::zeros((config.frames * gh * gw, config.patch_len()));
        let mut row = 0;
        for t in 0..config.frames {
            for py in 0..gh {
                for px in 0..gw {
                    let block = self.frames.slice(s![t, py * p..(py + 1) * p, px * p..(px + 1) * p, ..]);
                    for (dst, &v) in out.row_mut(row).iter_mut().zip(block.iter()) {
                        *dst = v;
                    }
                    row += 1;
                }
            }
        }
        Ok(out)
    }
}
