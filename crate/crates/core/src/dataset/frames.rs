use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DatasetError;

/// Length of the looped/cropped window, in 1 fps frames.
pub const WINDOW_LEN: usize = 64;
/// Step between retained frames.
pub const SAMPLING_STRIDE: usize = 4;
/// Frames fed to the model.
pub const PLAN_LEN: usize = WINDOW_LEN / SAMPLING_STRIDE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameMode {
    Train,
    Infer,
}

/// One-based indices into the 1 fps frame stream of a clip.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameIndexPlan {
    pub indices: Vec<usize>,
    pub mode: FrameMode,
}

impl FrameIndexPlan {
    /// Zero-based indices for tensor slicing.
    pub fn zero_based(&self) -> Vec<usize> {
        self.indices.iter().map(|i| i - 1).collect()
    }
}

/// Chooses the 16 frames of a clip that has `n_frames` frames at 1 fps.
///
/// Clips shorter than the 64-frame window are looped (`1..n, 1..`) up to 64
/// frames. Longer clips are cropped to a 64-frame window that starts at a
/// seeded random offset in training and is centred at inference. Every 4th
/// frame of the window is retained.
pub fn plan_frame_indices(n_frames: usize, mode: FrameMode, seed: u64) -> Result<FrameIndexPlan, DatasetError> {
    if n_frames < 2 {
        return Err(DatasetError::ClipTooShort { n_frames });
    }
    let start = if n_frames <= WINDOW_LEN {
        1
    } else {
        match mode {
            FrameMode::Infer => (n_frames - WINDOW_LEN) / 2 + 1,
            FrameMode::Train => ChaCha8Rng::seed_from_u64(seed).gen_range(1..=n_frames - WINDOW_LEN + 1),
        }
    };
    let indices = (0..WINDOW_LEN)
        .step_by(SAMPLING_STRIDE)
        .map(|offset| {
            if n_frames < WINDOW_LEN {
                offset % n_frames + 1
            } else {
                start + offset
            }
        })
        .collect();
    Ok(FrameIndexPlan { indices, mode })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn looped_33_frame_clip() {
        let plan = plan_frame_indices(33, FrameMode::Infer, 0).unwrap();
        let mut expected: Vec<usize> = (1..=33).step_by(4).collect();
        expected.extend((4..=28).step_by(4));
        assert_eq!(plan.indices, expected);
        assert_eq!(plan.indices.len(), 16);
    }

    #[test]
    fn exact_window_needs_no_looping() {
        let plan = plan_frame_indices(64, FrameMode::Infer, 0).unwrap();
        assert_eq!(plan.indices, (1..=61).step_by(4).collect::<Vec<_>>());
        let train = plan_frame_indices(64, FrameMode::Train, 99).unwrap();
        assert_eq!(train.indices, plan.indices);
    }

    #[test]
    fn long_clip_is_centred_at_inference() {
        let plan = plan_frame_indices(80, FrameMode::Infer, 0).unwrap();
        assert_eq!(plan.indices, (9..=69).step_by(4).collect::<Vec<_>>());
    }

    #[test]
    fn training_window_is_seeded() {
        let a = plan_frame_indices(500, FrameMode::Train, 7).unwrap();
        let b = plan_frame_indices(500, FrameMode::Train, 7).unwrap();
        assert_eq!(a, b);
        let starts: std::collections::HashSet<_> = (0..50)
            .map(|s| plan_frame_indices(500, FrameMode::Train, s).unwrap().indices[0])
            .collect();
        assert!(starts.len() > 1);
    }

    #[test]
    fn too_short() {
        assert!(matches!(
            plan_frame_indices(1, FrameMode::Infer, 0),
            Err(DatasetError::ClipTooShort { n_frames: 1 })
        ));
    }

    proptest! {
        #[test]
        fn sixteen_in_range_indices(n in 2usize..400, train: bool, seed: u64) {
            let mode = if train { FrameMode::Train } else { FrameMode::Infer };
            let plan = plan_frame_indices(n, mode, seed).unwrap();
            prop_assert_eq!(plan.indices.len(), PLAN_LEN);
            prop_assert!(plan.indices.iter().all(|&i| (1..=n).contains(&i)));
            if n >= WINDOW_LEN {
                prop_assert!(plan.indices.windows(2).all(|w| w[1] == w[0] + SAMPLING_STRIDE));
            }
        }

        #[test]
        fn looping_reconstruction(n in 2usize..64) {
            // [1..n, 1..(64-n)] built by concatenation, then strided.
            let mut looped: Vec<usize> = Vec::new();
            while looped.len() < WINDOW_LEN {
                looped.extend(1..=n);
            }
            looped.truncate(WINDOW_LEN);
            let expected: Vec<usize> = looped.iter().copied().step_by(SAMPLING_STRIDE).collect();
            prop_assert_eq!(plan_frame_indices(n, FrameMode::Infer, 0).unwrap().indices, expected);
        }
    }
}
