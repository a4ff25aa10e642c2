use bsa_core::{ActionClass, SurgeryType};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{ClipRef, ContextSequence};

/// Frames listed per synthetic clip.
pub const SYNTHETIC_FRAMES: usize = 8;

/// Contexts with uniformly drawn actions and placeholder frame references
/// (`<context>/<clip>/fNN.ppm`), for use with [`crate::SyntheticFrames`].
pub fn synthetic_contexts(count: usize, clips: usize, surgery_type: SurgeryType, seed: u64) -> Vec<ContextSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|c| {
            let context_id = format!("ctx{c:04}");
            let clips = (0..clips)
                .map(|i| {
                    let clip_id = format!("{context_id}-c{i:03}");
                    ClipRef {
                        action: ActionClass::ALL[rng.gen_range(0..ActionClass::ALL.len())],
                        frames: (0..SYNTHETIC_FRAMES).map(|f| format!("{context_id}/{clip_id}/f{f:02}.ppm")).collect(),
                        clip_id,
                    }
                })
                .collect();
            ContextSequence {
                context_id,
                surgery_type,
                clips,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let a = synthetic_contexts(3, 9, SurgeryType::Nephrectomy, 1);
        assert_eq!(a, synthetic_contexts(3, 9, SurgeryType::Nephrectomy, 1));
        assert_eq!(a.len(), 3);
        assert!(a.iter().all(|c| c.clips.len() == 9 && c.validate().is_ok()));
        assert_ne!(a, synthetic_contexts(3, 9, SurgeryType::Nephrectomy, 2));
    }
}
