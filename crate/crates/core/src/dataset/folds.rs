use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DatasetError, Manifest};

/// Video-level fold membership. Serialized as `{"seed": .., "folds": {video_id: fold}}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub seed: u64,
    #[serde(rename = "folds")]
    pub fold_of_video: BTreeMap<String, usize>,
}

impl FoldAssignment {
    pub fn fold_of(&self, video_id: &str) -> Option<usize> {
        self.fold_of_video.get(video_id).copied()
    }

    pub fn fold_count(&self) -> usize {
        self.fold_of_video.values().max().map_or(0, |m| m + 1)
    }

    /// Clip counts per fold for the given manifest.
    pub fn clip_counts(&self, manifest: &Manifest) -> Vec<usize> {
        let mut counts = vec![0; self.fold_count()];
        for r in &manifest.records {
            if let Some(f) = self.fold_of(&r.video_id) {
                counts[f] += 1;
            }
        }
        counts
    }
}

/// Shuffles the distinct videos with a seeded generator and deals them
/// round-robin into `k` folds. No stratification: all clips of a video land in
/// the same fold, whatever that does to class balance.
pub fn split_folds(manifest: &Manifest, k: usize, seed: u64) -> Result<FoldAssignment, DatasetError> {
    if k < 2 {
        return Err(DatasetError::InvalidFoldCount(k));
    }
    let mut videos = manifest.video_ids();
    if videos.len() < k {
        return Err(DatasetError::TooFewVideos { videos: videos.len(), k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    videos.shuffle(&mut rng);
    let fold_of_video = videos
        .into_iter()
        .enumerate()
        .map(|(i, v)| (v.to_string(), i % k))
        .collect();
    Ok(FoldAssignment { seed, fold_of_video })
}
