use std::collections::BTreeMap;

use bsa_core::dataset::{split_folds, ClipRecord, Manifest};
use bsa_core::{ActionClass, SurgeryType};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn manifest(videos: usize) -> Manifest {
    let mut records = Vec::new();
    for v in 0..videos {
        for c in 0..(1 + v % 4) {
            records.push(ClipRecord {
                clip_id: format!("v{v:03}_c{c}"),
                video_id: format!("v{v:03}"),
                surgery_type: SurgeryType::ALL[v % 6],
                action: ActionClass::ALL[(v + c) % 10],
                start_s: 10.0 * c as f64,
                end_s: 10.0 * c as f64 + 5.0,
                fps_native: 25.0,
                co_occurring_retraction: false,
                source: None,
            });
        }
    }
    Manifest::new(records)
}

/// Sorted ids, descending Fisher–Yates with a u32 range draw, then round-robin.
fn oracle(videos: usize, k: usize, seed: u64) -> BTreeMap<String, usize> {
    let mut ids: Vec<String> = (0..videos).map(|v| format!("v{v:03}")).collect();
    ids.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..ids.len()).rev() {
        let j = rng.gen_range(0..(i + 1) as u32) as usize;
        ids.swap(i, j);
    }
    ids.into_iter().enumerate().map(|(i, v)| (v, i % k)).collect()
}

#[test]
fn hundred_videos_seed_seven() {
    let m = manifest(100);
    let folds = split_folds(&m, 10, 7).unwrap();
    assert_eq!(folds.fold_of_video, oracle(100, 10, 7));

    let mut sizes = vec![0usize; 10];
    for f in folds.fold_of_video.values() {
        sizes[*f] += 1;
    }
    assert!(sizes.iter().all(|&s| s == 10));
    for r in &m.records {
        assert!(folds.fold_of(&r.video_id).is_some());
    }
    assert_eq!(folds.clip_counts(&m).iter().sum::<usize>(), m.records.len());
}

#[test]
fn other_sizes_and_seeds() {
    for (videos, k, seed) in [(23, 5, 0), (10, 10, 1), (57, 3, 123456789)] {
        assert_eq!(split_folds(&manifest(videos), k, seed).unwrap().fold_of_video, oracle(videos, k, seed));
    }
}
