use bsa_model::encoder::forward_cached;
use bsa_model::heads::DualHead;
use bsa_model::{ClipTensor, ModelConfig, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn each_patch_scores_n_plus_t_plus_two_keys() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..20 {
        let (gh, gw, t) = (rng.gen_range(1..4), rng.gen_range(1..4), rng.gen_range(1..6));
        let cfg = ModelConfig {
            patch: 2,
            dim: 8,
            depth: 2,
            n_heads: 2,
            n_classes: 10,
            dominant_index: 3,
            frames: t,
            height: 2 * gh,
            width: 2 * gw,
            mlp_ratio: 2,
        };
        let n = gh * gw;
        let params = ModelParams::init(&cfg, 1).unwrap();
        let cache = forward_cached(&ClipTensor::zeros(t, 2 * gh, 2 * gw), &params, &cfg, &DualHead).unwrap();
        for (temporal, spatial) in cache.comparisons() {
            assert_eq!(temporal.len(), n * t + 1);
            for i in 1..=n * t {
                assert_eq!(temporal[i], t + 1);
                assert_eq!(spatial[i], n + 1);
                assert_eq!(temporal[i] + spatial[i], n + t + 2);
            }
            assert_eq!(temporal[0], n * t + 1);
        }
    }
}
