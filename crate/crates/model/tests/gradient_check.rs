use bsa_model::gradcheck::{check_gradients, GradCheckSettings};
use bsa_model::heads::composition_by_name;
use bsa_model::loss::loss_by_name;
use bsa_model::{ClipTensor, ModelConfig, ModelParams};
use ndarray::Array4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// N = 4 patches, T = 4 frames, D = 16, one block, two heads.
fn toy_config() -> ModelConfig {
    ModelConfig {
        patch: 2,
        dim: 16,
        depth: 1,
        n_heads: 2,
        n_classes: 10,
        dominant_index: 3,
        frames: 4,
        height: 4,
        width: 4,
        mlp_ratio: 4,
    }
}

/// Random values everywhere, including norms and the imbalance head, so no
/// path is switched off.
fn scrambled(config: &ModelConfig, seed: u64) -> ModelParams {
    let mut p = ModelParams::init(config, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
    for (_, _, t) in p.tensors_mut() {
        for v in t.iter_mut() {
            *v += rng.gen_range(-0.25..0.25);
        }
    }
    p
}

#[test]
fn every_parameter_matches_central_differences() {
    let config = toy_config();
    for (composition, loss, target, seed) in [
        ("dual", "mse", 5, 11),
        ("dual", "mse", 3, 12),
        ("single", "digamma", 0, 13),
        ("dual", "log", 9, 14),
    ] {
        let params = scrambled(&config, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 7);
        let clip = ClipTensor::new(Array4::from_shape_fn((4, 4, 4, 3), |_| rng.gen())).unwrap();
        let comp = composition_by_name(composition).unwrap();
        let risk = loss_by_name(loss).unwrap();
        let r = check_gradients(&clip, target, &params, &config, comp.as_ref(), risk.as_ref(), GradCheckSettings::default())
            .unwrap();
        assert_eq!(r.checked, params.num_params());
        assert!(
            r.worst_relative_error < 1e-4,
            "{composition}/{loss}: {} analytic {} numeric {}",
            r.worst_parameter,
            r.analytic,
            r.numeric
        );
    }
}

#[test]
fn imbalance_head_gradient_is_live_only_with_dual_composition() {
    let config = toy_config();
    let params = scrambled(&config, 3);
    let clip = ClipTensor::new(Array4::from_elem((4, 4, 4, 3), 0.5)).unwrap();
    let risk = loss_by_name("mse").unwrap();
    let grad_norm = |name: &str| {
        let comp = composition_by_name(name).unwrap();
        let (_, g, _) =
            bsa_model::encoder::loss_and_grad(&clip, 1, &params, &config, comp.as_ref(), risk.as_ref(), 0, 10).unwrap();
        g.imbalance.w.iter().map(|v| v * v).sum::<f64>()
    };
    assert!(grad_norm("dual") > 0.0);
    assert_eq!(grad_norm("single"), 0.0);
}
