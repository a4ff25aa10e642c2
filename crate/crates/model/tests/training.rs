use bsa_model::checkpoint::Checkpoint;
use bsa_model::synthetic::{motion_dataset, LabeledClip, MotionSpec};
use bsa_model::train::{evaluate, train_toy};
use bsa_model::{forward, ModelConfig, ModelError, TrainConfig};

fn small_spec() -> MotionSpec {
    MotionSpec {
        size: 8,
        frames: 4,
        square_min: 2,
        square_max: 3,
        ..MotionSpec::default()
    }
}

fn small_config() -> ModelConfig {
    ModelConfig {
        patch: 4,
        dim: 8,
        depth: 1,
        n_heads: 2,
        n_classes: 3,
        dominant_index: 0,
        frames: 4,
        height: 8,
        width: 8,
        mlp_ratio: 2,
    }
}

fn small_train(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 4,
        lr: 0.05,
        seed: 5,
        ..TrainConfig::default()
    }
}

#[test]
fn memorises_a_single_clip() {
    let data: Vec<LabeledClip> = motion_dataset(&small_spec(), [0, 1, 0], 1);
    let (_, history) = train_toy(&data, &small_config(), &small_train(60)).unwrap();
    assert_eq!(history.final_train_accuracy, 1.0);
}

#[test]
fn identical_seeds_give_identical_runs() {
    let data = motion_dataset(&small_spec(), [6, 6, 6], 2);
    let a = train_toy(&data, &small_config(), &small_train(3)).unwrap();
    let b = train_toy(&data, &small_config(), &small_train(3)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.1.epochs.len(), 3);
    assert_eq!(a.1.epochs[0].kl_weight, 0.0);
}

#[test]
fn empty_and_mislabelled_sets_are_rejected() {
    assert!(matches!(
        train_toy(&[], &small_config(), &small_train(1)),
        Err(ModelError::EmptyDataset)
    ));
    let mut data = motion_dataset(&small_spec(), [1, 0, 0], 1);
    data[0].label = 7;
    assert!(matches!(
        train_toy(&data, &small_config(), &small_train(1)),
        Err(ModelError::LabelOutOfRange { label: 7, .. })
    ));
}

#[test]
fn unknown_registry_names_are_rejected() {
    let data = motion_dataset(&small_spec(), [1, 1, 1], 1);
    let bad_loss = TrainConfig {
        loss: "hinge".into(),
        ..small_train(1)
    };
    assert!(matches!(
        train_toy(&data, &small_config(), &bad_loss),
        Err(ModelError::UnknownVariant { .. })
    ));
}

#[test]
fn checkpoint_round_trip() {
    let data = motion_dataset(&small_spec(), [3, 3, 3], 4);
    let (params, _) = train_toy(&data, &small_config(), &small_train(2)).unwrap();
    let ckpt = Checkpoint {
        config: small_config(),
        train: Some(small_train(2)),
        params,
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    ckpt.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back, ckpt);
    let before = evaluate(&ckpt.params, &ckpt.config, "dual", &data).unwrap();
    let after = evaluate(&back.params, &back.config, "dual", &data).unwrap();
    assert_eq!(before.predictions, after.predictions);
    assert_eq!(
        forward(&data[0].clip, &ckpt.params, &ckpt.config).unwrap(),
        forward(&data[0].clip, &back.params, &back.config).unwrap()
    );

    let text = std::fs::read_to_string(&path).unwrap();
    let tampered = text.replacen("\"version\":1", "\"version\":9", 1);
    assert!(Checkpoint::read(tampered.as_bytes()).is_err());
}
