use std::fmt::Write as _;
use std::path::Path;

use anyhow::Context;
use bsa_core::agreement::{AgreementReport, RatingPair};
use bsa_core::dataset::{split_folds, validate_clip, Manifest};
use bsa_core::metrics::{
    groupwise, statistic_by_name, youden_operating_points, GroupKey, GroupTable, ScoreMatrix, ScoreRow, DEFAULT_RESAMPLES,
};
use bsa_core::skill::{build_barcode, default_palette, read_segments_jsonl, render_barcode_svg, AttemptRule, SkillReport};
use bsa_core::{ActionClass, NUM_CLASSES};
use bsa_model::checkpoint::Checkpoint;
use bsa_model::synthetic::{motion_dataset, MotionSpec};
use bsa_model::train::{evaluate as evaluate_model, train_toy};
use bsa_model::{ModelConfig, TrainConfig};
use serde_json::json;

use crate::config::{pick, FileConfig};
use crate::{echo_config, require_file, EvaluateArgs, SkillArgs, TrainArgs, UsageError, ValidationFailed};

fn print_json(value: &impl serde::Serialize) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string(value)?);
    Ok(())
}

pub fn dataset_validate(path: &Path, human: bool) -> anyhow::Result<()> {
    require_file(path, "manifest")?;
    echo_config("dataset validate", json!({"manifest": path}));
    let manifest = Manifest::load(path).map_err(|e| ValidationFailed(format!("manifest unreadable: {e}")))?;
    let mut reports = Vec::new();
    let mut violations = 0;
    for r in &manifest.records {
        match validate_clip(r) {
            Ok(rep) if rep.is_valid() => {}
            Ok(rep) => {
                violations += rep.violations.len();
                reports.push(json!({"clip_id": rep.clip_id, "violations": rep.violations}));
            }
            Err(e) => {
                violations += 1;
                reports.push(json!({"clip_id": r.clip_id, "violations": ["Malformed"], "message": e.to_string()}));
            }
        }
    }
    let invariant_error = manifest.check_invariants().err().map(|e| e.to_string());
    violations += usize::from(invariant_error.is_some());
    if human {
        for r in &reports {
            println!("{}: {}", r["clip_id"].as_str().unwrap_or(""), r["violations"]);
        }
        if let Some(e) = &invariant_error {
            println!("manifest: {e}");
        }
        println!("{} clips, {} violations", manifest.records.len(), violations);
    } else {
        print_json(&json!({
            "clips": manifest.records.len(),
            "violations": violations,
            "invalid_clips": reports,
            "invariant_error": invariant_error,
        }))?;
        eprintln!("{} clips, {} violations", manifest.records.len(), violations);
    }
    if violations > 0 {
        return Err(ValidationFailed(format!("{violations} violations")).into());
    }
    Ok(())
}

pub fn dataset_folds(path: &Path, k: usize, seed: u64, out: Option<&Path>, human: bool) -> anyhow::Result<()> {
    require_file(path, "manifest")?;
    echo_config("dataset folds", json!({"manifest": path, "k": k, "seed": seed, "out": out}));
    let manifest = Manifest::load(path).map_err(|e| ValidationFailed(format!("manifest unreadable: {e}")))?;
    let folds = split_folds(&manifest, k, seed).map_err(|e| UsageError(e.to_string()))?;
    let counts = folds.clip_counts(&manifest);
    match out {
        Some(p) => std::fs::write(p, serde_json::to_string_pretty(&folds)? + "\n").with_context(|| format!("writing {}", p.display()))?,
        None if !human => print_json(&folds)?,
        None => {}
    }
    if human {
        for (f, c) in counts.iter().enumerate() {
            println!("fold {f}: {c} clips");
        }
    } else if out.is_some() {
        print_json(&json!({"k": k, "seed": seed, "clip_counts": counts}))?;
    }
    Ok(())
}

/// Toy geometry: 32x32 clips of 8 frames, 8-pixel patches, one block of width 32.
fn toy_model_config(args: &TrainArgs, file: &FileConfig) -> ModelConfig {
    let size = file.data.size.unwrap_or(32);
    ModelConfig {
        patch: pick(args.patch, file.model.patch, 8),
        dim: pick(args.dim, file.model.dim, 32),
        depth: pick(args.depth, file.model.depth, 1),
        n_heads: pick(args.heads, file.model.n_heads, 4),
        n_classes: 3,
        dominant_index: 0,
        frames: file.data.frames.unwrap_or(8),
        height: size,
        width: size,
        mlp_ratio: file.model.mlp_ratio.unwrap_or(4),
    }
}

pub fn train(args: &TrainArgs, file: &FileConfig, human: bool) -> anyhow::Result<()> {
    let defaults = TrainConfig::default();
    let t = &file.train;
    let train_cfg = TrainConfig {
        epochs: pick(args.epochs, t.epochs, 20),
        batch_size: pick(args.batch_size, t.batch_size, defaults.batch_size),
        lr: pick(args.lr, t.lr, defaults.lr),
        momentum: t.momentum.unwrap_or(defaults.momentum),
        weight_decay: t.weight_decay.unwrap_or(defaults.weight_decay),
        anneal_epochs: t.anneal_epochs.unwrap_or(defaults.anneal_epochs),
        seed: pick(args.seed, file.seed, 0),
        loss: pick(args.loss.clone(), t.loss.clone(), defaults.loss),
        composition: pick(args.composition.clone(), t.composition.clone(), defaults.composition),
    };
    let model_cfg = toy_model_config(args, file);
    model_cfg.validate().map_err(|e| UsageError(e.to_string()))?;
    bsa_model::loss::loss_by_name(&train_cfg.loss).map_err(|e| UsageError(e.to_string()))?;
    bsa_model::heads::composition_by_name(&train_cfg.composition).map_err(|e| UsageError(e.to_string()))?;
    let spec = MotionSpec {
        size: model_cfg.height,
        frames: model_cfg.frames,
        ..MotionSpec::default()
    };
    let n_train = pick(args.train_per_class, file.data.train_per_class, 160);
    let n_test = pick(args.test_per_class, file.data.test_per_class, 40);
    let data_seed = args.data_seed.unwrap_or(train_cfg.seed);
    echo_config(
        "train",
        json!({"model": model_cfg, "train": train_cfg, "train_per_class": n_train, "test_per_class": n_test,
               "data_seed": data_seed, "seed": train_cfg.seed, "out_dir": args.out_dir}),
    );

    let train_set = motion_dataset(&spec, [n_train; 3], data_seed);
    let test_set = motion_dataset(&spec, [n_test; 3], data_seed.wrapping_add(1));
    let (params, history) = train_toy(&train_set, &model_cfg, &train_cfg)?;
    let eval = evaluate_model(&params, &model_cfg, &train_cfg.composition, &test_set)?;

    std::fs::create_dir_all(&args.out_dir)?;
    Checkpoint {
        config: model_cfg.clone(),
        train: Some(train_cfg.clone()),
        params,
    }
    .save(&args.out_dir.join("checkpoint.json"))?;
    std::fs::write(args.out_dir.join("history.json"), serde_json::to_string_pretty(&history)? + "\n")?;
    std::fs::write(args.out_dir.join("evaluation.json"), serde_json::to_string_pretty(&eval)? + "\n")?;
    if args.scores {
        // Synthetic class i is recorded as the i-th action of the taxonomy.
        let rows = eval
            .outputs
            .iter()
            .zip(&test_set)
            .enumerate()
            .map(|(i, (out, d))| {
                let mut probs = [0.0; NUM_CLASSES];
                for (j, p) in out.probabilities.iter().enumerate() {
                    probs[j] = *p;
                }
                ScoreRow {
                    sample_id: format!("heldout-{i:04}"),
                    label: ActionClass::ALL[d.label],
                    group: None,
                    fold: None,
                    probs,
                }
            })
            .collect();
        let scores = ScoreMatrix::new(rows)?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(args.out_dir.join("scores.jsonl"))?);
        scores.write_jsonl(&mut f)?;
    }
    if human {
        for e in &history.epochs {
            println!("epoch {:>3}  loss {:.4}  train acc {:.3}", e.epoch, e.loss, e.train_accuracy);
        }
        println!("held-out accuracy {:.4}", eval.accuracy);
    } else {
        print_json(&json!({
            "final_train_accuracy": history.final_train_accuracy,
            "heldout_accuracy": eval.accuracy,
            "heldout_recall": eval.recall,
            "out_dir": args.out_dir,
        }))?;
    }
    Ok(())
}

pub fn evaluate(args: &EvaluateArgs, file: &FileConfig, human: bool) -> anyhow::Result<()> {
    require_file(&args.scores, "scores file")?;
    let resamples = pick(args.resamples, file.evaluate.resamples, DEFAULT_RESAMPLES);
    let seed = pick(args.seed, file.seed, 0);
    let stats = args
        .statistics
        .iter()
        .map(|s| statistic_by_name(s).map_err(|e| UsageError(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    echo_config(
        "evaluate",
        json!({"scores": args.scores, "out_dir": args.out_dir, "resamples": resamples, "seed": seed, "statistics": args.statistics}),
    );
    let scores = ScoreMatrix::load(&args.scores).map_err(|e| ValidationFailed(format!("scores unreadable: {e}")))?;
    let youden = youden_operating_points(&scores)?;
    std::fs::create_dir_all(&args.out_dir)?;

    let mut csv = String::from("class,auroc,tau,youden,sensitivity,specificity\n");
    for y in &youden {
        let _ = writeln!(csv, "{},{:.6},{:.6},{:.6},{:.6},{:.6}", y.class, y.auroc, y.tau, y.youden, y.sensitivity, y.specificity);
    }
    std::fs::write(args.out_dir.join("youden.csv"), &csv)?;

    let mut keys = vec![GroupKey::Action];
    if scores.rows().iter().all(|r| r.group.is_some()) {
        keys.push(GroupKey::Surgery);
    }
    for key in keys {
        let tables: Vec<GroupTable> = stats
            .iter()
            .map(|s| groupwise(s.as_ref(), &scores, key, resamples, seed))
            .collect::<Result<_, _>>()?;
        let mut out = String::new();
        for (i, t) in tables.iter().enumerate() {
            out.push_str(&t.to_csv(i == 0));
        }
        let name = match key {
            GroupKey::Action => "groupwise_action.csv",
            GroupKey::Surgery => "groupwise_surgery.csv",
        };
        std::fs::write(args.out_dir.join(name), out)?;
    }

    if human {
        print!("{csv}");
    } else {
        print_json(&youden)?;
    }
    Ok(())
}

pub fn agree(args: &crate::AgreeArgs, human: bool) -> anyhow::Result<()> {
    require_file(&args.pairs, "pairs file")?;
    echo_config("agree", json!({"pairs": args.pairs}));
    let file = std::fs::File::open(&args.pairs)?;
    let pair = RatingPair::read_csv(file).map_err(|e| ValidationFailed(format!("pairs unreadable: {e}")))?;
    let report = AgreementReport::compute(&pair);
    if human {
        let f = |v: Option<f64>| v.map_or("undefined".to_string(), |x| format!("{x:.4}"));
        println!("items               {}", report.n);
        println!("observed agreement  {}", f(report.observed_agreement));
        println!(
            "cohen kappa         {}{}",
            f(report.cohen_kappa),
            report.kappa_band.map_or(String::new(), |b| format!(" ({})", b.label()))
        );
        println!("pearson r           {}", f(report.pearson));
        println!("gwet ac1            {}", f(report.gwet_ac1));
        println!("gwet ac1 canonical  {}", f(report.gwet_ac1_canonical));
        for n in &report.notes {
            println!("note: {n}");
        }
    } else {
        print_json(&report)?;
    }
    Ok(())
}

pub fn skill(args: &SkillArgs, human: bool) -> anyhow::Result<()> {
    require_file(&args.segments, "segments file")?;
    let rule: AttemptRule = args.rule.parse().map_err(UsageError)?;
    echo_config(
        "skill",
        json!({"segments": args.segments, "duration": args.duration, "rule": rule, "svg": args.svg}),
    );
    let reader = std::io::BufReader::new(std::fs::File::open(&args.segments)?);
    let segments = read_segments_jsonl(reader).map_err(|e| ValidationFailed(format!("segments unreadable: {e}")))?;
    let duration = args
        .duration
        .unwrap_or_else(|| segments.iter().map(|s| s.end_s).fold(0.0, f64::max));
    let barcode = build_barcode(&segments, duration).map_err(|e| ValidationFailed(e.to_string()))?;
    let report = SkillReport::compute(&barcode, rule)?;
    if let Some(path) = &args.svg {
        std::fs::write(path, render_barcode_svg(&barcode, &default_palette())?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if human {
        println!("duration            {:.2} s", report.duration_s);
        println!("multiple attempts   {}", report.multiple_attempts);
        println!("idle proportion     {:.4}", report.idle_proportion);
        for (a, t) in &report.action_time_s {
            println!("  {:<18}{:.2} s", a.name(), t);
        }
    } else {
        print_json(&report)?;
    }
    Ok(())
}
