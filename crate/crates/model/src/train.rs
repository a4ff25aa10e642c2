//! Mini-batch training and evaluation on labelled clips.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::encoder::{forward_with, loss_and_grad, DirichletOutput};
use crate::heads::composition_by_name;
use crate::loss::{kl_weight, loss_by_name};
use crate::optim::Sgd;
use crate::synthetic::LabeledClip;
use crate::{ModelConfig, ModelError, ModelParams, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    /// Accuracy of the in-batch predictions made before each update.
    pub train_accuracy: f64,
    pub kl_weight: f64,
    pub mean_w_p: f64,
    pub mean_w_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    /// Accuracy on the full training set after the last update.
    pub final_train_accuracy: f64,
}

fn check_labels(data: &[LabeledClip], config: &ModelConfig) -> Result<(), ModelError> {
    if data.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    if let Some(bad) = data.iter().find(|d| d.label >= config.n_classes) {
        return Err(ModelError::LabelOutOfRange {
            label: bad.label,
            n_classes: config.n_classes,
        });
    }
    for d in data {
        d.clip.check(config)?;
    }
    Ok(())
}

/// Trains from a seeded initialisation. Per-sample gradients in a batch are
/// computed in parallel and summed in batch order, so runs are bitwise
/// reproducible.
pub fn train_toy(
    data: &[LabeledClip],
    config: &ModelConfig,
    train: &TrainConfig,
) -> Result<(ModelParams, TrainHistory), ModelError> {
    config.validate()?;
    check_labels(data, config)?;
    if train.batch_size == 0 {
        return Err(ModelError::InvalidConfig("batch_size must be at least 1".into()));
    }
    let composition = composition_by_name(&train.composition)?;
    let risk = loss_by_name(&train.loss)?;
    let mut params = ModelParams::init(config, train.seed)?;
    let mut opt = Sgd::new(train.lr, train.momentum, train.weight_decay);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(train.seed ^ 0x5eed_0f_ba7c);
    let mut epochs = Vec::with_capacity(train.epochs);

    for epoch in 0..train.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct, mut wp_sum, mut wc_sum) = (0.0, 0usize, 0.0, 0.0);
        for batch in order.chunks(train.batch_size) {
            let results: Vec<_> = batch
                .par_iter()
                .map(|&i| {
                    loss_and_grad(
                        &data[i].clip,
                        data[i].label,
                        &params,
                        config,
                        composition.as_ref(),
                        risk.as_ref(),
                        epoch,
                        train.anneal_epochs,
                    )
                })
                .collect::<Result<_, _>>()?;
            let mut grads = ModelParams::zeros_like(config);
            let scale = 1.0 / batch.len() as f64;
            for ((loss, g, out), &i) in results.iter().zip(batch) {
                grads.add_scaled(g, scale);
                loss_sum += loss.total;
                correct += (out.argmax() == data[i].label) as usize;
                wp_sum += out.w_p;
                wc_sum += out.w_c;
            }
            opt.step(&mut params, &grads)?;
        }
        let n = data.len() as f64;
        epochs.push(EpochStats {
            epoch,
            loss: loss_sum / n,
            train_accuracy: correct as f64 / n,
            kl_weight: kl_weight(epoch, train.anneal_epochs),
            mean_w_p: wp_sum / n,
            mean_w_c: wc_sum / n,
        });
    }
    let final_train_accuracy = evaluate(&params, config, &train.composition, data)?.accuracy;
    Ok((
        params,
        TrainHistory {
            epochs,
            final_train_accuracy,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub accuracy: f64,
    /// `None` for classes absent from the data.
    pub recall: Vec<Option<f64>>,
    pub predictions: Vec<usize>,
    #[serde(skip)]
    pub outputs: Vec<DirichletOutput>,
}

impl Evaluation {
    /// Unweighted mean recall over the listed classes that are present.
    pub fn macro_recall(&self, classes: &[usize]) -> f64 {
        let vals: Vec<f64> = classes.iter().filter_map(|&c| self.recall.get(c).copied().flatten()).collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    }
}

pub fn evaluate(
    params: &ModelParams,
    config: &ModelConfig,
    composition: &str,
    data: &[LabeledClip],
) -> Result<Evaluation, ModelError> {
    check_labels(data, config)?;
    let composition = composition_by_name(composition)?;
    let outputs: Vec<DirichletOutput> = data
        .par_iter()
        .map(|d| forward_with(&d.clip, params, config, composition.as_ref()))
        .collect::<Result<_, _>>()?;
    let predictions: Vec<usize> = outputs.iter().map(DirichletOutput::argmax).collect();
    let mut hits = vec![0usize; config.n_classes];
    let mut totals = vec![0usize; config.n_classes];
    for (p, d) in predictions.iter().zip(data) {
        totals[d.label] += 1;
        hits[d.label] += (*p == d.label) as usize;
    }
    let correct: usize = hits.iter().sum();
    Ok(Evaluation {
        accuracy: correct as f64 / data.len() as f64,
        recall: hits
            .iter()
            .zip(&totals)
            .map(|(&h, &t)| (t > 0).then(|| h as f64 / t as f64))
            .collect(),
        predictions,
        outputs,
    })
}
