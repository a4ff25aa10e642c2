//! Finite-difference verification of the analytic parameter gradient.

use serde::Serialize;

use crate::encoder::{forward_cached, loss_and_grad};
use crate::heads::HeadComposition;
use crate::loss::{evidential_loss_with, EvidentialLoss};
use crate::{ClipTensor, ModelConfig, ModelError, ModelParams};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub checked: usize,
    pub worst_relative_error: f64,
    pub worst_parameter: String,
    pub analytic: f64,
    pub numeric: f64,
}

/// Settings for [`check_gradients`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckSettings {
    pub step: f64,
    /// Floor on the denominator of the relative error.
    pub floor: f64,
    pub epoch: usize,
    pub anneal_epochs: usize,
}

impl Default for GradCheckSettings {
    fn default() -> Self {
        GradCheckSettings {
            step: 1e-3,
            floor: 1e-6,
            epoch: 1,
            anneal_epochs: 2,
        }
    }
}

/// Compares every parameter's analytic gradient against the fourth-order
/// central difference `(f(-2h) - 8f(-h) + 8f(h) - f(2h)) / 12h`. Relative
/// error is `|a - n| / max(|a|, |n|, floor)`.
#[allow(clippy::too_many_arguments)]
pub fn check_gradients(
    clip: &ClipTensor,
    target: usize,
    params: &ModelParams,
    config: &ModelConfig,
    composition: &dyn HeadComposition,
    risk: &dyn EvidentialLoss,
    settings: GradCheckSettings,
) -> Result<GradCheckReport, ModelError> {
    let GradCheckSettings {
        step: h,
        floor,
        epoch,
        anneal_epochs,
    } = settings;
    let (_, grads, _) = loss_and_grad(clip, target, params, config, composition, risk, epoch, anneal_epochs)?;
    let loss_at = |p: &ModelParams| -> Result<f64, ModelError> {
        let cache = forward_cached(clip, p, config, composition)?;
        Ok(evidential_loss_with(risk, &cache.output.alpha, target, epoch, anneal_epochs)?.total)
    };
    let mut report = GradCheckReport {
        checked: 0,
        worst_relative_error: 0.0,
        worst_parameter: String::new(),
        analytic: 0.0,
        numeric: 0.0,
    };
    let analytic_all = grads.tensors();
    let mut probe = params.clone();
    for (ti, g) in analytic_all.iter().enumerate() {
        for (k, &analytic) in g.data.iter().enumerate() {
            let original = probe.tensors()[ti].data[k];
            let mut at = |delta: f64| -> Result<f64, ModelError> {
                probe.tensors_mut()[ti].2[k] = original + delta;
                loss_at(&probe)
            };
            let numeric = (at(-2.0 * h)? - 8.0 * at(-h)? + 8.0 * at(h)? - at(2.0 * h)?) / (12.0 * h);
            probe.tensors_mut()[ti].2[k] = original;
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor);
            if rel > report.worst_relative_error || report.checked == 0 {
                report.worst_relative_error = rel;
                report.worst_parameter = format!("{}[{k}]", g.name);
                report.analytic = analytic;
                report.numeric = numeric;
            }
            report.checked += 1;
        }
    }
    Ok(report)
}
