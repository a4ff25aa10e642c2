//! Evidential losses on Dirichlet concentrations with analytic gradients.

use statrs::function::gamma::{digamma, ln_gamma};

use crate::ModelError;

/// Derivative of the digamma function.
pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 12.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // asymptotic Bernoulli series
    acc + inv
        + inv2 / 2.0
        + inv * inv2 * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 * (1.0 / 30.0 - inv2 * 5.0 / 66.0))))
}

/// Data term of an evidential loss: value and gradient with respect to alpha.
pub trait EvidentialLoss: Send + Sync {
    fn name(&self) -> &'static str;
    fn risk(&self, alpha: &[f64], target: usize) -> (f64, Vec<f64>);
}

/// Expected squared error under the Dirichlet:
/// `sum_j (y_j - p_j)^2 + p_j (1 - p_j) / (S + 1)`.
pub struct MseRisk;

impl EvidentialLoss for MseRisk {
    fn name(&self) -> &'static str {
        "mse"
    }

    fn risk(&self, alpha: &[f64], target: usize) -> (f64, Vec<f64>) {
        let s: f64 = alpha.iter().sum();
        let p: Vec<f64> = alpha.iter().map(|a| a / s).collect();
        let y = |j: usize| if j == target { 1.0 } else { 0.0 };
        let mut loss = 0.0;
        let mut spread = 0.0;
        let mut g = vec![0.0; alpha.len()];
        for (j, &pj) in p.iter().enumerate() {
            loss += (y(j) - pj).powi(2) + pj * (1.0 - pj) / (s + 1.0);
            spread += pj * (1.0 - pj);
            g[j] = -2.0 * (y(j) - pj) + (1.0 - 2.0 * pj) / (s + 1.0);
        }
        let mean_g: f64 = g.iter().zip(&p).map(|(a, b)| a * b).sum();
        let tail = spread / (s + 1.0).powi(2);
        let grad = g.iter().map(|gk| (gk - mean_g) / s - tail).collect();
        (loss, grad)
    }
}

/// Negative log of the expected likelihood: `ln S - ln alpha_y`.
pub struct LogRisk;

impl EvidentialLoss for LogRisk {
    fn name(&self) -> &'static str {
        "log"
    }

    fn risk(&self, alpha: &[f64], target: usize) -> (f64, Vec<f64>) {
        let s: f64 = alpha.iter().sum();
        let grad = (0..alpha.len())
            .map(|j| 1.0 / s - if j == target { 1.0 / alpha[j] } else { 0.0 })
            .collect();
        (s.ln() - alpha[target].ln(), grad)
    }
}

/// Expected cross-entropy: `psi(S) - psi(alpha_y)`.
pub struct DigammaRisk;

impl EvidentialLoss for DigammaRisk {
    fn name(&self) -> &'static str {
        "digamma"
    }

    fn risk(&self, alpha: &[f64], target: usize) -> (f64, Vec<f64>) {
        let s: f64 = alpha.iter().sum();
        let ts = trigamma(s);
        let grad = (0..alpha.len())
            .map(|j| ts - if j == target { trigamma(alpha[j]) } else { 0.0 })
            .collect();
        (digamma(s) - digamma(alpha[target]), grad)
    }
}

pub const LOSS_NAMES: [&str; 3] = ["mse", "log", "digamma"];

pub fn loss_by_name(name: &str) -> Result<Box<dyn EvidentialLoss>, ModelError> {
    match name {
        "mse" => Ok(Box::new(MseRisk)),
        "log" => Ok(Box::new(LogRisk)),
        "digamma" => Ok(Box::new(DigammaRisk)),
        other => Err(ModelError::UnknownVariant {
            kind: "loss",
            name: other.to_string(),
            known: LOSS_NAMES.join(", "),
        }),
    }
}

/// `KL(Dir(a~) || Dir(1))` with the target's evidence removed,
/// `a~ = y + (1 - y) * alpha`. Gradient is with respect to alpha.
pub fn kl_to_uniform(alpha: &[f64], target: usize) -> (f64, Vec<f64>) {
    let k = alpha.len() as f64;
    let at: Vec<f64> = alpha
        .iter()
        .enumerate()
        .map(|(j, &a)| if j == target { 1.0 } else { a })
        .collect();
    let st: f64 = at.iter().sum();
    let psi_s = digamma(st);
    let tri_s = trigamma(st);
    let mut kl = ln_gamma(st) - ln_gamma(k);
    for &a in &at {
        kl += -ln_gamma(a) + (a - 1.0) * (digamma(a) - psi_s);
    }
    let grad = at
        .iter()
        .enumerate()
        .map(|(j, &a)| {
            if j == target {
                0.0
            } else {
                (a - 1.0) * trigamma(a) - (st - k) * tri_s
            }
        })
        .collect();
    (kl, grad)
}

pub fn kl_weight(epoch: usize, anneal_epochs: usize) -> f64 {
    if anneal_epochs == 0 {
        1.0
    } else {
        (epoch as f64 / anneal_epochs as f64).min(1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub total: f64,
    pub risk: f64,
    pub kl: f64,
    pub kl_weight: f64,
    /// `dL/d alpha`.
    pub grad: Vec<f64>,
}

/// Data term plus annealed KL regulariser.
pub fn evidential_loss_with(
    risk: &dyn EvidentialLoss,
    alpha: &[f64],
    target: usize,
    epoch: usize,
    anneal_epochs: usize,
) -> Result<LossValue, ModelError> {
    if let Some((index, &value)) = alpha.iter().enumerate().find(|(_, a)| !(**a >= 1.0) || !a.is_finite()) {
        return Err(ModelError::InvalidAlpha { index, value });
    }
    if target >= alpha.len() {
        return Err(ModelError::LabelOutOfRange {
            label: target,
            n_classes: alpha.len(),
        });
    }
    let (r, mut grad) = risk.risk(alpha, target);
    let lambda = kl_weight(epoch, anneal_epochs);
    let mut kl = 0.0;
    if lambda > 0.0 {
        let (v, g) = kl_to_uniform(alpha, target);
        kl = v;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += lambda * b;
        }
    }
    Ok(LossValue {
        total: r + lambda * kl,
        risk: r,
        kl,
        kl_weight: lambda,
        grad,
    })
}

/// Expected-squared-error form with annealed KL.
pub fn evidential_loss(alpha: &[f64], target: usize, epoch: usize, anneal_epochs: usize) -> Result<LossValue, ModelError> {
    evidential_loss_with(&MseRisk, alpha, target, epoch, anneal_epochs)
}
