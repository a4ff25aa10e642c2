use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use super::{auroc, bootstrap_ci, corrected_sens_spec, roc_curve_ova, youden_threshold, MetricWithCI, MetricsError, ScoreMatrix, CI_METHOD};
use crate::{ActionClass, SurgeryType};

/// A scalar evaluation statistic.
///
/// `class = Some(k)` evaluates the one-vs-all statistic of class k on all rows;
/// `class = None` evaluates the unweighted mean over every class that has both
/// positives and negatives in `scores`.
pub trait Statistic: Send + Sync {
    fn name(&self) -> &'static str;

    fn eval_class(&self, scores: &ScoreMatrix, class: ActionClass) -> Result<f64, MetricsError>;

    fn eval(&self, scores: &ScoreMatrix, class: Option<ActionClass>) -> Result<f64, MetricsError> {
        match class {
            Some(k) => self.eval_class(scores, k),
            None => {
                let classes = scores.scorable_classes();
                if classes.is_empty() {
                    return Err(MetricsError::EmptyData);
                }
                let mut sum = 0.0;
                for &k in &classes {
                    sum += self.eval_class(scores, k)?;
                }
                Ok(sum / classes.len() as f64)
            }
        }
    }
}

pub struct Auroc;

impl Statistic for Auroc {
    fn name(&self) -> &'static str {
        "auroc"
    }

    fn eval_class(&self, scores: &ScoreMatrix, class: ActionClass) -> Result<f64, MetricsError> {
        Ok(auroc(&roc_curve_ova(scores, class)?))
    }
}

fn youden_point(scores: &ScoreMatrix, class: ActionClass) -> Result<(f64, f64), MetricsError> {
    let (tau, _) = youden_threshold(&roc_curve_ova(scores, class)?);
    let op = corrected_sens_spec(scores, &[(class, tau)])?[0];
    Ok((op.sensitivity, op.specificity))
}

/// Sensitivity at the class's own Youden threshold (re-derived per resample).
pub struct YoudenSensitivity;

impl Statistic for YoudenSensitivity {
    fn name(&self) -> &'static str {
        "sensitivity"
    }

    fn eval_class(&self, scores: &ScoreMatrix, class: ActionClass) -> Result<f64, MetricsError> {
        youden_point(scores, class).map(|p| p.0)
    }
}

pub struct YoudenSpecificity;

impl Statistic for YoudenSpecificity {
    fn name(&self) -> &'static str {
        "specificity"
    }

    fn eval_class(&self, scores: &ScoreMatrix, class: ActionClass) -> Result<f64, MetricsError> {
        youden_point(scores, class).map(|p| p.1)
    }
}

/// Argmax accuracy. Per class this is the recall of that class.
pub struct Accuracy;

impl Statistic for Accuracy {
    fn name(&self) -> &'static str {
        "accuracy"
    }

    fn eval_class(&self, scores: &ScoreMatrix, class: ActionClass) -> Result<f64, MetricsError> {
        let rows: Vec<_> = scores.rows().iter().filter(|r| r.label == class).collect();
        if rows.is_empty() {
            return Err(MetricsError::DegenerateClass {
                class,
                positives: 0,
                negatives: scores.len(),
            });
        }
        Ok(rows.iter().filter(|r| r.argmax() == class).count() as f64 / rows.len() as f64)
    }

    fn eval(&self, scores: &ScoreMatrix, class: Option<ActionClass>) -> Result<f64, MetricsError> {
        match class {
            Some(k) => self.eval_class(scores, k),
            None if scores.is_empty() => Err(MetricsError::EmptyData),
            None => Ok(scores.rows().iter().filter(|r| r.argmax() == r.label).count() as f64 / scores.len() as f64),
        }
    }
}

pub const STATISTIC_NAMES: [&str; 4] = ["auroc", "sensitivity", "specificity", "accuracy"];

pub fn statistic_by_name(name: &str) -> Result<Box<dyn Statistic>, MetricsError> {
    match name {
        "auroc" => Ok(Box::new(Auroc)),
        "sensitivity" => Ok(Box::new(YoudenSensitivity)),
        "specificity" => Ok(Box::new(YoudenSpecificity)),
        "accuracy" => Ok(Box::new(Accuracy)),
        other => Err(MetricsError::UnknownStatistic(other.to_string())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKey {
    Action,
    Surgery,
}

impl FromStr for GroupKey {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "action" => Ok(GroupKey::Action),
            "surgery" => Ok(GroupKey::Surgery),
            other => Err(MetricsError::UnknownGroupKey(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupRow {
    pub group: String,
    pub metric: MetricWithCI,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupTable {
    pub key: GroupKey,
    pub statistic: String,
    pub rows: Vec<GroupRow>,
    /// Unweighted mean over the group rows, with its own bootstrap interval.
    pub macro_average: GroupRow,
}

impl GroupTable {
    pub const CSV_HEADER: &'static str = "group,statistic,point,ci_low,ci_high,n_resamples,n_valid,seed,method,flagged";

    pub fn to_csv(&self, with_header: bool) -> String {
        let mut out = String::new();
        if with_header {
            out.push_str(Self::CSV_HEADER);
            out.push('\n');
        }
        for row in self.rows.iter().chain(std::iter::once(&self.macro_average)) {
            let m = &row.metric;
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{},{},{},{},{}",
                row.group, self.statistic, m.point, m.ci_low, m.ci_high, m.n_resamples, m.n_valid, m.seed, CI_METHOD, m.flagged
            );
        }
        out
    }
}

/// Evaluates `stat` with a bootstrap interval per group plus a macro row.
///
/// * `GroupKey::Action`: one row per scorable class, each computed one-vs-all on
///   all rows.
/// * `GroupKey::Surgery`: one row per surgery type, computed on that surgery's
///   rows; every row must carry a group label.
pub fn groupwise(
    stat: &dyn Statistic,
    scores: &ScoreMatrix,
    key: GroupKey,
    n_resamples: usize,
    seed: u64,
) -> Result<GroupTable, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::EmptyData);
    }
    let mut rows = Vec::new();
    let macro_metric = match key {
        GroupKey::Action => {
            for class in scores.scorable_classes() {
                let metric = bootstrap_ci(|s| stat.eval(s, Some(class)), scores, n_resamples, seed)?;
                rows.push(GroupRow {
                    group: class.name().to_string(),
                    metric,
                });
            }
            bootstrap_ci(|s| stat.eval(s, None), scores, n_resamples, seed)?
        }
        GroupKey::Surgery => {
            if let Some(r) = scores.rows().iter().find(|r| r.group.is_none()) {
                return Err(MetricsError::InvalidRow {
                    sample_id: r.sample_id.clone(),
                    message: "missing surgery group".into(),
                });
            }
            let groups: Vec<SurgeryType> = SurgeryType::ALL
                .iter()
                .copied()
                .filter(|g| scores.rows().iter().any(|r| r.group == Some(*g)))
                .collect();
            for &g in &groups {
                let subset = scores.filter(|r| r.group == Some(g));
                let metric = bootstrap_ci(|s| stat.eval(s, None), &subset, n_resamples, seed)?;
                rows.push(GroupRow {
                    group: g.name().to_string(),
                    metric,
                });
            }
            let macro_stat = |s: &ScoreMatrix| -> Result<f64, MetricsError> {
                let mut sum = 0.0;
                for &g in &groups {
                    sum += stat.eval(&s.filter(|r| r.group == Some(g)), None)?;
                }
                Ok(sum / groups.len() as f64)
            };
            bootstrap_ci(macro_stat, scores, n_resamples, seed)?
        }
    };
    Ok(GroupTable {
        key,
        statistic: stat.name().to_string(),
        rows,
        macro_average: GroupRow {
            group: "macro".into(),
            metric: macro_metric,
        },
    })
}
