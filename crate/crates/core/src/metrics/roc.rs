use serde::Serialize;

use super::{MetricsError, ScoreMatrix};
use crate::ActionClass;

/// One operating point of a one-vs-all ROC curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl RocPoint {
    fn from_counts(threshold: f64, tp: usize, fp: usize, n_pos: usize, n_neg: usize) -> Self {
        let tn = n_neg - fp;
        let fn_ = n_pos - tp;
        RocPoint {
            threshold,
            sensitivity: tp as f64 / n_pos as f64,
            specificity: tn as f64 / n_neg as f64,
            tp,
            fp,
            tn,
            fn_,
        }
    }

    pub fn youden(&self) -> f64 {
        self.sensitivity + self.specificity - 1.0
    }

    /// Youden index scaled by `n_pos * n_neg`; exact, so ties compare equal.
    fn youden_scaled(&self) -> i128 {
        let n_pos = (self.tp + self.fn_) as i128;
        let n_neg = (self.tn + self.fp) as i128;
        self.tp as i128 * n_neg + self.tn as i128 * n_pos - n_pos * n_neg
    }
}

/// Points ordered by increasing threshold: one per distinct score plus a
/// `+inf` sentinel where nothing is predicted positive.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCurve {
    pub class: ActionClass,
    pub n_pos: usize,
    pub n_neg: usize,
    pub points: Vec<RocPoint>,
}

fn class_scores(scores: &ScoreMatrix, class: ActionClass) -> Result<(Vec<(f64, bool)>, usize, usize), MetricsError> {
    let pairs: Vec<(f64, bool)> = scores.rows().iter().map(|r| (r.score(class), r.label == class)).collect();
    let n_pos = pairs.iter().filter(|p| p.1).count();
    let n_neg = pairs.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::DegenerateClass {
            class,
            positives: n_pos,
            negatives: n_neg,
        });
    }
    Ok((pairs, n_pos, n_neg))
}

/// Sweeps the class-`class` score threshold over every distinct score value.
pub fn roc_curve_ova(scores: &ScoreMatrix, class: ActionClass) -> Result<RocCurve, MetricsError> {
    let (mut pairs, n_pos, n_neg) = class_scores(scores, class)?;
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut points = Vec::new();
    // Counts of samples strictly below the current threshold.
    let (mut pos_below, mut neg_below) = (0usize, 0usize);
    let mut i = 0;
    while i < pairs.len() {
        let threshold = pairs[i].0;
        points.push(RocPoint::from_counts(threshold, n_pos - pos_below, n_neg - neg_below, n_pos, n_neg));
        while i < pairs.len() && pairs[i].0 == threshold {
            if pairs[i].1 {
                pos_below += 1;
            } else {
                neg_below += 1;
            }
            i += 1;
        }
    }
    points.push(RocPoint::from_counts(f64::INFINITY, 0, 0, n_pos, n_neg));
    Ok(RocCurve {
        class,
        n_pos,
        n_neg,
        points,
    })
}

/// Trapezoidal area under the curve in (1 - specificity, sensitivity) space.
pub fn auroc(curve: &RocCurve) -> f64 {
    curve
        .points
        .windows(2)
        .map(|w| {
            let (a, b) = (&w[0], &w[1]);
            let dx = (1.0 - a.specificity) - (1.0 - b.specificity);
            dx * (a.sensitivity + b.sensitivity) / 2.0
        })
        .sum()
}

/// Mann–Whitney U / (n_pos n_neg), ties counted as one half. Computed from
/// ranks, independently of the curve.
pub fn mann_whitney_auc(scores: &ScoreMatrix, class: ActionClass) -> Result<f64, MetricsError> {
    let (mut pairs, n_pos, n_neg) = class_scores(scores, class)?;
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Midranks over tie blocks.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < pairs.len() {
        let mut j = i;
        while j < pairs.len() && pairs[j].0 == pairs[i].0 {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0;
        rank_sum_pos += midrank * pairs[i..j].iter().filter(|p| p.1).count() as f64;
        i = j;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Returns `(tau, J)`: the smallest threshold attaining the maximal Youden index.
pub fn youden_threshold(curve: &RocCurve) -> (f64, f64) {
    let mut best = &curve.points[0];
    for p in &curve.points[1..] {
        if p.youden_scaled() > best.youden_scaled() {
            best = p;
        }
    }
    (best.threshold, best.youden())
}

/// Counts of one class at a fixed threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatingPoint {
    pub class: ActionClass,
    pub threshold: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

/// Re-counts TP/FP/TN/FN per class at the given class-specific thresholds.
pub fn corrected_sens_spec(
    scores: &ScoreMatrix,
    thresholds: &[(ActionClass, f64)],
) -> Result<Vec<OperatingPoint>, MetricsError> {
    thresholds
        .iter()
        .map(|&(class, tau)| {
            let (pairs, n_pos, n_neg) = class_scores(scores, class)?;
            let tp = pairs.iter().filter(|(s, pos)| *pos && *s >= tau).count();
            let fp = pairs.iter().filter(|(s, pos)| !*pos && *s >= tau).count();
            let p = RocPoint::from_counts(tau, tp, fp, n_pos, n_neg);
            Ok(OperatingPoint {
                class,
                threshold: tau,
                sensitivity: p.sensitivity,
                specificity: p.specificity,
                tp: p.tp,
                fp: p.fp,
                tn: p.tn,
                fn_: p.fn_,
            })
        })
        .collect()
}

/// Per-class ROC analysis at Youden-optimal thresholds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YoudenSummary {
    pub class: ActionClass,
    pub auroc: f64,
    pub tau: f64,
    pub youden: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

/// Runs ROC, AUROC, Youden and corrected sensitivity/specificity for every
/// class that has both positives and negatives.
pub fn youden_operating_points(scores: &ScoreMatrix) -> Result<Vec<YoudenSummary>, MetricsError> {
    let classes = scores.scorable_classes();
    if classes.is_empty() {
        return Err(MetricsError::EmptyData);
    }
    let mut out = Vec::with_capacity(classes.len());
    for class in classes {
        let curve = roc_curve_ova(scores, class)?;
        let (tau, youden) = youden_threshold(&curve);
        let op = corrected_sens_spec(scores, &[(class, tau)])?[0];
        out.push(YoudenSummary {
            class,
            auroc: auroc(&curve),
            tau,
            youden,
            sensitivity: op.sensitivity,
            specificity: op.specificity,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::ScoreRow;

    /// Two-class fixture: class-0 scores are given, class 1 takes the remainder.
    fn binary(pos: &[f64], neg: &[f64]) -> ScoreMatrix {
        let mut rows = Vec::new();
        for (i, &s) in pos.iter().chain(neg).enumerate() {
            let mut probs = [0.0; 10];
            probs[0] = s;
            probs[1] = 1.0 - s;
            rows.push(ScoreRow {
                sample_id: format!("s{i}"),
                label: if i < pos.len() { ActionClass::Aspiration } else { ActionClass::Clipping },
                group: None,
                fold: None,
                probs,
            });
        }
        ScoreMatrix::new(rows).unwrap()
    }

    #[test]
    fn perfect_separation() {
        let m = binary(&[1.0, 1.0], &[0.0, 0.0, 0.0]);
        let c = roc_curve_ova(&m, ActionClass::Aspiration).unwrap();
        assert!(c.points.iter().any(|p| p.sensitivity == 1.0 && p.specificity == 1.0));
        assert_eq!(auroc(&c), 1.0);
        assert_eq!(youden_threshold(&c), (1.0, 1.0));
    }

    #[test]
    fn hand_enumerated_sweep() {
        // positives {0.9, 0.4}, negatives {0.6, 0.1}
        let m = binary(&[0.9, 0.4], &[0.6, 0.1]);
        let c = roc_curve_ova(&m, ActionClass::Aspiration).unwrap();
        let got: Vec<(f64, f64, f64)> = c.points.iter().map(|p| (p.threshold, p.sensitivity, p.specificity)).collect();
        assert_eq!(
            got,
            vec![
                (0.1, 1.0, 0.0),
                (0.4, 1.0, 0.5),
                (0.6, 0.5, 0.5),
                (0.9, 0.5, 1.0),
                (f64::INFINITY, 0.0, 1.0),
            ]
        );
        assert_eq!(auroc(&c), 0.75);
        assert_eq!(mann_whitney_auc(&m, ActionClass::Aspiration).unwrap(), 0.75);
        // J = 0.5 at both 0.4 and 0.9; the smaller threshold wins.
        assert_eq!(youden_threshold(&c), (0.4, 0.5));
    }

    #[test]
    fn identical_scores_give_two_points() {
        let m = binary(&[0.5, 0.5], &[0.5]);
        let c = roc_curve_ova(&m, ActionClass::Aspiration).unwrap();
        assert_eq!(c.points.len(), 2);
        assert_eq!(auroc(&c), 0.5);
    }

    #[test]
    fn monotone_curve() {
        let m = binary(&[0.9, 0.3, 0.7, 0.7, 0.2], &[0.7, 0.1, 0.3, 0.8]);
        let c = roc_curve_ova(&m, ActionClass::Aspiration).unwrap();
        for w in c.points.windows(2) {
            assert!(w[1].sensitivity <= w[0].sensitivity);
            assert!(w[1].specificity >= w[0].specificity);
        }
    }

    #[test]
    fn degenerate_class() {
        let m = binary(&[0.9, 0.3], &[]);
        assert!(matches!(
            roc_curve_ova(&m, ActionClass::Aspiration),
            Err(MetricsError::DegenerateClass { negatives: 0, .. })
        ));
        assert!(roc_curve_ova(&m, ActionClass::Packaging).is_err());
    }

    #[test]
    fn corrected_counts_match_curve() {
        let m = binary(&[0.9, 0.4, 0.65], &[0.6, 0.1, 0.65, 0.2]);
        let c = roc_curve_ova(&m, ActionClass::Aspiration).unwrap();
        let (tau, _) = youden_threshold(&c);
        let op = corrected_sens_spec(&m, &[(ActionClass::Aspiration, tau)]).unwrap()[0];
        let p = c.points.iter().find(|p| p.threshold == tau).unwrap();
        assert_eq!((op.sensitivity, op.specificity), (p.sensitivity, p.specificity));
        let zero = corrected_sens_spec(&m, &[(ActionClass::Aspiration, 0.0)]).unwrap()[0];
        assert_eq!(zero.sensitivity, 1.0);
    }
}
