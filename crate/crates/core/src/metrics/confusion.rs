use std::ops::Add;

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::{ActionClass, NUM_CLASSES};

/// `counts[label][prediction]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn get(&self, label: ActionClass, pred: ActionClass) -> u64 {
        self.counts[label.index()][pred.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let diag: u64 = (0..NUM_CLASSES).map(|i| self.counts[i][i]).sum();
        diag as f64 / self.total() as f64
    }

    /// Recall of one class; `None` when the class has no samples.
    pub fn recall(&self, class: ActionClass) -> Option<f64> {
        let row: u64 = self.counts[class.index()].iter().sum();
        (row > 0).then(|| self.counts[class.index()][class.index()] as f64 / row as f64)
    }
}

impl Add for ConfusionMatrix {
    type Output = ConfusionMatrix;

    fn add(mut self, rhs: Self) -> Self {
        for i in 0..NUM_CLASSES {
            for j in 0..NUM_CLASSES {
                self.counts[i][j] += rhs.counts[i][j];
            }
        }
        self
    }
}

pub fn confusion_matrix(preds: &[ActionClass], labels: &[ActionClass]) -> Result<ConfusionMatrix, MetricsError> {
    if preds.len() != labels.len() {
        return Err(MetricsError::LengthMismatch {
            left: preds.len(),
            right: labels.len(),
        });
    }
    let mut m = ConfusionMatrix::default();
    for (p, l) in preds.iter().zip(labels) {
        m.counts[l.index()][p.index()] += 1;
    }
    Ok(m)
}

/// Element-wise sum of per-fold matrices.
pub fn aggregate_folds(matrices: &[ConfusionMatrix]) -> ConfusionMatrix {
    matrices.iter().copied().fold(ConfusionMatrix::default(), Add::add)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ActionClass::*;

    #[test]
    fn perfect_predictions_are_diagonal() {
        let labels = [Clipping, Dissection, Dissection, Packaging];
        let m = confusion_matrix(&labels, &labels).unwrap();
        for i in 0..NUM_CLASSES {
            for j in 0..NUM_CLASSES {
                if i != j {
                    assert_eq!(m.counts[i][j], 0);
                }
            }
        }
        assert_eq!(m.get(Dissection, Dissection), 2);
        assert_eq!(m.accuracy(), 1.0);
    }

    #[test]
    fn five_sample_hand_table() {
        let labels = [Dissection, Dissection, TissueRetraction, Clipping, TissueRetraction];
        let preds = [Dissection, TissueRetraction, Dissection, Clipping, TissueRetraction];
        let m = confusion_matrix(&preds, &labels).unwrap();
        let mut expected = ConfusionMatrix::default();
        expected.counts[3][3] = 1;
        expected.counts[3][9] = 1;
        expected.counts[9][3] = 1;
        expected.counts[1][1] = 1;
        expected.counts[9][9] = 1;
        assert_eq!(m, expected);
        assert_eq!(m.recall(Dissection), Some(0.5));
        assert_eq!(m.recall(Packaging), None);
    }

    #[test]
    fn folds_add_up_to_concatenation() {
        let (l1, p1) = ([Aspiration, Clipping, Clipping], [Aspiration, Aspiration, Clipping]);
        let (l2, p2) = ([KnotTying, Clipping], [KnotTying, Coagulation]);
        let a = confusion_matrix(&p1, &l1).unwrap();
        let b = confusion_matrix(&p2, &l2).unwrap();
        let all_l: Vec<_> = l1.iter().chain(&l2).copied().collect();
        let all_p: Vec<_> = p1.iter().chain(&p2).copied().collect();
        assert_eq!(aggregate_folds(&[a, b]), confusion_matrix(&all_p, &all_l).unwrap());
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            confusion_matrix(&[Clipping], &[]),
            Err(MetricsError::LengthMismatch { left: 1, right: 0 })
        ));
    }
}
