use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::{ActionClass, SurgeryType, NUM_CLASSES};

/// Allowed deviation of a probability row from unit sum.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub sample_id: String,
    pub label: ActionClass,
    pub group: Option<SurgeryType>,
    pub fold: Option<usize>,
    pub probs: [f64; NUM_CLASSES],
}

impl ScoreRow {
    /// Highest-probability class, lowest index on ties.
    pub fn argmax(&self) -> ActionClass {
        let mut best = 0;
        for (j, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = j;
            }
        }
        ActionClass::ALL[best]
    }

    pub fn score(&self, class: ActionClass) -> f64 {
        self.probs[class.index()]
    }
}

/// Line format of the scores file.
#[derive(Debug, Serialize, Deserialize)]
struct ScoreRecord {
    sample_id: String,
    label: ActionClass,
    #[serde(default)]
    group: Option<SurgeryType>,
    #[serde(default)]
    fold: Option<usize>,
    p0: f64,
    p1: f64,
    p2: f64,
    p3: f64,
    p4: f64,
    p5: f64,
    p6: f64,
    p7: f64,
    p8: f64,
    p9: f64,
}

impl From<&ScoreRow> for ScoreRecord {
    fn from(r: &ScoreRow) -> Self {
        let p = r.probs;
        ScoreRecord {
            sample_id: r.sample_id.clone(),
            label: r.label,
            group: r.group,
            fold: r.fold,
            p0: p[0],
            p1: p[1],
            p2: p[2],
            p3: p[3],
            p4: p[4],
            p5: p[5],
            p6: p[6],
            p7: p[7],
            p8: p[8],
            p9: p[9],
        }
    }
}

impl From<ScoreRecord> for ScoreRow {
    fn from(r: ScoreRecord) -> Self {
        ScoreRow {
            sample_id: r.sample_id,
            label: r.label,
            group: r.group,
            fold: r.fold,
            probs: [r.p0, r.p1, r.p2, r.p3, r.p4, r.p5, r.p6, r.p7, r.p8, r.p9],
        }
    }
}

/// Per-sample probability rows with ground-truth labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreMatrix {
    rows: Vec<ScoreRow>,
}

impl ScoreMatrix {
    /// Validates that every row is a probability vector (non-negative, finite,
    /// summing to one within [`ROW_SUM_TOLERANCE`]).
    pub fn new(rows: Vec<ScoreRow>) -> Result<Self, MetricsError> {
        for r in &rows {
            if r.probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(MetricsError::InvalidRow {
                    sample_id: r.sample_id.clone(),
                    message: "probabilities must be finite and non-negative".into(),
                });
            }
            let sum: f64 = r.probs.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(MetricsError::InvalidRow {
                    sample_id: r.sample_id.clone(),
                    message: format!("probabilities sum to {sum}"),
                });
            }
        }
        Ok(Self { rows })
    }

    /// Skips validation; for resampled views of an already validated matrix.
    pub(crate) fn from_rows_unchecked(rows: Vec<ScoreRow>) -> Self {
        Self { rows }
    }

    pub fn rows(&self) -> &[ScoreRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self) -> Vec<ActionClass> {
        self.rows.iter().map(|r| r.label).collect()
    }

    pub fn predictions(&self) -> Vec<ActionClass> {
        self.rows.iter().map(ScoreRow::argmax).collect()
    }

    pub fn filter(&self, pred: impl Fn(&ScoreRow) -> bool) -> ScoreMatrix {
        Self::from_rows_unchecked(self.rows.iter().filter(|r| pred(r)).cloned().collect())
    }

    /// Classes with at least one positive and one negative sample.
    pub fn scorable_classes(&self) -> Vec<ActionClass> {
        let mut positives = [0usize; NUM_CLASSES];
        for r in &self.rows {
            positives[r.label.index()] += 1;
        }
        ActionClass::ALL
            .iter()
            .copied()
            .filter(|c| positives[c.index()] > 0 && positives[c.index()] < self.rows.len())
            .collect()
    }

    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self, MetricsError> {
        let mut rows = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ScoreRecord = serde_json::from_str(&line).map_err(|e| MetricsError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            rows.push(rec.into());
        }
        Self::new(rows)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, MetricsError> {
        Self::read_jsonl(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    pub fn write_jsonl<W: Write>(&self, mut writer: W) -> Result<(), MetricsError> {
        for r in &self.rows {
            serde_json::to_writer(&mut writer, &ScoreRecord::from(r))?;
            writeln!(writer)?;
        }
        Ok(())
    }
}
