use std::collections::BTreeMap;
use std::io::Write;

use bsa_core::ActionClass;
use serde::Serialize;

use crate::{LogEntry, PlanningError, PredictionLog};

/// Strict: the next action is among the top-k. Relaxed: one of the top-k is
/// the next or the one after; at a context tail only the next counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Tolerance {
    Strict,
    Relaxed,
}

pub fn is_correct(entry: &LogEntry, k: usize, tolerance: Tolerance) -> bool {
    let preds = entry.predictions();
    let top = &preds[..k.min(preds.len())];
    top.iter().any(|&p| {
        p == entry.ground_truth_next || (tolerance == Tolerance::Relaxed && Some(p) == entry.ground_truth_next2)
    })
}

fn check(log: &PredictionLog, k: usize) -> Result<(), PlanningError> {
    if !(1..=3).contains(&k) {
        return Err(PlanningError::InvalidK(k));
    }
    if log.is_empty() {
        return Err(PlanningError::EmptyLog);
    }
    Ok(())
}

/// Pooled fraction of correct samples.
pub fn local_acc(log: &PredictionLog, k: usize, tolerance: Tolerance) -> Result<f64, PlanningError> {
    check(log, k)?;
    let hits = log.entries().filter(|e| is_correct(e, k, tolerance)).count();
    Ok(hits as f64 / log.len() as f64)
}

/// Mean over contexts of each context's own accuracy.
pub fn global_acc(log: &PredictionLog, k: usize, tolerance: Tolerance) -> Result<f64, PlanningError> {
    check(log, k)?;
    let groups = log.by_context();
    let sum: f64 = groups
        .values()
        .map(|entries| entries.iter().filter(|e| is_correct(e, k, tolerance)).count() as f64 / entries.len() as f64)
        .sum();
    Ok(sum / groups.len() as f64)
}

pub fn s_local_acc(log: &PredictionLog, k: usize) -> Result<f64, PlanningError> {
    local_acc(log, k, Tolerance::Strict)
}

pub fn s_global_acc(log: &PredictionLog, k: usize) -> Result<f64, PlanningError> {
    global_acc(log, k, Tolerance::Strict)
}

pub fn r_local_acc(log: &PredictionLog, k: usize) -> Result<f64, PlanningError> {
    local_acc(log, k, Tolerance::Relaxed)
}

pub fn r_global_acc(log: &PredictionLog, k: usize) -> Result<f64, PlanningError> {
    global_acc(log, k, Tolerance::Relaxed)
}

/// The four accuracies at k = 1, 2, 3.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyTable {
    pub samples: usize,
    pub contexts: usize,
    pub s_local: [f64; 3],
    pub s_global: [f64; 3],
    pub r_local: [f64; 3],
    pub r_global: [f64; 3],
}

impl AccuracyTable {
    pub fn compute(log: &PredictionLog) -> Result<Self, PlanningError> {
        let mut t = AccuracyTable {
            samples: log.len(),
            contexts: log.by_context().len(),
            s_local: [0.0; 3],
            s_global: [0.0; 3],
            r_local: [0.0; 3],
            r_global: [0.0; 3],
        };
        for k in 1..=3 {
            t.s_local[k - 1] = s_local_acc(log, k)?;
            t.s_global[k - 1] = s_global_acc(log, k)?;
            t.r_local[k - 1] = r_local_acc(log, k)?;
            t.r_global[k - 1] = r_global_acc(log, k)?;
        }
        Ok(t)
    }

    /// `(name, [top1, top2, top3])` rows.
    pub fn rows(&self) -> [(&'static str, [f64; 3]); 4] {
        [
            ("S-LocalAcc", self.s_local),
            ("S-GlobalAcc", self.s_global),
            ("R-LocalAcc", self.r_local),
            ("R-GlobalAcc", self.r_global),
        ]
    }

    pub fn cells(&self) -> impl Iterator<Item = f64> + '_ {
        self.s_local.iter().chain(&self.s_global).chain(&self.r_local).chain(&self.r_global).copied()
    }

    /// `metric,top1,top2,top3`, values as fractions.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), PlanningError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["metric", "top1", "top2", "top3"])?;
        for (name, v) in self.rows() {
            out.write_record([name.to_string(), format!("{:.6}", v[0]), format!("{:.6}", v[1]), format!("{:.6}", v[2])])?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurgeonMatch {
    pub top1_match: f64,
    pub top1_any_match: f64,
    pub top3_inclusion: f64,
}

/// Compares the agent with a surgeon's ranked choices, one list per log entry.
pub fn surgeon_match_metrics(
    log: &PredictionLog,
    choices: &BTreeMap<(String, usize), Vec<ActionClass>>,
) -> Result<SurgeonMatch, PlanningError> {
    if log.is_empty() {
        return Err(PlanningError::EmptyLog);
    }
    if choices.len() != log.len() {
        return Err(PlanningError::Alignment(format!("{} choice lists for {} log entries", choices.len(), log.len())));
    }
    let (mut m1, mut many, mut m3) = (0usize, 0usize, 0usize);
    for e in log.entries() {
        let surgeon = choices
            .get(&(e.context_id.clone(), e.t))
            .ok_or_else(|| PlanningError::Alignment(format!("no choices for ({}, {})", e.context_id, e.t)))?;
        if surgeon.is_empty() || surgeon.len() > 3 {
            return Err(PlanningError::Alignment(format!(
                "({}, {}) has {} choices, expected 1 to 3",
                e.context_id,
                e.t,
                surgeon.len()
            )));
        }
        let preds = e.predictions();
        if let Some(&first) = preds.first() {
            m1 += usize::from(first == surgeon[0]);
            many += usize::from(surgeon.contains(&first));
        }
        m3 += usize::from(preds.iter().take(3).any(|p| surgeon.contains(p)));
    }
    let n = log.len() as f64;
    Ok(SurgeonMatch {
        top1_match: m1 as f64 / n,
        top1_any_match: many as f64 / n,
        top3_inclusion: m3 as f64 / n,
    })
}
