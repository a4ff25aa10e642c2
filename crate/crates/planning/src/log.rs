use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use bsa_core::ActionClass;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::{AgentResponse, PlanningError, PlanningSample};

/// One HTTP round trip, kept verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub request: Value,
    pub status: u16,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunMetadata {
    pub endpoint: String,
    pub model: String,
    pub seed: u64,
}

/// Outcome for one sample. Failed queries keep `response: None` and count
/// as misses in every metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub context_id: String,
    pub t: usize,
    pub ground_truth_next: ActionClass,
    pub ground_truth_next2: Option<ActionClass>,
    pub response: Option<AgentResponse>,
    #[serde(default)]
    pub error: Option<String>,
    #[serde(default)]
    pub parse_retries: usize,
    #[serde(default)]
    pub transcript: Vec<Exchange>,
}

impl LogEntry {
    /// Entry holding bare predictions, without transcript.
    pub fn from_predictions(sample: &PlanningSample, predictions: &[ActionClass]) -> Self {
        let response = AgentResponse {
            scene_understanding: String::new(),
            progress_judgment: String::new(),
            safety_considerations: String::new(),
            predictions: predictions
                .iter()
                .map(|&action| crate::Prediction {
                    action,
                    rationale: String::new(),
                })
                .collect(),
        };
        LogEntry {
            context_id: sample.context_id.clone(),
            t: sample.t,
            ground_truth_next: sample.ground_truth_next,
            ground_truth_next2: sample.ground_truth_next2,
            response: Some(response),
            error: None,
            parse_retries: 0,
            transcript: Vec::new(),
        }
    }

    /// Ranked predicted actions; empty for failed queries.
    pub fn predictions(&self) -> Vec<ActionClass> {
        self.response.as_ref().map(AgentResponse::actions).unwrap_or_default()
    }
}

/// Entries keyed and ordered by `(context_id, t)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PredictionLog {
    pub metadata: RunMetadata,
    entries: BTreeMap<(String, usize), LogEntry>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    run: RunMetadata,
}

impl PredictionLog {
    pub fn new(metadata: RunMetadata) -> Self {
        Self {
            metadata,
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, entry: LogEntry) -> Result<(), PlanningError> {
        let key = (entry.context_id.clone(), entry.t);
        if self.entries.contains_key(&key) {
            return Err(PlanningError::DuplicateEntry {
                context_id: key.0,
                t: key.1,
            });
        }
        self.entries.insert(key, entry);
        Ok(())
    }

    pub fn entries(&self) -> impl Iterator<Item = &LogEntry> {
        self.entries.values()
    }

    pub fn get(&self, context_id: &str, t: usize) -> Option<&LogEntry> {
        self.entries.get(&(context_id.to_string(), t))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries grouped by context, contexts in id order.
    pub fn by_context(&self) -> BTreeMap<&str, Vec<&LogEntry>> {
        let mut out: BTreeMap<&str, Vec<&LogEntry>> = BTreeMap::new();
        for e in self.entries.values() {
            out.entry(e.context_id.as_str()).or_default().push(e);
        }
        out
    }

    /// JSON lines: a `{"run": ...}` header, then one entry per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), PlanningError> {
        serde_json::to_writer(&mut w, &Header { run: self.metadata.clone() })?;
        writeln!(w)?;
        for e in self.entries.values() {
            serde_json::to_writer(&mut w, e)?;
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self, PlanningError> {
        let mut log = PredictionLog::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fail = |e: serde_json::Error| PlanningError::Format {
                line: i + 1,
                message: e.to_string(),
            };
            let value: Value = serde_json::from_str(&line).map_err(fail)?;
            if value.get("run").is_some() && value.get("context_id").is_none() {
                log.metadata = serde_json::from_value::<Header>(value).map_err(fail)?.run;
                continue;
            }
            log.insert(serde_json::from_value(value).map_err(fail)?)?;
        }
        Ok(log)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), PlanningError> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_jsonl(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, PlanningError> {
        Self::read_jsonl(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}
