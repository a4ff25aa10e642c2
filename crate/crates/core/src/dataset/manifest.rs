use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::{ActionClass, SurgeryType, NUM_CLASSES};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// One annotated action clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipRecord {
    pub clip_id: String,
    pub video_id: String,
    pub surgery_type: SurgeryType,
    pub action: ActionClass,
    pub start_s: f64,
    pub end_s: f64,
    pub fps_native: f64,
    #[serde(default)]
    pub co_occurring_retraction: bool,
    #[serde(default)]
    pub source: Option<String>,
}

impl ClipRecord {
    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }

    /// Number of frames after downsampling to 1 fps.
    pub fn frames_at_1fps(&self) -> usize {
        self.duration_s().floor().max(0.0) as usize
    }
}

#[derive(Debug, Deserialize)]
struct Header {
    schema_version: u32,
}

/// Ordered clip annotations.
///
/// On disk: JSON lines, an optional `{"schema_version": N}` header followed by
/// one [`ClipRecord`] per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub records: Vec<ClipRecord>,
}

impl Default for Manifest {
    fn default() -> Self {
        Self::new(Vec::new())
    }
}

impl Manifest {
    pub fn new(records: Vec<ClipRecord>) -> Self {
        Self {
            schema_version: MANIFEST_SCHEMA_VERSION,
            records,
        }
    }

    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self, DatasetError> {
        let mut schema_version = MANIFEST_SCHEMA_VERSION;
        let mut records = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let value: serde_json::Value = serde_json::from_str(trimmed).map_err(|e| DatasetError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            if records.is_empty() && value.get("clip_id").is_none() && value.get("schema_version").is_some() {
                let header: Header = serde_json::from_value(value).map_err(|e| DatasetError::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })?;
                schema_version = header.schema_version;
                continue;
            }
            let record: ClipRecord = serde_json::from_value(value).map_err(|e| DatasetError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            records.push(record);
        }
        Ok(Self { schema_version, records })
    }

    pub fn load(path: &std::path::Path) -> Result<Self, DatasetError> {
        let file = std::fs::File::open(path)?;
        Self::read_jsonl(std::io::BufReader::new(file))
    }

    pub fn write_jsonl<W: Write>(&self, mut writer: W) -> Result<(), DatasetError> {
        writeln!(writer, "{}", serde_json::json!({ "schema_version": self.schema_version }))?;
        for record in &self.records {
            serde_json::to_writer(&mut writer, record)?;
            writeln!(writer)?;
        }
        Ok(())
    }

    /// Checks the manifest-level invariants: unique clip ids and a single
    /// surgery type per video.
    pub fn check_invariants(&self) -> Result<(), DatasetError> {
        let mut seen = HashSet::new();
        let mut surgery_of: BTreeMap<&str, SurgeryType> = BTreeMap::new();
        for r in &self.records {
            if !seen.insert(r.clip_id.as_str()) {
                return Err(DatasetError::DuplicateClipId(r.clip_id.clone()));
            }
            match surgery_of.get(r.video_id.as_str()) {
                Some(&first) if first != r.surgery_type => {
                    return Err(DatasetError::InconsistentSurgery {
                        video_id: r.video_id.clone(),
                        first,
                        second: r.surgery_type,
                    })
                }
                Some(_) => {}
                None => {
                    surgery_of.insert(&r.video_id, r.surgery_type);
                }
            }
        }
        Ok(())
    }

    /// Distinct video ids in lexicographic order.
    pub fn video_ids(&self) -> Vec<&str> {
        let set: std::collections::BTreeSet<&str> = self.records.iter().map(|r| r.video_id.as_str()).collect();
        set.into_iter().collect()
    }
}

/// Clip counts per (action, surgery type).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassHistogram {
    pub counts: [[usize; 6]; NUM_CLASSES],
}

impl ClassHistogram {
    pub fn get(&self, action: ActionClass, surgery: SurgeryType) -> usize {
        self.counts[action.index()][surgery.index()]
    }

    pub fn action_total(&self, action: ActionClass) -> usize {
        self.counts[action.index()].iter().sum()
    }

    pub fn surgery_total(&self, surgery: SurgeryType) -> usize {
        self.counts.iter().map(|row| row[surgery.index()]).sum()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }
}

pub fn class_histogram(manifest: &Manifest) -> ClassHistogram {
    let mut hist = ClassHistogram::default();
    for r in &manifest.records {
        hist.counts[r.action.index()][r.surgery_type.index()] += 1;
    }
    hist
}
