use std::collections::HashSet;
use std::io::BufRead;

use bsa_core::{ActionClass, SurgeryType};
use serde::{Deserialize, Serialize};

use crate::PlanningError;

/// Clips of the sliding window: four distant actions plus the near clip.
pub const WINDOW: usize = 5;

/// One recognized clip of a context. `frames` are image references in
/// temporal order; the last one is the clip's final frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipRef {
    pub clip_id: String,
    pub action: ActionClass,
    pub frames: Vec<String>,
}

/// Ordered clips of one surgical video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSequence {
    pub context_id: String,
    pub surgery_type: SurgeryType,
    pub clips: Vec<ClipRef>,
}

impl ContextSequence {
    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    pub fn validate(&self) -> Result<(), PlanningError> {
        let fail = |message: String| PlanningError::InvalidContext {
            context_id: self.context_id.clone(),
            message,
        };
        if self.clips.is_empty() {
            return Err(fail("no clips".into()));
        }
        let mut seen = HashSet::new();
        for c in &self.clips {
            if !seen.insert(c.clip_id.as_str()) {
                return Err(fail(format!("duplicate clip id `{}`", c.clip_id)));
            }
            if c.frames.is_empty() {
                return Err(fail(format!("clip `{}` has no frames", c.clip_id)));
            }
        }
        Ok(())
    }
}

/// Reads one context per JSON line; blank lines and `#` comments are skipped.
pub fn read_contexts<R: BufRead>(reader: R) -> Result<Vec<ContextSequence>, PlanningError> {
    let mut out: Vec<ContextSequence> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let ctx: ContextSequence = serde_json::from_str(trimmed).map_err(|e| PlanningError::Format {
            line: i + 1,
            message: e.to_string(),
        })?;
        ctx.validate()?;
        if out.iter().any(|c| c.context_id == ctx.context_id) {
            return Err(PlanningError::InvalidContext {
                context_id: ctx.context_id,
                message: "context id appears twice".into(),
            });
        }
        out.push(ctx);
    }
    Ok(out)
}

pub fn load_contexts(path: &std::path::Path) -> Result<Vec<ContextSequence>, PlanningError> {
    read_contexts(std::io::BufReader::new(std::fs::File::open(path)?))
}

/// One prediction moment: the agent sees clips `t-4..=t` and must name the
/// action of clip `t+1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanningSample {
    pub context_id: String,
    pub surgery_type: SurgeryType,
    /// Zero-based index of the near clip.
    pub t: usize,
    pub distant: [ActionClass; 4],
    pub near: ClipRef,
    pub current_frame: String,
    pub ground_truth_next: ActionClass,
    pub ground_truth_next2: Option<ActionClass>,
}

impl PlanningSample {
    /// Identifier sent with each request, `context_id:t`.
    pub fn sample_id(&self) -> String {
        sample_id(&self.context_id, self.t)
    }
}

pub fn sample_id(context_id: &str, t: usize) -> String {
    format!("{context_id}:{t}")
}

/// Slides a window of `window` clips over the context, one clip at a time.
/// Yields `max(0, n - window)` samples.
pub fn make_samples(context: &ContextSequence, window: usize) -> Vec<PlanningSample> {
    assert_eq!(window, WINDOW, "the distant history holds exactly four actions");
    let n = context.clips.len();
    if n <= window {
        return Vec::new();
    }
    let action = |i: usize| context.clips[i].action;
    (window - 1..n - 1)
        .map(|t| {
            let near = context.clips[t].clone();
            PlanningSample {
                context_id: context.context_id.clone(),
                surgery_type: context.surgery_type,
                t,
                distant: [action(t - 4), action(t - 3), action(t - 2), action(t - 1)],
                current_frame: near.frames.last().cloned().unwrap_or_default(),
                near,
                ground_truth_next: action(t + 1),
                ground_truth_next2: (t + 2 < n).then(|| action(t + 2)),
            }
        })
        .collect()
}
