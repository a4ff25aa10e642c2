//! Action barcodes and the skill factors read off them: repeated attempts of the
//! same action and the share of idle (non-action) time.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::taxonomy::{normalize_token, ParseLabelError};
use crate::ActionClass;

#[derive(Debug, Error)]
pub enum SkillError {
    #[error("segment [{start_s}, {end_s}] has non-positive length")]
    EmptySegment { start_s: f64, end_s: f64 },
    #[error("segments [{a_start}, {a_end}] and [{b_start}, {b_end}] overlap")]
    OverlapError { a_start: f64, a_end: f64, b_start: f64, b_end: f64 },
    #[error("segment [{start_s}, {end_s}] lies outside [0, {total_s}]")]
    OutOfRange { start_s: f64, end_s: f64, total_s: f64 },
    #[error("total duration must be positive")]
    ZeroDuration,
    #[error("palette has no color for {0}")]
    MissingColor(ActionClass),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A timeline label: one of the ten actions or the idle marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SegmentLabel {
    Action(ActionClass),
    NonAction,
}

impl SegmentLabel {
    pub fn action(self) -> Option<ActionClass> {
        match self {
            SegmentLabel::Action(a) => Some(a),
            SegmentLabel::NonAction => None,
        }
    }
}

impl FromStr for SegmentLabel {
    type Err = ParseLabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match normalize_token(s).as_str() {
            "nonaction" | "idle" => Ok(SegmentLabel::NonAction),
            _ => s.parse().map(SegmentLabel::Action),
        }
    }
}

impl fmt::Display for SegmentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SegmentLabel::Action(a) => a.fmt(f),
            SegmentLabel::NonAction => f.write_str("NonAction"),
        }
    }
}

impl Serialize for SegmentLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SegmentLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimelineSegment {
    #[serde(rename = "action")]
    pub label: SegmentLabel,
    pub start_s: f64,
    pub end_s: f64,
}

impl TimelineSegment {
    pub fn new(label: SegmentLabel, start_s: f64, end_s: f64) -> Self {
        Self { label, start_s, end_s }
    }

    pub fn action(action: ActionClass, start_s: f64, end_s: f64) -> Self {
        Self::new(SegmentLabel::Action(action), start_s, end_s)
    }

    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// Reads segments from manifest-style JSON lines; only `action`, `start_s` and
/// `end_s` are used, and `action` may be `NonAction`.
pub fn read_segments_jsonl<R: BufRead>(reader: R) -> Result<Vec<TimelineSegment>, SkillError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(trimmed).map_err(|e| SkillError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if value.get("action").is_none() && value.get("schema_version").is_some() {
            continue;
        }
        let seg: TimelineSegment = serde_json::from_value(value).map_err(|e| SkillError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(seg);
    }
    Ok(out)
}

/// Time-ordered, non-overlapping action segments within `[0, total_duration_s]`.
/// Uncovered time is idle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionBarcode {
    segments: Vec<TimelineSegment>,
    total_duration_s: f64,
}

impl ActionBarcode {
    /// Action segments only, sorted by start time.
    pub fn segments(&self) -> &[TimelineSegment] {
        &self.segments
    }

    pub fn total_duration_s(&self) -> f64 {
        self.total_duration_s
    }

    /// Idle gaps between, before and after the action segments.
    pub fn gaps(&self) -> Vec<TimelineSegment> {
        let mut gaps = Vec::new();
        let mut cursor = 0.0;
        for s in &self.segments {
            if s.start_s > cursor {
                gaps.push(TimelineSegment::new(SegmentLabel::NonAction, cursor, s.start_s));
            }
            cursor = s.end_s;
        }
        if self.total_duration_s > cursor {
            gaps.push(TimelineSegment::new(SegmentLabel::NonAction, cursor, self.total_duration_s));
        }
        gaps
    }

    /// Actions and gaps interleaved in time order.
    pub fn timeline(&self) -> Vec<TimelineSegment> {
        let mut all: Vec<_> = self.segments.iter().copied().chain(self.gaps()).collect();
        all.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
        all
    }

    /// Gap-free action sequence.
    pub fn actions(&self) -> Vec<ActionClass> {
        self.segments.iter().filter_map(|s| s.label.action()).collect()
    }

    pub fn scaled(&self, c: f64) -> ActionBarcode {
        ActionBarcode {
            segments: self
                .segments
                .iter()
                .map(|s| TimelineSegment::new(s.label, s.start_s * c, s.end_s * c))
                .collect(),
            total_duration_s: self.total_duration_s * c,
        }
    }
}

/// Sorts and validates segments. Explicit `NonAction` segments are accepted and
/// dropped, since idle time is whatever the actions leave uncovered.
pub fn build_barcode(segments: &[TimelineSegment], total_duration_s: f64) -> Result<ActionBarcode, SkillError> {
    if !(total_duration_s > 0.0 && total_duration_s.is_finite()) {
        return Err(SkillError::ZeroDuration);
    }
    let mut actions: Vec<TimelineSegment> = Vec::new();
    for s in segments {
        if !(s.end_s > s.start_s) {
            return Err(SkillError::EmptySegment {
                start_s: s.start_s,
                end_s: s.end_s,
            });
        }
        if s.start_s < 0.0 || s.end_s > total_duration_s {
            return Err(SkillError::OutOfRange {
                start_s: s.start_s,
                end_s: s.end_s,
                total_s: total_duration_s,
            });
        }
        if s.label != SegmentLabel::NonAction {
            actions.push(*s);
        }
    }
    actions.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    for w in actions.windows(2) {
        if w[1].start_s < w[0].end_s {
            return Err(SkillError::OverlapError {
                a_start: w[0].start_s,
                a_end: w[0].end_s,
                b_start: w[1].start_s,
                b_end: w[1].end_s,
            });
        }
    }
    Ok(ActionBarcode {
        segments: actions,
        total_duration_s,
    })
}

/// How a run of identical consecutive actions is counted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttemptRule {
    /// A run of length r contributes r - 1 attempts.
    #[default]
    RepeatTransitions,
    /// Every run of length >= 2 contributes one event.
    RepeatedRuns,
}

impl FromStr for AttemptRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "repeat-transitions" => Ok(AttemptRule::RepeatTransitions),
            "repeated-runs" => Ok(AttemptRule::RepeatedRuns),
            other => Err(format!("unknown attempt rule `{other}` (expected repeat-transitions or repeated-runs)")),
        }
    }
}

/// Counts repeated attempts on the gap-free action sequence; idle time between
/// two identical actions does not break the run.
pub fn count_multiple_attempts(barcode: &ActionBarcode, rule: AttemptRule) -> usize {
    let actions = barcode.actions();
    match rule {
        AttemptRule::RepeatTransitions => actions.windows(2).filter(|w| w[0] == w[1]).count(),
        AttemptRule::RepeatedRuns => {
            let mut runs = 0;
            let mut i = 0;
            while i < actions.len() {
                let mut j = i + 1;
                while j < actions.len() && actions[j] == actions[i] {
                    j += 1;
                }
                if j - i >= 2 {
                    runs += 1;
                }
                i = j;
            }
            runs
        }
    }
}

/// Share of the procedure not covered by any action.
pub fn idle_proportion(barcode: &ActionBarcode) -> Result<f64, SkillError> {
    if barcode.total_duration_s <= 0.0 {
        return Err(SkillError::ZeroDuration);
    }
    let active: f64 = barcode.segments.iter().map(TimelineSegment::duration_s).sum();
    Ok((barcode.total_duration_s - active) / barcode.total_duration_s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkillReport {
    pub multiple_attempts: usize,
    pub attempt_rule: AttemptRule,
    pub idle_proportion: f64,
    pub duration_s: f64,
    pub action_time_s: BTreeMap<ActionClass, f64>,
}

impl SkillReport {
    pub fn compute(barcode: &ActionBarcode, rule: AttemptRule) -> Result<Self, SkillError> {
        let mut action_time_s = BTreeMap::new();
        for s in barcode.segments() {
            if let Some(a) = s.label.action() {
                *action_time_s.entry(a).or_insert(0.0) += s.duration_s();
            }
        }
        Ok(SkillReport {
            multiple_attempts: count_multiple_attempts(barcode, rule),
            attempt_rule: rule,
            idle_proportion: idle_proportion(barcode)?,
            duration_s: barcode.total_duration_s(),
            action_time_s,
        })
    }
}

pub type Palette = BTreeMap<ActionClass, String>;

/// Ten distinguishable colors. The suturing triple uses purple, blue and orange.
pub fn default_palette() -> Palette {
    use ActionClass::*;
    [
        (Aspiration, "#17becf"),
        (Clipping, "#d62728"),
        (Coagulation, "#bcbd22"),
        (Dissection, "#2ca02c"),
        (KnotTying, "#8c564b"),
        (NeedleGrasping, "#9467bd"),
        (NeedlePuncture, "#1f77b4"),
        (Packaging, "#e377c2"),
        (SuturePulling, "#ff7f0e"),
        (TissueRetraction, "#7f7f7f"),
    ]
    .into_iter()
    .map(|(a, c)| (a, c.to_string()))
    .collect()
}

/// Width of the bar in SVG user units.
pub const SVG_BAR_WIDTH: f64 = 1000.0;
const SVG_BAR_HEIGHT: f64 = 48.0;
const SVG_MARGIN: f64 = 20.0;
const IDLE_FILL: &str = "#e6e6e6";

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders the barcode as a standalone SVG document.
///
/// The bar is drawn inside a group translated by the margin, so every
/// `rect.segment` has `x = start / total * SVG_BAR_WIDTH` and
/// `width = duration / total * SVG_BAR_WIDTH`. Idle time shows through a
/// neutral background rectangle. A legend lists every action present.
pub fn render_barcode_svg(barcode: &ActionBarcode, palette: &Palette) -> Result<String, SkillError> {
    let present: std::collections::BTreeSet<ActionClass> = barcode.actions().into_iter().collect();
    for a in &present {
        if !palette.contains_key(a) {
            return Err(SkillError::MissingColor(*a));
        }
    }
    let total = barcode.total_duration_s();
    let legend_rows = present.len().max(1) as f64;
    let height = SVG_MARGIN * 3.0 + SVG_BAR_HEIGHT + legend_rows * 18.0;
    let width = SVG_BAR_WIDTH + 2.0 * SVG_MARGIN;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(svg, "  <title>Action barcode ({total:.3} s)</title>");
    let _ = writeln!(svg, r#"  <g class="bar" transform="translate({SVG_MARGIN},{SVG_MARGIN})">"#);
    let _ = writeln!(
        svg,
        r#"    <rect class="idle" x="0" y="0" width="{SVG_BAR_WIDTH}" height="{SVG_BAR_HEIGHT}" fill="{IDLE_FILL}"/>"#
    );
    for s in barcode.segments() {
        let Some(action) = s.label.action() else { continue };
        let x = s.start_s / total * SVG_BAR_WIDTH;
        let w = s.duration_s() / total * SVG_BAR_WIDTH;
        let _ = writeln!(
            svg,
            r#"    <rect class="segment" data-action="{}" x="{x:.4}" y="0" width="{w:.4}" height="{SVG_BAR_HEIGHT}" fill="{}"><title>{} {:.3}-{:.3} s</title></rect>"#,
            action.name(),
            palette[&action],
            escape(action.display_name()),
            s.start_s,
            s.end_s
        );
    }
    let _ = writeln!(svg, "  </g>");
    let legend_y = SVG_MARGIN * 2.0 + SVG_BAR_HEIGHT;
    let _ = writeln!(svg, r#"  <g class="legend" transform="translate({SVG_MARGIN},{legend_y})">"#);
    for (i, a) in present.iter().enumerate() {
        let y = i as f64 * 18.0;
        let _ = writeln!(
            svg,
            r#"    <rect class="swatch" x="0" y="{y}" width="12" height="12" fill="{}"/><text x="18" y="{}" font-family="sans-serif" font-size="12">{}</text>"#,
            palette[a],
            y + 10.0,
            escape(a.display_name())
        );
    }
    let idle_y = present.len() as f64 * 18.0;
    if present.is_empty() || !barcode.gaps().is_empty() {
        let _ = writeln!(
            svg,
            r#"    <rect class="swatch" x="0" y="{idle_y}" width="12" height="12" fill="{IDLE_FILL}"/><text x="18" y="{}" font-family="sans-serif" font-size="12">Idle</text>"#,
            idle_y + 10.0
        );
    }
    let _ = writeln!(svg, "  </g>");
    svg.push_str("</svg>\n");
    Ok(svg)
}
