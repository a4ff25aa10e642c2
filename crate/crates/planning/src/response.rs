use bsa_core::taxonomy::normalize_token;
use bsa_core::ActionClass;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Most predictions kept from one reply.
pub const MAX_PREDICTIONS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub action: ActionClass,
    #[serde(default)]
    pub rationale: String,
}

/// Parsed agent reply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentResponse {
    pub scene_understanding: String,
    pub progress_judgment: String,
    pub safety_considerations: String,
    pub predictions: Vec<Prediction>,
}

impl AgentResponse {
    pub fn actions(&self) -> Vec<ActionClass> {
        self.predictions.iter().map(|p| p.action).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ResponseError {
    #[error("malformed reply: {0}")]
    Malformed(String),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
}

/// Frozen synonym table, keyed by normalized token. Canonical and display
/// names are matched before this table is consulted; anything else fails.
pub const SYNONYMS: &[(&str, ActionClass)] = &[
    ("suction", ActionClass::Aspiration),
    ("suctioning", ActionClass::Aspiration),
    ("irrigationsuction", ActionClass::Aspiration),
    ("clip", ActionClass::Clipping),
    ("clipapplication", ActionClass::Clipping),
    ("vesselclipping", ActionClass::Clipping),
    ("ductclipping", ActionClass::Clipping),
    ("cautery", ActionClass::Coagulation),
    ("cauterization", ActionClass::Coagulation),
    ("electrocoagulation", ActionClass::Coagulation),
    ("hemostasis", ActionClass::Coagulation),
    ("bluntdissection", ActionClass::Dissection),
    ("sharpdissection", ActionClass::Dissection),
    ("knot", ActionClass::KnotTying),
    ("suturetying", ActionClass::KnotTying),
    ("needlegrasp", ActionClass::NeedleGrasping),
    ("needleloading", ActionClass::NeedleGrasping),
    ("needlepassing", ActionClass::NeedlePuncture),
    ("needleinsertion", ActionClass::NeedlePuncture),
    ("specimenbagging", ActionClass::Packaging),
    ("specimenretrieval", ActionClass::Packaging),
    ("bagging", ActionClass::Packaging),
    ("suturepull", ActionClass::SuturePulling),
    ("threadpulling", ActionClass::SuturePulling),
    ("retraction", ActionClass::TissueRetraction),
    ("tissueretract", ActionClass::TissueRetraction),
];

pub fn resolve_action(token: &str) -> Result<ActionClass, ResponseError> {
    if let Ok(a) = token.parse::<ActionClass>() {
        return Ok(a);
    }
    let key = normalize_token(token);
    SYNONYMS
        .iter()
        .find(|(s, _)| *s == key)
        .map(|&(_, a)| a)
        .ok_or_else(|| ResponseError::UnknownAction(token.trim().to_string()))
}

/// First JSON object in `raw` carrying a `predictions` field. A fenced
/// ```json block is preferred over bare objects.
fn locate_block(raw: &str) -> Option<Value> {
    let try_at = |s: &str| -> Option<Value> {
        let v = serde_json::Deserializer::from_str(s).into_iter::<Value>().next()?.ok()?;
        v.get("predictions").is_some().then_some(v)
    };
    if let Some(start) = raw.find("```json") {
        let body = &raw[start + 7..];
        let body = body.find("```").map_or(body, |end| &body[..end]);
        if let Some(v) = body.find('{').and_then(|i| try_at(&body[i..])) {
            return Some(v);
        }
    }
    raw.match_indices('{').find_map(|(i, _)| try_at(&raw[i..]))
}

fn text_field(v: &Value, name: &str) -> Result<String, ResponseError> {
    match v.get(name) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(Value::Null) | None => Ok(String::new()),
        Some(other) => Err(ResponseError::Malformed(format!("`{name}` is not text: {other}"))),
    }
}

/// Raw `(action, rationale)` pairs: an array of objects, an array of
/// strings, or a single comma-separated string.
fn raw_predictions(v: &Value) -> Result<Vec<(String, String)>, ResponseError> {
    match v {
        Value::String(s) => Ok(s.split(',').filter(|t| !t.trim().is_empty()).map(|t| (t.to_string(), String::new())).collect()),
        Value::Array(items) => items
            .iter()
            .map(|item| match item {
                Value::String(s) => Ok((s.clone(), String::new())),
                Value::Object(o) => {
                    let action = o
                        .get("action")
                        .and_then(Value::as_str)
                        .ok_or_else(|| ResponseError::Malformed("prediction without an `action` string".into()))?;
                    let rationale = o.get("rationale").and_then(Value::as_str).unwrap_or("");
                    Ok((action.to_string(), rationale.to_string()))
                }
                other => Err(ResponseError::Malformed(format!("unexpected prediction {other}"))),
            })
            .collect(),
        other => Err(ResponseError::Malformed(format!("`predictions` has unexpected shape {other}"))),
    }
}

/// Extracts and validates the structured block of a reply. Duplicate actions
/// are dropped keeping the first occurrence; at most three are kept.
pub fn parse_response(raw: &str) -> Result<AgentResponse, ResponseError> {
    let block = locate_block(raw).ok_or_else(|| ResponseError::Malformed("no JSON object with `predictions` found".into()))?;
    let mut predictions: Vec<Prediction> = Vec::new();
    for (token, rationale) in raw_predictions(&block["predictions"])? {
        let action = resolve_action(&token)?;
        if !predictions.iter().any(|p| p.action == action) {
            predictions.push(Prediction { action, rationale });
        }
    }
    if predictions.is_empty() {
        return Err(ResponseError::Malformed("no predictions".into()));
    }
    predictions.truncate(MAX_PREDICTIONS);
    Ok(AgentResponse {
        scene_understanding: text_field(&block, "scene_understanding")?,
        progress_judgment: text_field(&block, "progress_judgment")?,
        safety_considerations: text_field(&block, "safety_considerations")?,
        predictions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ActionClass::*;

    fn reply() -> AgentResponse {
        AgentResponse {
            scene_understanding: "Hepatocystic triangle partly open.".into(),
            progress_judgment: "Dissection nearly done.".into(),
            safety_considerations: "Keep away from the bile duct.".into(),
            predictions: vec![
                Prediction { action: Clipping, rationale: "both structures exposed".into() },
                Prediction { action: Dissection, rationale: "".into() },
            ],
        }
    }

    #[test]
    fn round_trip() {
        let raw = serde_json::to_string(&reply()).unwrap();
        assert_eq!(parse_response(&raw).unwrap(), reply());
    }

    #[test]
    fn prose_wrapped_block() {
        let raw = format!("Here is my assessment {{of sorts}}.\n```json\n{}\n```\nLet me know.", serde_json::to_string_pretty(&reply()).unwrap());
        assert_eq!(parse_response(&raw).unwrap(), reply());
        let bare = format!("Sure. {} Thanks!", serde_json::to_string(&reply()).unwrap());
        assert_eq!(parse_response(&bare).unwrap(), reply());
    }

    #[test]
    fn dedup_keeps_order() {
        let r = parse_response(r#"{"predictions": "Clipping, Clipping, Dissection"}"#).unwrap();
        assert_eq!(r.actions(), vec![Clipping, Dissection]);
        let r = parse_response(r#"{"predictions": ["vessel clipping", "CLIPPING", "knot-tying", "suction", "retraction"]}"#).unwrap();
        assert_eq!(r.actions(), vec![Clipping, KnotTying, Aspiration]);
    }

    #[test]
    fn names_and_synonyms() {
        for a in ActionClass::ALL {
            assert_eq!(resolve_action(a.name()).unwrap(), a);
            assert_eq!(resolve_action(&a.display_name().to_uppercase()).unwrap(), a);
        }
        for (s, a) in SYNONYMS {
            assert_eq!(resolve_action(s).unwrap(), *a);
        }
        assert_eq!(resolve_action("Stapling"), Err(ResponseError::UnknownAction("Stapling".into())));
    }

    #[test]
    fn failures() {
        assert!(matches!(parse_response("the next step is dissection"), Err(ResponseError::Malformed(_))));
        assert!(matches!(parse_response(r#"{"predictions": []}"#), Err(ResponseError::Malformed(_))));
        assert!(matches!(parse_response(r#"{"predictions": 3}"#), Err(ResponseError::Malformed(_))));
        assert_eq!(
            parse_response(r#"{"predictions": [{"action": "Stapling"}]}"#),
            Err(ResponseError::UnknownAction("Stapling".into()))
        );
    }
}
