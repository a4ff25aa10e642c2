//! In-process chat-completion server with scripted responders.

use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use bsa_core::ActionClass;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

use crate::prompt::fnv1a;
use crate::{PlanningError, PlanningSample};

/// Path served by [`MockServer`].
pub const CHAT_PATH: &str = "/v1/chat/completions";

/// True next action per sample id.
pub type Oracle = BTreeMap<String, ActionClass>;

pub fn oracle_from_samples(samples: &[PlanningSample]) -> Oracle {
    samples.iter().map(|s| (s.sample_id(), s.ground_truth_next)).collect()
}

#[derive(Debug, Clone)]
pub struct MockRequest {
    pub sample_id: String,
    /// Zero-based count of earlier requests for this sample id.
    pub attempt: usize,
    pub body: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MockReply {
    /// Assistant message text.
    Content(String),
    Status {
        code: u16,
        retry_after_s: Option<u64>,
        body: String,
    },
}

pub trait MockResponder: Send + Sync {
    fn name(&self) -> &'static str;
    fn respond(&self, req: &MockRequest) -> MockReply;
}

/// A well-formed reply naming `actions`, wrapped in a little prose.
pub fn structured_reply(actions: &[&str]) -> String {
    let predictions: Vec<Value> = actions
        .iter()
        .map(|a| json!({"action": a, "rationale": "consistent with the recent actions"}))
        .collect();
    let block = json!({
        "scene_understanding": "Instruments in the operative field.",
        "progress_judgment": "Mid-procedure.",
        "safety_considerations": "Maintain exposure and avoid adjacent structures.",
        "predictions": predictions,
    });
    format!("Assessment below.\n```json\n{}\n```\n", serde_json::to_string_pretty(&block).unwrap())
}

fn oracle_reply(oracle: &Oracle, sample_id: &str) -> MockReply {
    match oracle.get(sample_id) {
        Some(a) => MockReply::Content(structured_reply(&[a.name()])),
        None => MockReply::Status {
            code: 400,
            retry_after_s: None,
            body: format!("unknown sample `{sample_id}`"),
        },
    }
}

/// Always answers the sample's true next action.
pub struct GroundTruthMock {
    pub oracle: Arc<Oracle>,
}

impl MockResponder for GroundTruthMock {
    fn name(&self) -> &'static str {
        "ground-truth"
    }
    fn respond(&self, req: &MockRequest) -> MockReply {
        oracle_reply(&self.oracle, &req.sample_id)
    }
}

/// Three distinct classes in uniformly random order, seeded per sample id.
pub struct UniformRandomMock {
    pub seed: u64,
}

impl MockResponder for UniformRandomMock {
    fn name(&self) -> &'static str {
        "uniform-random"
    }
    fn respond(&self, req: &MockRequest) -> MockReply {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ fnv1a(&req.sample_id));
        let mut classes = ActionClass::ALL;
        classes.shuffle(&mut rng);
        let names: Vec<&str> = classes[..3].iter().map(|a| a.name()).collect();
        MockReply::Content(structured_reply(&names))
    }
}

/// Prose without a structured block first, then the ground truth.
pub struct MalformedThenValidMock {
    pub oracle: Arc<Oracle>,
}

impl MockResponder for MalformedThenValidMock {
    fn name(&self) -> &'static str {
        "malformed-then-valid"
    }
    fn respond(&self, req: &MockRequest) -> MockReply {
        if req.attempt == 0 {
            MockReply::Content("I would probably keep dissecting for a while.".into())
        } else {
            oracle_reply(&self.oracle, &req.sample_id)
        }
    }
}

/// Names an action outside the taxonomy.
pub struct OffTaxonomyMock;

impl MockResponder for OffTaxonomyMock {
    fn name(&self) -> &'static str {
        "off-taxonomy"
    }
    fn respond(&self, _req: &MockRequest) -> MockReply {
        MockReply::Content(structured_reply(&["Stapling"]))
    }
}

/// 429 with `Retry-After: 1` first, then the ground truth.
pub struct RateLimitedThenValidMock {
    pub oracle: Arc<Oracle>,
}

impl MockResponder for RateLimitedThenValidMock {
    fn name(&self) -> &'static str {
        "rate-limited-then-valid"
    }
    fn respond(&self, req: &MockRequest) -> MockReply {
        if req.attempt == 0 {
            MockReply::Status {
                code: 429,
                retry_after_s: Some(1),
                body: "slow down".into(),
            }
        } else {
            oracle_reply(&self.oracle, &req.sample_id)
        }
    }
}

pub const MOCK_NAMES: [&str; 5] = [
    "ground-truth",
    "uniform-random",
    "malformed-then-valid",
    "off-taxonomy",
    "rate-limited-then-valid",
];

pub fn mock_by_name(name: &str, oracle: Arc<Oracle>, seed: u64) -> Result<Arc<dyn MockResponder>, PlanningError> {
    Ok(match name {
        "ground-truth" => Arc::new(GroundTruthMock { oracle }),
        "uniform-random" => Arc::new(UniformRandomMock { seed }),
        "malformed-then-valid" => Arc::new(MalformedThenValidMock { oracle }),
        "off-taxonomy" => Arc::new(OffTaxonomyMock),
        "rate-limited-then-valid" => Arc::new(RateLimitedThenValidMock { oracle }),
        other => {
            return Err(PlanningError::UnknownMock {
                name: other.into(),
                known: MOCK_NAMES.join(", "),
            })
        }
    })
}

struct ServerState {
    responder: Arc<dyn MockResponder>,
    attempts: Mutex<HashMap<String, usize>>,
}

async fn chat(State(state): State<Arc<ServerState>>, Json(body): Json<Value>) -> Response {
    let sample_id = body["user"].as_str().unwrap_or("").to_string();
    let attempt = {
        let mut attempts = state.attempts.lock().unwrap();
        let n = attempts.entry(sample_id.clone()).or_insert(0);
        *n += 1;
        *n - 1
    };
    let req = MockRequest { sample_id, attempt, body };
    match state.responder.respond(&req) {
        MockReply::Content(content) => Json(json!({
            "id": format!("mock-{}", req.sample_id),
            "object": "chat.completion",
            "model": req.body["model"],
            "choices": [{
                "index": 0,
                "message": {"role": "assistant", "content": content},
                "finish_reason": "stop"
            }]
        }))
        .into_response(),
        MockReply::Status { code, retry_after_s, body } => {
            let status = StatusCode::from_u16(code).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
            let mut resp = (status, body).into_response();
            if let Some(s) = retry_after_s {
                resp.headers_mut().insert(header::RETRY_AFTER, s.into());
            }
            resp
        }
    }
}

/// Local server bound to an ephemeral port; shuts down on drop.
pub struct MockServer {
    addr: SocketAddr,
    state: Arc<ServerState>,
    shutdown: Option<oneshot::Sender<()>>,
    handle: Option<JoinHandle<()>>,
}

impl MockServer {
    pub async fn start(responder: Arc<dyn MockResponder>) -> std::io::Result<Self> {
        let state = Arc::new(ServerState {
            responder,
            attempts: Mutex::new(HashMap::new()),
        });
        let app = Router::new().route(CHAT_PATH, post(chat)).with_state(state.clone());
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
        let addr = listener.local_addr()?;
        let (tx, rx) = oneshot::channel::<()>();
        let handle = tokio::spawn(async move {
            let _ = axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await;
        });
        Ok(MockServer {
            addr,
            state,
            shutdown: Some(tx),
            handle: Some(handle),
        })
    }

    pub fn endpoint(&self) -> String {
        format!("http://{}{}", self.addr, CHAT_PATH)
    }

    pub fn responder_name(&self) -> &'static str {
        self.state.responder.name()
    }

    /// Total requests served.
    pub fn requests(&self) -> usize {
        self.state.attempts.lock().unwrap().values().sum()
    }

    pub async fn stop(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(h) = self.handle.take() {
            let _ = h.await;
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}
