use std::time::Duration;

use futures::stream::{self, StreamExt};
use reqwest::header::RETRY_AFTER;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::log::{Exchange, LogEntry, PredictionLog, RunMetadata};
use crate::prompt::{assemble_prompts, FrameSource, KnowledgeBase, PromptBundle};
use crate::response::{parse_response, AgentResponse};
use crate::{PlanningError, PlanningSample};

fn default_timeout() -> u64 {
    120
}
fn default_rate_retries() -> u32 {
    3
}
fn default_max_wait() -> u64 {
    60
}
fn default_parallelism() -> usize {
    4
}

/// Endpoint settings. `endpoint` is the full chat-completions URL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(default, skip_serializing)]
    pub api_key: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_s: u64,
    /// How many 429 responses are waited out per request.
    #[serde(default = "default_rate_retries")]
    pub max_rate_limit_retries: u32,
    /// Cap on a single Retry-After wait.
    #[serde(default = "default_max_wait")]
    pub max_retry_after_s: u64,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
}

impl ClientConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        ClientConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: None,
            timeout_s: default_timeout(),
            max_rate_limit_retries: default_rate_retries(),
            max_retry_after_s: default_max_wait(),
            parallelism: default_parallelism(),
        }
    }
}

/// Appended after an unparseable reply.
pub const REINFORCEMENT: &str = "Your previous reply could not be read. Answer again with a single JSON object with the fields \
     scene_understanding, progress_judgment, safety_considerations and predictions, where predictions lists one to three \
     objects with an action from the allowed list and a rationale. Do not add any other text.";

#[derive(Debug, Clone)]
pub struct AgentReply {
    pub response: AgentResponse,
    /// 1 when the reinforcing retry was needed.
    pub parse_retries: usize,
    pub transcript: Vec<Exchange>,
}

#[derive(Debug, Error)]
#[error("{error}")]
pub struct QueryFailure {
    #[source]
    pub error: PlanningError,
    pub parse_retries: usize,
    pub transcript: Vec<Exchange>,
}

#[derive(Debug, Clone)]
pub struct AgentClient {
    config: ClientConfig,
    http: reqwest::Client,
}

fn retry_after(resp: &reqwest::Response) -> Option<Duration> {
    let v = resp.headers().get(RETRY_AFTER)?.to_str().ok()?;
    v.trim().parse::<f64>().ok().filter(|s| *s >= 0.0).map(Duration::from_secs_f64)
}

fn message_content(body: &str) -> Option<String> {
    let v: Value = serde_json::from_str(body).ok()?;
    v["choices"][0]["message"]["content"].as_str().map(str::to_string)
}

impl AgentClient {
    pub fn new(config: ClientConfig) -> Result<Self, PlanningError> {
        let http = reqwest::Client::builder()
            .timeout(Duration::from_secs(config.timeout_s))
            .build()
            .map_err(|e| PlanningError::Transport(e.to_string()))?;
        Ok(Self { config, http })
    }

    pub fn config(&self) -> &ClientConfig {
        &self.config
    }

    /// Posts one request, waiting out 429 responses. Every exchange is
    /// appended to `transcript`.
    async fn post(&self, body: &Value, transcript: &mut Vec<Exchange>) -> Result<String, PlanningError> {
        let mut waits = 0;
        loop {
            let mut req = self.http.post(&self.config.endpoint).json(body);
            if let Some(key) = &self.config.api_key {
                req = req.bearer_auth(key);
            }
            let resp = req.send().await.map_err(|e| PlanningError::Transport(e.to_string()))?;
            let status = resp.status();
            let wait = retry_after(&resp);
            let text = resp.text().await.map_err(|e| PlanningError::Transport(e.to_string()))?;
            transcript.push(Exchange {
                request: body.clone(),
                status: status.as_u16(),
                body: text.clone(),
            });
            if status == StatusCode::TOO_MANY_REQUESTS {
                if waits >= self.config.max_rate_limit_retries {
                    return Err(PlanningError::RateLimited { retry_after: wait });
                }
                waits += 1;
                let cap = Duration::from_secs(self.config.max_retry_after_s);
                tokio::time::sleep(wait.unwrap_or(Duration::from_secs(1)).min(cap)).await;
                continue;
            }
            if !status.is_success() {
                return Err(PlanningError::Transport(format!("HTTP {status}: {text}")));
            }
            return Ok(text);
        }
    }

    /// Sends the bundle; on an unparseable reply asks once more with
    /// [`REINFORCEMENT`].
    pub async fn query_agent(&self, bundle: &PromptBundle) -> Result<AgentReply, QueryFailure> {
        let mut transcript = Vec::new();
        let mut messages = bundle.messages();
        for attempt in 0..2 {
            let body = json!({
                "model": self.config.model,
                "messages": messages,
                "temperature": 0,
                "user": bundle.sample_id,
            });
            let fail = |error: PlanningError, transcript: Vec<Exchange>| QueryFailure {
                error,
                parse_retries: attempt,
                transcript,
            };
            let text = match self.post(&body, &mut transcript).await {
                Ok(t) => t,
                Err(e) => return Err(fail(e, transcript)),
            };
            let Some(content) = message_content(&text) else {
                return Err(fail(PlanningError::Transport(format!("not a chat completion: {text}")), transcript));
            };
            match parse_response(&content) {
                Ok(response) => {
                    return Ok(AgentReply {
                        response,
                        parse_retries: attempt,
                        transcript,
                    })
                }
                Err(source) if attempt == 1 => return Err(fail(PlanningError::Parse { source, raw: content }, transcript)),
                Err(_) => {
                    messages.push(json!({"role": "assistant", "content": content}));
                    messages.push(json!({"role": "user", "content": REINFORCEMENT}));
                }
            }
        }
        unreachable!("the loop returns on its second pass")
    }
}

/// Queries every sample with at most `config.parallelism` requests in
/// flight. Failed queries are logged with their error.
pub async fn run_planning(
    client: &AgentClient,
    samples: &[PlanningSample],
    kb: &KnowledgeBase,
    frames: &dyn FrameSource,
    seed: u64,
) -> Result<PredictionLog, PlanningError> {
    let bundles = samples
        .iter()
        .map(|s| assemble_prompts(s, kb, frames))
        .collect::<Result<Vec<_>, _>>()?;
    let outcomes: Vec<(usize, Result<AgentReply, QueryFailure>)> = stream::iter(bundles.iter().enumerate())
        .map(|(i, b)| async move { (i, client.query_agent(b).await) })
        .buffer_unordered(client.config.parallelism.max(1))
        .collect()
        .await;

    let mut log = PredictionLog::new(RunMetadata {
        endpoint: client.config.endpoint.clone(),
        model: client.config.model.clone(),
        seed,
    });
    for (i, outcome) in outcomes {
        let s = &samples[i];
        let mut entry = LogEntry::from_predictions(s, &[]);
        match outcome {
            Ok(reply) => {
                entry.response = Some(reply.response);
                entry.parse_retries = reply.parse_retries;
                entry.transcript = reply.transcript;
            }
            Err(f) => {
                entry.response = None;
                entry.error = Some(f.error.to_string());
                entry.parse_retries = f.parse_retries;
                entry.transcript = f.transcript;
            }
        }
        log.insert(entry)?;
    }
    Ok(log)
}
