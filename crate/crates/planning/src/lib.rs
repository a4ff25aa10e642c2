//! Next-action planning harness.
//!
//! A context (the recognized clips of one video) is cut into sliding-window
//! samples of four distant actions plus a near clip. Each sample becomes a
//! prompt bundle sent to a chat-completion endpoint; replies are parsed into
//! ranked predictions, logged, and scored with strict and relaxed top-k
//! accuracies pooled over samples (local) or averaged over contexts (global).

pub mod client;
pub mod context;
mod error;
pub mod log;
pub mod metrics;
pub mod mock;
pub mod prompt;
pub mod response;
pub mod synthetic;

pub use client::{run_planning, AgentClient, AgentReply, ClientConfig, QueryFailure};
pub use context::{load_contexts, make_samples, read_contexts, sample_id, ClipRef, ContextSequence, PlanningSample, WINDOW};
pub use error::PlanningError;
pub use log::{Exchange, LogEntry, PredictionLog, RunMetadata};
pub use metrics::{
    r_global_acc, r_local_acc, s_global_acc, s_local_acc, surgeon_match_metrics, AccuracyTable, SurgeonMatch, Tolerance,
};
pub use mock::{mock_by_name, oracle_from_samples, MockServer};
pub use prompt::{assemble_prompts, DirectoryFrames, FrameSource, KnowledgeBase, PromptBundle, SyntheticFrames};
pub use response::{parse_response, AgentResponse, Prediction, ResponseError};
