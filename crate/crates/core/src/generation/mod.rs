//! Prompt templates and the backend-agnostic generation harness.
//!
//! A backend is anything implementing [`GenerationBackend`]: the in-process
//! [`StubBackend`], or a remote model reached through [`HttpBackend`] over
//! the wire protocol (`POST /generate`, `GET /healthz`).

mod http;
mod server;
mod templates;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{Health, HttpBackend};
pub use server::ProtocolServer;
pub use templates::{instantiate_prompts, parse_prompt, PromptTemplate, PLACEHOLDER, TEMPLATES};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("backend unreachable: {0}")]
    Unreachable(String),
    #[error("backend is still loading")]
    Loading,
    #[error("backend rejected the request: {0}")]
    BadRequest(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerationError {
    #[error("invalid keyword: {0}")]
    InvalidKeyword(String),
    #[error("backend {backend_id} unreachable: {message}")]
    BackendUnreachable { backend_id: String, message: String },
    #[error("backend {backend_id} protocol error: {message}")]
    Protocol { backend_id: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub max_new_tokens: u32,
    pub num_return_sequences: u32,
}

impl GenerationRequest {
    pub const DEFAULT_MAX_NEW_TOKENS: u32 = 50;

    pub fn new(prompt: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            max_new_tokens: Self::DEFAULT_MAX_NEW_TOKENS,
            num_return_sequences: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationResponse {
    pub text: String,
    pub model_id: String,
}

/// Something that turns a prompt into text. Shared across threads.
pub trait GenerationBackend: Send + Sync {
    fn id(&self) -> &str;
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, BackendError>;
}

/// Deterministic in-process backend.
///
/// For the k-th template (1-based) filled with keyword `w` it answers
/// `"The word {w} appears in this example sentence number {k}."`.
/// Prompts that match no template are rejected as bad requests.
#[derive(Debug, Clone, Default)]
pub struct StubBackend;

impl StubBackend {
    pub const ID: &'static str = "stub";

    pub fn sentence(keyword: &str, template_index: usize) -> String {
        format!("The word {keyword} appears in this example sentence number {}.", template_index + 1)
    }
}

impl GenerationBackend for StubBackend {
    fn id(&self) -> &str {
        Self::ID
    }

    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, BackendError> {
        let (index, keyword) = parse_prompt(&request.prompt)
            .ok_or_else(|| BackendError::BadRequest("prompt does not match any template".into()))?;
        Ok(GenerationResponse { text: Self::sentence(keyword, index), model_id: Self::ID.into() })
    }
}

pub fn stub_backend() -> StubBackend {
    StubBackend
}

/// One template slot of a batch. `sentence` is empty when the call failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generation {
    pub template_index: usize,
    pub sentence: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// The five generations for one keyword, in template order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationBatch {
    pub keyword: String,
    pub generations: Vec<Generation>,
    pub backend_id: String,
    pub latency_ms: Vec<u64>,
}

impl GenerationBatch {
    /// Successful, non-empty generations.
    pub fn sentences(&self) -> impl Iterator<Item = &Generation> {
        self.generations.iter().filter(|g| g.error.is_none() && !g.sentence.is_empty())
    }
}

/// Removes a verbatim echo of `prompt` from the start of `text`.
///
/// The longest run of leading whitespace-separated words shared with the
/// prompt is dropped and the remainder trimmed.
pub fn strip_echo(prompt: &str, text: &str) -> String {
    let mut rest = text.trim_start();
    for word in prompt.split_whitespace() {
        let Some(after) = rest.strip_prefix(word) else { break };
        if !(after.is_empty() || after.starts_with(char::is_whitespace)) {
            break;
        }
        rest = after.trim_start();
    }
    rest.trim().to_string()
}

/// Sends the five prompts for `keyword` to `backend` concurrently.
///
/// A failed slot is kept with an empty sentence and its error. The batch
/// fails only when all five calls fail.
pub fn generate_batch(keyword: &str, backend: &dyn GenerationBackend) -> Result<GenerationBatch, GenerationError> {
    let prompts = instantiate_prompts(keyword)?;
    let results: Vec<(Result<String, BackendError>, u64)> = std::thread::scope(|s| {
        let handles: Vec<_> = prompts
            .iter()
            .map(|prompt| {
                s.spawn(move || {
                    let started = Instant::now();
                    let result = backend
                        .generate(&GenerationRequest::new(prompt.as_str()))
                        .map(|r| strip_echo(prompt, &r.text));
                    (result, started.elapsed().as_millis() as u64)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| (Err(BackendError::Protocol("worker panicked".into())), 0)))
            .collect()
    });

    if results.iter().all(|(r, _)| r.is_err()) {
        let backend_id = backend.id().to_string();
        let errors: Vec<&BackendError> = results.iter().filter_map(|(r, _)| r.as_ref().err()).collect();
        if let Some(BackendError::Protocol(message)) = errors.iter().find(|e| matches!(e, BackendError::Protocol(_))) {
            return Err(GenerationError::Protocol { backend_id, message: message.clone() });
        }
        return Err(GenerationError::BackendUnreachable { backend_id, message: errors[0].to_string() });
    }

    let mut generations = Vec::with_capacity(5);
    let mut latency_ms = Vec::with_capacity(5);
    for (template_index, (result, ms)) in results.into_iter().enumerate() {
        latency_ms.push(ms);
        generations.push(match result {
            Ok(sentence) => Generation { template_index, sentence, error: None },
            Err(e) => Generation { template_index, sentence: String::new(), error: Some(e.to_string()) },
        });
    }
    Ok(GenerationBatch {
        keyword: keyword.to_string(),
        generations,
        backend_id: backend.id().to_string(),
        latency_ms,
    })
}
