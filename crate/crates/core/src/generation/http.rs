use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{BackendError, GenerationBackend, GenerationRequest, GenerationResponse};

/// Body of `GET /healthz`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub model_id: String,
}

/// A backend reached over the HTTP generation protocol.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    id: String,
    base_url: String,
    agent: ureq::Agent,
    loading_retries: u32,
    retry_delay: Duration,
}

impl HttpBackend {
    pub fn new(id: impl Into<String>, base_url: impl Into<String>) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout_connect(Duration::from_secs(5))
            .timeout(Duration::from_secs(120))
            .build();
        Self {
            id: id.into(),
            base_url: base_url.into().trim_end_matches('/').to_string(),
            agent,
            loading_retries: 3,
            retry_delay: Duration::from_millis(500),
        }
    }

    /// Delay before the first 503 retry; later retries double it.
    pub fn with_retry_delay(mut self, delay: Duration) -> Self {
        self.retry_delay = delay;
        self
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    pub fn health(&self) -> Result<Health, BackendError> {
        let url = format!("{}/healthz", self.base_url);
        match self.agent.get(&url).call() {
            Ok(resp) => resp.into_json().map_err(|e| BackendError::Protocol(e.to_string())),
            Err(ureq::Error::Status(503, _)) => Err(BackendError::Loading),
            Err(ureq::Error::Status(code, _)) => Err(BackendError::Protocol(format!("healthz returned HTTP {code}"))),
            Err(ureq::Error::Transport(t)) => Err(BackendError::Unreachable(t.to_string())),
        }
    }
}

impl GenerationBackend for HttpBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse, BackendError> {
        let url = format!("{}/generate", self.base_url);
        let mut attempt = 0;
        loop {
            match self.agent.post(&url).send_json(request) {
                Ok(resp) => {
                    let body = resp.into_string().map_err(|e| BackendError::Unreachable(e.to_string()))?;
                    return serde_json::from_str(&body)
                        .map_err(|e| BackendError::Protocol(format!("bad response body: {e}")));
                }
                Err(ureq::Error::Status(503, _)) if attempt < self.loading_retries => {
                    std::thread::sleep(self.retry_delay.saturating_mul(1 << attempt));
                    attempt += 1;
                }
                Err(ureq::Error::Status(503, _)) => return Err(BackendError::Loading),
                Err(ureq::Error::Status(400, resp)) => {
                    return Err(BackendError::BadRequest(resp.into_string().unwrap_or_default()));
                }
                Err(ureq::Error::Status(code, _)) if code >= 500 => {
                    return Err(BackendError::Unreachable(format!("HTTP {code}")));
                }
                Err(ureq::Error::Status(code, _)) => {
                    return Err(BackendError::Protocol(format!("unexpected HTTP {code}")));
                }
                Err(ureq::Error::Transport(t)) => return Err(BackendError::Unreachable(t.to_string())),
            }
        }
    }
}
