use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Duration;

use chrono::Utc;
use serde::Deserialize;
use serde_json::json;
use thiserror::Error;

use super::{handle_command, BotDeps, StoreError, UserProfile};

pub const DEFAULT_API_BASE: &str = "https://api.telegram.org";

#[derive(Debug, Error)]
pub enum BotError {
    #[error("bot token rejected (HTTP {0})")]
    Auth(u16),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("bot API error {code}: {description}")]
    Api { code: u16, description: String },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("bot token is empty")]
    EmptyToken,
}

/// A text message received by the bot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BotUpdate {
    pub update_id: i64,
    pub chat_id: i64,
    pub text: String,
}

#[derive(Deserialize)]
struct ApiEnvelope<T> {
    ok: bool,
    result: Option<T>,
    error_code: Option<u16>,
    description: Option<String>,
}

#[derive(Deserialize)]
struct RawUpdate {
    update_id: i64,
    message: Option<RawMessage>,
}

#[derive(Deserialize)]
struct RawMessage {
    chat: RawChat,
    text: Option<String>,
}

#[derive(Deserialize)]
struct RawChat {
    id: i64,
}

/// Minimal client for the bot HTTP API (`getUpdates`, `sendMessage`).
#[derive(Debug, Clone)]
pub struct BotApiClient {
    base: String,
    token: String,
    agent: ureq::Agent,
}

impl BotApiClient {
    pub fn new(base: &str, token: &str, poll_timeout: Duration) -> Result<Self, BotError> {
        if token.trim().is_empty() {
            return Err(BotError::EmptyToken);
        }
        let agent = ureq::AgentBuilder::new()
            .timeout_connect(Duration::from_secs(10))
            .timeout(poll_timeout + Duration::from_secs(15))
            .build();
        Ok(Self { base: base.trim_end_matches('/').to_string(), token: token.to_string(), agent })
    }

    fn url(&self, method: &str) -> String {
        format!("{}/bot{}/{method}", self.base, self.token)
    }

    fn decode<T: for<'de> Deserialize<'de>>(result: Result<ureq::Response, ureq::Error>) -> Result<T, BotError> {
        let response = match result {
            Ok(r) => r,
            Err(ureq::Error::Status(code @ (401 | 403 | 404), _)) => return Err(BotError::Auth(code)),
            Err(ureq::Error::Status(code, r)) => {
                let description = r.into_string().unwrap_or_default();
                return Err(if code >= 500 || code == 429 {
                    BotError::Transport(format!("HTTP {code}: {description}"))
                } else {
                    BotError::Api { code, description }
                });
            }
            Err(ureq::Error::Transport(t)) => return Err(BotError::Transport(t.to_string())),
        };
        let envelope: ApiEnvelope<T> =
            response.into_json().map_err(|e| BotError::Transport(format!("bad response: {e}")))?;
        match (envelope.ok, envelope.result) {
            (true, Some(result)) => Ok(result),
            _ => Err(BotError::Api {
                code: envelope.error_code.unwrap_or(0),
                description: envelope.description.unwrap_or_default(),
            }),
        }
    }

    /// Long-polls for updates with `update_id >= offset`. Non-text updates
    /// come back with empty text so the cursor can still move past them.
    pub fn get_updates(&self, offset: i64, timeout: Duration) -> Result<Vec<BotUpdate>, BotError> {
        let raw: Vec<RawUpdate> = Self::decode(
            self.agent
                .get(&self.url("getUpdates"))
                .query("offset", &offset.to_string())
                .query("timeout", &timeout.as_secs().to_string())
                .call(),
        )?;
        Ok(raw
            .into_iter()
            .map(|u| {
                let (chat_id, text) = u
                    .message
                    .map(|m| (m.chat.id, m.text.unwrap_or_default()))
                    .unwrap_or((0, String::new()));
                BotUpdate { update_id: u.update_id, chat_id, text }
            })
            .collect())
    }

    pub fn send_message(&self, chat_id: i64, text: &str) -> Result<(), BotError> {
        Self::decode::<serde_json::Value>(
            self.agent.post(&self.url("sendMessage")).send_json(json!({"chat_id": chat_id, "text": text})),
        )
        .map(|_| ())
    }
}

#[derive(Debug, Clone)]
pub struct PollOptions {
    /// Long-poll timeout passed to `getUpdates`.
    pub poll_timeout: Duration,
    /// First delay after a transient failure; doubles up to `max_backoff`.
    pub backoff_base: Duration,
    pub max_backoff: Duration,
}

impl Default for PollOptions {
    fn default() -> Self {
        Self {
            poll_timeout: Duration::from_secs(30),
            backoff_base: Duration::from_millis(500),
            max_backoff: Duration::from_secs(30),
        }
    }
}

/// Runs until `shutdown` is set or a fatal error occurs.
///
/// Each update is handled, its reply sent, and only then is the cursor
/// moved past it. A crash in between re-delivers that one update on
/// restart; word saves are idempotent so state does not change twice.
pub fn poll_loop(
    client: &BotApiClient,
    deps: &BotDeps<'_>,
    options: &PollOptions,
    shutdown: &AtomicBool,
) -> Result<(), BotError> {
    let mut failures: u32 = 0;
    let backoff = |failures: u32| {
        options
            .backoff_base
            .saturating_mul(1u32 << failures.min(16))
            .min(options.max_backoff)
    };

    'poll: while !shutdown.load(Ordering::SeqCst) {
        let cursor = deps.store.cursor()?;
        let mut updates = match client.get_updates(cursor, options.poll_timeout) {
            Ok(u) => u,
            Err(BotError::Transport(e)) => {
                log::warn!("getUpdates failed: {e}");
                std::thread::sleep(backoff(failures));
                failures += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        failures = 0;
        updates.sort_by_key(|u| u.update_id);

        for update in updates {
            if shutdown.load(Ordering::SeqCst) {
                break 'poll;
            }
            if update.update_id < deps.store.cursor()? {
                continue;
            }
            if !update.text.trim().is_empty() {
                let profile = deps
                    .store
                    .load(update.chat_id)?
                    .unwrap_or_else(|| UserProfile::new(update.chat_id, Utc::now()));
                let (reply, _) = handle_command(&profile, &update.text, deps);
                if let Err(e) = client.send_message(update.chat_id, &reply) {
                    match e {
                        BotError::Transport(_) => {
                            log::warn!("sendMessage failed for update {}: {e}", update.update_id);
                            std::thread::sleep(backoff(failures));
                            failures += 1;
                            continue 'poll;
                        }
                        BotError::Api { .. } => {
                            log::warn!("dropping reply to update {}: {e}", update.update_id);
                        }
                        fatal => return Err(fatal),
                    }
                }
            }
            deps.store.set_cursor(update.update_id + 1)?;
        }
    }
    Ok(())
}
