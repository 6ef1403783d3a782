//! In-memory imitation of the bot HTTP API: a queue of text updates and a
//! log of every reply sent.

use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use kic::bot::{poll_loop, BotApiClient, BotDeps, FileStore, NoExamples, PollOptions, ProfileStore};
use kic::generation::StubBackend;
use serde_json::{json, Value};

use super::{concordance_page, examples_for, keyword_of, FixtureServer};

pub const TOKEN: &str = "123:test-token";
pub const WAIT: Duration = Duration::from_secs(20);

#[derive(Debug, Clone, PartialEq)]
pub struct Sent {
    pub chat_id: i64,
    pub text: String,
}

#[derive(Default)]
pub struct ChatState {
    pub updates: Vec<(i64, i64, String)>,
    pub sent: Vec<Sent>,
    pub offsets: Vec<i64>,
}

/// Called for each sendMessage before it is answered; return `Some(status)`
/// to fail the request with that status instead.
pub type SendHook = dyn Fn(&Sent, &ChatState) -> Option<u16> + Send + Sync;

pub struct FakeChat {
    pub server: FixtureServer,
    pub state: Arc<Mutex<ChatState>>,
}

impl FakeChat {
    pub fn start(token: &str) -> Self {
        Self::with_hook(token, Box::new(|_, _| None))
    }

    /// A server that rejects every call as unauthorized.
    pub fn unauthorized() -> FixtureServer {
        FixtureServer::start(|_, _| (401, json!({"ok": false, "error_code": 401, "description": "Unauthorized"}).to_string()))
    }

    pub fn with_hook(token: &str, hook: Box<SendHook>) -> Self {
        let state = Arc::new(Mutex::new(ChatState::default()));
        let prefix = format!("/bot{token}/");
        let st = state.clone();
        let server = FixtureServer::start(move |req, _| {
            let Some(method) = req.url.strip_prefix(&prefix) else {
                return (404, json!({"ok": false, "error_code": 404, "description": "Not Found"}).to_string());
            };
            if method.starts_with("getUpdates") {
                let offset: i64 = method
                    .split(['?', '&'])
                    .find_map(|kv| kv.strip_prefix("offset="))
                    .and_then(|v| v.parse().ok())
                    .unwrap_or(0);
                let pending: Vec<Value> = {
                    let mut s = st.lock().unwrap();
                    s.offsets.push(offset);
                    s.updates
                        .iter()
                        .filter(|(id, _, _)| *id >= offset)
                        .map(|(id, chat, text)| {
                            json!({"update_id": id, "message": {"chat": {"id": chat}, "text": text}})
                        })
                        .collect()
                };
                if pending.is_empty() {
                    std::thread::sleep(Duration::from_millis(20));
                }
                return (200, json!({"ok": true, "result": pending}).to_string());
            }
            if method.starts_with("sendMessage") {
                let body: Value = serde_json::from_str(&req.body).unwrap_or(Value::Null);
                let sent = Sent {
                    chat_id: body["chat_id"].as_i64().unwrap_or_default(),
                    text: body["text"].as_str().unwrap_or_default().to_string(),
                };
                let mut s = st.lock().unwrap();
                if let Some(status) = hook(&sent, &s) {
                    return (status, json!({"ok": false, "error_code": status, "description": "hook"}).to_string());
                }
                s.sent.push(sent);
                return (200, json!({"ok": true, "result": {"message_id": s.sent.len()}}).to_string());
            }
            (404, json!({"ok": false, "error_code": 404, "description": "no such method"}).to_string())
        });
        Self { server, state }
    }

    pub fn push(&self, update_id: i64, chat_id: i64, text: &str) {
        self.state.lock().unwrap().updates.push((update_id, chat_id, text.to_string()));
    }

    pub fn sent(&self) -> Vec<Sent> {
        self.state.lock().unwrap().sent.clone()
    }

    /// Waits until at least `n` replies have been sent.
    pub fn wait_for(&self, n: usize, limit: Duration) -> Vec<Sent> {
        let start = Instant::now();
        loop {
            let sent = self.sent();
            if sent.len() >= n || start.elapsed() > limit {
                return sent;
            }
            std::thread::sleep(Duration::from_millis(10));
        }
    }
}

pub fn options() -> PollOptions {
    PollOptions { poll_timeout: Duration::ZERO, backoff_base: Duration::from_millis(5), max_backoff: Duration::from_millis(50) }
}

/// Runs the poll loop in a thread until `expected` replies arrive.
pub fn run_until(chat: &FakeChat, store: &FileStore, expected: usize) -> Vec<Sent> {
    let client = BotApiClient::new(&chat.server.base, TOKEN, Duration::ZERO).unwrap();
    let deps = BotDeps { backend: &StubBackend, examples: &NoExamples, store };
    let shutdown = AtomicBool::new(false);
    std::thread::scope(|s| {
        let handle = s.spawn(|| poll_loop(&client, &deps, &options(), &shutdown));
        let sent = chat.wait_for(expected, WAIT);
        // Let the cursor write for the last reply land.
        let deadline = std::time::Instant::now() + WAIT;
        while store.cursor().unwrap() <= chat.state.lock().unwrap().updates.iter().map(|u| u.0).max().unwrap_or(0)
            && std::time::Instant::now() < deadline
        {
            std::thread::sleep(Duration::from_millis(5));
        }
        shutdown.store(true, Ordering::SeqCst);
        handle.join().unwrap().unwrap();
        sent
    })
}

pub fn spawn_bot(api: &str, store: &Path, examples: &str) -> Child {
    Command::new(env!("CARGO_BIN_EXE_kic"))
        .args(["bot", "--stub", "--poll-timeout", "0", "--store"])
        .arg(store)
        .args(["--harvest-base-url", examples])
        .env("BOT_TOKEN", TOKEN)
        .env("BOT_API_BASE", api)
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap()
}

pub fn example_server() -> FixtureServer {
    FixtureServer::start(|req, _| {
        let ex = examples_for(&keyword_of(&req.url), 3);
        (200, concordance_page(&ex.iter().map(String::as_str).collect::<Vec<_>>()))
    })
}
