use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use serde::Deserialize;
use serde_json::json;
use tiny_http::{Header, Method, Request, Response, Server};

use super::{BackendError, GenerationBackend, GenerationRequest};

/// Serves a backend over the generation wire protocol until shut down or dropped.
pub struct ProtocolServer {
    server: Arc<Server>,
    addr: SocketAddr,
    workers: Vec<JoinHandle<()>>,
}

impl ProtocolServer {
    /// Binds `addr` (port 0 picks a free port) and starts `workers` threads.
    pub fn start(
        backend: Arc<dyn GenerationBackend>,
        addr: &str,
        workers: usize,
    ) -> Result<Self, Box<dyn std::error::Error + Send + Sync>> {
        let server = Arc::new(Server::http(addr)?);
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or("server is not bound to an IP address")?;
        let workers = (0..workers.max(1))
            .map(|_| {
                let (server, backend) = (server.clone(), backend.clone());
                std::thread::spawn(move || {
                    for request in server.incoming_requests() {
                        handle(backend.as_ref(), request);
                    }
                })
            })
            .collect();
        Ok(Self { server, addr, workers })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Blocks until the server stops (it only stops via [`ProtocolServer::shutdown`]).
    pub fn join(mut self) {
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        for _ in 0..self.workers.len() {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl Drop for ProtocolServer {
    fn drop(&mut self) {
        self.stop();
    }
}

#[derive(Deserialize)]
struct WireRequest {
    prompt: String,
    #[serde(default = "default_max_new_tokens")]
    max_new_tokens: u32,
    #[serde(default = "default_num_return_sequences")]
    num_return_sequences: u32,
}

fn default_max_new_tokens() -> u32 {
    GenerationRequest::DEFAULT_MAX_NEW_TOKENS
}

fn default_num_return_sequences() -> u32 {
    1
}

fn respond(request: Request, status: u16, body: serde_json::Value) {
    let header = Header::from_bytes("Content-Type", "application/json").expect("static header");
    let response = Response::from_string(body.to_string())
        .with_status_code(status)
        .with_header(header);
    let _ = request.respond(response);
}

fn handle(backend: &dyn GenerationBackend, mut request: Request) {
    match (request.method(), request.url()) {
        (Method::Get, "/healthz") => {
            respond(request, 200, json!({"status": "ok", "model_id": backend.id()}));
        }
        (Method::Post, "/generate") => {
            let mut body = String::new();
            if request.as_reader().read_to_string(&mut body).is_err() {
                return respond(request, 400, json!({"error": "unreadable body"}));
            }
            let wire: WireRequest = match serde_json::from_str(&body) {
                Ok(w) => w,
                Err(e) => return respond(request, 400, json!({"error": e.to_string()})),
            };
            if wire.max_new_tokens == 0 || wire.num_return_sequences != 1 {
                return respond(
                    request,
                    400,
                    json!({"error": "max_new_tokens must be positive and num_return_sequences must be 1"}),
                );
            }
            let req = GenerationRequest {
                prompt: wire.prompt,
                max_new_tokens: wire.max_new_tokens,
                num_return_sequences: wire.num_return_sequences,
            };
            match backend.generate(&req) {
                Ok(resp) => respond(request, 200, json!({"text": resp.text, "model_id": resp.model_id})),
                Err(BackendError::BadRequest(m)) => respond(request, 400, json!({"error": m})),
                Err(e) => respond(request, 503, json!({"error": e.to_string()})),
            }
        }
        _ => respond(request, 404, json!({"error": "not found"})),
    }
}
