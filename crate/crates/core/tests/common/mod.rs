#![allow(dead_code)]

pub mod chat;
pub mod oracle;

use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Instant;

/// A request as seen by the fixture server.
#[derive(Debug, Clone)]
pub struct Seen {
    pub method: String,
    pub url: String,
    pub body: String,
    pub at: Instant,
}

pub type Handler = dyn Fn(&Seen, usize) -> (u16, String) + Send + Sync;

/// Local HTTP server answering from a closure. The closure also gets the
/// zero-based index of the request among all requests so far.
pub struct FixtureServer {
    server: Arc<tiny_http::Server>,
    pub base: String,
    seen: Arc<Mutex<Vec<Seen>>>,
    workers: Vec<JoinHandle<()>>,
}

impl FixtureServer {
    pub fn start<F>(handler: F) -> Self
    where
        F: Fn(&Seen, usize) -> (u16, String) + Send + Sync + 'static,
    {
        let server = Arc::new(tiny_http::Server::http("127.0.0.1:0").unwrap());
        let base = format!("http://{}", server.server_addr().to_ip().unwrap());
        let seen = Arc::new(Mutex::new(Vec::new()));
        let handler: Arc<Handler> = Arc::new(handler);
        let workers = (0..4)
            .map(|_| {
                let (server, seen, handler) = (server.clone(), seen.clone(), handler.clone());
                std::thread::spawn(move || {
                    for mut req in server.incoming_requests() {
                        let mut body = String::new();
                        let _ = req.as_reader().read_to_string(&mut body);
                        let s = Seen {
                            method: req.method().to_string(),
                            url: req.url().to_string(),
                            body,
                            at: Instant::now(),
                        };
                        let index = {
                            let mut seen = seen.lock().unwrap();
                            seen.push(s.clone());
                            seen.len() - 1
                        };
                        let (status, body) = handler(&s, index);
                        let _ = req.respond(tiny_http::Response::from_string(body).with_status_code(status));
                    }
                })
            })
            .collect();
        Self { server, base, seen, workers }
    }

    pub fn requests(&self) -> Vec<Seen> {
        self.seen.lock().unwrap().clone()
    }

    pub fn count(&self) -> usize {
        self.seen.lock().unwrap().len()
    }
}

impl Drop for FixtureServer {
    fn drop(&mut self) {
        for _ in 0..self.workers.len() {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

/// A concordance-style page holding `examples` in `div.src` containers.
pub fn concordance_page(examples: &[&str]) -> String {
    let items: String = examples
        .iter()
        .map(|e| {
            format!(
                "<div class=\"example\"><div class=\"src ltr\"><span class=\"text\">{e}</span></div>\
                 <div class=\"trg rtl\"><span class=\"text\">…</span></div></div>\n"
            )
        })
        .collect();
    format!("<!DOCTYPE html><html><body><section id=\"examples-content\">\n{items}</section></body></html>")
}

/// Example sentences for `word`, each containing it as a whole token.
pub fn examples_for(word: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("Example {i} shows how to {word} in a sentence.")).collect()
}

/// Keyword from a `/<word>` path, percent-decoding the ASCII we use.
pub fn keyword_of(url: &str) -> String {
    url.rsplit('/').next().unwrap_or("").replace("%20", " ")
}
