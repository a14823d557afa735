//! Test fixtures shared by the integration suites: a mock embedding service
//! and small corpus helpers.
#![allow(dead_code)]

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use serde_json::{json, Value};
use tiny_http::{Header, Response, Server};

pub const FIXTURE_DIM: usize = 32;

/// Deterministic bag-of-words vector for `text`: each lowercased token adds
/// one to a hashed bucket, plus a constant bias component.
pub fn fixture_vector(text: &str) -> Vec<f64> {
    let mut v = vec![0.0; FIXTURE_DIM];
    v[0] = 1.0;
    for tok in text.split_whitespace() {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in tok.to_lowercase().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x1000_0000_01b3);
        }
        v[1 + (h % (FIXTURE_DIM as u64 - 1)) as usize] += 1.0;
    }
    v
}

#[derive(Debug, Clone, Copy)]
pub enum Behavior {
    /// One fixture vector per text, in request order.
    Echo,
    /// Drop the last vector of every response.
    ShortCount,
    /// Answer 503 to the first `n` requests, then echo.
    FailFirst(usize),
    /// Always answer 500.
    AlwaysFail,
    /// Answer 400 (not retried).
    BadRequest,
    /// Echo, but the second and later requests get one extra component.
    GrowDim,
}

pub struct MockServer {
    server: Arc<Server>,
    handle: Option<JoinHandle<()>>,
    pub requests: Arc<AtomicUsize>,
    pub url: String,
}

impl MockServer {
    pub fn start(behavior: Behavior) -> Self {
        let server = Arc::new(Server::http("127.0.0.1:0").expect("bind mock server"));
        let port = server.server_addr().to_ip().expect("tcp listener").port();
        let requests = Arc::new(AtomicUsize::new(0));
        let (srv, count) = (server.clone(), requests.clone());
        let handle = std::thread::spawn(move || {
            for mut req in srv.incoming_requests() {
                let n = count.fetch_add(1, Ordering::SeqCst);
                let mut body = String::new();
                let _ = req.as_reader().read_to_string(&mut body);
                let (status, payload) = respond(behavior, n, req.url(), &body);
                let header = Header::from_bytes("Content-Type", "application/json").unwrap();
                let _ = req
                    .respond(Response::from_string(payload.to_string()).with_status_code(status).with_header(header));
            }
        });
        Self { server, handle: Some(handle), requests, url: format!("http://127.0.0.1:{port}") }
    }

    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn respond(behavior: Behavior, n: usize, url: &str, body: &str) -> (u16, Value) {
    if url != "/embed" {
        return (404, json!({"error": "not found"}));
    }
    let parsed: Value = match serde_json::from_str(body) {
        Ok(v) => v,
        Err(e) => return (400, json!({"error": e.to_string()})),
    };
    if !parsed["model"].is_string() {
        return (400, json!({"error": "missing model"}));
    }
    let texts: Vec<String> = parsed["texts"]
        .as_array()
        .map(|a| a.iter().filter_map(|t| t.as_str().map(str::to_owned)).collect())
        .unwrap_or_default();
    let echo = |extra: bool| -> Vec<Vec<f64>> {
        texts
            .iter()
            .map(|t| {
                let mut v = fixture_vector(t);
                if extra {
                    v.push(1.0);
                }
                v
            })
            .collect()
    };
    match behavior {
        Behavior::Echo => (200, json!({ "vectors": echo(false) })),
        Behavior::ShortCount => {
            let mut vs = echo(false);
            vs.pop();
            (200, json!({ "vectors": vs }))
        }
        Behavior::FailFirst(k) if n < k => (503, json!({"error": "warming up"})),
        Behavior::FailFirst(_) => (200, json!({ "vectors": echo(false) })),
        Behavior::AlwaysFail => (500, json!({"error": "boom"})),
        Behavior::BadRequest => (400, json!({"error": "bad"})),
        Behavior::GrowDim => (200, json!({ "vectors": echo(n > 0) })),
    }
}

/// Corpus lines of `w` tokens each, drawn from a small vocabulary.
pub fn synthetic_lines(lengths: &[usize]) -> Vec<String> {
    const VOCAB: &[&str] = &[
        "make",
        "decisions",
        "give",
        "orders",
        "lead",
        "team",
        "write",
        "reports",
        "plan",
        "budget",
        "review",
        "clients",
        "repair",
        "machines",
        "teach",
        "pupils",
    ];
    lengths
        .iter()
        .enumerate()
        .map(|(i, &w)| (0..w).map(|k| VOCAB[(i * 7 + k * 3) % VOCAB.len()]).collect::<Vec<_>>().join(" "))
        .collect()
}

pub fn demo_corpus_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}
