use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EmbedError, Embedder, EmbeddingVector};

pub const DEFAULT_BATCH_SIZE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { attempts: 3, initial_backoff: Duration::from_millis(250) }
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

enum Failure {
    Retryable(EmbedError),
    Fatal(EmbedError),
}

/// Client for an embedding service speaking
/// `POST /embed {"model", "texts"} -> {"vectors"}`.
///
/// All vectors produced by one client must share a dimension; the first
/// successful batch fixes it.
pub struct RemoteEmbedder {
    url: String,
    model: String,
    batch_size: usize,
    retry: RetryPolicy,
    agent: ureq::Agent,
    dim: Mutex<Option<usize>>,
}

impl RemoteEmbedder {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        let endpoint = endpoint.into();
        let trimmed = endpoint.trim_end_matches('/');
        let url = if trimmed.ends_with("/embed") { trimmed.to_string() } else { format!("{trimmed}/embed") };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        Self {
            url,
            model: model.into(),
            batch_size: DEFAULT_BATCH_SIZE,
            retry: RetryPolicy::default(),
            agent,
            dim: Mutex::new(None),
        }
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    pub fn dim(&self) -> Option<usize> {
        *self.dim.lock().unwrap()
    }

    fn post_once(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, Failure> {
        let req = EmbedRequest { model: &self.model, texts };
        let mut resp = self
            .agent
            .post(&self.url)
            .send_json(&req)
            .map_err(|e| Failure::Retryable(EmbedError::Transport { attempts: 1, message: e.to_string() }))?;
        let status = resp.status().as_u16();
        if status != 200 {
            let body = resp.body_mut().read_to_string().unwrap_or_default();
            let err = EmbedError::Status { status, body };
            return Err(if status >= 500 || status == 429 { Failure::Retryable(err) } else { Failure::Fatal(err) });
        }
        let parsed: EmbedResponse =
            resp.body_mut().read_json().map_err(|e| Failure::Fatal(EmbedError::Malformed(e.to_string())))?;
        Ok(parsed.vectors)
    }

    fn post_with_retry(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, EmbedError> {
        let attempts = self.retry.attempts.max(1);
        let mut backoff = self.retry.initial_backoff;
        let mut last = None;
        for attempt in 1..=attempts {
            match self.post_once(texts) {
                Ok(v) => return Ok(v),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retryable(e)) => {
                    warn!("{} attempt {attempt}/{attempts} failed: {e}", self.url);
                    last = Some(e);
                    if attempt < attempts {
                        thread::sleep(backoff);
                        backoff *= 2;
                    }
                }
            }
        }
        Err(match last {
            Some(EmbedError::Transport { message, .. }) => EmbedError::Transport { attempts, message },
            Some(EmbedError::Status { status, body }) => {
                EmbedError::Transport { attempts, message: format!("HTTP {status}: {body}") }
            }
            Some(other) => other,
            None => unreachable!("at least one attempt is made"),
        })
    }

    /// Embed one batch. Vectors come back in request order.
    pub fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>, EmbedError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        debug!("POST {} ({} texts)", self.url, texts.len());
        let raw = self.post_with_retry(texts)?;
        if raw.len() != texts.len() {
            return Err(EmbedError::CountMismatch { sent: texts.len(), received: raw.len() });
        }
        let batch_dim = raw[0].len();
        if let Some(v) = raw.iter().find(|v| v.len() != batch_dim) {
            return Err(EmbedError::DimensionInconsistency { expected: batch_dim, got: v.len() });
        }
        {
            let mut dim = self.dim.lock().unwrap();
            match *dim {
                Some(d) if d != batch_dim => {
                    return Err(EmbedError::DimensionInconsistency { expected: d, got: batch_dim })
                }
                Some(_) => {}
                None => *dim = Some(batch_dim),
            }
        }
        raw.into_iter().map(EmbeddingVector::new).collect()
    }

    /// Embed any number of texts in `batch_size` chunks, several in flight
    /// at once, reassembled in input order.
    pub fn embed_all(&self, texts: &[&str]) -> Vec<Result<Vec<EmbeddingVector>, EmbedError>> {
        texts.par_chunks(self.batch_size).map(|chunk| self.embed_batch(chunk)).collect()
    }
}

impl Embedder for RemoteEmbedder {
    fn name(&self) -> String {
        format!("remote-{}", self.model)
    }

    fn embed_many(&self, texts: &[&str]) -> Vec<Result<EmbeddingVector, EmbedError>> {
        let mut out = Vec::with_capacity(texts.len());
        for (chunk, result) in texts.chunks(self.batch_size).zip(self.embed_all(texts)) {
            match result {
                Ok(vs) => out.extend(vs.into_iter().map(Ok)),
                Err(e) => out.extend(chunk.iter().map(|_| Err(e.clone()))),
            }
        }
        out
    }
}
