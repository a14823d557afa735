//! Sentence embedders behind one trait: TF-IDF, averaged word vectors and a
//! remote embedding service.

mod remote;
mod tfidf;
mod word_vectors;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

pub use remote::{RemoteEmbedder, RetryPolicy, DEFAULT_BATCH_SIZE};
pub use tfidf::TfidfModel;
pub use word_vectors::{load_word_vectors, parse_word_vectors, WordVectorTable};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EmbedError {
    #[error("cannot fit TF-IDF on an empty input set")]
    EmptyFit,
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("no embeddable tokens")]
    NoEmbeddableTokens,
    #[error("non-finite component in embedding")]
    NonFinite,
    #[error("transport failure after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("embedding service returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("count mismatch: sent {sent} texts, received {received} vectors")]
    CountMismatch { sent: usize, received: usize },
    #[error("dimension inconsistency: expected {expected}, got {got}")]
    DimensionInconsistency { expected: usize, got: usize },
    #[error("invalid embedder spec {0:?}")]
    InvalidSpec(String),
}

/// Fixed-dimension real vector with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, EmbedError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.0)
    }
}

impl AsRef<[f64]> for EmbeddingVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Anything that maps sentences to vectors.
pub trait Embedder: Send + Sync {
    fn name(&self) -> String;

    /// One result per input, in input order.
    fn embed_many(&self, texts: &[&str]) -> Vec<Result<EmbeddingVector, EmbedError>>;

    fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        self.embed_many(&[text]).pop().expect("embed_many returns one result per input")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbedderSpec {
    Tfidf,
    WordAvg { path: PathBuf },
    Remote { endpoint: String, model: String, batch_size: usize },
}

impl EmbedderSpec {
    /// Short name used for file names and matrix rows.
    pub fn name(&self) -> String {
        match self {
            EmbedderSpec::Tfidf => "tfidf".to_string(),
            EmbedderSpec::WordAvg { path } => {
                format!("wordavg-{}", path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default())
            }
            EmbedderSpec::Remote { model, .. } => format!("remote-{model}"),
        }
    }

    /// Parse `tfidf`, `word-avg:<path>` or `remote:<model>`. Remote specs take
    /// their endpoint from `default_endpoint`; `remote:<model>@<url>` overrides it.
    pub fn parse(s: &str, default_endpoint: Option<&str>, batch_size: usize) -> Result<Self, EmbedError> {
        let invalid = || EmbedError::InvalidSpec(s.to_string());
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        match (kind.to_ascii_lowercase().as_str(), arg) {
            ("tfidf", None) => Ok(EmbedderSpec::Tfidf),
            ("word-avg" | "wordavg" | "fasttext", Some(path)) if !path.is_empty() => {
                Ok(EmbedderSpec::WordAvg { path: path.into() })
            }
            ("remote", Some(rest)) if !rest.is_empty() => {
                let (model, endpoint) = match rest.split_once('@') {
                    Some((m, e)) => (m, Some(e)),
                    None => (rest, default_endpoint),
                };
                let endpoint = endpoint.ok_or_else(invalid)?;
                if model.is_empty() || batch_size == 0 {
                    return Err(invalid());
                }
                Ok(EmbedderSpec::Remote { endpoint: endpoint.to_string(), model: model.to_string(), batch_size })
            }
            _ => Err(invalid()),
        }
    }

    /// Construct the backend. TF-IDF is fitted on `fit_texts`.
    pub fn build(&self, fit_texts: &[&str]) -> Result<Box<dyn Embedder>, EmbedError> {
        Ok(match self {
            EmbedderSpec::Tfidf => Box::new(TfidfModel::fit(fit_texts)?),
            EmbedderSpec::WordAvg { path } => {
                let mut table = load_word_vectors(path)?;
                table.set_name(self.name());
                Box::new(table)
            }
            EmbedderSpec::Remote { endpoint, model, batch_size } => {
                Box::new(RemoteEmbedder::new(endpoint.clone(), model.clone()).with_batch_size(*batch_size))
            }
        })
    }
}

impl fmt::Display for EmbedderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for EmbedderSpec {
    type Err = EmbedError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s, None, DEFAULT_BATCH_SIZE)
    }
}
