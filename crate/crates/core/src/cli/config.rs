use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::Language;
use crate::curves::{DEFAULT_MAX_SKIP_RATE, DEFAULT_RESOLUTION};
use crate::embed::{EmbedderSpec, DEFAULT_BATCH_SIZE};
use crate::perturb::DEFAULT_MAX_VARIANTS;

use super::PipelineError;

pub const MIN_RESOLUTION: usize = 16;

/// Run configuration. Serialized as a flat TOML file; every key except
/// `corpus` and `language` has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: PathBuf,
    #[serde(deserialize_with = "de_language", serialize_with = "ser_language")]
    pub language: Language,
    /// Column name in the overlap matrix; defaults to the corpus file stem.
    #[serde(default)]
    pub dataset: Option<String>,
    #[serde(default = "default_embedders")]
    pub embedders: Vec<String>,
    #[serde(default = "default_x")]
    pub x: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default)]
    pub filter_max_tokens: Option<usize>,
    #[serde(default)]
    pub grammar_negation: bool,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub bandwidth: Option<f64>,
    #[serde(default = "default_skip_rate")]
    pub max_skip_rate: f64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[serde(default)]
    pub jobs: Option<usize>,
}

fn default_embedders() -> Vec<String> {
    vec!["tfidf".to_string()]
}
fn default_x() -> usize {
    DEFAULT_MAX_VARIANTS
}
fn default_resolution() -> usize {
    DEFAULT_RESOLUTION
}
fn default_batch_size() -> usize {
    DEFAULT_BATCH_SIZE
}
fn default_skip_rate() -> f64 {
    DEFAULT_MAX_SKIP_RATE
}
fn default_out() -> PathBuf {
    PathBuf::from("csc-out")
}

fn de_language<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Language, D::Error> {
    let s = String::deserialize(d)?;
    s.parse().map_err(serde::de::Error::custom)
}

fn ser_language<S: serde::Serializer>(l: &Language, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(l.code())
}

impl RunConfig {
    pub fn new(corpus: impl Into<PathBuf>, language: Language) -> Self {
        Self {
            corpus: corpus.into(),
            language,
            dataset: None,
            embedders: default_embedders(),
            x: default_x(),
            seed: 0,
            resolution: default_resolution(),
            filter_max_tokens: None,
            grammar_negation: false,
            endpoint: None,
            batch_size: default_batch_size(),
            bandwidth: None,
            max_skip_rate: default_skip_rate(),
            out: default_out(),
            jobs: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Relative `corpus` and `out` paths resolve against the config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            for p in [&mut cfg.corpus, &mut cfg.out] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn dataset_name(&self) -> String {
        self.dataset.clone().unwrap_or_else(|| {
            self.corpus.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "corpus".to_string())
        })
    }

    pub fn embedder_specs(&self) -> Result<Vec<EmbedderSpec>, PipelineError> {
        self.embedders
            .iter()
            .map(|e| {
                EmbedderSpec::parse(e, self.endpoint.as_deref(), self.batch_size)
                    .map_err(|err| PipelineError::Config(err.to_string()))
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.x < 1 {
            return bad("x must be at least 1".into());
        }
        if self.resolution < MIN_RESOLUTION {
            return bad(format!("resolution must be at least {MIN_RESOLUTION}"));
        }
        if self.filter_max_tokens == Some(0) {
            return bad("filter_max_tokens must be positive".into());
        }
        if self.grammar_negation && self.language != Language::En {
            return bad("grammar-aware negation is English-only".into());
        }
        if self.embedders.is_empty() {
            return bad("at least one embedder is required".into());
        }
        if !(0.0..=1.0).contains(&self.max_skip_rate) {
            return bad("max_skip_rate must be within [0, 1]".into());
        }
        if let Some(h) = self.bandwidth {
            if !(h > 0.0 && h.is_finite()) {
                return bad("bandwidth must be positive".into());
            }
        }
        if self.jobs == Some(0) {
            return bad("jobs must be positive".into());
        }
        let specs = self.embedder_specs()?;
        let mut names: Vec<String> = specs.iter().map(EmbedderSpec::name).collect();
        names.sort();
        names.dedup();
        if names.len() != specs.len() {
            return bad("duplicate embedder".into());
        }
        Ok(())
    }
}
