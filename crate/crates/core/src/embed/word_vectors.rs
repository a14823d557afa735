use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use log::warn;

use super::{l2_norm, EmbedError, Embedder, EmbeddingVector};

/// Static word vectors from a `count dim` text file. Each stored vector is
/// kept unit-length; zero vectors are dropped at load time.
#[derive(Debug, Clone)]
pub struct WordVectorTable {
    dim: usize,
    entries: HashMap<String, Vec<f64>>,
    name: String,
}

/// Read a word-vector text file. Warnings (duplicate tokens, header count
/// mismatch) go to the log.
pub fn load_word_vectors(path: impl AsRef<Path>) -> Result<WordVectorTable, EmbedError> {
    let path = path.as_ref();
    let file =
        File::open(path).map_err(|e| EmbedError::Io { path: path.display().to_string(), message: e.to_string() })?;
    let (table, warnings) = parse_word_vectors(BufReader::new(file))?;
    for w in &warnings {
        warn!("{}: {w}", path.display());
    }
    Ok(table)
}

pub fn parse_word_vectors<R: BufRead>(reader: R) -> Result<(WordVectorTable, Vec<String>), EmbedError> {
    let mut lines = reader.lines().enumerate();
    let io_err = |line: usize, e: std::io::Error| EmbedError::Parse { line, message: e.to_string() };

    let (declared, dim) = match lines.next() {
        Some((_, header)) => {
            let header = header.map_err(|e| io_err(1, e))?;
            let mut fields = header.split_whitespace();
            let parse = |f: Option<&str>| f.and_then(|v| v.parse::<usize>().ok());
            match (parse(fields.next()), parse(fields.next()), fields.next()) {
                (Some(count), Some(dim), None) if dim > 0 => (count, dim),
                _ => {
                    return Err(EmbedError::Parse {
                        line: 1,
                        message: format!("expected header \"count dim\", found {header:?}"),
                    })
                }
            }
        }
        None => return Err(EmbedError::Parse { line: 1, message: "missing header".into() }),
    };

    let mut warnings = Vec::new();
    let mut entries = HashMap::with_capacity(declared);
    let mut rows = 0usize;
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(|e| io_err(lineno, e))?;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let values = fields
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| EmbedError::Parse { line: lineno, message: format!("non-numeric component {f:?}") })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if values.len() != dim {
            return Err(EmbedError::Parse {
                line: lineno,
                message: format!("expected {dim} components, found {}", values.len()),
            });
        }
        rows += 1;
        if entries.insert(token.to_string(), values).is_some() {
            warnings.push(format!("line {lineno}: duplicate token {token:?}, keeping last"));
        }
    }
    if rows != declared {
        warnings.push(format!("header declares {declared} rows, found {rows}"));
    }

    let table = WordVectorTable::from_entries(dim, entries)?;
    Ok((table, warnings))
}

impl WordVectorTable {
    pub fn from_entries(dim: usize, entries: HashMap<String, Vec<f64>>) -> Result<Self, EmbedError> {
        let mut normalized = HashMap::with_capacity(entries.len());
        for (token, mut v) in entries {
            if v.len() != dim {
                return Err(EmbedError::DimensionInconsistency { expected: dim, got: v.len() });
            }
            let norm = l2_norm(&v);
            if norm > 0.0 {
                v.iter_mut().for_each(|x| *x /= norm);
                normalized.insert(token, v);
            }
        }
        Ok(Self { dim, entries: normalized, name: "wordavg".to_string() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    /// Unit-length vector for `token`; falls back to the lowercased form.
    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.entries.get(token).or_else(|| self.entries.get(&token.to_lowercase())).map(Vec::as_slice)
    }

    /// Mean of the normalized vectors of in-vocabulary tokens.
    pub fn embed_average(&self, text: &str) -> Result<EmbeddingVector, EmbedError> {
        let mut sum = vec![0.0; self.dim];
        let mut used = 0usize;
        for tok in text.split_whitespace() {
            if let Some(v) = self.get(tok) {
                sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
                used += 1;
            }
        }
        if used == 0 {
            return Err(EmbedError::NoEmbeddableTokens);
        }
        sum.iter_mut().for_each(|s| *s /= used as f64);
        EmbeddingVector::new(sum)
    }
}

impl Embedder for WordVectorTable {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn embed_many(&self, texts: &[&str]) -> Vec<Result<EmbeddingVector, EmbedError>> {
        texts.iter().map(|t| self.embed_average(t)).collect()
    }
}
