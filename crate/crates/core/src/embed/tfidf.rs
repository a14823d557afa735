use std::collections::HashMap;

use super::{l2_norm, EmbedError, Embedder, EmbeddingVector};

/// Bag-of-words TF-IDF with smoothed idf and no stopword removal.
///
/// `idf(t) = ln((1 + N) / (1 + df(t))) + 1`, raw counts as term frequency,
/// rows L2-normalized.
#[derive(Debug, Clone)]
pub struct TfidfModel {
    vocabulary: HashMap<String, usize>,
    terms: Vec<String>,
    idf: Vec<f64>,
    doc_count: usize,
}

impl TfidfModel {
    /// Fit on whitespace tokens, lowercased. Columns are numbered in order of
    /// first appearance.
    pub fn fit<S: AsRef<str>>(sentences: &[S]) -> Result<Self, EmbedError> {
        let mut vocabulary: HashMap<String, usize> = HashMap::new();
        let mut terms = Vec::new();
        let mut df: Vec<usize> = Vec::new();
        let mut last_seen: Vec<usize> = Vec::new();

        for (doc, s) in sentences.iter().enumerate() {
            for tok in s.as_ref().split_whitespace() {
                let tok = tok.to_lowercase();
                let col = match vocabulary.get(&tok) {
                    Some(&c) => c,
                    None => {
                        let c = terms.len();
                        vocabulary.insert(tok.clone(), c);
                        terms.push(tok);
                        df.push(0);
                        last_seen.push(usize::MAX);
                        c
                    }
                };
                if last_seen[col] != doc {
                    last_seen[col] = doc;
                    df[col] += 1;
                }
            }
        }
        if terms.is_empty() {
            return Err(EmbedError::EmptyFit);
        }
        let n = sentences.len() as f64;
        let idf = df.iter().map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0).collect();
        Ok(Self { vocabulary, terms, idf, doc_count: sentences.len() })
    }

    pub fn dim(&self) -> usize {
        self.terms.len()
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn column(&self, token: &str) -> Option<usize> {
        self.vocabulary.get(&token.to_lowercase()).copied()
    }

    pub fn idf(&self, token: &str) -> Option<f64> {
        self.column(token).map(|c| self.idf[c])
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    /// Unseen tokens are ignored; an all-unseen text maps to the zero vector.
    pub fn transform(&self, text: &str) -> EmbeddingVector {
        let mut v = vec![0.0; self.dim()];
        for tok in text.split_whitespace() {
            if let Some(c) = self.column(tok) {
                v[c] += 1.0;
            }
        }
        for (x, idf) in v.iter_mut().zip(&self.idf) {
            *x *= idf;
        }
        let norm = l2_norm(&v);
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        EmbeddingVector::new(v).expect("tf-idf weights are finite")
    }
}

impl Embedder for TfidfModel {
    fn name(&self) -> String {
        "tfidf".to_string()
    }

    fn embed_many(&self, texts: &[&str]) -> Vec<Result<EmbeddingVector, EmbedError>> {
        texts.iter().map(|t| Ok(self.transform(t))).collect()
    }
}
