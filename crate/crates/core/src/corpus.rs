//! Sentence corpora: loading, whitespace tokenization, length filtering and
//! token-count histograms.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of closed bins before the final open-ended bin in a [`TokenBinTable`].
pub const CLOSED_BINS: usize = 5;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid UTF-8 on line {line}")]
    InvalidUtf8 { line: usize },
    #[error("no sentences")]
    Empty,
    #[error("bin width must be positive")]
    ZeroBinWidth,
    #[error("unknown language {0:?} (expected NL or EN)")]
    UnknownLanguage(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Language {
    Nl,
    En,
}

impl Language {
    pub fn code(self) -> &'static str {
        match self {
            Language::Nl => "NL",
            Language::En => "EN",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Language {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "NL" => Ok(Language::Nl),
            "EN" => Ok(Language::En),
            _ => Err(CorpusError::UnknownLanguage(s.to_string())),
        }
    }
}

/// Split on whitespace runs. Punctuation stays attached to its word.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_owned).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sentence {
    pub id: usize,
    pub text: String,
    pub tokens: Vec<String>,
    pub language: Language,
}

impl Sentence {
    pub fn new(id: usize, text: impl Into<String>, language: Language) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        Self { id, text, tokens, language }
    }

    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub sentences: Vec<Sentence>,
    pub language: Language,
}

impl Corpus {
    /// Build a corpus from in-memory lines. Blank lines are skipped and ids
    /// are assigned densely in order of the retained lines.
    pub fn from_lines<I, S>(lines: I, language: Language) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut sentences = Vec::new();
        for line in lines {
            let line = line.as_ref().trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            sentences.push(Sentence::new(sentences.len(), line, language));
        }
        Self { sentences, language }
    }

    /// Number of sentences.
    pub fn n(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&Sentence> {
        // ids are dense after loading but may be sparse after filtering
        match self.sentences.get(id) {
            Some(s) if s.id == id => Some(s),
            _ => self.sentences.binary_search_by_key(&id, |s| s.id).ok().map(|i| &self.sentences[i]),
        }
    }
}

/// Read a one-sentence-per-line UTF-8 file. LF and CRLF line endings are accepted.
pub fn load_corpus(path: impl AsRef<Path>, language: Language) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| CorpusError::Io { path: path.display().to_string(), source })?;
    parse_corpus(&bytes, language)
}

pub fn parse_corpus(bytes: &[u8], language: Language) -> Result<Corpus, CorpusError> {
    let mut lines = Vec::new();
    for (i, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let line = std::str::from_utf8(raw).map_err(|_| CorpusError::InvalidUtf8 { line: i + 1 })?;
        lines.push(line);
    }
    Ok(Corpus::from_lines(lines, language))
}

/// Keep sentences with strictly fewer than `max_tokens` tokens. Ids are preserved.
pub fn filter_by_length(corpus: &Corpus, max_tokens: usize) -> Corpus {
    Corpus {
        sentences: corpus.sentences.iter().filter(|s| s.token_count() < max_tokens).cloned().collect(),
        language: corpus.language,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TokenBin {
    pub lower: usize,
    /// Exclusive upper bound; `None` for the final open bin.
    pub upper: Option<usize>,
    pub count: usize,
    pub percentage: f64,
}

impl TokenBin {
    pub fn contains(&self, tokens: usize) -> bool {
        tokens >= self.lower && self.upper.is_none_or(|u| tokens < u)
    }

    pub fn label(&self) -> String {
        match self.upper {
            Some(u) => format!("{}-{}", self.lower, u),
            None => format!(">={}", self.lower),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TokenBinTable {
    pub bins: Vec<TokenBin>,
    pub total_sentences: usize,
}

/// Histogram of sentence lengths: `CLOSED_BINS` bins of `bin_width` tokens
/// followed by one open bin.
pub fn token_bin_stats(corpus: &Corpus, bin_width: usize) -> Result<TokenBinTable, CorpusError> {
    if bin_width == 0 {
        return Err(CorpusError::ZeroBinWidth);
    }
    if corpus.is_empty() {
        return Err(CorpusError::Empty);
    }
    let mut counts = [0usize; CLOSED_BINS + 1];
    for s in &corpus.sentences {
        counts[(s.token_count() / bin_width).min(CLOSED_BINS)] += 1;
    }
    let n = corpus.n();
    let bins = counts
        .iter()
        .enumerate()
        .map(|(i, &count)| TokenBin {
            lower: i * bin_width,
            upper: (i < CLOSED_BINS).then(|| (i + 1) * bin_width),
            count,
            percentage: 100.0 * count as f64 / n as f64,
        })
        .collect();
    Ok(TokenBinTable { bins, total_sentences: n })
}

impl TokenBinTable {
    /// Render one column in the `# Tokens | <name>` layout, with percentages
    /// to two decimals and the sentence total on the last row.
    pub fn render(&self, column: &str) -> String {
        let labels: Vec<String> = self.bins.iter().map(TokenBin::label).collect();
        let w0 = labels.iter().map(String::len).chain(["# Tokens".len(), "Sentences".len()]).max().unwrap_or(0);
        let cells: Vec<String> = self.bins.iter().map(|b| format!("{:.2}%", b.percentage)).collect();
        let total = self.total_sentences.to_string();
        let w1 = cells.iter().map(String::len).chain([column.len(), total.len()]).max().unwrap_or(0);

        let mut out = String::new();
        out.push_str(&format!("{:<w0$} | {:>w1$}\n", "# Tokens", column));
        out.push_str(&format!("{}-+-{}\n", "-".repeat(w0), "-".repeat(w1)));
        for (label, cell) in labels.iter().zip(&cells) {
            out.push_str(&format!("{label:<w0$} | {cell:>w1$}\n"));
        }
        out.push_str(&format!("{}-+-{}\n", "-".repeat(w0), "-".repeat(w1)));
        out.push_str(&format!("{:<w0$} | {:>w1$}\n", "Sentences", total));
        out
    }
}
