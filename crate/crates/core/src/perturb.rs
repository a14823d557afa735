//! Fuzz and negation perturbations.
//!
//! Both modes run the same procedure: enumerate every insertion slot (in
//! front of each word, never after the last one), cross it with the mode's
//! term list, shuffle the candidates with a seeded Fisher–Yates pass and keep
//! the first `X`. Only the term list differs between the modes.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Language, Sentence};

pub const DEFAULT_MAX_VARIANTS: usize = 3;

/// Auxiliaries after which grammar-aware English negation inserts "not".
pub const EN_AUXILIARIES: &[&str] = &[
    "is", "are", "was", "were", "am", "be", "can", "could", "will", "would", "shall", "should", "must", "may", "might",
    "do", "does", "did", "has", "have", "had",
];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PerturbError {
    #[error("no insertion slots")]
    NoSlots,
    #[error("no insertion terms")]
    NoTerms,
    #[error("max variants must be at least 1")]
    ZeroCap,
    #[error("grammar-aware negation is English-only")]
    NotEnglish,
    #[error("unknown mode {0:?} (expected fuzz or negate)")]
    UnknownMode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Fuzz,
    Negate,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Fuzz => "fuzz",
            Mode::Negate => "negate",
        }
    }

    fn stream_tag(self) -> u64 {
        match self {
            Mode::Fuzz => 0x66757a7a,
            Mode::Negate => 0x6e656761,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = PerturbError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fuzz" => Ok(Mode::Fuzz),
            "negate" | "negation" => Ok(Mode::Negate),
            _ => Err(PerturbError::UnknownMode(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermTable {
    pub language: Language,
    pub fuzz_terms: Vec<String>,
    pub negation_terms: Vec<String>,
}

impl TermTable {
    pub fn for_language(language: Language) -> Self {
        let (fuzz, neg): (&[&str], &[&str]) = match language {
            Language::Nl => (&["de", "het"], &["niet"]),
            Language::En => (&["a", "the"], &["not"]),
        };
        Self {
            language,
            fuzz_terms: fuzz.iter().map(|s| s.to_string()).collect(),
            negation_terms: neg.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn terms(&self, mode: Mode) -> &[String] {
        match mode {
            Mode::Fuzz => &self.fuzz_terms,
            Mode::Negate => &self.negation_terms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PerturbedSentence {
    pub text: String,
    pub inserted_term: String,
    /// Index of the original token the term was placed in front of.
    pub slot: usize,
}

impl PerturbedSentence {
    fn realize(tokens: &[String], term: &str, slot: usize) -> Self {
        let mut words: Vec<&str> = Vec::with_capacity(tokens.len() + 1);
        words.extend(tokens[..slot].iter().map(String::as_str));
        words.push(term);
        words.extend(tokens[slot..].iter().map(String::as_str));
        Self { text: words.join(" "), inserted_term: term.to_string(), slot }
    }

    /// Remove the inserted term at its recorded slot.
    pub fn restore(&self) -> Option<Vec<String>> {
        let mut tokens = crate::corpus::tokenize(&self.text);
        if tokens.get(self.slot)? != &self.inserted_term {
            return None;
        }
        tokens.remove(self.slot);
        Some(tokens)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PerturbationSet {
    pub original_id: usize,
    pub mode: Mode,
    pub variants: Vec<PerturbedSentence>,
}

pub fn insertion_slots(tokens: &[String]) -> Vec<usize> {
    (0..tokens.len()).collect()
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the RNG stream owned by one (sentence, mode) pair.
pub fn stream_seed(global_seed: u64, sentence_id: usize, mode: Mode) -> u64 {
    mix64(mix64(mix64(global_seed) ^ sentence_id as u64) ^ mode.stream_tag())
}

fn fisher_yates<T>(items: &mut [T], rng: &mut impl Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

fn variants_at_slots(
    tokens: &[String],
    terms: &[String],
    slots: &[usize],
    max_variants: usize,
    seed: u64,
) -> Result<Vec<PerturbedSentence>, PerturbError> {
    if terms.is_empty() {
        return Err(PerturbError::NoTerms);
    }
    if max_variants == 0 {
        return Err(PerturbError::ZeroCap);
    }
    if slots.is_empty() {
        return Err(PerturbError::NoSlots);
    }
    // term-major, slot-minor
    let mut candidates: Vec<(usize, usize)> =
        (0..terms.len()).flat_map(|t| slots.iter().map(move |&s| (t, s))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fisher_yates(&mut candidates, &mut rng);
    candidates.truncate(max_variants);
    Ok(candidates.into_iter().map(|(t, s)| PerturbedSentence::realize(tokens, &terms[t].to_lowercase(), s)).collect())
}

/// Up to `max_variants` distinct (term, slot) insertions, drawn with the
/// RNG seeded directly by `seed`.
pub fn generate_variants(
    sentence: &Sentence,
    terms: &[String],
    max_variants: usize,
    seed: u64,
) -> Result<Vec<PerturbedSentence>, PerturbError> {
    let slots = insertion_slots(&sentence.tokens);
    variants_at_slots(&sentence.tokens, terms, &slots, max_variants, seed)
}

fn perturb_with(
    sentence: &Sentence,
    table: &TermTable,
    mode: Mode,
    max_variants: usize,
    global_seed: u64,
) -> Result<PerturbationSet, PerturbError> {
    let seed = stream_seed(global_seed, sentence.id, mode);
    Ok(PerturbationSet {
        original_id: sentence.id,
        mode,
        variants: generate_variants(sentence, table.terms(mode), max_variants, seed)?,
    })
}

/// Article insertion. `global_seed` is expanded into a per-sentence stream.
pub fn fuzz(
    sentence: &Sentence,
    table: &TermTable,
    max_variants: usize,
    global_seed: u64,
) -> Result<PerturbationSet, PerturbError> {
    perturb_with(sentence, table, Mode::Fuzz, max_variants, global_seed)
}

/// Negation-particle insertion.
pub fn negate(
    sentence: &Sentence,
    table: &TermTable,
    max_variants: usize,
    global_seed: u64,
) -> Result<PerturbationSet, PerturbError> {
    perturb_with(sentence, table, Mode::Negate, max_variants, global_seed)
}

/// Slots directly after an auxiliary verb, i.e. in front of the following word.
pub fn auxiliary_slots(tokens: &[String]) -> Vec<usize> {
    tokens
        .iter()
        .enumerate()
        .filter(|(i, t)| *i + 1 < tokens.len() && EN_AUXILIARIES.contains(&t.to_lowercase().as_str()))
        .map(|(i, _)| i + 1)
        .collect()
}

/// English negation that only inserts "not" after an auxiliary. Sentences
/// without a usable auxiliary fall back to [`negate`].
pub fn grammar_negate_en(
    sentence: &Sentence,
    max_variants: usize,
    global_seed: u64,
) -> Result<PerturbationSet, PerturbError> {
    if sentence.language != Language::En {
        return Err(PerturbError::NotEnglish);
    }
    let table = TermTable::for_language(Language::En);
    let slots = auxiliary_slots(&sentence.tokens);
    if slots.is_empty() {
        return negate(sentence, &table, max_variants, global_seed);
    }
    let seed = stream_seed(global_seed, sentence.id, Mode::Negate);
    Ok(PerturbationSet {
        original_id: sentence.id,
        mode: Mode::Negate,
        variants: variants_at_slots(&sentence.tokens, &table.negation_terms, &slots, max_variants, seed)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PerturbOptions {
    pub max_variants: usize,
    pub seed: u64,
    pub grammar_negation: bool,
}

impl Default for PerturbOptions {
    fn default() -> Self {
        Self { max_variants: DEFAULT_MAX_VARIANTS, seed: 0, grammar_negation: false }
    }
}

/// Perturb every sentence of the corpus under one mode, in parallel. The
/// output is in corpus order regardless of scheduling.
pub fn perturb_corpus(corpus: &Corpus, mode: Mode, opts: PerturbOptions) -> Result<Vec<PerturbationSet>, PerturbError> {
    if opts.grammar_negation && mode == Mode::Negate && corpus.language != Language::En {
        return Err(PerturbError::NotEnglish);
    }
    let table = TermTable::for_language(corpus.language);
    corpus
        .sentences
        .par_iter()
        .map(|s| match mode {
            Mode::Fuzz => fuzz(s, &table, opts.max_variants, opts.seed),
            Mode::Negate if opts.grammar_negation => grammar_negate_en(s, opts.max_variants, opts.seed),
            Mode::Negate => negate(s, &table, opts.max_variants, opts.seed),
        })
        .collect()
}

/// TSV dump with columns `original_id, mode, inserted_term, slot, text`.
pub fn write_tsv<'a, W, I>(mut out: W, sets: I) -> io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a PerturbationSet>,
{
    writeln!(out, "original_id\tmode\tinserted_term\tslot\ttext")?;
    for set in sets {
        for v in &set.variants {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                set.original_id,
                set.mode,
                v.inserted_term,
                v.slot,
                v.text.replace(['\t', '\n'], " ")
            )?;
        }
    }
    Ok(())
}
