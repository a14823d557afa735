//! Concept Separation Curves.
//!
//! Perturb a sentence corpus twice (surface-level article insertion and
//! meaning-changing negation), embed originals and variants, and compare the
//! distributions of original-to-variant cosine similarities. An embedder that
//! separates concepts keeps fuzzed variants close to the original and pushes
//! negated ones away, so the two normalized density curves overlap little.
//!
//! Modules follow the pipeline: [`corpus`] → [`perturb`] → [`embed`] →
//! [`curves`] → [`report`], orchestrated by [`cli`].

pub mod cli;
pub mod corpus;
pub mod curves;
pub mod embed;
pub mod perturb;
pub mod report;

pub use corpus::{Corpus, Language, Sentence};
pub use curves::{build_csc, CscResult, DensityCurve};
pub use embed::{Embedder, EmbedderSpec, EmbeddingVector};
pub use perturb::{Mode, PerturbationSet, PerturbedSentence, TermTable};
