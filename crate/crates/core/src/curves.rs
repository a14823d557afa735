//! Concept Separation Curves: cosine similarities between originals and
//! their variants, per-mode Gaussian KDE on a uniform grid over [-1, 1],
//! unit-mass normalization and the shared-mass overlap score.

use std::f64::consts::PI;

use log::warn;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::Corpus;
use crate::embed::{EmbedError, Embedder, EmbeddingVector};
use crate::perturb::{Mode, PerturbationSet};

pub const DEFAULT_RESOLUTION: usize = 512;
pub const DEFAULT_MAX_SKIP_RATE: f64 = 0.10;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CurveError {
    #[error("degenerate vector")]
    DegenerateVector,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("degenerate sample set")]
    DegenerateSamples,
    #[error("bandwidth must be positive and finite")]
    InvalidBandwidth,
    #[error("cannot normalize an all-zero curve")]
    ZeroMass,
    #[error("grid mismatch")]
    GridMismatch,
    #[error("grid resolution must be at least 2")]
    Resolution,
    #[error("sample value {0} is not finite")]
    NonFiniteSample(f64),
    #[error("unknown original sentence id {0}")]
    UnknownOriginal(usize),
    #[error("{skipped} of {total} comparisons skipped, above the {limit:.0}% limit")]
    TooManySkipped { skipped: usize, total: usize, limit: f64 },
    #[error("embedding failed: {0}")]
    Embed(#[from] EmbedError),
}

/// Cosine similarity clamped to [-1, 1].
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, CurveError> {
    if a.len() != b.len() {
        return Err(CurveError::DimensionMismatch(a.len(), b.len()));
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(CurveError::DegenerateVector);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// `resolution` evenly spaced points from -1 to 1 inclusive.
pub fn uniform_grid(resolution: usize) -> Result<Vec<f64>, CurveError> {
    if resolution < 2 {
        return Err(CurveError::Resolution);
    }
    let step = 2.0 / (resolution - 1) as f64;
    Ok((0..resolution).map(|j| if j == resolution - 1 { 1.0 } else { -1.0 + j as f64 * step }).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilaritySample {
    pub original_id: usize,
    pub mode: Mode,
    pub value: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SampleSet {
    pub samples: Vec<SimilaritySample>,
    /// Comparisons dropped because an embedding or cosine failed.
    pub skipped: usize,
    pub total: usize,
}

impl SampleSet {
    pub fn values(&self, mode: Mode) -> Vec<f64> {
        self.samples.iter().filter(|s| s.mode == mode).map(|s| s.value).collect()
    }

    pub fn skip_rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.skipped as f64 / self.total as f64
        }
    }
}

/// Compare every variant with its original. Failed comparisons are skipped
/// and counted; more than `max_skip_rate` of them is an error.
pub fn similarity_samples(
    corpus: &Corpus,
    sets: &[PerturbationSet],
    embedder: &dyn Embedder,
    max_skip_rate: f64,
) -> Result<SampleSet, CurveError> {
    // one flat batch: originals first, then every variant in set order
    let mut texts: Vec<&str> = Vec::new();
    let mut original_slot = std::collections::HashMap::new();
    for set in sets {
        if let std::collections::hash_map::Entry::Vacant(slot) = original_slot.entry(set.original_id) {
            let s = corpus.get(set.original_id).ok_or(CurveError::UnknownOriginal(set.original_id))?;
            slot.insert(texts.len());
            texts.push(&s.text);
        }
    }
    let first_variant = texts.len();
    for set in sets {
        texts.extend(set.variants.iter().map(|v| v.text.as_str()));
    }
    let vectors: Vec<Result<EmbeddingVector, EmbedError>> = embedder.embed_many(&texts);
    debug_assert_eq!(vectors.len(), texts.len());

    let mut keyed: Vec<(usize, Mode, usize, Option<f64>)> = Vec::new();
    let mut cursor = first_variant;
    for set in sets {
        let original = &vectors[original_slot[&set.original_id]];
        for (k, _) in set.variants.iter().enumerate() {
            let value = match (original, &vectors[cursor]) {
                (Ok(a), Ok(b)) => cosine(a.values(), b.values()).ok(),
                _ => None,
            };
            keyed.push((set.original_id, set.mode, k, value));
            cursor += 1;
        }
    }
    keyed.sort_by_key(|&(id, mode, k, _)| (id, mode, k));

    let total = keyed.len();
    let mut out = SampleSet { samples: Vec::with_capacity(total), skipped: 0, total };
    for (original_id, mode, _, value) in keyed {
        match value {
            Some(value) => out.samples.push(SimilaritySample { original_id, mode, value }),
            None => out.skipped += 1,
        }
    }
    if out.skipped > 0 {
        warn!("{}: skipped {} of {} comparisons", embedder.name(), out.skipped, total);
    }
    if out.skip_rate() > max_skip_rate {
        return Err(CurveError::TooManySkipped { skipped: out.skipped, total, limit: max_skip_rate * 100.0 });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityCurve {
    pub grid: Vec<f64>,
    pub densities: Vec<f64>,
}

impl DensityCurve {
    pub fn mass(&self) -> f64 {
        self.densities.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Trapezoid integral over the grid.
    pub fn trapezoid(&self) -> f64 {
        self.grid.windows(2).zip(self.densities.windows(2)).map(|(x, d)| 0.5 * (x[1] - x[0]) * (d[0] + d[1])).sum()
    }
}

/// Scott's rule: sample standard deviation times `m^(-1/5)`.
pub fn scott_bandwidth(samples: &[f64]) -> Result<f64, CurveError> {
    let m = samples.len();
    if m < 2 || samples.iter().all(|&s| s == samples[0]) {
        return Err(CurveError::DegenerateSamples);
    }
    let mean = samples.iter().sum::<f64>() / m as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    let h = var.sqrt() * (m as f64).powf(-0.2);
    if !(h > 0.0 && h.is_finite()) {
        return Err(CurveError::DegenerateSamples);
    }
    Ok(h)
}

/// Gaussian KDE evaluated on `grid`. Uses Scott's rule unless a bandwidth is given.
pub fn kde(samples: &[f64], grid: &[f64], bandwidth: Option<f64>) -> Result<DensityCurve, CurveError> {
    if let Some(&bad) = samples.iter().find(|s| !s.is_finite()) {
        return Err(CurveError::NonFiniteSample(bad));
    }
    let h = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(_) => return Err(CurveError::InvalidBandwidth),
        None => scott_bandwidth(samples)?,
    };
    if samples.is_empty() {
        return Err(CurveError::DegenerateSamples);
    }
    let scale = 1.0 / (samples.len() as f64 * h * (2.0 * PI).sqrt());
    let inv_h = 1.0 / h;
    let densities = grid
        .par_iter()
        .map(|&x| {
            let s: f64 = samples
                .iter()
                .map(|&s| {
                    let u = (x - s) * inv_h;
                    (-0.5 * u * u).exp()
                })
                .sum();
            s * scale
        })
        .collect();
    Ok(DensityCurve { grid: grid.to_vec(), densities })
}

/// Divide each density by the grid sum so the curve carries unit mass.
pub fn normalize(curve: &DensityCurve) -> Result<DensityCurve, CurveError> {
    let total = curve.mass();
    if !(total > 0.0 && total.is_finite()) {
        return Err(CurveError::ZeroMass);
    }
    Ok(DensityCurve { grid: curve.grid.clone(), densities: curve.densities.iter().map(|d| d / total).collect() })
}

/// Sum of the pointwise minimum of two normalized curves on the same grid.
pub fn overlap(fuzz: &DensityCurve, negation: &DensityCurve) -> Result<f64, CurveError> {
    if fuzz.grid != negation.grid || fuzz.densities.len() != negation.densities.len() {
        return Err(CurveError::GridMismatch);
    }
    let shared: f64 = fuzz.densities.iter().zip(&negation.densities).map(|(a, b)| a.min(*b)).sum();
    Ok(shared.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SampleCounts {
    pub fuzz: usize,
    pub negation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CscResult {
    pub fuzz_curve: DensityCurve,
    pub negation_curve: DensityCurve,
    pub overlap: f64,
    pub sample_counts: SampleCounts,
}

impl CscResult {
    /// Assemble from already-normalized curves, recomputing the overlap.
    pub fn from_curves(
        fuzz_curve: DensityCurve,
        negation_curve: DensityCurve,
        sample_counts: SampleCounts,
    ) -> Result<Self, CurveError> {
        if fuzz_curve.is_empty() {
            return Err(CurveError::Resolution);
        }
        let overlap = overlap(&fuzz_curve, &negation_curve)?;
        Ok(Self { fuzz_curve, negation_curve, overlap, sample_counts })
    }

    pub fn grid(&self) -> &[f64] {
        &self.fuzz_curve.grid
    }

    pub fn resolution(&self) -> usize {
        self.fuzz_curve.len()
    }

    pub fn validate(&self) -> Result<(), CurveError> {
        if self.resolution() < 2 {
            return Err(CurveError::Resolution);
        }
        if self.fuzz_curve.grid != self.negation_curve.grid
            || self.fuzz_curve.densities.len() != self.resolution()
            || self.negation_curve.densities.len() != self.resolution()
        {
            return Err(CurveError::GridMismatch);
        }
        Ok(())
    }
}

/// KDE both sample sets on a shared grid, normalize each, and score their overlap.
pub fn build_csc(
    fuzz_samples: &[f64],
    negation_samples: &[f64],
    resolution: usize,
    bandwidth: Option<f64>,
) -> Result<CscResult, CurveError> {
    let grid = uniform_grid(resolution)?;
    let fuzz_curve = normalize(&kde(fuzz_samples, &grid, bandwidth)?)?;
    let negation_curve = normalize(&kde(negation_samples, &grid, bandwidth)?)?;
    CscResult::from_curves(
        fuzz_curve,
        negation_curve,
        SampleCounts { fuzz: fuzz_samples.len(), negation: negation_samples.len() },
    )
}
