//! Python bindings for `csc-core`.
//!
//! Build the importable module with `--features extension-module` (or maturin).

use std::fmt::Display;
use std::path::PathBuf;

use csc_core::cli::{run_pipeline, RunConfig};
use csc_core::corpus::{self, Language};
use csc_core::curves::{self, DensityCurve};
use csc_core::embed::{self, Embedder};
use csc_core::perturb::{self, Mode, PerturbOptions, TermTable};
use csc_core::report;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_language(code: &str) -> PyResult<Language> {
    code.parse().map_err(value_err)
}

/// Whitespace tokenization, as used everywhere in the pipeline.
#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    corpus::tokenize(text)
}

/// A loaded corpus of sentences.
#[pyclass(name = "Corpus", module = "csc", frozen)]
struct PyCorpus {
    inner: corpus::Corpus,
}

#[pymethods]
impl PyCorpus {
    #[new]
    #[pyo3(signature = (lines, language = "EN"))]
    fn new(lines: Vec<String>, language: &str) -> PyResult<Self> {
        Ok(Self { inner: corpus::Corpus::from_lines(lines, parse_language(language)?) })
    }

    /// Read one sentence per line from `path`.
    #[staticmethod]
    #[pyo3(signature = (path, language = "EN"))]
    fn load(path: PathBuf, language: &str) -> PyResult<Self> {
        let inner = corpus::load_corpus(&path, parse_language(language)?).map_err(|e| match e {
            corpus::CorpusError::Io { .. } => PyIOError::new_err(e.to_string()),
            other => value_err(other),
        })?;
        Ok(Self { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn language(&self) -> &'static str {
        self.inner.language.code()
    }

    #[getter]
    fn sentences(&self) -> Vec<String> {
        self.inner.sentences.iter().map(|s| s.text.clone()).collect()
    }

    /// Keep sentences with strictly fewer than `max_tokens` tokens.
    fn filter(&self, max_tokens: usize) -> Self {
        Self { inner: corpus::filter_by_length(&self.inner, max_tokens) }
    }

    /// Token-count histogram as `(label, count, percentage)` rows.
    #[pyo3(signature = (bin_width = 10))]
    fn stats(&self, bin_width: usize) -> PyResult<Vec<(String, usize, f64)>> {
        let table = corpus::token_bin_stats(&self.inner, bin_width).map_err(value_err)?;
        Ok(table.bins.iter().map(|b| (b.label(), b.count, b.percentage)).collect())
    }

    fn __repr__(&self) -> String {
        format!("Corpus(n={}, language={})", self.inner.n(), self.inner.language)
    }
}

type Variant = (String, String, usize);

fn variants(text: &str, mode: Mode, language: &str, x: usize, seed: u64, sentence_id: usize) -> PyResult<Vec<Variant>> {
    let lang = parse_language(language)?;
    let sentence = corpus::Sentence::new(sentence_id, text, lang);
    let table = TermTable::for_language(lang);
    let set = match mode {
        Mode::Fuzz => perturb::fuzz(&sentence, &table, x, seed),
        Mode::Negate => perturb::negate(&sentence, &table, x, seed),
    }
    .map_err(value_err)?;
    Ok(set.variants.into_iter().map(|v| (v.text, v.inserted_term, v.slot)).collect())
}

/// Article-insertion variants of one sentence as `(text, term, slot)`.
#[pyfunction]
#[pyo3(signature = (text, language = "EN", x = perturb::DEFAULT_MAX_VARIANTS, seed = 0, sentence_id = 0))]
fn fuzz(text: &str, language: &str, x: usize, seed: u64, sentence_id: usize) -> PyResult<Vec<Variant>> {
    variants(text, Mode::Fuzz, language, x, seed, sentence_id)
}

/// Negation-particle variants of one sentence as `(text, term, slot)`.
#[pyfunction]
#[pyo3(signature = (text, language = "EN", x = perturb::DEFAULT_MAX_VARIANTS, seed = 0, sentence_id = 0))]
fn negate(text: &str, language: &str, x: usize, seed: u64, sentence_id: usize) -> PyResult<Vec<Variant>> {
    variants(text, Mode::Negate, language, x, seed, sentence_id)
}

/// Variants for a whole corpus, as `(original_id, text, term, slot)` rows.
#[pyfunction]
#[pyo3(signature = (corpus, mode, x = perturb::DEFAULT_MAX_VARIANTS, seed = 0, grammar_negation = false))]
fn perturb_corpus(
    py: Python<'_>,
    corpus: &PyCorpus,
    mode: &str,
    x: usize,
    seed: u64,
    grammar_negation: bool,
) -> PyResult<Vec<(usize, String, String, usize)>> {
    let mode: Mode = mode.parse().map_err(value_err)?;
    let opts = PerturbOptions { max_variants: x, seed, grammar_negation };
    let sets = py.detach(|| perturb::perturb_corpus(&corpus.inner, mode, opts)).map_err(value_err)?;
    Ok(sets
        .into_iter()
        .flat_map(|s| {
            let id = s.original_id;
            s.variants.into_iter().map(move |v| (id, v.text, v.inserted_term, v.slot))
        })
        .collect())
}

#[pyfunction]
fn cosine(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    curves::cosine(&a, &b).map_err(value_err)
}

/// Gaussian KDE of `samples` on the uniform grid over [-1, 1].
/// Returns `(grid, densities)`; Scott's rule when `bandwidth` is None.
#[pyfunction]
#[pyo3(signature = (samples, resolution = curves::DEFAULT_RESOLUTION, bandwidth = None, normalized = true))]
fn kde(
    py: Python<'_>,
    samples: Vec<f64>,
    resolution: usize,
    bandwidth: Option<f64>,
    normalized: bool,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let curve = py
        .detach(|| {
            let grid = curves::uniform_grid(resolution)?;
            let c = curves::kde(&samples, &grid, bandwidth)?;
            if normalized {
                curves::normalize(&c)
            } else {
                Ok(c)
            }
        })
        .map_err(value_err)?;
    Ok((curve.grid, curve.densities))
}

/// Rescale densities to sum to one.
#[pyfunction]
fn normalize(densities: Vec<f64>) -> PyResult<Vec<f64>> {
    let grid = curves::uniform_grid(densities.len()).map_err(value_err)?;
    let c = curves::normalize(&DensityCurve { grid, densities }).map_err(value_err)?;
    Ok(c.densities)
}

/// Sum of pointwise minima of two normalized curves on the same grid.
#[pyfunction]
fn overlap(fuzz: Vec<f64>, negation: Vec<f64>) -> PyResult<f64> {
    let grid = curves::uniform_grid(fuzz.len()).map_err(value_err)?;
    let f = DensityCurve { grid: grid.clone(), densities: fuzz };
    let n = DensityCurve { grid, densities: negation };
    curves::overlap(&f, &n).map_err(value_err)
}

/// A pair of normalized density curves and their overlap.
#[pyclass(name = "CscResult", module = "csc", frozen)]
struct PyCscResult {
    inner: curves::CscResult,
}

#[pymethods]
impl PyCscResult {
    #[getter]
    fn overlap(&self) -> f64 {
        self.inner.overlap
    }

    #[getter]
    fn grid(&self) -> Vec<f64> {
        self.inner.grid().to_vec()
    }

    #[getter]
    fn fuzz(&self) -> Vec<f64> {
        self.inner.fuzz_curve.densities.clone()
    }

    #[getter]
    fn negation(&self) -> Vec<f64> {
        self.inner.negation_curve.densities.clone()
    }

    /// `(fuzz, negation)` sample counts.
    #[getter]
    fn sample_counts(&self) -> (usize, usize) {
        (self.inner.sample_counts.fuzz, self.inner.sample_counts.negation)
    }

    #[pyo3(signature = (title = "CSC"))]
    fn svg(&self, title: &str) -> PyResult<String> {
        report::render_svg(&self.inner, title).map_err(value_err)
    }

    fn csv(&self) -> PyResult<String> {
        report::csv_string(&self.inner).map_err(value_err)
    }

    fn save_csv(&self, path: PathBuf) -> PyResult<()> {
        report::export_csv(&self.inner, path).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn load_csv(path: PathBuf) -> PyResult<Self> {
        let inner = report::read_csv(path).map_err(value_err)?;
        Ok(Self { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "CscResult(overlap={:.4}, resolution={}, n_fuzz={}, n_negation={})",
            self.inner.overlap,
            self.inner.resolution(),
            self.inner.sample_counts.fuzz,
            self.inner.sample_counts.negation
        )
    }
}

/// Curves and overlap from two sets of cosine similarities.
#[pyfunction]
#[pyo3(signature = (fuzz_samples, negation_samples, resolution = curves::DEFAULT_RESOLUTION, bandwidth = None))]
fn build_csc(
    py: Python<'_>,
    fuzz_samples: Vec<f64>,
    negation_samples: Vec<f64>,
    resolution: usize,
    bandwidth: Option<f64>,
) -> PyResult<PyCscResult> {
    let inner =
        py.detach(|| curves::build_csc(&fuzz_samples, &negation_samples, resolution, bandwidth)).map_err(value_err)?;
    Ok(PyCscResult { inner })
}

/// TF-IDF vectorizer with smoothed idf and L2-normalized rows.
#[pyclass(name = "TfidfModel", module = "csc", frozen)]
struct PyTfidfModel {
    inner: embed::TfidfModel,
}

#[pymethods]
impl PyTfidfModel {
    #[new]
    fn new(texts: Vec<String>) -> PyResult<Self> {
        Ok(Self { inner: embed::TfidfModel::fit(&texts).map_err(value_err)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn vocabulary(&self) -> Vec<String> {
        self.inner.terms().to_vec()
    }

    fn idf(&self, token: &str) -> Option<f64> {
        self.inner.idf(token)
    }

    fn transform(&self, text: &str) -> Vec<f64> {
        self.inner.transform(text).into_inner()
    }

    fn transform_many(&self, py: Python<'_>, texts: Vec<String>) -> PyResult<Vec<Vec<f64>>> {
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        py.detach(|| self.inner.embed_many(&refs))
            .into_iter()
            .map(|r| r.map(|v| v.into_inner()).map_err(value_err))
            .collect()
    }
}

/// Run the full pipeline from a TOML config file and return the manifest as JSON.
#[pyfunction]
#[pyo3(signature = (config_path, out = None))]
fn evaluate(py: Python<'_>, config_path: PathBuf, out: Option<PathBuf>) -> PyResult<String> {
    let mut cfg = RunConfig::load(&config_path).map_err(value_err)?;
    if let Some(out) = out {
        cfg.out = out;
    }
    let outcome = py.detach(|| run_pipeline(&cfg)).map_err(value_err)?;
    serde_json::to_string_pretty(&outcome.manifest).map_err(value_err)
}

#[pymodule]
fn csc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyCorpus>()?;
    m.add_class::<PyCscResult>()?;
    m.add_class::<PyTfidfModel>()?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(fuzz, m)?)?;
    m.add_function(wrap_pyfunction!(negate, m)?)?;
    m.add_function(wrap_pyfunction!(perturb_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(cosine, m)?)?;
    m.add_function(wrap_pyfunction!(kde, m)?)?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(overlap, m)?)?;
    m.add_function(wrap_pyfunction!(build_csc, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
