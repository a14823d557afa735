use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use log::{error, info};
use serde::Serialize;

use crate::corpus::{filter_by_length, load_corpus, Corpus};
use crate::curves::{build_csc, similarity_samples, CscResult, CurveError, SampleSet};
use crate::embed::{Embedder, EmbedderSpec};
use crate::perturb::{perturb_corpus, write_tsv, Mode, PerturbOptions, PerturbationSet};
use crate::report::{export_csv, render_curves, OverlapMatrix};

use super::{PipelineError, RunConfig};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PERTURBATIONS_FILE: &str = "perturbations.tsv";
pub const MATRIX_CSV_FILE: &str = "overlap_matrix.csv";
pub const MATRIX_TEXT_FILE: &str = "overlap_matrix.txt";
pub const CURVE_PREFIX: &str = "csc__";

#[derive(Debug, Clone, Serialize)]
pub struct CorpusSummary {
    pub path: String,
    pub sentences: usize,
    pub filtered_out: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct VariantSummary {
    pub fuzz: usize,
    pub negate: usize,
    pub total: usize,
    /// `2 * x * n`
    pub bound: usize,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct Combination {
    pub embedder: String,
    pub dataset: String,
    pub status: Status,
    pub error: Option<String>,
    pub overlap: Option<f64>,
    pub fuzz_samples: usize,
    pub negation_samples: usize,
    pub skipped: usize,
    pub svg: Option<String>,
    pub csv: Option<String>,
}

/// Written as `manifest.json` at the end of every run.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub started_at_unix: u64,
    pub wall_time_secs: f64,
    pub config: RunConfig,
    pub dataset: String,
    pub corpus: CorpusSummary,
    pub variants: VariantSummary,
    pub combinations: Vec<Combination>,
    pub warnings: Vec<String>,
}

impl RunManifest {
    pub fn all_ok(&self) -> bool {
        self.combinations.iter().all(|c| matches!(c.status, Status::Ok))
    }
}

/// Everything a run produced, in memory.
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub results: Vec<(String, Result<CscResult, String>)>,
    pub matrix: OverlapMatrix,
}

/// File-name-safe rendering of a dataset or embedder name.
pub fn sanitize(name: &str) -> String {
    let mut s: String =
        name.chars().map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '.') { c } else { '_' }).collect();
    while s.contains("__") {
        s = s.replace("__", "_");
    }
    s
}

pub fn curve_stem(dataset: &str, embedder: &str) -> String {
    format!("{CURVE_PREFIX}{}__{}", sanitize(dataset), sanitize(embedder))
}

/// Fuzz and negation sets for every sentence.
pub struct Perturbations {
    pub fuzz: Vec<PerturbationSet>,
    pub negate: Vec<PerturbationSet>,
}

impl Perturbations {
    pub fn generate(corpus: &Corpus, opts: PerturbOptions) -> Result<Self, PipelineError> {
        Ok(Self {
            fuzz: perturb_corpus(corpus, Mode::Fuzz, opts)?,
            negate: perturb_corpus(corpus, Mode::Negate, opts)?,
        })
    }

    pub fn count(&self, mode: Mode) -> usize {
        let sets = match mode {
            Mode::Fuzz => &self.fuzz,
            Mode::Negate => &self.negate,
        };
        sets.iter().map(|s| s.variants.len()).sum()
    }

    pub fn all_sets(&self) -> impl Iterator<Item = &PerturbationSet> {
        self.fuzz.iter().chain(&self.negate)
    }

    /// Originals followed by every variant; the TF-IDF fitting set.
    pub fn fit_texts<'a>(&'a self, corpus: &'a Corpus) -> Vec<&'a str> {
        corpus
            .sentences
            .iter()
            .map(|s| s.text.as_str())
            .chain(self.all_sets().flat_map(|s| s.variants.iter().map(|v| v.text.as_str())))
            .collect()
    }
}

/// Similarities, KDE and overlap for one embedder over prepared perturbations.
pub fn evaluate_embedder(
    corpus: &Corpus,
    perturbations: &Perturbations,
    embedder: &dyn Embedder,
    resolution: usize,
    bandwidth: Option<f64>,
    max_skip_rate: f64,
) -> Result<(CscResult, SampleSet), CurveError> {
    let sets: Vec<PerturbationSet> = perturbations.all_sets().cloned().collect();
    let samples = similarity_samples(corpus, &sets, embedder, max_skip_rate)?;
    let result = build_csc(&samples.values(Mode::Fuzz), &samples.values(Mode::Negate), resolution, bandwidth)?;
    Ok((result, samples))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |e| PipelineError::Io(format!("{}: {e}", path.display()))
}

fn relative(out: &Path, p: &Path) -> String {
    p.strip_prefix(out).unwrap_or(p).display().to_string()
}

/// Run the whole pipeline for one corpus and every configured embedder,
/// writing figures, CSVs, the overlap matrix and the manifest into `config.out`.
/// A failing embedder is recorded in the manifest and does not stop the others.
pub fn run_pipeline(config: &RunConfig) -> Result<RunOutcome, PipelineError> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs.unwrap_or(0))
        .build()
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    pool.install(|| run_inner(config))
}

fn run_inner(config: &RunConfig) -> Result<RunOutcome, PipelineError> {
    let started = Instant::now();
    let started_at_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let out = &config.out;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let dataset = config.dataset_name();
    let specs = config.embedder_specs()?;

    let loaded = load_corpus(&config.corpus, config.language)?;
    let corpus = match config.filter_max_tokens {
        Some(k) => filter_by_length(&loaded, k),
        None => loaded.clone(),
    };
    let mut warnings = Vec::new();
    if corpus.is_empty() {
        return Err(PipelineError::Config(format!(
            "{}: no sentences left after loading/filtering",
            config.corpus.display()
        )));
    }
    info!("{dataset}: {} sentences ({} filtered out)", corpus.n(), loaded.n() - corpus.n());

    let opts = PerturbOptions { max_variants: config.x, seed: config.seed, grammar_negation: config.grammar_negation };
    let perturbations = Perturbations::generate(&corpus, opts)?;
    let tsv_path = out.join(PERTURBATIONS_FILE);
    {
        let file = File::create(&tsv_path).map_err(io_err(&tsv_path))?;
        write_tsv(BufWriter::new(file), perturbations.all_sets()).map_err(io_err(&tsv_path))?;
    }
    let variants = VariantSummary {
        fuzz: perturbations.count(Mode::Fuzz),
        negate: perturbations.count(Mode::Negate),
        total: perturbations.count(Mode::Fuzz) + perturbations.count(Mode::Negate),
        bound: 2 * config.x * corpus.n(),
    };

    let fit_texts = perturbations.fit_texts(&corpus);
    let mut combinations = Vec::new();
    let mut results = Vec::new();
    let mut matrix = OverlapMatrix::new();

    for spec in &specs {
        let name = spec.name();
        let attempt = run_combination(config, &corpus, &perturbations, spec, &fit_texts, &dataset);
        match attempt {
            Ok((result, samples, svg, csv)) => {
                info!("{dataset} × {name}: overlap {:.4}", result.overlap);
                if samples.skipped > 0 {
                    warnings.push(format!("{name}: skipped {} of {} comparisons", samples.skipped, samples.total));
                }
                matrix.insert(&name, &dataset, Some(result.overlap));
                combinations.push(Combination {
                    embedder: name.clone(),
                    dataset: dataset.clone(),
                    status: Status::Ok,
                    error: None,
                    overlap: Some(result.overlap),
                    fuzz_samples: result.sample_counts.fuzz,
                    negation_samples: result.sample_counts.negation,
                    skipped: samples.skipped,
                    svg: Some(relative(out, &svg)),
                    csv: Some(relative(out, &csv)),
                });
                results.push((name, Ok(result)));
            }
            Err(e) => {
                let msg = e.to_string();
                error!("{dataset} × {name}: {msg}");
                matrix.insert(&name, &dataset, None);
                combinations.push(Combination {
                    embedder: name.clone(),
                    dataset: dataset.clone(),
                    status: Status::Failed,
                    error: Some(msg.clone()),
                    overlap: None,
                    fuzz_samples: 0,
                    negation_samples: 0,
                    skipped: 0,
                    svg: None,
                    csv: None,
                });
                results.push((name, Err(msg)));
            }
        }
    }

    for (file, contents) in [(MATRIX_CSV_FILE, matrix.to_csv()), (MATRIX_TEXT_FILE, matrix.render_text())] {
        let p = out.join(file);
        fs::write(&p, contents).map_err(io_err(&p))?;
    }

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        started_at_unix,
        wall_time_secs: started.elapsed().as_secs_f64(),
        config: config.clone(),
        dataset,
        corpus: CorpusSummary {
            path: config.corpus.display().to_string(),
            sentences: corpus.n(),
            filtered_out: loaded.n() - corpus.n(),
        },
        variants,
        combinations,
        warnings,
    };
    let manifest_path = out.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| PipelineError::Io(e.to_string()))?;
    fs::write(&manifest_path, json + "\n").map_err(io_err(&manifest_path))?;

    Ok(RunOutcome { manifest, results, matrix })
}

type CombinationOutput = (CscResult, SampleSet, PathBuf, PathBuf);

fn run_combination(
    config: &RunConfig,
    corpus: &Corpus,
    perturbations: &Perturbations,
    spec: &EmbedderSpec,
    fit_texts: &[&str],
    dataset: &str,
) -> Result<CombinationOutput, PipelineError> {
    let embedder = spec.build(fit_texts)?;
    let (result, samples) = evaluate_embedder(
        corpus,
        perturbations,
        embedder.as_ref(),
        config.resolution,
        config.bandwidth,
        config.max_skip_rate,
    )?;
    let stem = curve_stem(dataset, &spec.name());
    let svg = config.out.join(format!("{stem}.svg"));
    let csv = config.out.join(format!("{stem}.csv"));
    render_curves(&result, &format!("{dataset} × {}", spec.name()), &svg)?;
    export_csv(&result, &csv)?;
    Ok((result, samples, svg, csv))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sanitize_names() {
        assert_eq!(sanitize("PC NL Filt."), "PC_NL_Filt.");
        assert_eq!(sanitize("remote-a__b"), "remote-a_b");
        assert_eq!(curve_stem("demo", "word avg"), "csc__demo__word_avg");
    }
}
