//! Command-line front end: `perturb`, `stats`, `evaluate` and `report`.

mod config;
mod pipeline;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use config::{RunConfig, MIN_RESOLUTION};
pub use pipeline::{
    curve_stem, evaluate_embedder, run_pipeline, sanitize, Combination, CorpusSummary, Perturbations, RunManifest,
    RunOutcome, Status, VariantSummary, CURVE_PREFIX, MANIFEST_FILE, MATRIX_CSV_FILE, MATRIX_TEXT_FILE,
    PERTURBATIONS_FILE,
};

use crate::corpus::{filter_by_length, load_corpus, token_bin_stats, CorpusError, Language};
use crate::curves::CurveError;
use crate::embed::EmbedError;
use crate::perturb::{perturb_corpus, write_tsv, Mode, PerturbError, PerturbOptions, DEFAULT_MAX_VARIANTS};
use crate::report::{read_csv, render_curves, OverlapMatrix, ReportError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Perturb(#[from] PerturbError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("io: {0}")]
    Io(String),
}

#[derive(Debug, Parser)]
#[command(name = "csc", version, about = "Concept Separation Curves for sentence embedders")]
pub struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the fuzz or negation variants of a corpus as TSV.
    Perturb(PerturbArgs),
    /// Print the token-count histogram of a corpus.
    Stats(StatsArgs),
    /// Run the full pipeline and write curves, CSVs, matrix and manifest.
    Evaluate(EvaluateArgs),
    /// Re-render figures and the overlap matrix from stored curve CSVs.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, value_parser = parse_language)]
    pub language: Language,
    #[arg(long = "filter-max-tokens")]
    pub filter_max_tokens: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PerturbArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Mode,
    #[arg(long, default_value_t = DEFAULT_MAX_VARIANTS)]
    pub x: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "grammar-negation")]
    pub grammar_negation: bool,
    /// Output file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long = "bin-width", default_value_t = 10)]
    pub bin_width: usize,
}

#[derive(Debug, Args, Default)]
pub struct EvaluateArgs {
    /// TOML config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, value_parser = parse_language)]
    pub language: Option<Language>,
    #[arg(long)]
    pub dataset: Option<String>,
    /// `tfidf`, `word-avg:<vectors file>` or `remote:<model>`; repeatable.
    #[arg(long = "embedder")]
    pub embedders: Vec<String>,
    #[arg(long)]
    pub x: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub resolution: Option<usize>,
    #[arg(long = "filter-max-tokens")]
    pub filter_max_tokens: Option<usize>,
    #[arg(long = "grammar-negation")]
    pub grammar_negation: bool,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long = "batch-size")]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[arg(long = "max-skip-rate")]
    pub max_skip_rate: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory holding `csc__<dataset>__<embedder>.csv` files.
    #[arg(long)]
    pub dir: PathBuf,
}

fn parse_language(s: &str) -> Result<Language, String> {
    s.parse().map_err(|e: CorpusError| e.to_string())
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: PerturbError| e.to_string())
}

impl EvaluateArgs {
    pub fn into_config(self, jobs: Option<usize>) -> Result<RunConfig, PipelineError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => {
                let corpus = self
                    .corpus
                    .clone()
                    .ok_or_else(|| PipelineError::Config("--corpus or --config is required".into()))?;
                let language =
                    self.language.ok_or_else(|| PipelineError::Config("--language or --config is required".into()))?;
                RunConfig::new(corpus, language)
            }
        };
        if let Some(v) = self.corpus {
            cfg.corpus = v;
        }
        if let Some(v) = self.language {
            cfg.language = v;
        }
        if self.dataset.is_some() {
            cfg.dataset = self.dataset;
        }
        if !self.embedders.is_empty() {
            cfg.embedders = self.embedders;
        }
        if let Some(v) = self.x {
            cfg.x = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.resolution {
            cfg.resolution = v;
        }
        if self.filter_max_tokens.is_some() {
            cfg.filter_max_tokens = self.filter_max_tokens;
        }
        if self.grammar_negation {
            cfg.grammar_negation = true;
        }
        if self.endpoint.is_some() {
            cfg.endpoint = self.endpoint;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if self.bandwidth.is_some() {
            cfg.bandwidth = self.bandwidth;
        }
        if let Some(v) = self.max_skip_rate {
            cfg.max_skip_rate = v;
        }
        if let Some(v) = self.out {
            cfg.out = v;
        }
        if jobs.is_some() {
            cfg.jobs = jobs;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Re-render every stored curve CSV in `dir` and rebuild the overlap matrix.
pub fn report_dir(dir: &Path) -> Result<OverlapMatrix, PipelineError> {
    let entries = std::fs::read_dir(dir).map_err(|e| PipelineError::Io(format!("{}: {e}", dir.display())))?;
    let mut stems: Vec<(PathBuf, String)> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .filter_map(|p| {
            let stem = p.file_stem()?.to_string_lossy().into_owned();
            stem.starts_with(CURVE_PREFIX).then_some((p, stem))
        })
        .collect();
    if stems.is_empty() {
        return Err(ReportError::NothingToReport.into());
    }
    stems.sort();
    let mut matrix = OverlapMatrix::new();
    for (path, stem) in stems {
        let rest = &stem[CURVE_PREFIX.len()..];
        let (dataset, embedder) = rest.split_once("__").unwrap_or((rest, "unknown"));
        let result = read_csv(&path)?;
        render_curves(&result, &format!("{dataset} × {embedder}"), path.with_extension("svg"))?;
        matrix.insert(embedder, dataset, Some(result.overlap));
    }
    Ok(matrix)
}

fn load_filtered(args: &CorpusArgs) -> Result<crate::corpus::Corpus, PipelineError> {
    let corpus = load_corpus(&args.corpus, args.language)?;
    Ok(match args.filter_max_tokens {
        Some(k) => filter_by_length(&corpus, k),
        None => corpus,
    })
}

/// Execute a parsed command line and return the process exit code.
pub fn run(cli: Cli) -> Result<i32, PipelineError> {
    match cli.command {
        Command::Perturb(args) => {
            let corpus = load_filtered(&args.corpus)?;
            let opts =
                PerturbOptions { max_variants: args.x, seed: args.seed, grammar_negation: args.grammar_negation };
            if opts.max_variants == 0 {
                return Err(PerturbError::ZeroCap.into());
            }
            let sets = perturb_corpus(&corpus, args.mode, opts)?;
            let io = |e: io::Error| PipelineError::Io(e.to_string());
            match &args.out {
                Some(p) => {
                    let f = File::create(p).map_err(io)?;
                    write_tsv(BufWriter::new(f), &sets).map_err(io)?;
                }
                None => {
                    let stdout = io::stdout();
                    let mut lock = stdout.lock();
                    write_tsv(&mut lock, &sets).map_err(io)?;
                    lock.flush().map_err(io)?;
                }
            }
            Ok(0)
        }
        Command::Stats(args) => {
            let corpus = load_filtered(&args.corpus)?;
            let table = token_bin_stats(&corpus, args.bin_width)?;
            let name = args.corpus.corpus.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            print!("{}", table.render(&name));
            Ok(0)
        }
        Command::Evaluate(args) => {
            let cfg = args.into_config(cli.jobs)?;
            let outcome = run_pipeline(&cfg)?;
            print!("{}", outcome.matrix.render_text());
            println!("manifest: {}", cfg.out.join(MANIFEST_FILE).display());
            Ok(if outcome.manifest.all_ok() { 0 } else { 1 })
        }
        Command::Report(args) => {
            let matrix = report_dir(&args.dir)?;
            print!("{}", matrix.render_text());
            Ok(0)
        }
    }
}
