//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits non-zero if any failed.

mod common;

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::PI;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use csc_core::cli::{evaluate_embedder, run_pipeline, Perturbations, RunConfig};
use csc_core::corpus::{load_corpus, token_bin_stats, Corpus, Language};
use csc_core::curves::{build_csc, kde, normalize, overlap, scott_bandwidth, uniform_grid, CscResult, DensityCurve};
use csc_core::embed::{EmbedError, Embedder, EmbeddingVector, RemoteEmbedder, RetryPolicy, TfidfModel};
use csc_core::perturb::{perturb_corpus, Mode, PerturbOptions, TermTable};

use common::{demo_corpus_path, fixture_vector, synthetic_lines, Behavior, MockServer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ContinuousCDF, Normal as StatNormal};

// Tolerances and thresholds.
const MASS_TOL: f64 = 1e-9;
const SELF_OVERLAP_TOL: f64 = 1e-9;
const OVERLAP_TRIALS: usize = 1000;
const OVERLAP_RUNTIME: Duration = Duration::from_secs(1);
const GAUSS_SAMPLES: usize = 10_000;
const GAUSS_RESOLUTION: usize = 512;
const GAUSS_TOL: f64 = 0.02;
const GAUSS_RUNTIME: Duration = Duration::from_secs(5);
const VOLUME_SAMPLES: usize = 10_000;
const VOLUME_MIN_OVERLAP: f64 = 0.97;
const SYNTHETIC_SENTENCES: usize = 200;
const KDE_POINTS: usize = 25;
const KDE_SAMPLES: usize = 100;
const KDE_TOL: f64 = 1e-9;
const SUITE_RUNTIME: Duration = Duration::from_secs(120);

/// Every normalized curve produced by the suite, checked by criterion 4.
static CURVES: Mutex<Vec<(String, f64)>> = Mutex::new(Vec::new());

fn record(label: &str, r: &CscResult) {
    let mut c = CURVES.lock().unwrap();
    c.push((format!("{label}/fuzz"), r.fuzz_curve.mass()));
    c.push((format!("{label}/negation"), r.negation_curve.mass()));
}

fn record_curve(label: &str, c: &DensityCurve) {
    CURVES.lock().unwrap().push((label.to_string(), c.mass()));
}

fn normal_draws(mean: f64, sd: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = Normal::new(mean, sd).unwrap();
    (0..n).map(|_| d.sample(&mut rng)).collect()
}

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn ac1_overlap_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let grid = uniform_grid(512).map_err(|e| e.to_string())?;
    let random_curve = |rng: &mut ChaCha8Rng| {
        let raw = DensityCurve {
            grid: grid.clone(),
            densities: (0..grid.len())
                .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random::<f64>() * 5.0 })
                .collect(),
        };
        normalize(&raw).unwrap()
    };
    let pairs: Vec<(DensityCurve, DensityCurve)> =
        (0..OVERLAP_TRIALS).map(|_| (random_curve(&mut rng), random_curve(&mut rng))).collect();
    let start = Instant::now();
    let mut worst_self = 0.0f64;
    for (f, g) in &pairs {
        let fg = overlap(f, g).unwrap();
        let gf = overlap(g, f).unwrap();
        ensure!((0.0..=1.0).contains(&fg), "overlap {fg} outside [0, 1]");
        ensure!(fg == gf, "asymmetric overlap {fg} vs {gf}");
        worst_self = worst_self.max((overlap(f, f).unwrap() - 1.0).abs());
    }
    let elapsed = start.elapsed();
    pairs.iter().for_each(|(f, _)| record_curve("ac1", f));
    ensure!(worst_self <= SELF_OVERLAP_TOL, "self-overlap off by {worst_self}");

    let mut left = vec![0.0; 512];
    let mut right = vec![0.0; 512];
    left[..256].iter_mut().for_each(|d| *d = 1.0);
    right[256..].iter_mut().for_each(|d| *d = 2.0);
    let l = normalize(&DensityCurve { grid: grid.clone(), densities: left }).unwrap();
    let r = normalize(&DensityCurve { grid: grid.clone(), densities: right }).unwrap();
    let disjoint = overlap(&l, &r).unwrap();
    ensure!(disjoint == 0.0, "disjoint supports gave {disjoint}");
    ensure!(elapsed < OVERLAP_RUNTIME, "took {elapsed:?}");
    Ok(format!("{OVERLAP_TRIALS} trials, max |self-1| = {worst_self:.1e}, {elapsed:.2?}"))
}

fn ac2_gaussian_fixture() -> Outcome {
    let start = Instant::now();
    let oracle = 2.0 * StatNormal::new(0.0, 1.0).unwrap().cdf(-2.0);
    let f = normal_draws(0.8, 0.1, GAUSS_SAMPLES, 2001);
    let n = normal_draws(0.4, 0.1, GAUSS_SAMPLES, 2002);
    let r = build_csc(&f, &n, GAUSS_RESOLUTION, None).map_err(|e| e.to_string())?;
    record("ac2", &r);
    let elapsed = start.elapsed();
    ensure!((r.overlap - oracle).abs() <= GAUSS_TOL, "overlap {:.4} vs analytic {oracle:.4}", r.overlap);
    ensure!(elapsed < GAUSS_RUNTIME, "took {elapsed:?}");
    Ok(format!("overlap {:.4}, analytic 2Φ(-2) = {oracle:.4}, {elapsed:.2?}", r.overlap))
}

fn ac3_volume_mismatch() -> Outcome {
    let f = normal_draws(0.6, 0.15, 2 * VOLUME_SAMPLES, 3001);
    let n = normal_draws(0.6, 0.15, VOLUME_SAMPLES, 3002);
    let r = build_csc(&f, &n, 512, None).map_err(|e| e.to_string())?;
    record("ac3", &r);
    ensure!(r.overlap >= VOLUME_MIN_OVERLAP, "overlap {:.4}", r.overlap);
    Ok(format!("fuzz n={} vs negation n={}: overlap {:.4}", r.sample_counts.fuzz, r.sample_counts.negation, r.overlap))
}

fn ac4_mass() -> Outcome {
    let curves = CURVES.lock().unwrap();
    ensure!(!curves.is_empty(), "no curves recorded");
    let worst = curves.iter().map(|(l, m)| (l, (m - 1.0).abs())).fold((None, 0.0f64), |acc, (l, d)| {
        if d > acc.1 {
            (Some(l), d)
        } else {
            acc
        }
    });
    ensure!(worst.1 <= MASS_TOL, "{:?} off by {}", worst.0, worst.1);
    Ok(format!("{} curves, max |mass-1| = {:.1e}", curves.len(), worst.1))
}

fn ac5_perturbation_algebra() -> Outcome {
    let lengths: Vec<usize> = (0..SYNTHETIC_SENTENCES).map(|i| 1 + (i * 7) % 23).collect();
    let corpus = Corpus::from_lines(synthetic_lines(&lengths), Language::En);
    ensure!(corpus.n() == SYNTHETIC_SENTENCES, "corpus has {} sentences", corpus.n());
    let table = TermTable::for_language(Language::En);
    let mut grand = 0;
    let mut checked = 0;
    for x in [1usize, 3, 5] {
        let opts = PerturbOptions { max_variants: x, seed: 5, grammar_negation: false };
        let mut total_x = 0;
        for mode in [Mode::Fuzz, Mode::Negate] {
            let sets = perturb_corpus(&corpus, mode, opts).map_err(|e| e.to_string())?;
            let t = table.terms(mode).len();
            let expected: usize = lengths.iter().map(|w| x.min(w * t)).sum();
            let got: usize = sets.iter().map(|s| s.variants.len()).sum();
            ensure!(got == expected, "x={x} {mode}: {got} variants, expected {expected}");
            for (set, s) in sets.iter().zip(&corpus.sentences) {
                for v in &set.variants {
                    ensure!(v.restore().as_ref() == Some(&s.tokens), "variant {:?} does not restore", v.text);
                    checked += 1;
                }
            }
            total_x += got;
        }
        ensure!(total_x <= 2 * x * corpus.n(), "x={x}: {total_x} > 2Xn");
        grand += total_x;
    }
    Ok(format!("exact counts for X in {{1,3,5}}, {grand} variants, {checked}/{checked} restore"))
}

/// Position-weighted token hash: each (token, position) pair lands in its own
/// bucket, so inserting a word anywhere moves every later token.
struct PositionalHash;

impl Embedder for PositionalHash {
    fn name(&self) -> String {
        "positional-hash".into()
    }

    fn embed_many(&self, texts: &[&str]) -> Vec<Result<EmbeddingVector, EmbedError>> {
        texts
            .iter()
            .map(|t| {
                let mut v = vec![0.0; 256];
                for (k, tok) in t.split_whitespace().enumerate() {
                    let mut h: u64 = 0x811c_9dc5 ^ (k as u64).wrapping_mul(0x9e37_79b9);
                    for b in tok.to_lowercase().bytes() {
                        h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
                    }
                    v[(h % 256) as usize] += 1.0 / (1.0 + k as f64);
                }
                EmbeddingVector::new(v)
            })
            .collect()
    }
}

fn distinct_fuzz_values_per_sentence(samples: &csc_core::curves::SampleSet) -> HashMap<usize, usize> {
    let mut by_sentence: HashMap<usize, BTreeSet<u64>> = HashMap::new();
    for s in samples.samples.iter().filter(|s| s.mode == Mode::Fuzz) {
        by_sentence.entry(s.original_id).or_default().insert(s.value.to_bits());
    }
    by_sentence.into_iter().map(|(k, v)| (k, v.len())).collect()
}

fn ac6_tfidf_position_invariance() -> Outcome {
    let corpus = load_corpus(demo_corpus_path("demo_en.txt"), Language::En).map_err(|e| e.to_string())?;
    let opts = PerturbOptions { max_variants: 3, seed: 0, grammar_negation: false };
    let perturbations = Perturbations::generate(&corpus, opts).map_err(|e| e.to_string())?;
    let model = TfidfModel::fit(&perturbations.fit_texts(&corpus)).map_err(|e| e.to_string())?;
    let fuzz_terms = TermTable::for_language(Language::En).fuzz_terms.len();

    let (tfidf, tfidf_samples) =
        evaluate_embedder(&corpus, &perturbations, &model, 512, None, 0.1).map_err(|e| e.to_string())?;
    record("ac6/tfidf", &tfidf);
    let tfidf_distinct = distinct_fuzz_values_per_sentence(&tfidf_samples);
    let worst = tfidf_distinct.values().copied().max().unwrap_or(0);
    ensure!(worst <= fuzz_terms, "TF-IDF produced {worst} distinct fuzz values for one sentence");

    let (pos, pos_samples) =
        evaluate_embedder(&corpus, &perturbations, &PositionalHash, 512, None, 0.1).map_err(|e| e.to_string())?;
    record("ac6/positional", &pos);
    let violations = distinct_fuzz_values_per_sentence(&pos_samples).values().filter(|&&n| n > fuzz_terms).count();
    ensure!(violations > 0, "positional embedder never exceeded {fuzz_terms} distinct fuzz values");
    ensure!(
        pos.overlap > tfidf.overlap,
        "positional overlap {:.4} does not exceed TF-IDF overlap {:.4}",
        pos.overlap,
        tfidf.overlap
    );
    Ok(format!(
        "TF-IDF ≤{worst} distinct fuzz values/sentence, overlap {:.4}; positional hash violates on {violations} sentences, overlap {:.4}",
        tfidf.overlap, pos.overlap
    ))
}

fn ac7_kde_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let grid = uniform_grid(512).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for trial in 0..10 {
        let samples: Vec<f64> = (0..KDE_SAMPLES).map(|_| rng.random_range(-1.0..1.0)).collect();
        let bandwidth = if trial % 2 == 0 { None } else { Some(rng.random_range(0.01..0.3)) };
        let curve = kde(&samples, &grid, bandwidth).map_err(|e| e.to_string())?;
        let h = bandwidth.unwrap_or_else(|| scott_bandwidth(&samples).unwrap());
        for _ in 0..KDE_POINTS {
            let j = rng.random_range(0..grid.len());
            let x = grid[j];
            let mut direct = 0.0;
            for &s in &samples {
                let z = (x - s) / h;
                direct += (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
            }
            direct /= samples.len() as f64 * h;
            worst = worst.max((curve.densities[j] - direct).abs());
        }
    }
    ensure!(worst <= KDE_TOL, "max deviation {worst:e}");
    Ok(format!("10 inputs × {KDE_POINTS} points, max |Δ| = {worst:.1e}"))
}

fn ac8_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let server = MockServer::start(Behavior::Echo);
    let mut outputs = Vec::new();
    for (run, jobs) in [(0, 1usize), (1, 4)] {
        let mut cfg = RunConfig::new(demo_corpus_path("demo_en.txt"), Language::En);
        cfg.embedders = vec!["tfidf".into(), "remote:echo".into()];
        cfg.endpoint = Some(server.url.clone());
        cfg.batch_size = 16;
        cfg.seed = 42;
        cfg.jobs = Some(jobs);
        cfg.out = dir.path().join(format!("run{run}"));
        let outcome = run_pipeline(&cfg).map_err(|e| e.to_string())?;
        ensure!(outcome.manifest.all_ok(), "run {run} had failures");
        for (label, r) in &outcome.results {
            record(&format!("ac8/{label}"), r.as_ref().unwrap());
        }
        outputs.push(cfg.out);
    }
    let mut compared = 0;
    let mut names: Vec<String> = fs::read_dir(&outputs[0])
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
        .filter(|n| n.ends_with(".csv") || n.ends_with(".svg") || n.ends_with(".tsv") || n.ends_with(".txt"))
        .collect();
    names.sort();
    for name in &names {
        let a = fs::read(outputs[0].join(name)).map_err(|e| e.to_string())?;
        let b = fs::read(outputs[1].join(name)).map_err(|e| e.to_string())?;
        ensure!(a == b, "{name} differs between runs");
        compared += 1;
    }
    ensure!(names.iter().filter(|n| n.ends_with(".svg")).count() == 2, "expected 2 SVGs, got {names:?}");
    Ok(format!("{compared} artifacts byte-identical across jobs=1 and jobs=4"))
}

fn ac9_token_bins() -> Outcome {
    // planted: 500 / 250 / 125 / 75 / 40 / 10 out of 1000
    let plan = [(500, 3), (250, 14), (125, 20), (75, 39), (40, 45), (10, 61)];
    let lengths: Vec<usize> = plan.iter().flat_map(|&(n, w)| std::iter::repeat_n(w, n)).collect();
    let corpus = Corpus::from_lines(synthetic_lines(&lengths), Language::En);
    let table = token_bin_stats(&corpus, 10).map_err(|e| e.to_string())?;
    let expected = [50.0, 25.0, 12.5, 7.5, 4.0, 1.0];
    let got: Vec<f64> = table.bins.iter().map(|b| b.percentage).collect();
    ensure!(got == expected, "bins {got:?}, expected {expected:?}");
    ensure!(table.total_sentences == 1000, "total {}", table.total_sentences);
    Ok(got.iter().map(|p| format!("{p:.2}%")).collect::<Vec<_>>().join(" / "))
}

fn ac10_remote_contract() -> Outcome {
    let fast = RetryPolicy { attempts: 3, initial_backoff: Duration::from_millis(5) };

    let echo = MockServer::start(Behavior::Echo);
    let client = RemoteEmbedder::new(&echo.url, "echo").with_batch_size(3);
    let texts: Vec<String> = (0..10).map(|i| format!("text number {i} {}", "x ".repeat(i))).collect();
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    for (r, t) in client.embed_many(&refs).iter().zip(&refs) {
        ensure!(
            r.as_ref().map(|v| v.values().to_vec()).ok() == Some(fixture_vector(t)),
            "order not preserved for {t:?}"
        );
    }

    let short = MockServer::start(Behavior::ShortCount);
    match RemoteEmbedder::new(&short.url, "m").embed_batch(&["a", "b", "c"]) {
        Err(EmbedError::CountMismatch { sent: 3, received: 2 }) => {}
        other => return Err(format!("count mismatch not detected: {other:?}")),
    }

    let flaky = MockServer::start(Behavior::FailFirst(2));
    ensure!(
        RemoteEmbedder::new(&flaky.url, "m").with_retry(fast).embed_batch(&["a"]).is_ok(),
        "did not recover after two failures"
    );
    let down = MockServer::start(Behavior::AlwaysFail);
    match RemoteEmbedder::new(&down.url, "m").with_retry(fast).embed_batch(&["a"]) {
        Err(EmbedError::Transport { attempts: 3, .. }) => {}
        other => return Err(format!("expected failure after 3 attempts: {other:?}")),
    }
    ensure!(down.request_count() == 3, "{} requests instead of 3", down.request_count());
    Ok("order preserved, count mismatch caught, retry-then-succeed and retry-then-fail (3 attempts)".into())
}

fn main() {
    let suite_start = Instant::now();
    let criteria: Vec<Criterion> = vec![
        ("AC-1  overlap metric properties", ac1_overlap_properties),
        ("AC-2  Gaussian fixture vs 2Φ(-2)", ac2_gaussian_fixture),
        ("AC-3  volume-mismatch compensation", ac3_volume_mismatch),
        ("AC-5  perturbation algebra", ac5_perturbation_algebra),
        ("AC-6  TF-IDF position invariance", ac6_tfidf_position_invariance),
        ("AC-7  KDE brute-force oracle", ac7_kde_oracle),
        ("AC-8  end-to-end determinism", ac8_determinism),
        ("AC-9  token-bin statistics", ac9_token_bins),
        ("AC-10 remote embedder contract", ac10_remote_contract),
        // runs last: checks every curve produced above
        ("AC-4  normalized curve mass", ac4_mass),
    ];

    let mut failures = 0;
    let mut lines = Vec::new();
    panic::set_hook(Box::new(|_| {}));
    for (name, check) in criteria {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(format!(
                "panicked: {:?}",
                p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            ))
        });
        let line = match outcome {
            Ok(detail) => format!("PASS  {name}: {detail}"),
            Err(why) => {
                failures += 1;
                format!("FAIL  {name}: {why}")
            }
        };
        println!("{line}");
        lines.push(line);
    }
    let elapsed = suite_start.elapsed();
    if elapsed < SUITE_RUNTIME {
        println!("PASS  suite runtime: {elapsed:.2?} < {SUITE_RUNTIME:?}");
    } else {
        failures += 1;
        println!("FAIL  suite runtime: {elapsed:.2?} ≥ {SUITE_RUNTIME:?}");
    }
    println!("\nacceptance: {} criteria, {failures} failed", lines.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
