//! Figures, CSV export and overlap matrices.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::curves::{CscResult, CurveError, DensityCurve, SampleCounts};

pub const CSV_HEADER: [&str; 3] = ["grid_value", "fuzz_density", "negation_density"];

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 44.0;
const BOTTOM: f64 = 84.0;
const FUZZ_COLOR: &str = "#1f77b4";
const NEGATION_COLOR: &str = "#d62728";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("nothing to report")]
    NothingToReport,
}

/// Write via a sibling temp file so a failed write leaves nothing behind.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), ReportError> {
    let file_name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{file_name}.tmp"));
    let wrap = |source| ReportError::Write { path: path.to_path_buf(), source };
    fs::write(&tmp, contents).map_err(wrap)?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        wrap(e)
    })
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn points(curve: &DensityCurve, y_max: f64) -> String {
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let mut out = String::with_capacity(curve.len() * 24);
    for (i, (x, d)) in curve.grid.iter().zip(&curve.densities).enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let px = LEFT + (x + 1.0) / 2.0 * plot_w;
        let py = TOP + plot_h * (1.0 - d / y_max);
        let _ = write!(out, "{px:.6},{py:.6}");
    }
    out
}

/// SVG with both curves on a shared [-1, 1] axis, a legend and the overlap
/// printed to four decimals. Output depends only on the inputs.
pub fn render_svg(result: &CscResult, title: &str) -> Result<String, ReportError> {
    result.validate()?;
    let y_max =
        result.fuzz_curve.densities.iter().chain(&result.negation_curve.densities).fold(0.0f64, |m, &d| m.max(d));
    let y_max = if y_max > 0.0 { y_max * 1.05 } else { 1.0 };
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let x_axis_y = TOP + plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.6}" y="26" font-size="16" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        xml_escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{plot_w:.6}" height="{plot_h:.6}" fill="none" stroke="black" stroke-width="1"/>"#
    );
    for tick in [-1.0, -0.5, 0.0, 0.5, 1.0f64] {
        let px = LEFT + (tick + 1.0) / 2.0 * plot_w;
        let _ = writeln!(
            s,
            r#"<line x1="{px:.6}" y1="{x_axis_y:.6}" x2="{px:.6}" y2="{:.6}" stroke="black"/>"#,
            x_axis_y + 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{px:.6}" y="{:.6}" font-size="12" text-anchor="middle">{tick:.1}</text>"#,
            x_axis_y + 19.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.6}" y="{:.6}" font-size="12" text-anchor="middle">cosine similarity to original</text>"#,
        LEFT + plot_w / 2.0,
        x_axis_y + 36.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.6}" font-size="12" text-anchor="middle" transform="rotate(-90 18 {:.6})">normalized density</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );
    let _ = writeln!(
        s,
        r#"<polyline class="fuzz" fill="none" stroke="{FUZZ_COLOR}" stroke-width="1.5" points="{}"/>"#,
        points(&result.fuzz_curve, y_max)
    );
    let _ = writeln!(
        s,
        r#"<polyline class="negation" fill="none" stroke="{NEGATION_COLOR}" stroke-width="1.5" points="{}"/>"#,
        points(&result.negation_curve, y_max)
    );
    for (row, (label, color, n)) in
        [("Fuzz", FUZZ_COLOR, result.sample_counts.fuzz), ("Negation", NEGATION_COLOR, result.sample_counts.negation)]
            .into_iter()
            .enumerate()
    {
        let y = TOP + 16.0 + row as f64 * 18.0;
        let _ = writeln!(
            s,
            r#"<line x1="{:.6}" y1="{y:.6}" x2="{:.6}" y2="{y:.6}" stroke="{color}" stroke-width="2"/>"#,
            LEFT + 12.0,
            LEFT + 36.0
        );
        let _ = writeln!(s, r#"<text x="{:.6}" y="{:.6}" font-size="12">{label} (n={n})</text>"#, LEFT + 42.0, y + 4.0);
    }
    let _ = writeln!(
        s,
        r#"<text class="overlap" x="{:.6}" y="{:.6}" font-size="13" text-anchor="middle">Overlap: {:.4}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 14.0,
        result.overlap
    );
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn render_curves(result: &CscResult, title: &str, out_path: impl AsRef<Path>) -> Result<(), ReportError> {
    let svg = render_svg(result, title)?;
    write_atomic(out_path.as_ref(), svg.as_bytes())
}

/// Nine significant digits.
fn fmt_sig(v: f64) -> String {
    format!("{v:.8e}")
}

pub fn csv_string(result: &CscResult) -> Result<String, ReportError> {
    result.validate()?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let csv_err = |e: csv::Error| ReportError::Format { path: PathBuf::new(), message: e.to_string() };
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for ((x, f), n) in result.grid().iter().zip(&result.fuzz_curve.densities).zip(&result.negation_curve.densities) {
        w.write_record([fmt_sig(*x), fmt_sig(*f), fmt_sig(*n)]).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| ReportError::Format { path: PathBuf::new(), message: e.to_string() })?;
    Ok(String::from_utf8(bytes).expect("csv output is ASCII"))
}

/// Columns `grid_value, fuzz_density, negation_density`, one row per grid point.
pub fn export_csv(result: &CscResult, out_path: impl AsRef<Path>) -> Result<(), ReportError> {
    let text = csv_string(result)?;
    write_atomic(out_path.as_ref(), text.as_bytes())
}

/// Parse a curve CSV back into a result. The overlap is recomputed from the
/// stored densities; sample counts are not stored and come back as zero.
pub fn read_csv(path: impl AsRef<Path>) -> Result<CscResult, ReportError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| ReportError::Read { path: path.to_path_buf(), source })?;
    parse_csv(&bytes).map_err(|message| ReportError::Format { path: path.to_path_buf(), message })
}

fn parse_csv(bytes: &[u8]) -> Result<CscResult, String> {
    let mut r = csv::Reader::from_reader(bytes);
    let header = r.headers().map_err(|e| e.to_string())?;
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()));
    }
    let (mut grid, mut fuzz, mut neg) = (Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let field = |k: usize| -> Result<f64, String> {
            rec.get(k)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| format!("row {}: bad value in column {}", i + 2, CSV_HEADER[k]))
        };
        grid.push(field(0)?);
        fuzz.push(field(1)?);
        neg.push(field(2)?);
    }
    CscResult::from_curves(
        DensityCurve { grid: grid.clone(), densities: fuzz },
        DensityCurve { grid, densities: neg },
        SampleCounts::default(),
    )
    .map_err(|e| e.to_string())
}

/// Overlap scores indexed by embedder (rows) and dataset (columns), in first-seen order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OverlapMatrix {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    cells: Vec<Vec<Option<f64>>>,
}

impl OverlapMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_results<'a, I>(results: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a str, Option<&'a CscResult>)>,
    {
        let mut m = Self::new();
        for (embedder, dataset, result) in results {
            m.insert(embedder, dataset, result.map(|r| r.overlap));
        }
        m
    }

    /// Record a cell; `None` marks a failed run.
    pub fn insert(&mut self, embedder: &str, dataset: &str, overlap: Option<f64>) {
        let r = match self.rows.iter().position(|x| x == embedder) {
            Some(r) => r,
            None => {
                self.rows.push(embedder.to_string());
                self.cells.push(vec![None; self.columns.len()]);
                self.rows.len() - 1
            }
        };
        let c = match self.columns.iter().position(|x| x == dataset) {
            Some(c) => c,
            None => {
                self.columns.push(dataset.to_string());
                self.cells.iter_mut().for_each(|row| row.push(None));
                self.columns.len() - 1
            }
        };
        self.cells[r][c] = overlap;
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.cells.get(row)?.get(col).copied().flatten()
    }

    /// Rows holding the column minimum (lower overlap is better separation).
    pub fn best_in_column(&self, col: usize) -> Vec<usize> {
        let min = (0..self.rows.len()).filter_map(|r| self.get(r, col)).fold(f64::INFINITY, f64::min);
        (0..self.rows.len()).filter(|&r| self.get(r, col) == Some(min)).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("embedder");
        for c in &self.columns {
            out.push(',');
            out.push_str(&csv_field(c));
        }
        out.push('\n');
        for (r, name) in self.rows.iter().enumerate() {
            out.push_str(&csv_field(name));
            for c in 0..self.columns.len() {
                out.push(',');
                if let Some(v) = self.get(r, c) {
                    let _ = write!(out, "{v:.4}");
                }
            }
            out.push('\n');
        }
        out
    }

    /// Aligned plain-text table. Missing cells show "—"; the best (lowest)
    /// value per column carries a trailing `*`.
    pub fn render_text(&self) -> String {
        let best: Vec<Vec<usize>> = (0..self.columns.len()).map(|c| self.best_in_column(c)).collect();
        let cell = |r: usize, c: usize| match self.get(r, c) {
            Some(v) if best[c].contains(&r) => format!("{v:.4}*"),
            Some(v) => format!("{v:.4} "),
            None => "— ".to_string(),
        };
        let w0 = self.rows.iter().map(|r| r.chars().count()).chain(["embedder".len()]).max().unwrap_or(0);
        let widths: Vec<usize> = (0..self.columns.len())
            .map(|c| {
                (0..self.rows.len())
                    .map(|r| cell(r, c).chars().count())
                    .chain([self.columns[c].chars().count()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();

        let mut out = String::new();
        let _ = write!(out, "{:<w0$}", "embedder");
        for (c, w) in self.columns.iter().zip(&widths) {
            let _ = write!(out, " | {c:>w$}");
        }
        out.push('\n');
        let _ = write!(out, "{}", "-".repeat(w0));
        for w in &widths {
            let _ = write!(out, "-+-{}", "-".repeat(*w));
        }
        out.push('\n');
        for (r, name) in self.rows.iter().enumerate() {
            let _ = write!(out, "{name:<w0$}");
            for (c, w) in widths.iter().enumerate() {
                let _ = write!(out, " | {:>w$}", cell(r, c));
            }
            out.push('\n');
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
