//! Aggregations over scored records and their CSV exports.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::alpha::Alpha;
use crate::counter::ratio;
use crate::error::{Error, Result};
use crate::gen::{InstanceRecord, Label, Region};
use crate::harness::{Cell, EvalRecord, Manifest};

pub const DEFAULT_WINDOW: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub alpha_center: f64,
    pub window_lo: f64,
    pub window_hi: f64,
    pub samples: usize,
    pub accuracy: f64,
    pub region: String,
}

fn join<'a>(records: &'a [EvalRecord], pool: &'a [InstanceRecord]) -> Result<Vec<(&'a EvalRecord, &'a InstanceRecord)>> {
    let by_id: HashMap<&str, &InstanceRecord> = pool.iter().map(|r| (r.id.as_str(), r)).collect();
    let joined = records
        .iter()
        .map(|e| {
            by_id
                .get(e.id.as_str())
                .map(|r| (e, *r))
                .ok_or_else(|| Error::Missing(format!("no pool record for result '{}'", e.id)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(joined)
}

fn windowed(groups: &BTreeMap<Alpha, (usize, usize)>, window: usize, region: &str) -> Vec<CurvePoint> {
    let alphas: Vec<(&Alpha, &(usize, usize))> = groups.iter().collect();
    if alphas.is_empty() {
        return Vec::new();
    }
    let w = window.max(1).min(alphas.len());
    alphas
        .windows(w)
        .map(|win| {
            let (correct, total) = win.iter().fold((0, 0), |(c, t), (_, (c2, t2))| (c + c2, t + t2));
            CurvePoint {
                alpha_center: win.iter().map(|(a, _)| a.to_f64()).sum::<f64>() / w as f64,
                window_lo: win[0].0.to_f64(),
                window_hi: win[w - 1].0.to_f64(),
                samples: total,
                accuracy: correct as f64 / total as f64,
                region: region.to_string(),
            }
        })
        .collect()
}

fn tally<'a>(pairs: impl Iterator<Item = (&'a EvalRecord, &'a InstanceRecord)>) -> BTreeMap<Alpha, (usize, usize)> {
    let mut groups: BTreeMap<Alpha, (usize, usize)> = BTreeMap::new();
    for (e, r) in pairs {
        let g = groups.entry(r.alpha_exact()).or_default();
        g.0 += usize::from(e.correct);
        g.1 += 1;
    }
    groups
}

/// Accuracy over sliding windows of `window` consecutive distinct alpha
/// values, pooled across n. Fewer distinct values than `window` yield a
/// single point over all of them.
pub fn accuracy_vs_alpha(records: &[EvalRecord], pool: &[InstanceRecord], window: usize) -> Result<Vec<CurvePoint>> {
    let joined = join(records, pool)?;
    if joined.is_empty() {
        return Err(Error::Analysis("no records to aggregate".into()));
    }
    Ok(windowed(&tally(joined.into_iter()), window, "ALL"))
}

/// Like [`accuracy_vs_alpha`], with separate curves for hard and easy regions.
pub fn accuracy_vs_alpha_by_region(
    records: &[EvalRecord],
    pool: &[InstanceRecord],
    window: usize,
) -> Result<Vec<CurvePoint>> {
    let joined = join(records, pool)?;
    let mut out = Vec::new();
    for (name, hard) in [("HARD", true), ("EASY", false)] {
        let part = joined
            .iter()
            .copied()
            .filter(|(_, r)| r.region != Region::Unknown && r.region.is_hard() == hard);
        out.extend(windowed(&tally(part), window, name));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioPoint {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub region: String,
    pub samples: usize,
    pub accuracy: f64,
}

/// `bins` equal-width edges on `[0, 1]`.
pub fn uniform_edges(bins: usize) -> Vec<f64> {
    (0..=bins).map(|i| i as f64 / bins as f64).collect()
}

/// Accuracy per (satisfiability-ratio bin, region) over satisfiable, counted
/// instances. Bins are half-open except the last. Empty bins are omitted.
pub fn accuracy_vs_sat_ratio(records: &[EvalRecord], pool: &[InstanceRecord], edges: &[f64]) -> Result<Vec<RatioPoint>> {
    if edges.len() < 2 || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Analysis("bin edges must be strictly increasing with at least two values".into()));
    }
    let joined = join(records, pool)?;
    let mut cells: BTreeMap<(usize, bool), (usize, usize)> = BTreeMap::new();
    let mut counted = 0;
    for (e, r) in joined {
        let Some(count) = r.model_count else { continue };
        if r.label != Label::Sat || r.region == Region::Unknown {
            continue;
        }
        counted += 1;
        let x = ratio(count, r.n);
        let x = *x.numer() as f64 / *x.denom() as f64;
        let last = edges.len() - 2;
        let Some(bin) = (0..=last).find(|&i| x >= edges[i] && (x < edges[i + 1] || (i == last && x <= edges[i + 1]))) else {
            continue;
        };
        let c = cells.entry((bin, r.region.is_hard())).or_default();
        c.0 += usize::from(e.correct);
        c.1 += 1;
    }
    if counted == 0 {
        return Err(Error::Analysis("no satisfiable instances with model counts".into()));
    }
    let mut out: Vec<RatioPoint> = cells
        .into_iter()
        .map(|((bin, hard), (c, t))| RatioPoint {
            bin_lo: edges[bin],
            bin_hi: edges[bin + 1],
            region: if hard { "HARD" } else { "EASY" }.into(),
            samples: t,
            accuracy: c as f64 / t as f64,
        })
        .collect();
    out.sort_by(|a, b| (&a.region, a.bin_lo).partial_cmp(&(&b.region, b.bin_lo)).expect("finite edges"));
    Ok(out)
}

/// Rows are predictions (SAT, UNSAT), columns the true labels (SAT, UNSAT).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[usize; 2]; 2],
}

impl ConfusionMatrix {
    /// Each cell divided by its column total; `None` for empty columns.
    pub fn normalized(&self) -> [[Option<f64>; 2]; 2] {
        let mut out = [[None; 2]; 2];
        for col in 0..2 {
            let total = self.counts[0][col] + self.counts[1][col];
            if total > 0 {
                for (row, cells) in out.iter_mut().enumerate() {
                    cells[col] = Some(self.counts[row][col] as f64 / total as f64);
                }
            }
        }
        out
    }
}

pub fn confusion_matrix(records: &[EvalRecord]) -> ConfusionMatrix {
    let mut m = ConfusionMatrix::default();
    for cell in records.iter().filter_map(|r| r.cell) {
        let (row, col) = match cell {
            Cell::TP => (0, 0),
            Cell::FP => (0, 1),
            Cell::FN => (1, 0),
            Cell::TN => (1, 1),
        };
        m.counts[row][col] += 1;
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenPoint {
    pub alpha: f64,
    pub samples: usize,
    pub median_output_tokens: f64,
    pub q1_output_tokens: f64,
    pub q3_output_tokens: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenCorrelation {
    pub subject: String,
    pub samples: usize,
    pub spearman_input_output: f64,
    pub approximate: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TokenAnalysis {
    pub per_alpha: Vec<TokenPoint>,
    pub correlations: Vec<TokenCorrelation>,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties. Constant inputs
/// give 0.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    if xs.len() < 2 {
        return 0.0;
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = xs.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}

pub fn token_analysis(records: &[EvalRecord], pool: &[InstanceRecord]) -> Result<TokenAnalysis> {
    let joined = join(records, pool)?;
    let mut by_alpha: BTreeMap<Alpha, Vec<f64>> = BTreeMap::new();
    for (e, r) in &joined {
        by_alpha.entry(r.alpha_exact()).or_default().push(e.output_tokens as f64);
    }
    let per_alpha = by_alpha
        .into_iter()
        .map(|(a, mut v)| {
            v.sort_by(f64::total_cmp);
            TokenPoint {
                alpha: a.to_f64(),
                samples: v.len(),
                median_output_tokens: quantile(&v, 0.5),
                q1_output_tokens: quantile(&v, 0.25),
                q3_output_tokens: quantile(&v, 0.75),
            }
        })
        .collect();
    let mut by_subject: BTreeMap<&str, Vec<&EvalRecord>> = BTreeMap::new();
    for (e, _) in &joined {
        by_subject.entry(e.subject.as_str()).or_default().push(e);
    }
    let correlations = by_subject
        .into_iter()
        .map(|(s, rs)| {
            let xs: Vec<f64> = rs.iter().map(|r| r.input_tokens as f64).collect();
            let ys: Vec<f64> = rs.iter().map(|r| r.output_tokens as f64).collect();
            TokenCorrelation {
                subject: s.to_string(),
                samples: rs.len(),
                spearman_input_output: spearman(&xs, &ys),
                approximate: rs.iter().any(|r| r.tokens_approximate),
            }
        })
        .collect();
    Ok(TokenAnalysis { per_alpha, correlations })
}

/// Every aggregation the exporter writes.
#[derive(Debug, Clone, Default)]
pub struct Analyses {
    pub alpha_curve: Vec<CurvePoint>,
    pub sat_ratio: Vec<RatioPoint>,
    pub confusion: ConfusionMatrix,
    pub tokens: TokenAnalysis,
}

/// Default analyses. Missing model counts leave the ratio curve empty.
pub fn analyze(records: &[EvalRecord], pool: &[InstanceRecord], window: usize) -> Result<Analyses> {
    if records.is_empty() {
        return Ok(Analyses::default());
    }
    let mut alpha_curve = accuracy_vs_alpha(records, pool, window)?;
    alpha_curve.extend(accuracy_vs_alpha_by_region(records, pool, window)?);
    let sat_ratio = match accuracy_vs_sat_ratio(records, pool, &uniform_edges(10)) {
        Ok(points) => points,
        Err(Error::Analysis(msg)) => {
            log::warn!("satisfiability-ratio curve skipped: {msg}");
            Vec::new()
        }
        Err(e) => return Err(e),
    };
    Ok(Analyses {
        alpha_curve,
        sat_ratio,
        confusion: confusion_matrix(records),
        tokens: token_analysis(records, pool)?,
    })
}

pub mod files {
    pub const RESULTS: &str = "results.jsonl";
    pub const ALPHA_CURVE: &str = "accuracy_vs_alpha.csv";
    pub const SAT_RATIO: &str = "accuracy_vs_sat_ratio.csv";
    pub const CONFUSION: &str = "confusion.csv";
    pub const TOKENS: &str = "tokens_vs_alpha.csv";
    pub const TOKEN_CORRELATION: &str = "token_correlation.csv";
    pub const MANIFEST: &str = "manifest.json";
}

fn write_csv<T: Serialize>(path: &Path, headers: &[&str], rows: &[T]) -> Result<()> {
    let to_err = |e: csv::Error| Error::Analysis(format!("{}: {e}", path.display()));
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(to_err)?;
    w.write_record(headers).map_err(to_err)?;
    for r in rows {
        w.serialize(r).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct ConfusionRow {
    predicted: &'static str,
    actual: &'static str,
    count: usize,
    fraction: Option<f64>,
}

pub fn read_results(path: &Path) -> Result<Vec<EvalRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

/// Writes results, curve CSVs and the manifest into `dir`, overwriting.
pub fn export_results(records: &[EvalRecord], analyses: &Analyses, manifest: Option<&Manifest>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut jsonl = String::new();
    for r in records {
        jsonl.push_str(&serde_json::to_string(r)?);
        jsonl.push('\n');
    }
    let results = dir.join(files::RESULTS);
    fs::write(&results, jsonl).map_err(|e| Error::io(&results, e))?;

    write_csv(
        &dir.join(files::ALPHA_CURVE),
        &["alpha_center", "window_lo", "window_hi", "samples", "accuracy", "region"],
        &analyses.alpha_curve,
    )?;
    write_csv(
        &dir.join(files::SAT_RATIO),
        &["bin_lo", "bin_hi", "region", "samples", "accuracy"],
        &analyses.sat_ratio,
    )?;
    let labels = ["SAT", "UNSAT"];
    let norm = analyses.confusion.normalized();
    let confusion: Vec<ConfusionRow> = (0..2)
        .flat_map(|row| (0..2).map(move |col| (row, col)))
        .map(|(row, col)| ConfusionRow {
            predicted: labels[row],
            actual: labels[col],
            count: analyses.confusion.counts[row][col],
            fraction: norm[row][col],
        })
        .collect();
    write_csv(&dir.join(files::CONFUSION), &["predicted", "actual", "count", "fraction"], &confusion)?;
    write_csv(
        &dir.join(files::TOKENS),
        &["alpha", "samples", "median_output_tokens", "q1_output_tokens", "q3_output_tokens"],
        &analyses.tokens.per_alpha,
    )?;
    write_csv(
        &dir.join(files::TOKEN_CORRELATION),
        &["subject", "samples", "spearman_input_output", "approximate"],
        &analyses.tokens.correlations,
    )?;
    if let Some(m) = manifest {
        let path = dir.join(files::MANIFEST);
        fs::write(&path, serde_json::to_string_pretty(m)?).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
