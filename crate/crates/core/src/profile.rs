//! Satisfiability probability and solver effort across a density sweep.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::alpha::Alpha;
use crate::analysis::quantile;
use crate::error::{Error, Result};
use crate::gen::{generate, Family, GenSpec};
use crate::par::Exec;
use crate::solver::{solve, Mode, SolverOptions, Status};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub alpha: f64,
    pub n: u32,
    pub samples: usize,
    pub p_sat: f64,
    pub median_decisions: f64,
    pub mean_decisions: f64,
    pub median_nodes: f64,
    pub median_wall_us: f64,
    pub limit_exceeded: usize,
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    sat: Option<bool>,
    decisions: u64,
    nodes: u64,
    wall_us: f64,
}

fn summarize(alpha: Alpha, n: u32, samples: &[Sample]) -> ProfileRow {
    let sorted = |f: &dyn Fn(&Sample) -> f64| {
        let mut v: Vec<f64> = samples.iter().map(f).collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let decided: Vec<bool> = samples.iter().filter_map(|s| s.sat).collect();
    let decisions = sorted(&|s| s.decisions as f64);
    ProfileRow {
        alpha: alpha.to_f64(),
        n,
        samples: samples.len(),
        p_sat: decided.iter().filter(|&&b| b).count() as f64 / decided.len().max(1) as f64,
        median_decisions: quantile(&decisions, 0.5),
        mean_decisions: decisions.iter().sum::<f64>() / decisions.len().max(1) as f64,
        median_nodes: quantile(&sorted(&|s| s.nodes as f64), 0.5),
        median_wall_us: quantile(&sorted(&|s| s.wall_us), 0.5),
        limit_exceeded: samples.iter().filter(|s| s.sat.is_none()).count(),
    }
}

/// Generates `samples` instances per alpha and solves each one.
pub fn phase_profile(
    family: Family,
    n: u32,
    alphas: &[Alpha],
    samples: usize,
    seed: u64,
    options: &SolverOptions,
    exec: Exec,
) -> Result<Vec<ProfileRow>> {
    let specs: Vec<GenSpec> = alphas
        .iter()
        .map(|&alpha| GenSpec {
            family,
            n,
            alpha,
            seed,
            count: samples,
        })
        .collect();
    for s in &specs {
        s.clause_count()?;
    }
    let jobs: Vec<(usize, usize)> = (0..specs.len()).flat_map(|a| (0..samples).map(move |i| (a, i))).collect();
    let results = exec.map(&jobs, |&(a, i)| -> Result<Sample> {
        let (formula, _) = generate(&specs[a], i)?;
        let out = solve(&formula, Mode::Decision, options);
        Ok(Sample {
            sat: match out.status {
                Status::Sat => Some(true),
                Status::Unsat => Some(false),
                Status::LimitExceeded => None,
            },
            decisions: out.stats.decisions,
            nodes: out.stats.nodes(),
            wall_us: out.stats.wall_time.as_secs_f64() * 1e6,
        })
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(specs
        .iter()
        .zip(results.chunks(samples.max(1)))
        .map(|(s, chunk)| summarize(s.alpha, n, chunk))
        .collect())
}

/// Alpha at which P(SAT) first drops through 0.5, interpolated linearly
/// between the bracketing grid points.
pub fn crossing(rows: &[ProfileRow]) -> Option<f64> {
    rows.windows(2).find_map(|w| {
        let (a, b) = (&w[0], &w[1]);
        (a.p_sat >= 0.5 && b.p_sat < 0.5).then(|| {
            if a.p_sat == b.p_sat {
                a.alpha
            } else {
                a.alpha + (a.p_sat - 0.5) / (a.p_sat - b.p_sat) * (b.alpha - a.alpha)
            }
        })
    })
}

/// `lo:hi:step` or a comma-separated list.
pub fn parse_alpha_list(spec: &str) -> Result<Vec<Alpha>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() == 3 {
        let [lo, hi, step] = [parts[0], parts[1], parts[2]].map(|p| p.trim().parse::<Alpha>());
        let (lo, hi, step) = (lo?, hi?, step?);
        if step.is_zero() {
            return Err(Error::InvalidSpec("alpha step must be positive".into()));
        }
        let mut out = Vec::new();
        let mut a = lo.ratio();
        while a <= hi.ratio() {
            out.push(Alpha::from(a));
            a += step.ratio();
        }
        return Ok(out);
    }
    spec.split(',').map(|s| s.trim().parse()).collect()
}

pub fn write_profile_csv(path: &Path, rows: &[ProfileRow]) -> Result<()> {
    let to_err = |e: csv::Error| Error::Analysis(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(to_err)?;
    for r in rows {
        w.serialize(r).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
