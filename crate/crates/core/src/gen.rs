//! Seeded random instance generation, clause-density grids, pool building
//! and hardness-region tagging.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::alpha::Alpha;
use crate::cnf::Formula;
use crate::counter::{count_models_with, CountMethod, CountOptions};
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::solver::{solve, Mode, SolverOptions, Status};

/// Fraction of variables fixed by positive unit facts in 1-3 Horn formulas.
pub const HORN_FACT_DENSITY: Ratio<u64> = Ratio::new_raw(1, 2);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    KSat(u32),
    Horn13,
}

impl Family {
    pub const SAT3: Family = Family::KSat(3);
    pub const SAT2: Family = Family::KSat(2);

    /// Clause width recorded in instance metadata (3 for Horn).
    pub fn k(self) -> u32 {
        match self {
            Family::KSat(k) => k,
            Family::Horn13 => 3,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::KSat(k) => write!(f, "{k}sat"),
            Family::Horn13 => f.write_str("horn13"),
        }
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "horn13" | "horn" | "1-3-horn" => Ok(Family::Horn13),
            other => other
                .strip_suffix("sat")
                .and_then(|k| k.trim_end_matches('-').parse::<u32>().ok())
                .filter(|&k| k >= 1)
                .map(Family::KSat)
                .ok_or_else(|| Error::InvalidSpec(format!("unknown family '{s}'"))),
        }
    }
}

impl Serialize for Family {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Family {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Label {
    Sat,
    Unsat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Region {
    EasyUnder,
    Hard,
    EasyOver,
    Unknown,
}

impl Region {
    pub fn is_hard(self) -> bool {
        self == Region::Hard
    }
}

/// One batch of instances to draw.
#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub family: Family,
    pub n: u32,
    pub alpha: Alpha,
    /// Master seed; per-instance seeds are derived from it.
    pub seed: u64,
    pub count: usize,
}

impl GenSpec {
    /// Number of clauses each instance of this spec has.
    pub fn clause_count(&self) -> Result<u64> {
        match self.family {
            Family::KSat(k) => {
                if !(2..=3).contains(&k) {
                    return Err(Error::InvalidSpec(format!("k must be 2 or 3, got {k}")));
                }
                if k > self.n {
                    return Err(Error::InvalidSpec(format!("k={k} exceeds n={}", self.n)));
                }
                let m = self.alpha.clauses_for(self.n);
                if m == 0 {
                    return Err(Error::InvalidSpec(format!(
                        "alpha={} at n={} yields no clauses",
                        self.alpha, self.n
                    )));
                }
                Ok(m)
            }
            Family::Horn13 => horn_clause_count(self.n, self.alpha),
        }
    }
}

/// A generated formula plus provenance, ground truth and region tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub id: String,
    pub family: Family,
    pub k: u32,
    pub n: u32,
    pub m: usize,
    /// Density actually realised (`m/n` for k-SAT, the 3-clause density for Horn).
    pub alpha: f64,
    pub seed: u64,
    pub label: Label,
    #[serde(default)]
    pub model_count: Option<u64>,
    pub region: Region,
    pub clauses: Vec<Vec<i32>>,
}

impl InstanceRecord {
    pub fn formula(&self) -> Result<Formula> {
        Formula::new(self.n, self.clauses.clone())
    }

    /// Exact density recovered from `(family, n, m)`.
    pub fn alpha_exact(&self) -> Alpha {
        match self.family {
            Family::KSat(_) => Alpha::new(self.m as u64, self.n as u64),
            Family::Horn13 => {
                let facts = horn_fact_count(self.n);
                Alpha::new((self.m as u64).saturating_sub(facts + 1), self.n as u64)
            }
        }
    }

    pub fn is_sat(&self) -> bool {
        self.label == Label::Sat
    }
}

/// `count` clauses over `n` variables; each picks `k` distinct variables
/// uniformly and negates each with probability 1/2. Clauses are drawn
/// independently, so duplicates are possible.
pub fn gen_ksat(n: u32, m: usize, k: u32, seed: u64) -> Result<Formula> {
    if k == 0 || k > n {
        return Err(Error::InvalidSpec(format!("need 1 <= k <= n, got k={k}, n={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clauses = (0..m)
        .map(|_| {
            sample(&mut rng, n as usize, k as usize)
                .into_iter()
                .map(|v| {
                    let var = v as i32 + 1;
                    if rng.gen::<bool>() {
                        var
                    } else {
                        -var
                    }
                })
                .collect()
        })
        .collect();
    Formula::new(n, clauses)
}

fn horn_fact_count(n: u32) -> u64 {
    (HORN_FACT_DENSITY * Ratio::from_integer(n as u64)).to_integer()
}

fn horn_clause_count(n: u32, alpha: Alpha) -> Result<u64> {
    if n < 3 {
        return Err(Error::InvalidSpec(format!("Horn formulas need n >= 3, got {n}")));
    }
    let three = alpha.times_exact(n).ok_or_else(|| {
        Error::InvalidSpec(format!("alpha*n must be integral, got alpha={alpha}, n={n}"))
    })?;
    Ok(three + horn_fact_count(n) + 1)
}

/// 1-3 Horn formula: `floor(n/2)` positive unit facts over distinct
/// variables, one negative goal unit on a non-fact variable, and `alpha*n`
/// definite 3-clauses `(-x | -y | z)` over distinct variables.
pub fn gen_horn13(n: u32, alpha: Alpha, seed: u64) -> Result<Formula> {
    let m = horn_clause_count(n, alpha)?;
    let facts = horn_fact_count(n) as usize;
    let three = m as usize - facts - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let perm = sample(&mut rng, n as usize, n as usize).into_vec();
    let mut clauses: Vec<Vec<i32>> = Vec::with_capacity(m as usize);
    for &v in &perm[..facts] {
        clauses.push(vec![v as i32 + 1]);
    }
    let goal = perm[facts + rng.gen_range(0..n as usize - facts)];
    clauses.push(vec![-(goal as i32 + 1)]);
    for _ in 0..three {
        let vs = sample(&mut rng, n as usize, 3);
        let (x, y, z) = (vs.index(0) as i32 + 1, vs.index(1) as i32 + 1, vs.index(2) as i32 + 1);
        clauses.push(vec![-x, -y, z]);
    }
    Formula::new(n, clauses)
}

/// Densities of the published per-n 3-SAT table: a fine step on `[1, 6]`
/// chosen so `alpha*n` is integral, then integers up to 11.
fn table_step(n: u32) -> Option<Alpha> {
    Some(match n {
        3 | 7 | 9 => Alpha::integer(1),
        4 => Alpha::new(1, 4),
        5 => Alpha::new(1, 5),
        6 => Alpha::new(1, 2),
        8 => Alpha::new(1, 8),
        10 => Alpha::new(1, 10),
        _ => return None,
    })
}

fn stepped(lo: Alpha, hi: Alpha, step: Alpha) -> Vec<Alpha> {
    let mut out = Vec::new();
    let mut a = lo.ratio();
    while a <= hi.ratio() {
        out.push(Alpha::from(a));
        a += step.ratio();
    }
    out
}

/// The per-n density grid. 3-SAT uses the published table for n in 3..=10
/// and a 0.1-step fallback elsewhere; 2-SAT is the same grid truncated to
/// `[1, 10]`; Horn uses the integers 0..=12.
pub fn alpha_grid(n: u32, family: Family) -> Result<Vec<Alpha>> {
    if n < 3 {
        return Err(Error::InvalidSpec(format!("density grids start at n = 3, got {n}")));
    }
    match family {
        Family::KSat(3) => {
            let step = table_step(n).unwrap_or(Alpha::new(1, 10));
            let mut grid = stepped(Alpha::integer(1), Alpha::integer(6), step);
            grid.extend((7..=11).map(Alpha::integer));
            Ok(grid)
        }
        Family::KSat(2) => Ok(alpha_grid(n, Family::SAT3)?
            .into_iter()
            .filter(|a| *a <= Alpha::integer(10))
            .collect()),
        Family::Horn13 => Ok((0..=12).map(Alpha::integer).collect()),
        Family::KSat(k) => Err(Error::InvalidSpec(format!("no density grid for {k}-SAT"))),
    }
}

/// The grid the published k-SAT datasets were actually drawn from: the table
/// without its `alpha = 1` entry (the dataset's densities start above 1).
pub fn dataset_grid(n: u32, family: Family) -> Result<Vec<Alpha>> {
    let grid = alpha_grid(n, family)?;
    Ok(match family {
        Family::KSat(_) => grid.into_iter().filter(|a| *a != Alpha::integer(1)).collect(),
        Family::Horn13 => grid,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    /// The published table.
    Paper,
    /// The table minus `alpha = 1`, matching the published per-n counts.
    Dataset,
}

impl FromStr for GridKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(GridKind::Paper),
            "dataset" => Ok(GridKind::Dataset),
            _ => Err(Error::InvalidSpec(format!("unknown grid '{s}'"))),
        }
    }
}

/// Specs for every `(n, alpha)` of a grid.
pub fn grid_specs(
    family: Family,
    ns: impl IntoIterator<Item = u32>,
    grid: GridKind,
    per_alpha: usize,
    seed: u64,
) -> Result<Vec<GenSpec>> {
    let mut specs = Vec::new();
    for n in ns {
        let alphas = match grid {
            GridKind::Paper => alpha_grid(n, family)?,
            GridKind::Dataset => dataset_grid(n, family)?,
        };
        specs.extend(alphas.into_iter().map(|alpha| GenSpec {
            family,
            n,
            alpha,
            seed,
            count: per_alpha,
        }));
    }
    Ok(specs)
}

/// Counter-mode seed for instance `index` of a spec.
pub fn derive_seed(master: u64, family: Family, n: u32, alpha: Alpha, index: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(format!("{master}|{family}|{n}|{}|{index}", alpha.ratio()).as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

pub fn instance_id(family: Family, n: u32, alpha: Alpha, master: u64, index: usize) -> String {
    format!("{family}-n{n}-a{alpha}-s{master}-{index}")
}

pub fn generate(spec: &GenSpec, index: usize) -> Result<(Formula, u64)> {
    let seed = derive_seed(spec.seed, spec.family, spec.n, spec.alpha, index);
    let formula = match spec.family {
        Family::KSat(k) => gen_ksat(spec.n, spec.clause_count()? as usize, k, seed)?,
        Family::Horn13 => gen_horn13(spec.n, spec.alpha, seed)?,
    };
    Ok((formula, seed))
}

/// Critical densities used to split uniform groups into easy regions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub sat3: f64,
    pub sat2: f64,
    pub horn: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            sat3: 4.267,
            sat2: 1.0,
            horn: 1.4,
        }
    }
}

impl Thresholds {
    pub fn critical(&self, family: Family) -> f64 {
        match family {
            Family::KSat(2) => self.sat2,
            Family::Horn13 => self.horn,
            Family::KSat(_) => self.sat3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PoolOptions {
    /// Instances with `n` above this are left uncounted.
    pub counting_cap_n: u32,
    pub solver: SolverOptions,
    pub thresholds: Thresholds,
    pub exec: Exec,
}

impl Default for PoolOptions {
    fn default() -> Self {
        PoolOptions {
            counting_cap_n: 20,
            solver: SolverOptions::default(),
            thresholds: Thresholds::default(),
            exec: Exec::default(),
        }
    }
}

/// Labels a formula with the DPLL solver and, when `n` is within the cap,
/// counts its models; the two must agree.
pub fn label_formula(formula: &Formula, options: &PoolOptions) -> Result<(Label, Option<u64>)> {
    let out = solve(formula, Mode::Search, &options.solver);
    let label = match out.status {
        Status::Sat => Label::Sat,
        Status::Unsat => Label::Unsat,
        Status::LimitExceeded => {
            return Err(Error::Budget("solver budget exhausted while labeling".into()))
        }
    };
    let count = if formula.num_vars() <= options.counting_cap_n {
        let opts = CountOptions {
            dpll_cap: options.counting_cap_n.max(formula.num_vars()),
            exec: Exec::Sequential,
            ..CountOptions::default()
        };
        let c = count_models_with(formula, CountMethod::CountingDpll, &opts)?.model_count;
        if (c > 0) != (label == Label::Sat) {
            return Err(Error::Analysis(format!(
                "solver label {label:?} disagrees with model count {c}"
            )));
        }
        Some(c)
    } else {
        None
    };
    Ok((label, count))
}

/// Generates, labels, counts and region-tags every instance of `specs`.
/// Output order is `(family, n, alpha, index)` whatever the schedule.
pub fn build_pool(specs: &[GenSpec], options: &PoolOptions) -> Result<Vec<InstanceRecord>> {
    let mut jobs: Vec<(&GenSpec, usize)> = specs
        .iter()
        .flat_map(|s| (0..s.count).map(move |i| (s, i)))
        .collect();
    jobs.sort_by(|a, b| {
        (a.0.family, a.0.n, a.0.alpha, a.1).cmp(&(b.0.family, b.0.n, b.0.alpha, b.1))
    });
    for spec in specs {
        spec.clause_count()?;
    }
    let records = options
        .exec
        .map(&jobs, |&(spec, i)| -> Result<InstanceRecord> {
            let (formula, seed) = generate(spec, i)?;
            let (label, model_count) = label_formula(&formula, options)?;
            let m = formula.num_clauses();
            let alpha = match spec.family {
                Family::KSat(_) => Alpha::new(m as u64, spec.n as u64),
                Family::Horn13 => spec.alpha,
            };
            Ok(InstanceRecord {
                id: instance_id(spec.family, spec.n, spec.alpha, spec.seed, i),
                family: spec.family,
                k: spec.family.k(),
                n: spec.n,
                m,
                alpha: alpha.to_f64(),
                seed,
                label,
                model_count,
                region: Region::Unknown,
                clauses: formula.to_ints(),
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(assign_regions(records, &options.thresholds))
}

/// Tags each `(family, n, alpha)` group: uniform SAT groups are easy on the
/// side of the critical density they fall on, uniform UNSAT groups are
/// over-constrained, and mixed groups are hard.
pub fn assign_regions(mut pool: Vec<InstanceRecord>, thresholds: &Thresholds) -> Vec<InstanceRecord> {
    let mut groups: BTreeMap<(Family, u32, Alpha), (usize, usize)> = BTreeMap::new();
    for r in &pool {
        let e = groups.entry((r.family, r.n, r.alpha_exact())).or_default();
        match r.label {
            Label::Sat => e.0 += 1,
            Label::Unsat => e.1 += 1,
        }
    }
    for r in &mut pool {
        let key = (r.family, r.n, r.alpha_exact());
        r.region = match groups.get(&key) {
            None | Some((0, 0)) => Region::Unknown,
            Some((_, 0)) => {
                if key.2.to_f64() < thresholds.critical(r.family) {
                    Region::EasyUnder
                } else {
                    Region::EasyOver
                }
            }
            Some((0, _)) => Region::EasyOver,
            Some(_) => Region::Hard,
        };
    }
    pool
}
