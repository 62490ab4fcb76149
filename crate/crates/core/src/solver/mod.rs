//! Iterative DPLL with unit propagation, pure-literal elimination, MOMS
//! branching and conflict-directed backjumping. No clause learning.
//!
//! Every assignment made during search becomes a node of the optional
//! [`TraceDocument`]: decisions (including the second branch of a flipped
//! decision), unit implications and pure-literal fixes. The node count of an
//! exported trace therefore equals `decisions + unit_propagations +
//! pure_literal_fixes`.

mod state;
mod trace;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cnf::{Assignment, Formula, Literal, Verdict};
use crate::error::{Error, Result};

pub use state::{LevelSet, Propagation, Reason, Resume, SearchState};
pub use trace::{Cause, Leaf, TraceDocument, TraceNode};
use trace::TraceBuilder;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "UPPERCASE")]
pub enum Mode {
    /// Verdict only.
    Decision,
    /// Verdict plus a satisfying total assignment when SAT.
    #[default]
    Search,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Branching {
    /// Maximum occurrences in minimum-size clauses.
    #[default]
    Moms,
    /// Lowest-index variable of any unsatisfied clause, positive first.
    FirstUnassigned,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub pure_literals: bool,
    pub backjumping: bool,
    pub branching: Branching,
    /// Probe both polarities of the top MOMS candidates before branching.
    pub lookahead: bool,
    /// Break MOMS ties uniformly at random instead of by lowest index.
    pub tie_seed: Option<u64>,
    pub trace: bool,
    /// Cap on recorded assignments (decisions + implications).
    pub node_budget: u64,
    pub timeout: Option<Duration>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            pure_literals: true,
            backjumping: true,
            branching: Branching::Moms,
            lookahead: false,
            tie_seed: None,
            trace: false,
            node_budget: 10_000_000,
            timeout: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Sat,
    Unsat,
    LimitExceeded,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveStats {
    pub decisions: u64,
    pub unit_propagations: u64,
    pub pure_literal_fixes: u64,
    pub backtracks: u64,
    pub backjumps: u64,
    pub max_depth: u32,
    #[serde(with = "duration_micros")]
    pub wall_time: Duration,
}

impl SolveStats {
    pub fn nodes(&self) -> u64 {
        self.decisions + self.unit_propagations + self.pure_literal_fixes
    }

    /// Equality ignoring wall time.
    pub fn same_counts(&self, other: &SolveStats) -> bool {
        let strip = |s: &SolveStats| SolveStats {
            wall_time: Duration::ZERO,
            ..s.clone()
        };
        strip(self) == strip(other)
    }
}

mod duration_micros {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_micros() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_micros(u64::deserialize(d)?))
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub status: Status,
    pub assignment: Option<Assignment>,
    pub stats: SolveStats,
    pub trace: Option<TraceDocument>,
}

impl SolveOutcome {
    pub fn is_sat(&self) -> bool {
        self.status == Status::Sat
    }

    pub fn export_trace(&self) -> Result<&TraceDocument> {
        self.trace.as_ref().ok_or(Error::NoTrace)
    }

    pub fn export_trace_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self.export_trace()?)?)
    }
}

/// MOMS: among unsatisfied clauses of minimum current width, the variable
/// with most occurrences; its more frequent polarity first. Ties go to the
/// lowest variable index, then to the positive polarity.
pub fn choose_branch_variable(state: &SearchState) -> Option<(u32, bool)> {
    moms_ranking(state, None).into_iter().next()
}

/// MOMS candidates best-first. With `rng`, equal counts are shuffled.
fn moms_ranking(state: &SearchState, rng: Option<&mut ChaCha8Rng>) -> Vec<(u32, bool)> {
    let Some(min_width) = state.open_clause_widths().map(|(_, w)| w).min() else {
        return Vec::new();
    };
    let n = state.num_vars() as usize;
    let mut pos = vec![0u32; n + 1];
    let mut neg = vec![0u32; n + 1];
    for (c, w) in state.open_clause_widths() {
        if w != min_width {
            continue;
        }
        for lit in state.open_literals(c) {
            if lit.is_positive() {
                pos[lit.var() as usize] += 1;
            } else {
                neg[lit.var() as usize] += 1;
            }
        }
    }
    let mut ranked: Vec<(u32, u32, u64, bool)> = (1..=n)
        .filter(|&v| pos[v] + neg[v] > 0)
        .map(|v| (v as u32, pos[v] + neg[v], 0u64, pos[v] >= neg[v]))
        .collect();
    if let Some(rng) = rng {
        for r in ranked.iter_mut() {
            r.2 = rng.gen();
        }
    }
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)).then(a.0.cmp(&b.0)));
    ranked.into_iter().map(|(v, _, _, p)| (v, p)).collect()
}

fn first_unassigned(state: &SearchState) -> Option<(u32, bool)> {
    state
        .open_clause_widths()
        .flat_map(|(c, _)| state.open_literals(c))
        .map(|l| l.var())
        .min()
        .map(|v| (v, true))
}

/// Probes both polarities of up to `LOOKAHEAD_WIDTH` candidates and prefers
/// the one whose two branches propagate most. A polarity that fails under
/// probing is never tried first.
const LOOKAHEAD_WIDTH: usize = 8;

fn lookahead(state: &mut SearchState, candidates: &[(u32, bool)]) -> Option<(u32, bool)> {
    let mut best: Option<((u32, bool), u64)> = None;
    for &(var, first) in candidates.iter().take(LOOKAHEAD_WIDTH) {
        let mut probe = |pol: bool| -> Option<usize> {
            let mark = state.trail().len();
            state.assume(Literal::from_var(var, pol));
            let (count, res) = state.unit_propagate();
            state.undo_to(mark);
            matches!(res, Propagation::Fixpoint).then_some(count)
        };
        let (t, f) = (probe(true), probe(false));
        let (pol, score) = match (t, f) {
            (None, None) => return Some((var, first)),
            (Some(_), None) => return Some((var, true)),
            (None, Some(_)) => return Some((var, false)),
            (Some(t), Some(f)) => (first, (t as u64 + 1) * (f as u64 + 1)),
        };
        if best.is_none_or(|(_, s)| score > s) {
            best = Some(((var, pol), score));
        }
    }
    best.map(|(c, _)| c)
}

struct Run<'a> {
    options: &'a SolverOptions,
    stats: SolveStats,
    trace: Option<TraceBuilder>,
    /// Trace node of each trail entry.
    trail_nodes: Vec<usize>,
    /// Trace node of each level's current decision.
    decision_nodes: Vec<usize>,
    started: Instant,
    rng: Option<ChaCha8Rng>,
}

impl Run<'_> {
    fn tip(&self) -> Option<usize> {
        self.trail_nodes.last().copied()
    }

    fn record(&mut self, state: &SearchState, from: usize, cause: Cause) {
        let Some(tb) = self.trace.as_mut() else {
            return;
        };
        for &lit in &state.trail()[from..] {
            let parent = self.trail_nodes.last().copied();
            let id = tb.push(parent, lit.var(), lit.is_positive(), cause);
            self.trail_nodes.push(id);
            if cause == Cause::Decision {
                self.decision_nodes.push(id);
            }
        }
    }

    fn over_budget(&self) -> bool {
        if self.stats.nodes() > self.options.node_budget {
            return true;
        }
        match self.options.timeout {
            Some(t) => self.stats.nodes().is_multiple_of(256) && self.started.elapsed() > t,
            None => false,
        }
    }

    fn mark(&mut self, node: Option<usize>, leaf: Leaf) {
        if let Some(tb) = self.trace.as_mut() {
            tb.mark(node, leaf);
        }
    }

    fn choose(&mut self, state: &mut SearchState) -> Option<(u32, bool)> {
        match self.options.branching {
            Branching::FirstUnassigned => first_unassigned(state),
            Branching::Moms => {
                let ranked = moms_ranking(state, self.rng.as_mut());
                if self.options.lookahead {
                    lookahead(state, &ranked)
                } else {
                    ranked.into_iter().next()
                }
            }
        }
    }
}

/// Decides (and in [`Mode::Search`] solves) `formula`.
pub fn solve(formula: &Formula, mode: Mode, options: &SolverOptions) -> SolveOutcome {
    let mut state = SearchState::new(formula);
    let mut run = Run {
        options,
        stats: SolveStats::default(),
        trace: options.trace.then(TraceBuilder::default),
        trail_nodes: Vec::new(),
        decision_nodes: Vec::new(),
        started: Instant::now(),
        rng: options.tie_seed.map(ChaCha8Rng::seed_from_u64),
    };

    let status = loop {
        let from = state.trail().len();
        let (implied, prop) = state.unit_propagate();
        run.stats.unit_propagations += implied as u64;
        run.record(&state, from, Cause::Unit);

        if let Propagation::Conflict(clause) = prop {
            run.mark(run.tip(), Leaf::Conflict);
            run.stats.backtracks += 1;
            let open = state.decisions();
            match state.backtrack(clause, options.backjumping) {
                Resume::Unsat => {
                    mark_skipped(&mut run, &open, 0);
                    break Status::Unsat;
                }
                Resume::Flipped { level, skipped } => {
                    if skipped > 0 {
                        run.stats.backjumps += 1;
                    }
                    mark_skipped(&mut run, &open, level);
                    run.decision_nodes.truncate(level as usize - 1);
                    let keep = state.trail().len() - 1;
                    if run.trace.is_some() {
                        run.trail_nodes.truncate(keep);
                    }
                    run.stats.decisions += 1;
                    run.record(&state, keep, Cause::Decision);
                }
            }
            if run.over_budget() {
                break Status::LimitExceeded;
            }
            continue;
        }

        if options.pure_literals {
            let from = state.trail().len();
            let fixed = state.pure_literal_eliminate();
            run.stats.pure_literal_fixes += fixed.len() as u64;
            run.record(&state, from, Cause::Pure);
        }

        if state.all_satisfied() {
            run.mark(run.tip(), Leaf::Solution);
            break Status::Sat;
        }
        if run.over_budget() {
            break Status::LimitExceeded;
        }

        let (var, polarity) = run
            .choose(&mut state)
            .expect("an unsatisfied clause has an open literal");
        let from = state.trail().len();
        state.decide(Literal::from_var(var, polarity));
        run.stats.decisions += 1;
        run.stats.max_depth = run.stats.max_depth.max(state.decision_level());
        run.record(&state, from, Cause::Decision);
    };

    run.stats.wall_time = run.started.elapsed();
    let assignment = (status == Status::Sat && mode == Mode::Search).then(|| {
        let mut a = state.assignment();
        for v in 1..=formula.num_vars() {
            if a.get(v).is_none() {
                a.set(v, true);
            }
        }
        debug_assert_eq!(formula.evaluate(&a).ok(), Some(Verdict::Satisfied));
        a
    });
    SolveOutcome {
        status,
        assignment,
        stats: run.stats,
        trace: run.trace.map(|t| t.finish()),
    }
}

/// Marks decision nodes above `resume_level` whose second branch was never tried.
fn mark_skipped(run: &mut Run<'_>, open: &[(Literal, bool)], resume_level: u32) {
    if run.trace.is_none() {
        return;
    }
    for (i, &(_, flipped)) in open.iter().enumerate() {
        let level = i as u32 + 1;
        if level > resume_level && !flipped {
            let node = run.decision_nodes.get(i).copied();
            if node.is_some() {
                run.mark(node, Leaf::Unexplored);
            }
        }
    }
}

/// Convenience: SAT/UNSAT via a default search.
pub fn is_satisfiable(formula: &Formula) -> Result<bool> {
    let out = solve(formula, Mode::Decision, &SolverOptions::default());
    match out.status {
        Status::Sat => Ok(true),
        Status::Unsat => Ok(false),
        Status::LimitExceeded => Err(Error::Budget("solver node budget exhausted".into())),
    }
}
