//! Mutable DPLL search state: trail, decision levels and per-clause counters.

use crate::cnf::{Assignment, Formula, Literal};

/// Why a variable holds its value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reason {
    Decision,
    /// Second branch of the decision at this level.
    Flip,
    Unit(usize),
    Pure,
}

/// Outcome of running unit propagation to its fixpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Propagation {
    Fixpoint,
    /// Index of a clause whose literals are all false.
    Conflict(usize),
}

/// Where the search resumes after a conflict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resume {
    /// The untried polarity of the decision at this level was asserted.
    Flipped { level: u32, skipped: u32 },
    Unsat,
}

/// Set of decision levels, one bit per level.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LevelSet(Vec<u64>);

impl LevelSet {
    pub fn insert(&mut self, level: u32) {
        let (w, b) = (level as usize / 64, level % 64);
        if self.0.len() <= w {
            self.0.resize(w + 1, 0);
        }
        self.0[w] |= 1 << b;
    }

    pub fn remove(&mut self, level: u32) {
        let (w, b) = (level as usize / 64, level % 64);
        if let Some(word) = self.0.get_mut(w) {
            *word &= !(1 << b);
        }
    }

    pub fn contains(&self, level: u32) -> bool {
        let (w, b) = (level as usize / 64, level % 64);
        self.0.get(w).is_some_and(|word| word >> b & 1 == 1)
    }

    pub fn union_with(&mut self, other: &LevelSet) {
        if self.0.len() < other.0.len() {
            self.0.resize(other.0.len(), 0);
        }
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a |= b;
        }
    }

    pub fn max(&self) -> Option<u32> {
        self.0
            .iter()
            .enumerate()
            .rev()
            .find(|(_, w)| **w != 0)
            .map(|(i, w)| i as u32 * 64 + 63 - w.leading_zeros())
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|w| *w == 0)
    }

    pub fn levels(&self) -> Vec<u32> {
        (0..self.0.len() as u32 * 64).filter(|l| self.contains(*l)).collect()
    }
}

#[derive(Debug, Clone)]
struct Frame {
    decision: Literal,
    trail_start: usize,
    flipped: bool,
    /// Levels the failed first branch depended on (besides this one).
    carry: LevelSet,
}

#[derive(Debug, Clone)]
pub struct SearchState {
    n: u32,
    clauses: Vec<Vec<Literal>>,
    occurs: Vec<Vec<usize>>,
    values: Vec<Option<bool>>,
    level: Vec<u32>,
    reason: Vec<Reason>,
    sat_count: Vec<u32>,
    false_count: Vec<u32>,
    /// Occurrences of each literal among clauses not yet satisfied.
    active: Vec<u32>,
    open_clauses: usize,
    trail: Vec<Literal>,
    frames: Vec<Frame>,
    pending: Vec<usize>,
    conflict: Option<usize>,
}

impl SearchState {
    pub fn new(formula: &Formula) -> Self {
        let n = formula.num_vars();
        let clauses: Vec<Vec<Literal>> = formula
            .clauses()
            .iter()
            .map(|c| c.literals().to_vec())
            .collect();
        let mut occurs = vec![Vec::new(); 2 * n as usize];
        let mut active = vec![0u32; 2 * n as usize];
        for (ci, c) in clauses.iter().enumerate() {
            for lit in c {
                occurs[lit.code()].push(ci);
                active[lit.code()] += 1;
            }
        }
        let pending = (0..clauses.len()).filter(|&c| clauses[c].len() == 1).collect();
        SearchState {
            n,
            open_clauses: clauses.len(),
            sat_count: vec![0; clauses.len()],
            false_count: vec![0; clauses.len()],
            clauses,
            occurs,
            values: vec![None; n as usize + 1],
            level: vec![0; n as usize + 1],
            reason: vec![Reason::Decision; n as usize + 1],
            active,
            trail: Vec::new(),
            frames: Vec::new(),
            pending,
            conflict: None,
        }
    }

    pub fn num_vars(&self) -> u32 {
        self.n
    }

    pub fn decision_level(&self) -> u32 {
        self.frames.len() as u32
    }

    pub fn trail(&self) -> &[Literal] {
        &self.trail
    }

    pub fn reason(&self, var: u32) -> &Reason {
        &self.reason[var as usize]
    }

    pub fn level_of(&self, var: u32) -> Option<u32> {
        self.values[var as usize].map(|_| self.level[var as usize])
    }

    pub fn value(&self, var: u32) -> Option<bool> {
        self.values[var as usize]
    }

    pub fn lit_value(&self, lit: Literal) -> Option<bool> {
        self.values[lit.var() as usize].map(|v| v == lit.is_positive())
    }

    /// True once every clause has a true literal.
    pub fn all_satisfied(&self) -> bool {
        self.open_clauses == 0
    }

    pub fn assignment(&self) -> Assignment {
        let mut a = Assignment::with_capacity(self.n);
        for lit in &self.trail {
            a.set(lit.var(), lit.is_positive());
        }
        a
    }

    /// Literals of `clause` that are currently unassigned.
    pub fn open_literals(&self, clause: usize) -> impl Iterator<Item = Literal> + '_ {
        self.clauses[clause]
            .iter()
            .copied()
            .filter(|l| self.values[l.var() as usize].is_none())
    }

    /// Unsatisfied clauses paired with their current width.
    pub fn open_clause_widths(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        (0..self.clauses.len())
            .filter(|&c| self.sat_count[c] == 0)
            .map(|c| (c, self.clauses[c].len() as u32 - self.false_count[c]))
    }

    pub fn clause(&self, c: usize) -> &[Literal] {
        &self.clauses[c]
    }

    fn assign(&mut self, lit: Literal, reason: Reason) {
        let var = lit.var() as usize;
        debug_assert!(self.values[var].is_none());
        self.values[var] = Some(lit.is_positive());
        self.level[var] = self.frames.len() as u32;
        self.reason[var] = reason;
        self.trail.push(lit);

        for i in 0..self.occurs[lit.code()].len() {
            let c = self.occurs[lit.code()][i];
            self.sat_count[c] += 1;
            if self.sat_count[c] == 1 {
                self.open_clauses -= 1;
                for l in &self.clauses[c] {
                    self.active[l.code()] -= 1;
                }
            }
        }
        let neg = (!lit).code();
        for i in 0..self.occurs[neg].len() {
            let c = self.occurs[neg][i];
            self.false_count[c] += 1;
            if self.sat_count[c] == 0 {
                let width = self.clauses[c].len() as u32 - self.false_count[c];
                if width == 0 {
                    self.conflict.get_or_insert(c);
                } else if width == 1 {
                    self.pending.push(c);
                }
            }
        }
    }

    fn unassign_last(&mut self) {
        let lit = self.trail.pop().expect("nonempty trail");
        let neg = (!lit).code();
        for i in 0..self.occurs[neg].len() {
            let c = self.occurs[neg][i];
            self.false_count[c] -= 1;
        }
        for i in 0..self.occurs[lit.code()].len() {
            let c = self.occurs[lit.code()][i];
            self.sat_count[c] -= 1;
            if self.sat_count[c] == 0 {
                self.open_clauses += 1;
                for l in &self.clauses[c] {
                    self.active[l.code()] += 1;
                }
            }
        }
        self.values[lit.var() as usize] = None;
    }

    /// Undoes assignments until the trail has `len` entries.
    pub fn undo_to(&mut self, len: usize) {
        while self.trail.len() > len {
            self.unassign_last();
        }
        self.pending.clear();
        self.conflict = None;
    }

    /// Opens a new decision level and asserts `lit`.
    pub fn decide(&mut self, lit: Literal) {
        self.frames.push(Frame {
            decision: lit,
            trail_start: self.trail.len(),
            flipped: false,
            carry: LevelSet::default(),
        });
        self.assign(lit, Reason::Decision);
    }

    /// Asserts `lit` at the current level without opening a new one.
    /// Used for probing; the caller undoes it with [`Self::undo_to`].
    pub fn assume(&mut self, lit: Literal) {
        self.assign(lit, Reason::Decision);
    }

    /// Assigns the open literal of every width-1 clause until none remain
    /// or a clause becomes empty. Returns the number of literals assigned.
    pub fn unit_propagate(&mut self) -> (usize, Propagation) {
        let mut assigned = 0;
        loop {
            if let Some(c) = self.conflict {
                self.pending.clear();
                return (assigned, Propagation::Conflict(c));
            }
            let Some(c) = self.pending.pop() else {
                return (assigned, Propagation::Fixpoint);
            };
            if self.sat_count[c] > 0 {
                continue;
            }
            let width = self.clauses[c].len() as u32 - self.false_count[c];
            match width {
                0 => {
                    self.conflict = Some(c);
                }
                1 => {
                    let lit = self
                        .open_literals(c)
                        .next()
                        .expect("width-1 clause has an open literal");
                    self.assign(lit, Reason::Unit(c));
                    assigned += 1;
                }
                _ => {}
            }
        }
    }

    /// Every unassigned variable occurring with a single polarity among the
    /// unsatisfied clauses is set to that polarity. Returns the literals set.
    pub fn pure_literal_eliminate(&mut self) -> Vec<Literal> {
        let mut fixed = Vec::new();
        loop {
            let before = fixed.len();
            for var in 1..=self.n {
                if self.values[var as usize].is_some() {
                    continue;
                }
                let pos = self.active[Literal::positive(var).code()];
                let neg = self.active[Literal::negative(var).code()];
                let lit = match (pos > 0, neg > 0) {
                    (true, false) => Literal::positive(var),
                    (false, true) => Literal::negative(var),
                    _ => continue,
                };
                self.assign(lit, Reason::Pure);
                fixed.push(lit);
            }
            if fixed.len() == before {
                return fixed;
            }
        }
    }

    /// Decision levels the current conflict depends on, traced through the
    /// reasons of implied literals. Level 0 is never included.
    pub fn conflict_levels(&self, clause: usize) -> LevelSet {
        let mut set = LevelSet::default();
        let mut seen = vec![false; self.n as usize + 1];
        let mut stack: Vec<u32> = self.clauses[clause].iter().map(|l| l.var()).collect();
        while let Some(var) = stack.pop() {
            if std::mem::replace(&mut seen[var as usize], true) {
                continue;
            }
            let lvl = self.level[var as usize];
            if lvl == 0 {
                continue;
            }
            match &self.reason[var as usize] {
                Reason::Decision | Reason::Flip => set.insert(lvl),
                Reason::Unit(c) => stack.extend(
                    self.clauses[*c]
                        .iter()
                        .map(|l| l.var())
                        .filter(|&v| v != var),
                ),
                Reason::Pure => {
                    debug_assert!(false, "pure literal implicated in a conflict");
                    for l in 1..=lvl {
                        set.insert(l);
                    }
                }
            }
        }
        set
    }

    /// Resolves a conflict on `clause`. Chronological mode flips the deepest
    /// untried decision; with backjumping, levels the conflict does not
    /// depend on are skipped.
    pub fn backtrack(&mut self, clause: usize, backjumping: bool) -> Resume {
        let mut levels = if backjumping {
            self.conflict_levels(clause)
        } else {
            LevelSet::default()
        };
        let mut skipped = 0;
        loop {
            let d = self.decision_level();
            if d == 0 {
                self.undo_to(0);
                return Resume::Unsat;
            }
            let frame = self.frames.last().expect("level > 0").clone();
            if backjumping && !levels.contains(d) {
                if !frame.flipped {
                    skipped += 1;
                }
                self.undo_to(frame.trail_start);
                self.frames.pop();
                continue;
            }
            if !frame.flipped {
                levels.remove(d);
                self.undo_to(frame.trail_start);
                let top = self.frames.last_mut().expect("level > 0");
                top.flipped = true;
                top.carry = levels;
                self.assign(!frame.decision, Reason::Flip);
                return Resume::Flipped { level: d, skipped };
            }
            levels.union_with(&frame.carry);
            levels.remove(d);
            self.undo_to(frame.trail_start);
            self.frames.pop();
        }
    }

    /// Decision literal of each open level, outermost first.
    pub fn decisions(&self) -> Vec<(Literal, bool)> {
        self.frames
            .iter()
            .map(|f| {
                if f.flipped {
                    (!f.decision, true)
                } else {
                    (f.decision, false)
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(n: u32, cs: Vec<Vec<i32>>) -> Formula {
        Formula::new(n, cs).unwrap()
    }

    #[test]
    fn chained_units() {
        let mut s = SearchState::new(&f(2, vec![vec![1], vec![-1, 2]]));
        let (count, res) = s.unit_propagate();
        assert_eq!((count, res), (2, Propagation::Fixpoint));
        assert_eq!(s.value(1), Some(true));
        assert_eq!(s.value(2), Some(true));
    }

    #[test]
    fn complementary_units_conflict() {
        let mut s = SearchState::new(&f(1, vec![vec![1], vec![-1]]));
        assert!(matches!(s.unit_propagate().1, Propagation::Conflict(_)));
        assert_eq!(s.backtrack(1, false), Resume::Unsat);
    }

    #[test]
    fn pure_literal_examples() {
        let mut s = SearchState::new(&f(2, vec![vec![1, 2], vec![1, -2]]));
        let fixed = s.pure_literal_eliminate();
        assert_eq!(fixed, vec![Literal::positive(1)]);
        assert!(s.all_satisfied());

        let mut s = SearchState::new(&f(2, vec![vec![1, 2], vec![-1, -2]]));
        assert!(s.pure_literal_eliminate().is_empty());
        assert!(s.trail().is_empty());
    }

    #[test]
    fn undo_restores_counters() {
        let formula = crate::fixtures::cnf_box_formula();
        let mut s = SearchState::new(&formula);
        let fresh = s.clone();
        s.decide(Literal::negative(1));
        s.unit_propagate();
        s.pure_literal_eliminate();
        s.undo_to(0);
        assert_eq!(s.sat_count, fresh.sat_count);
        assert_eq!(s.false_count, fresh.false_count);
        assert_eq!(s.active, fresh.active);
        assert_eq!(s.open_clauses, fresh.open_clauses);
    }

    #[test]
    fn level_set_ops() {
        let mut a = LevelSet::default();
        a.insert(2);
        a.insert(70);
        assert_eq!(a.max(), Some(70));
        a.remove(70);
        assert_eq!(a.max(), Some(2));
        let mut b = LevelSet::default();
        b.insert(5);
        a.union_with(&b);
        assert_eq!(a.levels(), vec![2, 5]);
    }
}
