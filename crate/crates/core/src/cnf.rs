//! CNF formulas over integer variables, truth assignments and their evaluation.

use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A signed, nonzero literal: `|value|` is the variable, the sign its polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i32", into = "i32")]
pub struct Literal(i32);

impl Literal {
    pub fn new(value: i32) -> Result<Self> {
        if value == 0 || value == i32::MIN {
            return Err(Error::MalformedFormula(format!("invalid literal {value}")));
        }
        Ok(Literal(value))
    }

    pub fn positive(var: u32) -> Self {
        Literal(var as i32)
    }

    pub fn negative(var: u32) -> Self {
        Literal(-(var as i32))
    }

    pub fn from_var(var: u32, polarity: bool) -> Self {
        if polarity {
            Self::positive(var)
        } else {
            Self::negative(var)
        }
    }

    pub fn var(self) -> u32 {
        self.0.unsigned_abs()
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    pub fn value(self) -> i32 {
        self.0
    }

    /// Dense index: `2*(var-1)` for the positive literal, `+1` for the negative.
    pub fn code(self) -> usize {
        2 * (self.var() as usize - 1) + usize::from(!self.is_positive())
    }
}

impl std::ops::Not for Literal {
    type Output = Literal;
    fn not(self) -> Literal {
        Literal(-self.0)
    }
}

impl TryFrom<i32> for Literal {
    type Error = Error;
    fn try_from(value: i32) -> Result<Self> {
        Literal::new(value)
    }
}

impl From<Literal> for i32 {
    fn from(lit: Literal) -> i32 {
        lit.0
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A disjunction of literals.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct Clause(Vec<Literal>);

impl Clause {
    pub fn new(literals: Vec<Literal>) -> Self {
        Clause(literals)
    }

    pub fn literals(&self) -> &[Literal] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = Literal> + '_ {
        self.0.iter().copied()
    }

    pub fn to_ints(&self) -> Vec<i32> {
        self.0.iter().map(|l| l.value()).collect()
    }
}

impl FromIterator<Literal> for Clause {
    fn from_iter<I: IntoIterator<Item = Literal>>(iter: I) -> Self {
        Clause(iter.into_iter().collect())
    }
}

/// Conjunction of clauses over variables `1..=n`. Duplicate clauses are kept.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Formula {
    n: u32,
    clauses: Vec<Clause>,
}

#[derive(Deserialize)]
struct RawFormula {
    n: u32,
    clauses: Vec<Vec<i32>>,
}

impl<'de> Deserialize<'de> for Formula {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawFormula::deserialize(d)?;
        Formula::new(raw.n, raw.clauses).map_err(serde::de::Error::custom)
    }
}

impl Formula {
    /// Builds a formula from signed-integer clauses, validating every literal.
    pub fn new(n: u32, clauses: Vec<Vec<i32>>) -> Result<Self> {
        let clauses = clauses
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                if c.is_empty() {
                    return Err(Error::MalformedFormula(format!("clause {i} is empty")));
                }
                c.into_iter()
                    .map(|v| {
                        let lit = Literal::new(v)?;
                        if lit.var() > n {
                            return Err(Error::MalformedFormula(format!(
                                "clause {i}: literal {v} references a variable above n={n}"
                            )));
                        }
                        Ok(lit)
                    })
                    .collect::<Result<Clause>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Formula { n, clauses })
    }

    /// Builds a formula from clauses already known to be in range. Empty
    /// clauses are allowed here; they mark a conflict in reduced formulas.
    pub(crate) fn from_parts(n: u32, clauses: Vec<Clause>) -> Self {
        debug_assert!(clauses.iter().flat_map(|c| c.iter()).all(|l| l.var() <= n));
        Formula { n, clauses }
    }

    pub fn num_vars(&self) -> u32 {
        self.n
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    /// Clause density `m/n` as an exact rational.
    pub fn alpha(&self) -> Ratio<u64> {
        Ratio::new(self.clauses.len() as u64, self.n.max(1) as u64)
    }

    pub fn to_ints(&self) -> Vec<Vec<i32>> {
        self.clauses.iter().map(Clause::to_ints).collect()
    }

    pub fn has_empty_clause(&self) -> bool {
        self.clauses.iter().any(Clause::is_empty)
    }

    /// Returns the formula with one more clause appended.
    pub fn with_clause(&self, clause: Vec<i32>) -> Result<Self> {
        let mut ints = self.to_ints();
        ints.push(clause);
        Formula::new(self.n, ints)
    }

    /// Classifies the formula under `assignment`.
    pub fn evaluate(&self, assignment: &Assignment) -> Result<Verdict> {
        if let Some(v) = assignment.max_assigned_var() {
            if v > self.n {
                return Err(Error::MalformedFormula(format!(
                    "assignment references variable {v} above n={}",
                    self.n
                )));
            }
        }
        let mut undetermined = false;
        for (i, clause) in self.clauses.iter().enumerate() {
            let mut open = false;
            let mut sat = false;
            for lit in clause.iter() {
                match assignment.value_of(lit) {
                    Some(true) => {
                        sat = true;
                        break;
                    }
                    Some(false) => {}
                    None => open = true,
                }
            }
            if sat {
                continue;
            }
            if open {
                undetermined = true;
            } else {
                return Ok(Verdict::Violated(i));
            }
        }
        Ok(if undetermined {
            Verdict::Undetermined
        } else {
            Verdict::Satisfied
        })
    }

    /// Drops clauses satisfied by `assignment` and deletes falsified literals.
    /// An empty clause in the result signals a conflict.
    pub fn reduce(&self, assignment: &Assignment) -> Formula {
        let clauses = self
            .clauses
            .iter()
            .filter(|c| !c.iter().any(|l| assignment.value_of(l) == Some(true)))
            .map(|c| {
                c.iter()
                    .filter(|&l| assignment.value_of(l).is_none())
                    .collect::<Clause>()
            })
            .collect();
        Formula::from_parts(self.n, clauses)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Satisfied,
    /// Index of the lowest clause whose literals are all false.
    Violated(usize),
    Undetermined,
}

/// Partial map from variables to truth values.
#[derive(Debug, Clone, Default)]
pub struct Assignment {
    values: Vec<Option<bool>>,
}

impl PartialEq for Assignment {
    fn eq(&self, other: &Self) -> bool {
        self.pairs().eq(other.pairs())
    }
}

impl Eq for Assignment {}

impl std::hash::Hash for Assignment {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        for p in self.pairs() {
            p.hash(state);
        }
    }
}

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: u32) -> Self {
        Assignment {
            values: vec![None; n as usize + 1],
        }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, bool)>) -> Self {
        let mut a = Assignment::new();
        for (v, b) in pairs {
            a.set(v, b);
        }
        a
    }

    /// Builds an assignment from the literals that should be true.
    pub fn from_literals(lits: impl IntoIterator<Item = Literal>) -> Self {
        Self::from_pairs(lits.into_iter().map(|l| (l.var(), l.is_positive())))
    }

    pub fn set(&mut self, var: u32, value: bool) {
        assert!(var > 0, "variable indices start at 1");
        let idx = var as usize;
        if self.values.len() <= idx {
            self.values.resize(idx + 1, None);
        }
        self.values[idx] = Some(value);
    }

    pub fn unset(&mut self, var: u32) {
        if let Some(slot) = self.values.get_mut(var as usize) {
            *slot = None;
        }
    }

    pub fn get(&self, var: u32) -> Option<bool> {
        self.values.get(var as usize).copied().flatten()
    }

    pub fn value_of(&self, lit: Literal) -> Option<bool> {
        self.get(lit.var()).map(|v| v == lit.is_positive())
    }

    pub fn len(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_total(&self, n: u32) -> bool {
        (1..=n).all(|v| self.get(v).is_some())
    }

    pub fn max_assigned_var(&self) -> Option<u32> {
        self.values.iter().rposition(|v| v.is_some()).map(|i| i as u32)
    }

    /// Assigned `(variable, value)` pairs in ascending variable order.
    pub fn pairs(&self) -> impl Iterator<Item = (u32, bool)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|b| (i as u32, b)))
    }

    /// Literals made true by this assignment, ascending by variable.
    pub fn literals(&self) -> Vec<Literal> {
        self.pairs().map(|(v, b)| Literal::from_var(v, b)).collect()
    }
}

impl Serialize for Assignment {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = s.serialize_map(Some(self.len()))?;
        for (v, b) in self.pairs() {
            map.serialize_entry(&v.to_string(), &b)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for Assignment {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let map = std::collections::BTreeMap::<String, bool>::deserialize(d)?;
        let mut a = Assignment::new();
        for (k, b) in map {
            let v: u32 = k.parse().map_err(serde::de::Error::custom)?;
            if v == 0 {
                return Err(serde::de::Error::custom("variable 0 in assignment"));
            }
            a.set(v, b);
        }
        Ok(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use proptest::prelude::*;

    #[test]
    fn box_assignment_satisfies() {
        let a = Assignment::from_pairs([(1, true), (2, true), (3, false), (4, true), (5, true)]);
        assert_eq!(fixtures::cnf_box_formula().evaluate(&a).unwrap(), Verdict::Satisfied);
    }

    #[test]
    fn unassigned_unit_is_undetermined() {
        let f = Formula::new(1, vec![vec![1]]).unwrap();
        assert_eq!(f.evaluate(&Assignment::new()).unwrap(), Verdict::Undetermined);
    }

    #[test]
    fn complementary_units_violate_second() {
        let f = Formula::new(1, vec![vec![1], vec![-1]]).unwrap();
        let a = Assignment::from_pairs([(1, true)]);
        assert_eq!(f.evaluate(&a).unwrap(), Verdict::Violated(1));
    }

    #[test]
    fn out_of_range_literal_is_malformed() {
        assert!(matches!(
            Formula::new(2, vec![vec![1, 3]]),
            Err(Error::MalformedFormula(_))
        ));
        let f = Formula::new(2, vec![vec![1, 2]]).unwrap();
        let a = Assignment::from_pairs([(3, true)]);
        assert!(f.evaluate(&a).is_err());
    }

    #[test]
    fn reduce_examples() {
        let f = Formula::new(3, vec![vec![1, 2], vec![-1, 3]]).unwrap();
        let r = f.reduce(&Assignment::from_pairs([(1, true)]));
        assert_eq!(r.to_ints(), vec![vec![3]]);

        let f = Formula::new(1, vec![vec![1], vec![-1]]).unwrap();
        assert!(f.reduce(&Assignment::from_pairs([(1, true)])).has_empty_clause());
    }

    #[test]
    fn reduce_box_formula_on_first_variable() {
        // Oracle: filter by direct membership of literal 1, strip literal -1.
        let f = fixtures::cnf_box_formula();
        let oracle: Vec<Vec<i32>> = f
            .to_ints()
            .into_iter()
            .filter(|c| !c.contains(&1))
            .map(|c| c.into_iter().filter(|&l| l != -1).collect())
            .collect();
        assert_eq!(oracle, vec![vec![-4, 5], vec![-5, 4, 2], vec![4, -3], vec![-2, 5, -3]]);
        let r = f.reduce(&Assignment::from_pairs([(1, true)]));
        assert_eq!(r.to_ints(), oracle);
    }

    fn arb_formula() -> impl Strategy<Value = Formula> {
        (1u32..8).prop_flat_map(|n| {
            let lit = (1..=n as i32, any::<bool>()).prop_map(|(v, s)| if s { v } else { -v });
            proptest::collection::vec(proptest::collection::vec(lit, 1..4), 0..12)
                .prop_map(move |cs| Formula::new(n, cs).unwrap())
        })
    }

    proptest! {
        #[test]
        fn reduce_never_grows(f in arb_formula(), bits in any::<u32>(), mask in any::<u32>()) {
            let a = Assignment::from_pairs(
                (1..=f.num_vars()).filter(|v| mask >> v & 1 == 1).map(|v| (v, bits >> v & 1 == 1)),
            );
            let r = f.reduce(&a);
            prop_assert!(r.num_clauses() <= f.num_clauses());
            let max_w = |g: &Formula| g.clauses().iter().map(Clause::len).max().unwrap_or(0);
            prop_assert!(max_w(&r) <= max_w(&f));
            for c in r.clauses() {
                for l in c.iter() {
                    prop_assert!(a.get(l.var()).is_none());
                }
            }
        }

        #[test]
        fn satisfied_means_every_clause_has_true_literal(f in arb_formula(), bits in any::<u32>()) {
            let a = Assignment::from_pairs((1..=f.num_vars()).map(|v| (v, bits >> v & 1 == 1)));
            let direct = f.clauses().iter().all(|c| c.iter().any(|l| a.value_of(l) == Some(true)));
            prop_assert_eq!(f.evaluate(&a).unwrap() == Verdict::Satisfied, direct);
        }
    }
}
