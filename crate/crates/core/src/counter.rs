//! Exact model counting for desk-scale formulas.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::cnf::Formula;
use crate::error::{Error, Result};
use crate::par::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CountMethod {
    /// Truth-table enumeration of all `2^n` assignments.
    Enum,
    /// DPLL that adds `2^u` whenever a branch satisfies every clause with
    /// `u` variables still unassigned.
    CountingDpll,
}

#[derive(Debug, Clone, Copy)]
pub struct CountOptions {
    pub enum_cap: u32,
    pub dpll_cap: u32,
    pub exec: Exec,
}

impl Default for CountOptions {
    fn default() -> Self {
        CountOptions {
            enum_cap: 26,
            dpll_cap: 40,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CountResult {
    pub model_count: u64,
    pub n: u32,
}

impl CountResult {
    /// `model_count / 2^n`, exact.
    pub fn satisfiability_ratio(&self) -> Ratio<u64> {
        ratio(self.model_count, self.n)
    }
}

/// Hard ceiling so that `2^n` fits the count type.
const MAX_VARS: u32 = 63;

pub(crate) fn ratio(count: u64, n: u32) -> Ratio<u64> {
    Ratio::new(count, 1u64 << n)
}

pub fn count_models(formula: &Formula, method: CountMethod) -> Result<CountResult> {
    count_models_with(formula, method, &CountOptions::default())
}

pub fn count_models_with(
    formula: &Formula,
    method: CountMethod,
    options: &CountOptions,
) -> Result<CountResult> {
    let n = formula.num_vars();
    let cap = match method {
        CountMethod::Enum => options.enum_cap,
        CountMethod::CountingDpll => options.dpll_cap,
    }
    .min(MAX_VARS);
    if n > cap {
        return Err(Error::Budget(format!(
            "{method:?} counting supports n <= {cap}, got n = {n}"
        )));
    }
    let clauses = clause_masks(formula);
    let model_count = match method {
        CountMethod::Enum => enumerate(n, &clauses, options.exec),
        CountMethod::CountingDpll => {
            let all = if n == 0 { 0 } else { u64::MAX >> (64 - n) };
            count_dpll(clauses, all)
        }
    };
    Ok(CountResult { model_count, n })
}

/// (positive-literal mask, negative-literal mask), bit `v-1` for variable `v`.
type Masks = (u64, u64);

fn clause_masks(formula: &Formula) -> Vec<Masks> {
    formula
        .clauses()
        .iter()
        .map(|c| {
            c.iter().fold((0, 0), |(p, q), l| {
                let bit = 1u64 << (l.var() - 1);
                if l.is_positive() {
                    (p | bit, q)
                } else {
                    (p, q | bit)
                }
            })
        })
        // tautologies constrain nothing
        .filter(|&(p, q)| p & q == 0)
        .collect()
}

const ENUM_CHUNK_BITS: u32 = 14;

fn enumerate(n: u32, clauses: &[Masks], exec: Exec) -> u64 {
    let total = 1u64 << n;
    let chunk_bits = ENUM_CHUNK_BITS.min(n);
    let chunks = total >> chunk_bits;
    let count = exec.sum_range(chunks, |chunk| {
        let base = chunk << chunk_bits;
        (base..base + (1u64 << chunk_bits))
            .filter(|&a| clauses.iter().all(|&(p, q)| a & p != 0 || !a & q != 0))
            .count() as u128
    });
    count as u64
}

fn count_dpll(mut clauses: Vec<Masks>, mut free: u64) -> u64 {
    // unit propagation
    loop {
        let mut unit = None;
        for &(p, q) in &clauses {
            match (p | q).count_ones() {
                0 => return 0,
                1 => {
                    unit = Some((p | q, p != 0));
                    break;
                }
                _ => {}
            }
        }
        let Some((bit, value)) = unit else { break };
        free &= !bit;
        clauses = assign(&clauses, bit, value);
    }
    if clauses.is_empty() {
        return 1u64 << free.count_ones();
    }
    if clauses.iter().any(|&(p, q)| p | q == 0) {
        return 0;
    }
    let bit = branch_bit(&clauses);
    let rest = free & !bit;
    count_dpll(assign(&clauses, bit, true), rest) + count_dpll(assign(&clauses, bit, false), rest)
}

/// Most frequent variable among the shortest clauses.
fn branch_bit(clauses: &[Masks]) -> u64 {
    let min = clauses
        .iter()
        .map(|&(p, q)| (p | q).count_ones())
        .min()
        .unwrap_or(0);
    let mut counts = [0u32; 64];
    for &(p, q) in clauses {
        let mut vars = p | q;
        if vars.count_ones() != min {
            continue;
        }
        while vars != 0 {
            counts[vars.trailing_zeros() as usize] += 1;
            vars &= vars - 1;
        }
    }
    let best = (0..64).max_by_key(|&i| (counts[i], std::cmp::Reverse(i))).unwrap_or(0);
    1u64 << best
}

fn assign(clauses: &[Masks], bit: u64, value: bool) -> Vec<Masks> {
    clauses
        .iter()
        .filter(|&&(p, q)| if value { p & bit == 0 } else { q & bit == 0 })
        .map(|&(p, q)| (p & !bit, q & !bit))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use proptest::prelude::*;

    fn f(n: u32, cs: Vec<Vec<i32>>) -> Formula {
        Formula::new(n, cs).unwrap()
    }

    #[test]
    fn small_examples() {
        for method in [CountMethod::Enum, CountMethod::CountingDpll] {
            let r = count_models(&f(2, vec![vec![1, 2]]), method).unwrap();
            assert_eq!(r.model_count, 3);
            assert_eq!(r.satisfiability_ratio(), Ratio::new(3, 4));

            let r = count_models(&f(3, vec![]), method).unwrap();
            assert_eq!(r.model_count, 8);
            assert_eq!(r.satisfiability_ratio(), Ratio::from_integer(1));

            let r = count_models(&f(1, vec![vec![1], vec![-1]]), method).unwrap();
            assert_eq!(r.model_count, 0);
        }
    }

    #[test]
    fn box_formula_golden_count() {
        // Truth-table oracle written independently of the counter.
        let clauses = fixtures::cnf_box_formula().to_ints();
        let oracle = (0u32..32)
            .filter(|bits| {
                clauses.iter().all(|c| {
                    c.iter()
                        .any(|&l| (bits >> (l.unsigned_abs() - 1) & 1 == 1) == (l > 0))
                })
            })
            .count() as u64;
        assert_eq!(oracle, 8);
        for method in [CountMethod::Enum, CountMethod::CountingDpll] {
            assert_eq!(count_models(&fixtures::cnf_box_formula(), method).unwrap().model_count, oracle);
        }
    }

    #[test]
    fn caps_raise_budget_errors() {
        let big = f(27, vec![vec![1]]);
        assert!(matches!(count_models(&big, CountMethod::Enum), Err(Error::Budget(_))));
        assert_eq!(count_models(&big, CountMethod::CountingDpll).unwrap().model_count, 1 << 26);
        let opts = CountOptions { dpll_cap: 12, ..CountOptions::default() };
        assert!(count_models_with(&f(13, vec![]), CountMethod::CountingDpll, &opts).is_err());
    }

    #[test]
    fn sequential_and_parallel_enum_agree() {
        let formula = crate::gen::gen_ksat(18, 60, 3, 4).unwrap();
        let seq = CountOptions { exec: Exec::Sequential, ..CountOptions::default() };
        let par = CountOptions { exec: Exec::Parallel, ..CountOptions::default() };
        assert_eq!(
            count_models_with(&formula, CountMethod::Enum, &seq).unwrap(),
            count_models_with(&formula, CountMethod::Enum, &par).unwrap()
        );
    }

    fn arb_formula() -> impl Strategy<Value = Formula> {
        (1u32..=12).prop_flat_map(|n| {
            let lit = (1..=n as i32, any::<bool>()).prop_map(|(v, s)| if s { v } else { -v });
            proptest::collection::vec(proptest::collection::vec(lit, 1..=3), 0..40)
                .prop_map(move |cs| Formula::new(n, cs).unwrap())
        })
    }

    proptest! {
        #[test]
        fn methods_agree_and_match_solver(formula in arb_formula()) {
            let e = count_models(&formula, CountMethod::Enum).unwrap().model_count;
            let d = count_models(&formula, CountMethod::CountingDpll).unwrap().model_count;
            prop_assert_eq!(e, d);
            prop_assert!(e <= 1 << formula.num_vars());
            prop_assert_eq!(e > 0, crate::solver::is_satisfiable(&formula).unwrap());
        }

        #[test]
        fn adding_a_clause_never_increases_count(
            formula in arb_formula(),
            extra in proptest::collection::vec((1i32..=12, any::<bool>()), 1..=3),
        ) {
            let n = formula.num_vars() as i32;
            let clause: Vec<i32> = extra
                .into_iter()
                .map(|(v, s)| { let v = (v - 1) % n + 1; if s { v } else { -v } })
                .collect();
            let before = count_models(&formula, CountMethod::CountingDpll).unwrap().model_count;
            let after = count_models(&formula.with_clause(clause).unwrap(), CountMethod::CountingDpll)
                .unwrap()
                .model_count;
            prop_assert!(after <= before);
        }
    }
}
