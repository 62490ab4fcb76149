//! Runs a subject over a pool and scores every answer.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::cnf::Assignment;
use crate::encodings::{
    assemble_fewshot, encode_instance, template_versions, Claim, ClaimKind, Encoding, ExampleBank, NamePools,
    SubjectAnswer, Task,
};
use crate::error::{Error, Result};
use crate::gen::{InstanceRecord, Label};
use crate::par::Exec;
use crate::pool;
use crate::subject::{Query, Subject};

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub task: Task,
    pub encoding: Encoding,
    pub shots: usize,
    pub seed: u64,
    /// Evaluate only the first `limit` instances of the pool.
    pub limit: Option<usize>,
    pub exec: Exec,
}

impl ExperimentConfig {
    pub fn new(task: Task, encoding: Encoding) -> Self {
        ExperimentConfig {
            task,
            encoding,
            shots: 0,
            seed: 0,
            limit: None,
            exec: Exec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.encoding == Encoding::Translate && self.task != Task::Search {
            return Err(Error::InvalidSpec("the translate encoding only supports the search task".into()));
        }
        Ok(())
    }
}

/// Decision-task outcome with SAT as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cell {
    TP,
    FP,
    TN,
    FN,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    pub task: Task,
    pub encoding: Encoding,
    pub shots: usize,
    pub subject: String,
    pub correct: bool,
    pub cell: Option<Cell>,
    pub input_tokens: u64,
    pub output_tokens: u64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub tokens_approximate: bool,
    pub latency_ms: u64,
    pub claim_kind: ClaimKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub violated_clause: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Verification {
    pub correct: bool,
    pub cell: Option<Cell>,
    /// First clause without a true literal under a claimed assignment.
    pub violated_clause: Option<usize>,
}

fn first_unsatisfied(record: &InstanceRecord, a: &Assignment) -> Option<usize> {
    record
        .clauses
        .iter()
        .position(|c| !c.iter().any(|&l| a.get(l.unsigned_abs()) == Some(l > 0)))
}

/// Scores a decoded answer against the pool's ground truth.
pub fn verify_answer(record: &InstanceRecord, answer: &SubjectAnswer, task: Task) -> Verification {
    let sat = record.label == Label::Sat;
    let violated_clause = match &answer.claim {
        Claim::SatWith(a) => first_unsatisfied(record, a),
        _ => None,
    };
    match task {
        Task::Search => {
            let correct = match &answer.claim {
                Claim::SatWith(_) => sat && violated_clause.is_none(),
                Claim::UnsatClaim => !sat,
                Claim::Unparseable(_) => false,
            };
            Verification {
                correct,
                cell: None,
                violated_clause,
            }
        }
        Task::Decision => {
            let claims_sat = match &answer.claim {
                Claim::SatWith(_) => Some(true),
                Claim::UnsatClaim => Some(false),
                Claim::Unparseable(_) => None,
            };
            let cell = match (sat, claims_sat) {
                (true, Some(true)) => Cell::TP,
                (true, _) => Cell::FN,
                (false, Some(false)) => Cell::TN,
                (false, _) => Cell::FP,
            };
            Verification {
                correct: matches!(cell, Cell::TP | Cell::TN),
                cell: Some(cell),
                violated_clause,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub task: Task,
    pub encoding: Encoding,
    pub shots: usize,
    pub seed: u64,
    pub subject: String,
    pub pool_digest: String,
    pub pool_size: usize,
    pub evaluated: usize,
    pub accuracy: Option<f64>,
    pub template_versions: BTreeMap<String, String>,
    pub fewshot_policy: String,
    pub window_policy: String,
    pub started_ms: u64,
    pub finished_ms: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

pub const FEWSHOT_POLICY: &str =
    "uniform draw without replacement from the pool's oracle-rendered bank, seeded by (seed, instance id), target excluded";
pub const WINDOW_POLICY: &str =
    "windows over distinct alpha values pooled across n; every instance at a window's alpha values is included";

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<EvalRecord>,
    pub manifest: Manifest,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

/// Scores `subject` on `pool`. Subject failures on single instances are
/// recorded as unparseable answers and the run continues. Records are
/// returned sorted by instance id.
pub fn run_experiment(
    config: &ExperimentConfig,
    pool: &[InstanceRecord],
    subject: &dyn Subject,
    bank: Option<&ExampleBank>,
    names: &NamePools,
) -> Result<RunOutput> {
    config.validate()?;
    let started_ms = now_ms();
    let owned_bank;
    let bank = match bank {
        Some(b) => b,
        None if config.shots > 0 => {
            owned_bank = ExampleBank::from_pool(pool, config.encoding, names, config.seed)?;
            &owned_bank
        }
        None => {
            owned_bank = ExampleBank::default();
            &owned_bank
        }
    };
    let selected = &pool[..config.limit.unwrap_or(pool.len()).min(pool.len())];
    let subject_name = subject.name();
    let results = config.exec.map(selected, |record| -> Result<EvalRecord> {
        let encoded = encode_instance(record, config.encoding, names, config.seed)?;
        let messages = assemble_fewshot(
            &encoded.prompt,
            &record.id,
            config.encoding,
            config.shots,
            bank,
            names,
            config.seed,
        )?;
        let query = Query {
            record,
            encoded: &encoded,
            messages: &messages,
            task: config.task,
        };
        let (answer, latency_ms, error) = match subject.answer(&query) {
            Ok(raw) => {
                let mut a = encoded.decode(&raw.text, config.task);
                a.usage = Some(raw.usage);
                (a, raw.latency_ms, None)
            }
            Err(e) => {
                log::warn!("{}: subject failed: {e}", record.id);
                let a = SubjectAnswer::new(config.task, Claim::Unparseable(e.to_string()), "");
                (a, 0, Some(e.to_string()))
            }
        };
        for w in &answer.warnings {
            log::warn!("{}: {w}", record.id);
        }
        let v = verify_answer(record, &answer, config.task);
        let usage = answer.usage.unwrap_or_default();
        Ok(EvalRecord {
            id: record.id.clone(),
            task: config.task,
            encoding: config.encoding,
            shots: config.shots,
            subject: subject_name.clone(),
            correct: v.correct,
            cell: v.cell,
            input_tokens: usage.input_tokens,
            output_tokens: usage.output_tokens,
            tokens_approximate: usage.approximate,
            latency_ms,
            claim_kind: answer.claim.kind(),
            violated_clause: v.violated_clause,
            error,
        })
    });
    let mut records = results.into_iter().collect::<Result<Vec<_>>>()?;
    records.sort_by(|a, b| a.id.cmp(&b.id));
    let correct = records.iter().filter(|r| r.correct).count();
    let manifest = Manifest {
        task: config.task,
        encoding: config.encoding,
        shots: config.shots,
        seed: config.seed,
        subject: subject_name,
        pool_digest: pool::digest(pool)?,
        pool_size: pool.len(),
        evaluated: records.len(),
        accuracy: (!records.is_empty()).then(|| correct as f64 / records.len() as f64),
        template_versions: template_versions(),
        fewshot_policy: FEWSHOT_POLICY.into(),
        window_policy: WINDOW_POLICY.into(),
        started_ms,
        finished_ms: now_ms(),
        output_dir: None,
    };
    Ok(RunOutput { records, manifest })
}

pub fn overall_accuracy(records: &[EvalRecord]) -> Option<f64> {
    (!records.is_empty()).then(|| records.iter().filter(|r| r.correct).count() as f64 / records.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::gen::{Family, Region};

    fn box_record() -> InstanceRecord {
        let f = fixtures::cnf_box_formula();
        InstanceRecord {
            id: "box".into(),
            family: Family::SAT3,
            k: 3,
            n: 5,
            m: 11,
            alpha: 2.2,
            seed: 0,
            label: Label::Sat,
            model_count: Some(8),
            region: Region::Unknown,
            clauses: f.to_ints(),
        }
    }

    #[test]
    fn search_verification() {
        let r = box_record();
        let good = SubjectAnswer::new(Task::Search, Claim::SatWith(fixtures::cnf_box_assignment()), "");
        assert!(verify_answer(&r, &good, Task::Search).correct);

        // flipping 5 leaves exactly one clause false; flipping 1 leaves four
        for (var, expect_satisfied) in [(5, 10), (1, 7)] {
            let mut flipped = fixtures::cnf_box_assignment();
            flipped.set(var, false);
            let bad = SubjectAnswer::new(Task::Search, Claim::SatWith(flipped.clone()), "");
            let v = verify_answer(&r, &bad, Task::Search);
            assert!(!v.correct);
            let oracle = fixtures::cnf_box_formula().evaluate(&flipped).unwrap();
            assert_eq!(oracle, crate::cnf::Verdict::Violated(v.violated_clause.unwrap()));
            let satisfied = r.clauses.iter().filter(|c| c.iter().any(|&l| flipped.get(l.unsigned_abs()) == Some(l > 0))).count();
            assert_eq!(satisfied, expect_satisfied);
        }

        let unsat = SubjectAnswer::new(Task::Search, Claim::UnsatClaim, "");
        assert!(!verify_answer(&r, &unsat, Task::Search).correct);
        let junk = SubjectAnswer::new(Task::Search, Claim::Unparseable("x".into()), "");
        assert!(!verify_answer(&r, &junk, Task::Search).correct);
    }

    #[test]
    fn partial_assignment_counts_only_if_every_clause_is_hit() {
        let r = box_record();
        let partial = SubjectAnswer::new(Task::Search, Claim::SatWith(Assignment::from_pairs([(1, true), (4, true), (5, true)])), "");
        // every clause contains 1, 4 or 5 positively
        assert!(verify_answer(&r, &partial, Task::Search).correct);
        let thin = SubjectAnswer::new(Task::Search, Claim::SatWith(Assignment::from_pairs([(1, true)])), "");
        assert!(!verify_answer(&r, &thin, Task::Search).correct);
    }

    #[test]
    fn decision_cells() {
        let sat = box_record();
        let unsat = InstanceRecord { label: Label::Unsat, model_count: Some(0), ..box_record() };
        let says = |c: Claim| SubjectAnswer::new(Task::Decision, c, "");
        let yes = says(Claim::SatWith(Assignment::new()));
        let no = says(Claim::UnsatClaim);
        let junk = says(Claim::Unparseable(String::new()));
        let cell = |r: &InstanceRecord, a: &SubjectAnswer| verify_answer(r, a, Task::Decision).cell.unwrap();
        assert_eq!(cell(&sat, &yes), Cell::TP);
        assert_eq!(cell(&sat, &no), Cell::FN);
        assert_eq!(cell(&sat, &junk), Cell::FN);
        assert_eq!(cell(&unsat, &no), Cell::TN);
        assert_eq!(cell(&unsat, &yes), Cell::FP);
        assert_eq!(cell(&unsat, &junk), Cell::FP);
        assert!(verify_answer(&sat, &yes, Task::Decision).correct);
        assert!(!verify_answer(&sat, &junk, Task::Decision).correct);
    }

    #[test]
    fn translate_requires_search() {
        assert!(ExperimentConfig::new(Task::Decision, Encoding::Translate).validate().is_err());
        assert!(ExperimentConfig::new(Task::Search, Encoding::Translate).validate().is_ok());
    }
}
