//! Answer-producing agents evaluated by the harness.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cnf::{Assignment, Formula};
use crate::encodings::{puzzle_seed, render_translation, EncodedInstance, Encoding, Message, MenuPuzzle, Task, TokenUsage};
use crate::error::{Error, Result};
use crate::gen::InstanceRecord;
use crate::llm::{LlmClient, ModelConfig};
use crate::solver::{solve, Mode, SolverOptions, Status};

/// Everything a subject may look at for one instance.
pub struct Query<'a> {
    pub record: &'a InstanceRecord,
    pub encoded: &'a EncodedInstance,
    pub messages: &'a [Message],
    pub task: Task,
}

impl Query<'_> {
    fn input_text(&self) -> String {
        self.messages.iter().map(|m| m.content.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawAnswer {
    pub text: String,
    pub usage: TokenUsage,
    pub latency_ms: u64,
}

impl RawAnswer {
    fn local(query: &Query, text: String) -> Self {
        RawAnswer {
            usage: TokenUsage::estimate(&query.input_text(), &text),
            text,
            latency_ms: 0,
        }
    }
}

pub trait Subject: Send + Sync {
    fn name(&self) -> String;
    fn answer(&self, query: &Query) -> Result<RawAnswer>;
}

/// Solves each instance exactly and renders a correct answer.
#[derive(Debug, Clone, Default)]
pub struct OracleSubject {
    pub solver: SolverOptions,
}

impl Subject for OracleSubject {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn answer(&self, query: &Query) -> Result<RawAnswer> {
        let out = solve(&query.encoded.formula, Mode::Search, &self.solver);
        let text = match out.status {
            Status::Sat => query.encoded.render_answer(out.assignment.as_ref()),
            Status::Unsat => query.encoded.render_answer(None),
            Status::LimitExceeded => return Err(Error::Budget(format!("oracle gave up on {}", query.record.id))),
        };
        Ok(RawAnswer::local(query, text))
    }
}

/// Claims unsatisfiability with probability `p_unsat`, otherwise proposes a
/// uniformly random total assignment. Seeded per instance.
#[derive(Debug, Clone)]
pub struct RandomSubject {
    pub seed: u64,
    pub p_unsat: f64,
}

impl Default for RandomSubject {
    fn default() -> Self {
        RandomSubject { seed: 0, p_unsat: 0.5 }
    }
}

impl Subject for RandomSubject {
    fn name(&self) -> String {
        format!("random(p_unsat={})", self.p_unsat)
    }

    fn answer(&self, query: &Query) -> Result<RawAnswer> {
        let mut rng = ChaCha8Rng::seed_from_u64(puzzle_seed(self.seed, &query.record.id));
        let enc = query.encoded;
        let n = enc.formula.num_vars();
        let text = if enc.encoding == Encoding::Translate {
            let puzzle = enc.puzzle.as_ref().expect("translate instances carry a puzzle");
            random_translation(puzzle, &enc.formula, &mut rng)?
        } else if rng.gen_bool(self.p_unsat.clamp(0.0, 1.0)) {
            enc.render_answer(None)
        } else {
            let a = Assignment::from_pairs((1..=n).map(|v| (v, rng.gen::<bool>())));
            enc.render_answer(Some(&a))
        };
        Ok(RawAnswer::local(query, text))
    }
}

/// A translation of a random formula with the same clause widths.
fn random_translation(puzzle: &MenuPuzzle, formula: &Formula, rng: &mut ChaCha8Rng) -> Result<String> {
    let n = formula.num_vars();
    let clauses = formula
        .clauses()
        .iter()
        .map(|c| {
            rand::seq::index::sample(rng, n as usize, c.len().min(n as usize))
                .into_iter()
                .map(|v| if rng.gen() { v as i32 + 1 } else { -(v as i32 + 1) })
                .collect()
        })
        .collect();
    let shuffled = Formula::new(n, clauses)?;
    let names = puzzle.people.iter().map(|p| p.name.clone()).collect();
    Ok(render_translation(&MenuPuzzle::from_formula(&shuffled, puzzle.items.clone(), names)?))
}

pub struct LlmSubject {
    pub client: LlmClient,
}

impl Subject for LlmSubject {
    fn name(&self) -> String {
        format!("llm:{}", self.client.config().model_name)
    }

    fn answer(&self, query: &Query) -> Result<RawAnswer> {
        let rec = self.client.complete(query.messages)?;
        Ok(RawAnswer {
            text: rec.response_text,
            usage: rec.usage,
            latency_ms: rec.latency_ms,
        })
    }
}

/// `oracle`, `random`, `random:<p_unsat>` or `llm:<config file>`.
pub fn parse_subject(spec: &str, seed: u64) -> Result<Box<dyn Subject>> {
    match spec.split_once(':') {
        None if spec == "oracle" => Ok(Box::new(OracleSubject::default())),
        None if spec == "random" => Ok(Box::new(RandomSubject { seed, ..RandomSubject::default() })),
        Some(("random", p)) => {
            let p_unsat: f64 = p
                .trim_start_matches("p_unsat=")
                .parse()
                .map_err(|_| Error::InvalidSpec(format!("bad random claim probability '{p}'")))?;
            if !(0.0..=1.0).contains(&p_unsat) {
                return Err(Error::InvalidSpec(format!("p_unsat must lie in [0, 1], got {p_unsat}")));
            }
            Ok(Box::new(RandomSubject { seed, p_unsat }))
        }
        Some(("llm", path)) => {
            let config = ModelConfig::load(Path::new(path))?;
            Ok(Box::new(LlmSubject { client: LlmClient::new(config)? }))
        }
        _ => Err(Error::InvalidSpec(format!("unknown subject '{spec}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encodings::{encode_instance, Claim, NamePools};
    use crate::gen::{build_pool, grid_specs, Family, GridKind, PoolOptions};

    #[test]
    fn subject_specs() {
        assert_eq!(parse_subject("oracle", 0).unwrap().name(), "oracle");
        assert_eq!(parse_subject("random:0.25", 0).unwrap().name(), "random(p_unsat=0.25)");
        assert!(parse_subject("random:2", 0).is_err());
        assert!(parse_subject("human", 0).is_err());
        assert!(parse_subject("llm:/nonexistent/config", 0).is_err());
    }

    #[test]
    fn random_answers_are_seeded_and_decode() {
        let specs = grid_specs(Family::SAT3, [5], GridKind::Paper, 1, 2).unwrap();
        let pool = build_pool(&specs, &PoolOptions::default()).unwrap();
        let pools = NamePools::builtin();
        let subject = RandomSubject { seed: 9, p_unsat: 0.5 };
        for encoding in [Encoding::Menu, Encoding::Cnf, Encoding::Translate] {
            for r in &pool {
                let enc = encode_instance(r, encoding, &pools, 0).unwrap();
                let msgs = [Message::new(crate::encodings::Role::User, enc.prompt.user.clone())];
                let q = Query { record: r, encoded: &enc, messages: &msgs, task: Task::Search };
                let a = subject.answer(&q).unwrap();
                assert_eq!(a, subject.answer(&q).unwrap());
                assert!(a.usage.approximate);
                let claim = enc.decode(&a.text, Task::Search).claim;
                assert!(!matches!(claim, Claim::Unparseable(_)), "{encoding}: {claim:?}");
            }
        }
    }
}
