use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{encode_instance, puzzle_seed, worked_solution, Encoding, Message, NamePools, Prompt, Role};
use crate::error::{Error, Result};
use crate::gen::InstanceRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankExample {
    pub instance: InstanceRecord,
    pub worked_solution_text: String,
}

/// Worked examples available for in-context demonstrations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExampleBank {
    pub examples: Vec<BankExample>,
}

impl ExampleBank {
    /// Solves every record and renders its worked solution in `encoding`,
    /// using the same puzzle seeds as the evaluated prompts.
    pub fn from_pool(pool: &[InstanceRecord], encoding: Encoding, pools: &NamePools, seed: u64) -> Result<Self> {
        let examples = pool
            .iter()
            .map(|r| {
                let enc = encode_instance(r, encoding, pools, seed)?;
                Ok(BankExample {
                    instance: r.clone(),
                    worked_solution_text: worked_solution(&enc)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(ExampleBank { examples })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let examples = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<std::result::Result<_, _>>()?;
        Ok(ExampleBank { examples })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for e in &self.examples {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Draws `shots` examples uniformly without replacement, never the target.
    pub fn select(&self, shots: usize, target_id: &str, seed: u64) -> Result<Vec<&BankExample>> {
        let candidates: Vec<&BankExample> = self.examples.iter().filter(|e| e.instance.id != target_id).collect();
        if candidates.len() < shots {
            return Err(Error::InvalidSpec(format!(
                "example bank has {} usable examples, {shots} shots requested",
                candidates.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(puzzle_seed(seed, target_id));
        Ok(sample(&mut rng, candidates.len(), shots).into_iter().map(|i| candidates[i]).collect())
    }
}

/// `[system, (user, assistant) x shots, user]`.
pub fn assemble_fewshot(
    target: &Prompt,
    target_id: &str,
    encoding: Encoding,
    shots: usize,
    bank: &ExampleBank,
    pools: &NamePools,
    seed: u64,
) -> Result<Vec<Message>> {
    let mut messages = vec![Message::new(Role::System, target.system.clone())];
    if shots > 0 {
        for ex in bank.select(shots, target_id, seed)? {
            let enc = encode_instance(&ex.instance, encoding, pools, seed)?;
            messages.push(Message::new(Role::User, enc.prompt.user));
            messages.push(Message::new(Role::Assistant, ex.worked_solution_text.clone()));
        }
    }
    messages.push(Message::new(Role::User, target.user.clone()));
    Ok(messages)
}
