//! Prompt encodings of formulas and decoders for subject answers.
//!
//! Three framings are supported: a menu puzzle where variables are food
//! items and clauses are people's preferences, the raw clause list, and a
//! translation task where the subject rewrites a menu puzzle as CNF.

mod cnf_prompt;
mod fewshot;
mod menu;
mod translate;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cnf::{Assignment, Formula};
use crate::error::{Error, Result};
use crate::gen::InstanceRecord;
use crate::solver::{solve, Mode, SolverOptions, Status};

pub use cnf_prompt::{decode_cnf_answer, encode_cnf_prompt, format_clauses, render_cnf_solution};
pub use fewshot::{assemble_fewshot, BankExample, ExampleBank};
pub use menu::{decode_menu_answer, encode_menu, render_menu_solution, MenuPuzzle, Person};
pub use translate::{decode_translate_cnf, encode_translate_prompt, render_translation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Task {
    Decision,
    Search,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Encoding {
    Menu,
    Cnf,
    Translate,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Decision => "decision",
            Task::Search => "search",
        })
    }
}

impl FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "decision" => Ok(Task::Decision),
            "search" => Ok(Task::Search),
            _ => Err(Error::InvalidSpec(format!("unknown task '{s}'"))),
        }
    }
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Encoding::Menu => "menu",
            Encoding::Cnf => "cnf",
            Encoding::Translate => "translate",
        })
    }
}

impl FromStr for Encoding {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "menu" => Ok(Encoding::Menu),
            "cnf" => Ok(Encoding::Cnf),
            "translate" => Ok(Encoding::Translate),
            _ => Err(Error::InvalidSpec(format!("unknown encoding '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        Message {
            role,
            content: content.into(),
        }
    }
}

/// A system message plus the problem statement for one instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub system: String,
    pub user: String,
}

impl Prompt {
    pub fn text(&self) -> String {
        format!("{}\n\n{}", self.system, self.user)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenUsage {
    pub input_tokens: u64,
    pub output_tokens: u64,
    /// Counts were estimated from byte lengths rather than reported.
    #[serde(default)]
    pub approximate: bool,
}

impl TokenUsage {
    pub fn estimate(input: &str, output: &str) -> Self {
        TokenUsage {
            input_tokens: approx_tokens(input),
            output_tokens: approx_tokens(output),
            approximate: true,
        }
    }
}

/// `ceil(bytes / 4)`.
pub fn approx_tokens(text: &str) -> u64 {
    (text.len() as u64).div_ceil(4)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Claim {
    SatWith(Assignment),
    UnsatClaim,
    Unparseable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ClaimKind {
    SatWith,
    UnsatClaim,
    Unparseable,
}

impl Claim {
    pub fn kind(&self) -> ClaimKind {
        match self {
            Claim::SatWith(_) => ClaimKind::SatWith,
            Claim::UnsatClaim => ClaimKind::UnsatClaim,
            Claim::Unparseable(_) => ClaimKind::Unparseable,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectAnswer {
    pub task: Task,
    pub claim: Claim,
    pub raw_text: String,
    pub usage: Option<TokenUsage>,
    /// Non-fatal decoding issues such as unknown item names.
    pub warnings: Vec<String>,
}

impl SubjectAnswer {
    pub fn new(task: Task, claim: Claim, raw_text: impl Into<String>) -> Self {
        SubjectAnswer {
            task,
            claim,
            raw_text: raw_text.into(),
            usage: None,
            warnings: Vec::new(),
        }
    }
}

/// Versioned prompt templates.
pub mod templates {
    pub const VERSION: &str = "v1";
    pub const MENU_SYSTEM: &str = include_str!("../../templates/menu_system.txt");
    pub const MENU_USER: &str = include_str!("../../templates/menu_user.txt");
    pub const CNF_SYSTEM: &str = include_str!("../../templates/cnf_system.txt");
    pub const CNF_USER: &str = include_str!("../../templates/cnf_user.txt");
    pub const TRANSLATE_SYSTEM: &str = include_str!("../../templates/translate_system.txt");
    pub const TRANSLATE_USER: &str = include_str!("../../templates/translate_user.txt");

    pub const ALL: [(&str, &str); 6] = [
        ("menu_system", MENU_SYSTEM),
        ("menu_user", MENU_USER),
        ("cnf_system", CNF_SYSTEM),
        ("cnf_user", CNF_USER),
        ("translate_system", TRANSLATE_SYSTEM),
        ("translate_user", TRANSLATE_USER),
    ];

    pub fn fill(template: &str, key: &str, value: &str) -> String {
        template.replace(&format!("{{{{{key}}}}}"), value)
    }
}

/// `name -> "<version>:<sha256 prefix>"` for every template.
pub fn template_versions() -> BTreeMap<String, String> {
    templates::ALL
        .iter()
        .map(|(name, text)| {
            let h = hex::encode(Sha256::digest(text.as_bytes()));
            (name.to_string(), format!("{}:{}", templates::VERSION, &h[..12]))
        })
        .collect()
}

/// Person names and food items that menu puzzles draw from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamePools {
    pub names: Vec<String>,
    pub items: Vec<String>,
}

impl NamePools {
    pub fn builtin() -> Self {
        let lines = |s: &str| s.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
        NamePools {
            names: lines(include_str!("../../data/names.txt")),
            items: lines(include_str!("../../data/foods.txt")),
        }
    }
}

impl Default for NamePools {
    fn default() -> Self {
        NamePools::builtin()
    }
}

/// Seed for an instance's puzzle rendering, independent of evaluation order.
pub fn puzzle_seed(master: u64, id: &str) -> u64 {
    let digest = Sha256::digest(format!("{master}|{id}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// One pool record rendered in one encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedInstance {
    pub id: String,
    pub encoding: Encoding,
    pub formula: Formula,
    pub puzzle: Option<MenuPuzzle>,
    pub prompt: Prompt,
}

pub fn encode_instance(
    record: &InstanceRecord,
    encoding: Encoding,
    pools: &NamePools,
    seed: u64,
) -> Result<EncodedInstance> {
    let formula = record.formula()?;
    let (puzzle, prompt) = match encoding {
        Encoding::Cnf => (None, encode_cnf_prompt(&formula)),
        Encoding::Menu | Encoding::Translate => {
            let (puzzle, prompt) = encode_menu(&formula, pools, puzzle_seed(seed, &record.id))?;
            let prompt = if encoding == Encoding::Translate {
                encode_translate_prompt(&puzzle)
            } else {
                prompt
            };
            (Some(puzzle), prompt)
        }
    };
    Ok(EncodedInstance {
        id: record.id.clone(),
        encoding,
        formula,
        puzzle,
        prompt,
    })
}

impl EncodedInstance {
    fn puzzle(&self) -> &MenuPuzzle {
        self.puzzle.as_ref().expect("menu encodings carry a puzzle")
    }

    /// Renders an answer claiming `assignment`, or unsatisfiability for `None`.
    /// Translation answers always render the faithful translation.
    pub fn render_answer(&self, assignment: Option<&Assignment>) -> String {
        match self.encoding {
            Encoding::Menu => render_menu_solution(self.puzzle(), assignment),
            Encoding::Cnf => render_cnf_solution(&self.formula, assignment),
            Encoding::Translate => render_translation(self.puzzle()),
        }
    }

    /// Decodes raw subject text. Translations are solved in-process and the
    /// solver's verdict becomes the claim.
    pub fn decode(&self, text: &str, task: Task) -> SubjectAnswer {
        match self.encoding {
            Encoding::Menu => decode_menu_answer(text, self.puzzle(), task),
            Encoding::Cnf => decode_cnf_answer(text, &self.formula, task),
            Encoding::Translate => {
                let claim = match decode_translate_cnf(text, self.puzzle()) {
                    Err(e) => Claim::Unparseable(e.to_string()),
                    Ok(f) => {
                        let out = solve(&f, Mode::Search, &SolverOptions::default());
                        match out.status {
                            Status::Sat => Claim::SatWith(out.assignment.unwrap_or_default()),
                            Status::Unsat => Claim::UnsatClaim,
                            Status::LimitExceeded => Claim::Unparseable("solver budget exhausted".into()),
                        }
                    }
                };
                SubjectAnswer::new(task, claim, text)
            }
        }
    }
}

/// The oracle's worked solution for an encoded instance.
pub fn worked_solution(enc: &EncodedInstance) -> Result<String> {
    let out = solve(&enc.formula, Mode::Search, &SolverOptions::default());
    match out.status {
        Status::Sat => Ok(enc.render_answer(out.assignment.as_ref())),
        Status::Unsat => Ok(enc.render_answer(None)),
        Status::LimitExceeded => Err(Error::Budget(format!("solver budget exhausted on {}", enc.id))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn builtin_pools_are_large_and_clean() {
        let p = NamePools::builtin();
        assert!(p.items.len() >= 200 && p.names.len() >= 110);
        let items: HashSet<_> = p.items.iter().collect();
        let names: HashSet<_> = p.names.iter().collect();
        assert_eq!(items.len(), p.items.len());
        assert_eq!(names.len(), p.names.len());
        assert!(items.iter().all(|i| !names.contains(i)));
        for s in p.items.iter().chain(&p.names) {
            assert!(s.chars().all(|c| c.is_alphanumeric()), "{s}");
        }
    }

    #[test]
    fn templates_are_versioned() {
        let v = template_versions();
        assert_eq!(v.len(), 6);
        assert!(v.values().all(|s| s.starts_with("v1:")));
        assert!(templates::MENU_SYSTEM.contains("output empty lists for both"));
        assert!(templates::CNF_SYSTEM.contains("you MUST output an EMPTY dictionary"));
        assert_eq!(templates::fill(templates::CNF_USER, "formula", "[[1]]"), "Formula: [[1]]");
    }

    #[test]
    fn token_estimate_rounds_up() {
        assert_eq!(approx_tokens(""), 0);
        assert_eq!(approx_tokens("abcde"), 2);
        assert!(TokenUsage::estimate("abcd", "").approximate);
    }
}
