//! Random SAT phase-transition laboratory.
//!
//! Generates seeded random 3-SAT, 2-SAT and 1-3 Horn-SAT instances across
//! clause-density grids, decides and counts them exactly, renders them as
//! natural-language menu puzzles or CNF prompts, and scores the answers of
//! reasoning subjects (an oracle solver, a random baseline or a hosted
//! language model behind a chat-completions endpoint).

pub mod alpha;
pub mod analysis;
pub mod cnf;
pub mod counter;
pub mod dimacs;
pub mod encodings;
pub mod error;
pub mod fixtures;
pub mod gen;
pub mod harness;
pub mod llm;
pub mod par;
pub mod pool;
pub mod profile;
pub mod solver;
pub mod subject;

pub use alpha::Alpha;
pub use cnf::{Assignment, Clause, Formula, Literal, Verdict};
pub use error::{Error, Result};
pub use par::Exec;
