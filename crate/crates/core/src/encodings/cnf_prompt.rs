use std::sync::OnceLock;

use regex::Regex;

use super::{templates, Claim, Prompt, SubjectAnswer, Task};
use crate::cnf::{Assignment, Formula};

/// `[[-3, 1, -4], [-4, -2, 1]]`.
pub fn format_clauses(formula: &Formula) -> String {
    let clauses: Vec<String> = formula
        .clauses()
        .iter()
        .map(|c| {
            let lits: Vec<String> = c.iter().map(|l| l.value().to_string()).collect();
            format!("[{}]", lits.join(", "))
        })
        .collect();
    format!("[{}]", clauses.join(", "))
}

pub fn encode_cnf_prompt(formula: &Formula) -> Prompt {
    Prompt {
        system: templates::CNF_SYSTEM.to_string(),
        user: templates::fill(templates::CNF_USER, "formula", &format_clauses(formula)),
    }
}

fn py_bool(b: bool) -> &'static str {
    if b {
        "True"
    } else {
        "False"
    }
}

fn dict(a: &Assignment) -> String {
    let body: Vec<String> = a.pairs().map(|(v, b)| format!("{v}: {}", py_bool(b))).collect();
    format!("{{{}}}", body.join(", "))
}

/// A worked clause-by-clause check ending in the `output:` dictionary.
/// `None` renders the empty dictionary.
pub fn render_cnf_solution(formula: &Formula, assignment: Option<&Assignment>) -> String {
    let Some(a) = assignment else {
        return "Every branch of the search ends in a falsified clause, so no satisfying assignment exists.\n\n```python\noutput: {}\n```".to_string();
    };
    let mut out = format!("We try the assignment {}.\n\n", dict(a));
    for c in formula.clauses() {
        let lits: Vec<String> = c.iter().map(|l| l.value().to_string()).collect();
        let line = match c.iter().find(|&l| a.value_of(l) == Some(true)) {
            Some(l) => format!("Clause [{}] is satisfied because {} is True.\n", lits.join(", "), l.value()),
            None => format!("Clause [{}] is not satisfied.\n", lits.join(", ")),
        };
        out.push_str(&line);
    }
    out.push_str(&format!(
        "\nAll clauses are satisfied with our current assignments, so we return:\n\n```python\noutput: {}\n```",
        dict(a)
    ));
    out
}

/// Reads the last `output: {...}` mapping. An empty mapping claims
/// unsatisfiability.
pub fn decode_cnf_answer(text: &str, formula: &Formula, task: Task) -> SubjectAnswer {
    static OUTPUT: OnceLock<Regex> = OnceLock::new();
    static ENTRY: OnceLock<Regex> = OnceLock::new();
    let output = OUTPUT.get_or_init(|| Regex::new(r"output\s*:\s*\{([^{}]*)\}").unwrap());
    let entry = ENTRY.get_or_init(|| {
        Regex::new(r#"^\s*['"]?(-?\d+)['"]?\s*:\s*['"]?(True|False|true|false|TRUE|FALSE|1|0)['"]?\s*$"#).unwrap()
    });

    let Some(body) = output.captures_iter(text).last().and_then(|c| c.get(1)) else {
        return SubjectAnswer::new(task, Claim::Unparseable("no output dictionary".into()), text);
    };
    let body = body.as_str().trim();
    if body.is_empty() {
        return SubjectAnswer::new(task, Claim::UnsatClaim, text);
    }
    let unparseable = |why: String| SubjectAnswer::new(task, Claim::Unparseable(why), text);
    let mut a = Assignment::with_capacity(formula.num_vars());
    for part in body.split(',').filter(|p| !p.trim().is_empty()) {
        let Some(cap) = entry.captures(part) else {
            return unparseable(format!("bad entry '{}'", part.trim()));
        };
        let var: i64 = match cap[1].parse() {
            Ok(v) => v,
            Err(_) => return unparseable(format!("bad variable '{}'", &cap[1])),
        };
        if var < 1 || var > formula.num_vars() as i64 {
            return unparseable(format!("variable {var} out of range"));
        }
        let value = matches!(&cap[2], "True" | "true" | "TRUE" | "1");
        match a.get(var as u32) {
            Some(prev) if prev != value => return unparseable(format!("variable {var} is both True and False")),
            _ => a.set(var as u32, value),
        }
    }
    SubjectAnswer::new(task, Claim::SatWith(a), text)
}
