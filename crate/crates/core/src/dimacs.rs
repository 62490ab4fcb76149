//! DIMACS CNF reading and writing.

use std::fmt::Write as _;

use crate::cnf::Formula;
use crate::error::{Error, Result};

/// Generation metadata written as a `c seed=.. k=.. alpha=..` comment line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Provenance {
    pub seed: u64,
    pub k: u32,
    pub alpha: f64,
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Dimacs {
        line,
        message: message.into(),
    }
}

pub fn parse_dimacs(text: &str) -> Result<Formula> {
    let mut header: Option<(u32, usize, usize)> = None;
    let mut clauses: Vec<Vec<i32>> = Vec::new();
    let mut current: Vec<i32> = Vec::new();
    let mut last_line = 0;

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        last_line = lineno;
        let line = line.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            // SATLIB trailer
            break;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(err(lineno, "duplicate problem line"));
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 || parts[0] != "p" || parts[1] != "cnf" {
                return Err(err(lineno, format!("malformed problem line '{line}'")));
            }
            let n = parts[2]
                .parse::<u32>()
                .map_err(|_| err(lineno, format!("bad variable count '{}'", parts[2])))?;
            let m = parts[3]
                .parse::<usize>()
                .map_err(|_| err(lineno, format!("bad clause count '{}'", parts[3])))?;
            header = Some((n, m, lineno));
            continue;
        }
        let Some((n, _, _)) = header else {
            return Err(err(lineno, "clause data before problem line"));
        };
        for tok in line.split_whitespace() {
            let v: i32 = tok
                .parse()
                .map_err(|_| err(lineno, format!("bad literal '{tok}'")))?;
            if v == 0 {
                if current.is_empty() {
                    return Err(err(lineno, "zero terminator before any literal (empty clause)"));
                }
                clauses.push(std::mem::take(&mut current));
            } else {
                if v.unsigned_abs() > n {
                    return Err(err(lineno, format!("literal {v} exceeds declared n={n}")));
                }
                current.push(v);
            }
        }
    }

    let Some((n, m, header_line)) = header else {
        return Err(err(last_line.max(1), "missing problem line"));
    };
    if !current.is_empty() {
        return Err(err(last_line, "last clause is not zero-terminated"));
    }
    if clauses.len() != m {
        return Err(err(
            header_line,
            format!("header declares {m} clauses but body has {}", clauses.len()),
        ));
    }
    Formula::new(n, clauses)
}

pub fn emit_dimacs(formula: &Formula, provenance: Option<&Provenance>) -> String {
    let mut out = String::new();
    if let Some(p) = provenance {
        let _ = writeln!(out, "c seed={} k={} alpha={}", p.seed, p.k, p.alpha);
    }
    let _ = writeln!(out, "p cnf {} {}", formula.num_vars(), formula.num_clauses());
    for clause in formula.clauses() {
        for lit in clause.iter() {
            let _ = write!(out, "{lit} ");
        }
        out.push_str("0\n");
    }
    out
}

/// Reads the provenance comment, if present.
pub fn parse_provenance(text: &str) -> Option<Provenance> {
    let line = text
        .lines()
        .map(str::trim)
        .find(|l| l.starts_with("c seed="))?;
    let mut seed = None;
    let mut k = None;
    let mut alpha = None;
    for kv in line[1..].split_whitespace() {
        match kv.split_once('=')? {
            ("seed", v) => seed = v.parse().ok(),
            ("k", v) => k = v.parse().ok(),
            ("alpha", v) => alpha = v.parse().ok(),
            _ => {}
        }
    }
    Some(Provenance {
        seed: seed?,
        k: k?,
        alpha: alpha?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal() {
        let f = parse_dimacs("p cnf 2 1\n1 -2 0\n").unwrap();
        assert_eq!(f.num_vars(), 2);
        assert_eq!(f.to_ints(), vec![vec![1, -2]]);
    }

    #[test]
    fn header_counts_box_formula() {
        let text = emit_dimacs(&crate::fixtures::cnf_box_formula(), None);
        assert_eq!(text.lines().next().unwrap(), "p cnf 5 11");
    }

    #[test]
    fn clauses_may_span_lines_and_comments_are_skipped() {
        let f = parse_dimacs("c hello\np cnf 3 2\n1 2\n3 0 -1\n0\n").unwrap();
        assert_eq!(f.to_ints(), vec![vec![1, 2, 3], vec![-1]]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        match parse_dimacs("p cnf 2 2\n1 2 0\n") {
            Err(Error::Dimacs { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
        match parse_dimacs("p cnf 2 1\n1 3 0\n") {
            Err(Error::Dimacs { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        match parse_dimacs("p cnf 2 1\n\n0\n") {
            Err(Error::Dimacs { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_dimacs("p cnf 2 1\n1 2\n").is_err());
        assert!(parse_dimacs("1 2 0\n").is_err());
    }

    #[test]
    fn provenance_round_trip() {
        let p = Provenance {
            seed: 42,
            k: 3,
            alpha: 4.3,
        };
        let f = crate::fixtures::cnf_box_formula();
        let text = emit_dimacs(&f, Some(&p));
        assert!(text.starts_with("c seed=42 k=3 alpha=4.3\n"));
        assert_eq!(parse_provenance(&text), Some(p));
        assert_eq!(parse_dimacs(&text).unwrap(), f);
    }
}
