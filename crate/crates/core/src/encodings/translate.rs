use super::menu::{MenuPuzzle, Person};
use super::{templates, Prompt};
use crate::cnf::Formula;
use crate::error::{Error, Result};

pub fn encode_translate_prompt(puzzle: &MenuPuzzle) -> Prompt {
    Prompt {
        system: templates::TRANSLATE_SYSTEM.to_string(),
        user: templates::fill(templates::TRANSLATE_USER, "preferences", &puzzle.preferences()),
    }
}

const CLAUSES_PER_LINE: usize = 3;

fn clause_latex(p: &Person) -> String {
    let lits: Vec<String> = p
        .likes
        .iter()
        .map(|i| format!("\\text{{{i}}}"))
        .chain(p.dislikes.iter().map(|i| format!("\\neg \\text{{{i}}}")))
        .collect();
    format!("({})", lits.join(" \\lor "))
}

/// The faithful translation of a puzzle as a LaTeX `align*` block.
pub fn render_translation(puzzle: &MenuPuzzle) -> String {
    let lines: Vec<String> = puzzle
        .people
        .chunks(CLAUSES_PER_LINE)
        .map(|chunk| {
            let body: Vec<String> = chunk.iter().map(clause_latex).collect();
            format!("    &{}", body.join(" \\land "))
        })
        .collect();
    format!("\\begin{{align*}}\n{}\n\\end{{align*}}", lines.join(" \\land \\\\\n"))
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Atom(String),
    Or,
    And,
    Not,
    Open,
    Close,
}

/// The part of the answer holding the expression: the last `align` block,
/// else the last display or inline math span, else the whole text.
fn expression_region(text: &str) -> &str {
    for (open, close) in [
        ("\\begin{align*}", "\\end{align*}"),
        ("\\begin{align}", "\\end{align}"),
        ("\\[", "\\]"),
        ("$$", "$$"),
    ] {
        if let Some(end) = text.rfind(close) {
            if let Some(start) = text[..end].rfind(open) {
                return &text[start + open.len()..end];
            }
        }
    }
    let dollars: Vec<usize> = text.match_indices('$').map(|(i, _)| i).collect();
    if dollars.len() >= 2 {
        let (a, b) = (dollars[dollars.len() - 2], dollars[dollars.len() - 1]);
        return &text[a + 1..b];
    }
    text
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    let word = |i: &mut usize| {
        let start = *i;
        while *i < chars.len() && (chars[*i].is_alphanumeric() || chars[*i] == '_') {
            *i += 1;
        }
        chars[start..*i].iter().collect::<String>()
    };
    while i < chars.len() {
        let c = chars[i];
        match c {
            c if c.is_whitespace() || c == '&' => i += 1,
            '(' => {
                toks.push(Tok::Open);
                i += 1;
            }
            ')' => {
                toks.push(Tok::Close);
                i += 1;
            }
            '∨' | '|' => {
                toks.push(Tok::Or);
                i += 1;
            }
            '∧' => {
                toks.push(Tok::And);
                i += 1;
            }
            '¬' | '~' | '!' => {
                toks.push(Tok::Not);
                i += 1;
            }
            '\\' => {
                i += 1;
                if i < chars.len() && !chars[i].is_alphabetic() {
                    // `\\`, `\,`, `\;` and friends are layout
                    i += 1;
                    continue;
                }
                let cmd = word(&mut i);
                match cmd.as_str() {
                    "lor" | "vee" => toks.push(Tok::Or),
                    "land" | "wedge" => toks.push(Tok::And),
                    "neg" | "lnot" => toks.push(Tok::Not),
                    "left" | "right" | "quad" | "qquad" | "big" | "Big" | "bigg" | "Bigg" => {}
                    "text" | "mathrm" | "textit" | "mathit" | "texttt" | "textbf" | "mathtt" => {
                        if chars.get(i) != Some(&'{') {
                            return Err(Error::Translate(format!("expected '{{' after \\{cmd}")));
                        }
                        let close = chars[i..]
                            .iter()
                            .position(|&c| c == '}')
                            .ok_or_else(|| Error::Translate(format!("unclosed \\{cmd}{{")))?;
                        let name: String = chars[i + 1..i + close].iter().collect();
                        toks.push(Tok::Atom(name.trim().to_string()));
                        i += close + 1;
                    }
                    other => return Err(Error::Translate(format!("unsupported command \\{other}"))),
                }
            }
            c if c.is_alphanumeric() || c == '_' => toks.push(Tok::Atom(word(&mut i))),
            other => return Err(Error::Translate(format!("unexpected character '{other}'"))),
        }
    }
    Ok(toks)
}

/// `expr := clause (AND clause)*`, `clause := '(' disj ')' | disj`,
/// `disj := lit (OR lit)*`, `lit := NOT* atom`.
fn parse(toks: &[Tok]) -> Result<Vec<Vec<(String, bool)>>> {
    let mut clauses = Vec::new();
    let mut pos = 0;
    let expect_end = |pos: usize| pos >= toks.len();
    loop {
        let paren = toks.get(pos) == Some(&Tok::Open);
        if paren {
            pos += 1;
        }
        let mut clause = Vec::new();
        loop {
            let mut positive = true;
            while toks.get(pos) == Some(&Tok::Not) {
                positive = !positive;
                pos += 1;
            }
            match toks.get(pos) {
                Some(Tok::Atom(a)) => clause.push((a.clone(), positive)),
                Some(t) => return Err(Error::Translate(format!("expected an item, found {t:?}"))),
                None => return Err(Error::Translate("unexpected end of expression".into())),
            }
            pos += 1;
            if toks.get(pos) == Some(&Tok::Or) {
                pos += 1;
            } else {
                break;
            }
        }
        if paren {
            if toks.get(pos) != Some(&Tok::Close) {
                return Err(Error::Translate("clause is not a flat disjunction".into()));
            }
            pos += 1;
        }
        clauses.push(clause);
        match toks.get(pos) {
            Some(Tok::And) => pos += 1,
            None => break,
            Some(t) => return Err(Error::Translate(format!("expected a conjunction, found {t:?}"))),
        }
        if expect_end(pos) {
            // trailing `\land` before a line break
            break;
        }
    }
    Ok(clauses)
}

/// Parses a CNF expression over item names back into a formula numbered by
/// the puzzle's item bijection.
pub fn decode_translate_cnf(text: &str, puzzle: &MenuPuzzle) -> Result<Formula> {
    let toks = tokenize(expression_region(text))?;
    if toks.is_empty() {
        return Err(Error::Translate("empty expression".into()));
    }
    let clauses = parse(&toks)?;
    let mut unknown: Vec<String> = Vec::new();
    let ints: Vec<Vec<i32>> = clauses
        .iter()
        .map(|c| {
            c.iter()
                .filter_map(|(item, pos)| match puzzle.var_of(item) {
                    Some(v) => Some(if *pos { v as i32 } else { -(v as i32) }),
                    None => {
                        if !unknown.contains(item) {
                            unknown.push(item.clone());
                        }
                        None
                    }
                })
                .collect()
        })
        .collect();
    if !unknown.is_empty() {
        return Err(Error::Translate(format!("unknown items: {}", unknown.join(", "))));
    }
    Formula::new(puzzle.num_vars(), ints)
}
