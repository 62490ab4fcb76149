use std::collections::HashMap;
use std::sync::OnceLock;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{templates, Claim, NamePools, Prompt, SubjectAnswer, Task};
use crate::cnf::{Assignment, Formula};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Person {
    pub name: String,
    pub likes: Vec<String>,
    pub dislikes: Vec<String>,
}

impl Person {
    pub fn describe(&self) -> String {
        let mut s = format!("{}:", self.name);
        if !self.likes.is_empty() {
            s.push_str(&format!(" Likes {}.", self.likes.join(", ")));
        }
        if !self.dislikes.is_empty() {
            s.push_str(&format!(" Dislikes {}.", self.dislikes.join(", ")));
        }
        s
    }
}

/// A formula dressed as a group dinner: variable `v` is `items[v-1]` and
/// person `i` states the preferences of clause `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MenuPuzzle {
    pub items: Vec<String>,
    pub people: Vec<Person>,
}

impl MenuPuzzle {
    pub fn from_formula(formula: &Formula, items: Vec<String>, names: Vec<String>) -> Result<Self> {
        let n = formula.num_vars() as usize;
        if items.len() < n {
            return Err(Error::PoolExhausted(format!("need {n} items, have {}", items.len())));
        }
        if names.len() < formula.num_clauses() {
            return Err(Error::PoolExhausted(format!(
                "need {} names, have {}",
                formula.num_clauses(),
                names.len()
            )));
        }
        let item = |v: u32| items[v as usize - 1].clone();
        let people = formula
            .clauses()
            .iter()
            .zip(names)
            .map(|(c, name)| Person {
                name,
                likes: c.iter().filter(|l| l.is_positive()).map(|l| item(l.var())).collect(),
                dislikes: c.iter().filter(|l| !l.is_positive()).map(|l| item(l.var())).collect(),
            })
            .collect();
        Ok(MenuPuzzle {
            items: items.into_iter().take(n).collect(),
            people,
        })
    }

    pub fn num_vars(&self) -> u32 {
        self.items.len() as u32
    }

    pub fn item(&self, var: u32) -> Option<&str> {
        self.items.get((var as usize).checked_sub(1)?).map(String::as_str)
    }

    /// Case-insensitive lookup of an item's variable.
    pub fn var_of(&self, item: &str) -> Option<u32> {
        let item = item.trim();
        self.items
            .iter()
            .position(|i| i.eq_ignore_ascii_case(item))
            .map(|p| p as u32 + 1)
    }

    /// One clause per person, likes first then dislikes.
    pub fn formula(&self) -> Result<Formula> {
        let lit = |name: &String, pos: bool| -> Result<i32> {
            let v = self
                .var_of(name)
                .ok_or_else(|| Error::Translate(format!("unknown item '{name}'")))? as i32;
            Ok(if pos { v } else { -v })
        };
        let clauses = self
            .people
            .iter()
            .map(|p| {
                p.likes
                    .iter()
                    .map(|i| lit(i, true))
                    .chain(p.dislikes.iter().map(|i| lit(i, false)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Formula::new(self.num_vars(), clauses)
    }

    pub fn preferences(&self) -> String {
        self.people.iter().map(Person::describe).collect::<Vec<_>>().join(" ")
    }

    /// Parses a preferences line such as `"Jay: Likes nachos. Dislikes pie."`.
    /// Items are numbered in order of first appearance.
    pub fn parse_preferences(text: &str) -> Result<Self> {
        static PERSON: OnceLock<Regex> = OnceLock::new();
        let re = PERSON.get_or_init(|| {
            Regex::new(r"(\w+):\s*(?:Likes\s+([^.]*)\.)?\s*(?:Dislikes\s+([^.]*)\.)?").unwrap()
        });
        let text = text.trim().trim_start_matches("Preferences:").trim();
        let mut items: Vec<String> = Vec::new();
        let mut people = Vec::new();
        let mut split = |list: Option<regex::Match>| -> Vec<String> {
            list.map(|m| {
                m.as_str()
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .inspect(|s| {
                        if !items.contains(s) {
                            items.push(s.clone());
                        }
                    })
                    .collect()
            })
            .unwrap_or_default()
        };
        for cap in re.captures_iter(text) {
            let likes = split(cap.get(2));
            let dislikes = split(cap.get(3));
            if likes.is_empty() && dislikes.is_empty() {
                continue;
            }
            people.push(Person {
                name: cap[1].to_string(),
                likes,
                dislikes,
            });
        }
        if people.is_empty() {
            return Err(Error::Translate("no preferences found".into()));
        }
        Ok(MenuPuzzle { items, people })
    }
}

/// Draws `n` items and `m` names without replacement and renders the prompt.
pub fn encode_menu(formula: &Formula, pools: &NamePools, seed: u64) -> Result<(MenuPuzzle, Prompt)> {
    let n = formula.num_vars() as usize;
    let m = formula.num_clauses();
    if pools.items.len() < n {
        return Err(Error::PoolExhausted(format!("need {n} items, pool has {}", pools.items.len())));
    }
    if pools.names.len() < m {
        return Err(Error::PoolExhausted(format!("need {m} names, pool has {}", pools.names.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items = sample(&mut rng, pools.items.len(), n).into_iter().map(|i| pools.items[i].clone()).collect();
    let names = sample(&mut rng, pools.names.len(), m).into_iter().map(|i| pools.names[i].clone()).collect();
    let puzzle = MenuPuzzle::from_formula(formula, items, names)?;
    let prompt = menu_prompt(&puzzle);
    Ok((puzzle, prompt))
}

pub(crate) fn menu_prompt(puzzle: &MenuPuzzle) -> Prompt {
    Prompt {
        system: templates::MENU_SYSTEM.to_string(),
        user: templates::fill(templates::MENU_USER, "preferences", &puzzle.preferences()),
    }
}

fn final_lists(orderable: &[&str], not_orderable: &[&str]) -> String {
    format!(
        "```python\norderable=[{}]\nnot_orderable=[{}]\n```",
        orderable.join(", "),
        not_orderable.join(", ")
    )
}

/// A worked solution in the menu framing. `None` renders the empty-lists
/// answer. The assignment should be total over the puzzle's items.
pub fn render_menu_solution(puzzle: &MenuPuzzle, assignment: Option<&Assignment>) -> String {
    let Some(a) = assignment else {
        return format!(
            "Every combination of the two lists leaves someone unsatisfied, so no valid selection exists.\nSo the final lists are:\n\n{}",
            final_lists(&[], &[])
        );
    };
    let value = |v: u32| a.get(v).unwrap_or(true);
    let mut out = String::from("First, let's list out the likes and dislikes of each person.\n\n");
    for p in &puzzle.people {
        out.push_str(&p.describe());
        out.push('\n');
    }
    let orderable: Vec<&str> = (1..=puzzle.num_vars()).filter(|&v| value(v)).filter_map(|v| puzzle.item(v)).collect();
    let not_orderable: Vec<&str> = (1..=puzzle.num_vars()).filter(|&v| !value(v)).filter_map(|v| puzzle.item(v)).collect();
    out.push_str(&format!(
        "\nOrderable: {}\nNot orderable: {}\n\nLet's examine if this combination satisfies all the participants' preferences.\n\n",
        orderable.join(", "),
        not_orderable.join(", ")
    ));
    for (i, p) in puzzle.people.iter().enumerate() {
        let liked = p.likes.iter().find(|it| puzzle.var_of(it).is_some_and(value));
        let disliked = p.dislikes.iter().find(|it| puzzle.var_of(it).is_some_and(|v| !value(v)));
        let reason = match (liked, disliked) {
            (Some(it), _) => format!("Satisfied by {it} in orderable list."),
            (None, Some(it)) => format!("Satisfied by {it} in not_orderable list."),
            (None, None) => "Not satisfied.".to_string(),
        };
        out.push_str(&format!("{}. {}: {reason}\n", i + 1, p.name));
    }
    out.push_str("\nAll participants are satisfied with this combination, and no item appears in both lists.\nSo the final lists are:\n\n");
    out.push_str(&final_lists(&orderable, &not_orderable));
    out
}

fn parse_list(body: &str) -> Vec<String> {
    body.split(',')
        .map(|s| s.trim().trim_matches(|c| c == '\'' || c == '"' || c == '`').trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Reads the last code fence holding both `orderable=[..]` and
/// `not_orderable=[..]`. Two empty lists claim unsatisfiability.
pub fn decode_menu_answer(text: &str, puzzle: &MenuPuzzle, task: Task) -> SubjectAnswer {
    static FENCE: OnceLock<Regex> = OnceLock::new();
    static ORD: OnceLock<Regex> = OnceLock::new();
    static NOT: OnceLock<Regex> = OnceLock::new();
    let fence = FENCE.get_or_init(|| Regex::new(r"(?s)```[A-Za-z0-9_]*[ \t]*\n?(.*?)```").unwrap());
    let ord = ORD.get_or_init(|| Regex::new(r"(?:^|[^_A-Za-z])orderable\s*=\s*\[([^\]]*)\]").unwrap());
    let not = NOT.get_or_init(|| Regex::new(r"not_orderable\s*=\s*\[([^\]]*)\]").unwrap());

    let block = fence
        .captures_iter(text)
        .filter_map(|c| {
            let body = c.get(1)?.as_str();
            Some((ord.captures(body)?.get(1)?.as_str(), not.captures(body)?.get(1)?.as_str()))
        })
        .last();
    let Some((yes, no)) = block else {
        return SubjectAnswer::new(task, Claim::Unparseable("no fenced orderable/not_orderable lists".into()), text);
    };
    let (yes, no) = (parse_list(yes), parse_list(no));
    if yes.is_empty() && no.is_empty() {
        return SubjectAnswer::new(task, Claim::UnsatClaim, text);
    }
    let mut warnings = Vec::new();
    let mut seen: HashMap<u32, bool> = HashMap::new();
    let mut overlap = Vec::new();
    for (list, value) in [(&yes, true), (&no, false)] {
        for item in list {
            match puzzle.var_of(item) {
                None => warnings.push(format!("unknown item '{item}' ignored")),
                Some(v) => match seen.insert(v, value) {
                    Some(prev) if prev != value => overlap.push(item.clone()),
                    _ => {}
                },
            }
        }
    }
    let mut answer = if overlap.is_empty() {
        let mut a = Assignment::with_capacity(puzzle.num_vars());
        for (v, value) in seen {
            a.set(v, value);
        }
        SubjectAnswer::new(task, Claim::SatWith(a), text)
    } else {
        SubjectAnswer::new(task, Claim::Unparseable(format!("overlap: {}", overlap.join(", "))), text)
    };
    answer.warnings = warnings;
    answer
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn box_puzzle() -> MenuPuzzle {
        MenuPuzzle::from_formula(
            &fixtures::menu_box_formula(),
            fixtures::MENU_BOX_ITEMS.iter().map(|s| s.to_string()).collect(),
            fixtures::MENU_BOX_PEOPLE.iter().map(|s| s.to_string()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn box_preferences_render_verbatim() {
        let p = box_puzzle();
        assert_eq!(p.people[0].describe(), "Jay: Likes nachos, ratatouille. Dislikes pie.");
        assert_eq!(
            p.preferences(),
            "Jay: Likes nachos, ratatouille. Dislikes pie. Ada: Likes pie. Dislikes burger, ravioli. Zoe: Likes ravioli. Dislikes pie, burger. Arun: Likes ratatouille. Dislikes pie, nachos. Ula: Likes ratatouille. Dislikes ravioli, nachos. Ying: Likes nachos, ratatouille. Dislikes burger."
        );
        assert_eq!(MenuPuzzle::parse_preferences(&p.preferences()).unwrap(), p);
    }

    #[test]
    fn single_like() {
        let f = Formula::new(1, vec![vec![1]]).unwrap();
        let p = MenuPuzzle::from_formula(&f, vec!["pie".into()], vec!["Om".into()]).unwrap();
        assert_eq!(p.people[0].likes, vec!["pie"]);
        assert!(p.people[0].dislikes.is_empty());
        assert_eq!(p.people[0].describe(), "Om: Likes pie.");
    }

    #[test]
    fn box_answer_decodes() {
        let a = decode_menu_answer(fixtures::MENU_BOX_ANSWER, &box_puzzle(), Task::Search);
        let Claim::SatWith(asg) = &a.claim else { panic!("{:?}", a.claim) };
        assert_eq!(asg.pairs().collect::<Vec<_>>(), vec![(1, true), (2, true), (3, true), (4, false), (5, false)]);
        assert!(a.warnings.is_empty());
    }

    #[test]
    fn empty_lists_claim_unsat() {
        let a = decode_menu_answer("```python\norderable=[], not_orderable=[]\n```", &box_puzzle(), Task::Decision);
        assert_eq!(a.claim, Claim::UnsatClaim);
    }

    #[test]
    fn overlap_and_garbage_are_unparseable() {
        let p = box_puzzle();
        let a = decode_menu_answer("```\norderable=[pie]\nnot_orderable=[pie]\n```", &p, Task::Search);
        assert!(matches!(a.claim, Claim::Unparseable(ref r) if r.contains("overlap")));
        for junk in ["", "orderable=[pie]", "```\n```", "```python\norderable=[pie\n```", "\u{0}```"] {
            assert!(matches!(decode_menu_answer(junk, &p, Task::Search).claim, Claim::Unparseable(_)), "{junk:?}");
        }
    }

    #[test]
    fn last_fence_wins_and_unknowns_warn() {
        let text = "```python\norderable=[burger]\nnot_orderable=[pie]\n```\nactually\n```python\norderable=['pie', lobster]\nnot_orderable=[\"burger\"]\n```";
        let a = decode_menu_answer(text, &box_puzzle(), Task::Search);
        let Claim::SatWith(asg) = &a.claim else { panic!() };
        assert_eq!(asg.pairs().collect::<Vec<_>>(), vec![(3, true), (4, false)]);
        assert_eq!(a.warnings.len(), 1);
    }

    #[test]
    fn encode_is_seeded_and_distinct() {
        let f = crate::gen::gen_ksat(10, 43, 3, 1).unwrap();
        let pools = NamePools::builtin();
        let (p1, t1) = encode_menu(&f, &pools, 5).unwrap();
        let (p2, t2) = encode_menu(&f, &pools, 5).unwrap();
        assert_eq!((p1.clone(), t1.clone()), (p2, t2));
        assert_ne!(encode_menu(&f, &pools, 6).unwrap().0, p1);
        assert!(t1.user.starts_with("Preferences: "));
        assert_eq!(t1.system, templates::MENU_SYSTEM);
        let mut names: Vec<_> = p1.people.iter().map(|p| &p.name).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 43);
        for (v, item) in p1.items.iter().enumerate() {
            assert_eq!(p1.var_of(item), Some(v as u32 + 1));
        }
        let tiny = NamePools { names: vec!["A".into()], items: pools.items.clone() };
        assert!(matches!(encode_menu(&f, &tiny, 0), Err(Error::PoolExhausted(_))));
    }
}
