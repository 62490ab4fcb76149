//! Worked examples used across tests and documentation.

use crate::cnf::{Assignment, Formula};

/// The 5-variable, 11-clause formula of the CNF prompt walkthrough.
pub fn cnf_box_formula() -> Formula {
    Formula::new(
        5,
        vec![
            vec![-3, 1, -4],
            vec![-4, -2, 1],
            vec![-1, -4, 5],
            vec![5, 1, 2],
            vec![-5, 4, 2],
            vec![-4, 3, 1],
            vec![1, 5, -3],
            vec![-2, 1, 3],
            vec![1, -5, -4],
            vec![4, -3, -1],
            vec![-2, 5, -3],
        ],
    )
    .expect("fixture is well formed")
}

/// The walkthrough's final answer `{1: T, 2: T, 3: F, 4: T, 5: T}`.
pub fn cnf_box_assignment() -> Assignment {
    Assignment::from_pairs([(1, true), (2, true), (3, false), (4, true), (5, true)])
}

/// Item names of the menu walkthrough, indexed by variable - 1.
pub const MENU_BOX_ITEMS: [&str; 5] = ["nachos", "ratatouille", "pie", "burger", "ravioli"];

/// Person names of the menu walkthrough, one per clause.
pub const MENU_BOX_PEOPLE: [&str; 6] = ["Jay", "Ada", "Zoe", "Arun", "Ula", "Ying"];

/// The menu walkthrough's preferences as a formula over
/// nachos=1, ratatouille=2, pie=3, burger=4, ravioli=5.
pub fn menu_box_formula() -> Formula {
    Formula::new(
        5,
        vec![
            vec![1, 2, -3],
            vec![3, -4, -5],
            vec![5, -3, -4],
            vec![2, -3, -1],
            vec![2, -5, -1],
            vec![1, 2, -4],
        ],
    )
    .expect("fixture is well formed")
}

/// Final answer text of the menu walkthrough.
pub const MENU_BOX_ANSWER: &str = "All participants are satisfied with this combination, and no item appears in both lists.\nSo the final lists are:\n\n```python\norderable=[pie, ratatouille, nachos]\nnot_orderable=[burger, ravioli]\n```";

/// Preferences line of the translation walkthrough (naan=1, curry=2, tandoori=3).
pub const TRANSLATE_BOX_PREFERENCES: &str = "Om: Likes naan, curry. Dislikes tandoori. Bao: Likes curry. Dislikes naan, tandoori. Nic: Likes naan. Dislikes curry, tandoori. Pat: Likes curry. Dislikes naan, tandoori. Du: Likes tandoori, naan, curry. Kim: Likes curry. Dislikes tandoori, naan.";

/// Expected answer of the translation walkthrough.
pub const TRANSLATE_BOX_ANSWER: &str = r"\begin{align*}
    &(\text{naan} \lor \text{curry} \lor \neg \text{tandoori}) \land (\text{curry} \lor \neg \text{naan} \lor \neg \text{tandoori}) \land (\text{naan} \lor \neg \text{curry} \lor \neg \text{tandoori}) \land \\
    &(\text{curry} \lor \neg \text{naan} \lor \neg \text{tandoori}) \land (\text{tandoori} \lor \text{naan} \lor \text{curry}) \land (\text{curry} \lor \neg \text{tandoori} \lor \neg \text{naan})
\end{align*}";
