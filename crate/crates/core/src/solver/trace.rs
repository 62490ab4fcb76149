//! Search trees recorded during solving.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Cause {
    Decision,
    Unit,
    Pure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Leaf {
    Conflict,
    Solution,
    /// On a decision node: the opposite polarity was skipped by a backjump.
    Unexplored,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceNode {
    pub var: u32,
    pub polarity: bool,
    pub cause: Cause,
    pub children: Vec<TraceNode>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub leaf: Option<Leaf>,
}

/// Exported trace document. `leaf` is set when the search ended before any
/// assignment was made (empty formula, or a conflict with nothing assigned).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceDocument {
    pub children: Vec<TraceNode>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub leaf: Option<Leaf>,
}

impl TraceDocument {
    pub fn node_count(&self) -> usize {
        fn count(n: &TraceNode) -> usize {
            1 + n.children.iter().map(count).sum::<usize>()
        }
        self.children.iter().map(count).sum()
    }

    /// Nodes in visit (pre-)order.
    pub fn preorder(&self) -> Vec<&TraceNode> {
        fn walk<'a>(n: &'a TraceNode, out: &mut Vec<&'a TraceNode>) {
            out.push(n);
            for c in &n.children {
                walk(c, out);
            }
        }
        let mut out = Vec::new();
        for c in &self.children {
            walk(c, &mut out);
        }
        out
    }

    pub fn count_leaves(&self, leaf: Leaf) -> usize {
        self.preorder().iter().filter(|n| n.leaf == Some(leaf)).count()
            + usize::from(self.leaf == Some(leaf))
    }

    /// Root-to-node path (inclusive) of the first node carrying `leaf`.
    pub fn path_to(&self, leaf: Leaf) -> Option<Vec<&TraceNode>> {
        fn walk<'a>(n: &'a TraceNode, leaf: Leaf, path: &mut Vec<&'a TraceNode>) -> bool {
            path.push(n);
            if n.leaf == Some(leaf) {
                return true;
            }
            for c in &n.children {
                if walk(c, leaf, path) {
                    return true;
                }
            }
            path.pop();
            false
        }
        let mut path = Vec::new();
        for c in &self.children {
            if walk(c, leaf, &mut path) {
                return Some(path);
            }
        }
        None
    }
}

#[derive(Debug, Clone)]
struct ArenaNode {
    var: u32,
    polarity: bool,
    cause: Cause,
    children: Vec<usize>,
    leaf: Option<Leaf>,
}

/// Arena-backed builder; node ids are visit order.
#[derive(Debug, Clone, Default)]
pub(crate) struct TraceBuilder {
    nodes: Vec<ArenaNode>,
    roots: Vec<usize>,
    root_leaf: Option<Leaf>,
}

impl TraceBuilder {
    pub fn push(&mut self, parent: Option<usize>, var: u32, polarity: bool, cause: Cause) -> usize {
        let id = self.nodes.len();
        self.nodes.push(ArenaNode {
            var,
            polarity,
            cause,
            children: Vec::new(),
            leaf: None,
        });
        match parent {
            Some(p) => self.nodes[p].children.push(id),
            None => self.roots.push(id),
        }
        id
    }

    pub fn mark(&mut self, node: Option<usize>, leaf: Leaf) {
        match node {
            Some(id) => self.nodes[id].leaf = Some(leaf),
            None => self.root_leaf = Some(leaf),
        }
    }

    pub fn finish(&self) -> TraceDocument {
        fn build(arena: &[ArenaNode], id: usize) -> TraceNode {
            let n = &arena[id];
            TraceNode {
                var: n.var,
                polarity: n.polarity,
                cause: n.cause,
                children: n.children.iter().map(|&c| build(arena, c)).collect(),
                leaf: n.leaf,
            }
        }
        TraceDocument {
            children: self.roots.iter().map(|&r| build(&self.nodes, r)).collect(),
            leaf: self.root_leaf,
        }
    }
}
