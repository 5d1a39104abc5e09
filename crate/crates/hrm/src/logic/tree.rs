//! Formula tree: conjunctions arranged so that each node subsumes its
//! descendants with respect to the labels seen so far.
//!
//! The children of the root are the keys of the shared formula Q-functions.

use std::collections::{BTreeSet, HashMap};

use super::{Conjunction, Label};

#[derive(Debug, Clone)]
struct Node {
    formula: Conjunction,
    parent: Option<usize>,
    children: Vec<usize>,
}

/// Tree of conjunctions rooted at `true`.
#[derive(Debug, Clone)]
pub struct FormulaTree {
    nodes: Vec<Node>,
    index: HashMap<Conjunction, usize>,
    labels: BTreeSet<Label>,
}

impl Default for FormulaTree {
    fn default() -> Self {
        Self::new()
    }
}

/// Whether `x` subsumes `y` under `labels`.
///
/// `x` subsumes `y` when `x` is `true`, or when its literals are a subset of
/// `y`'s and both formulas agree on every label.
pub fn subsumes<'a, I>(x: &Conjunction, y: &Conjunction, labels: I) -> bool
where
    I: IntoIterator<Item = &'a Label>,
{
    x.is_true()
        || (x.literals_subset_of(y)
            && labels.into_iter().all(|l| x.satisfied_by(*l) == y.satisfied_by(*l)))
}

impl FormulaTree {
    const ROOT: usize = 0;

    pub fn new() -> Self {
        let root = Node { formula: Conjunction::TRUE, parent: None, children: Vec::new() };
        let mut index = HashMap::new();
        index.insert(Conjunction::TRUE, Self::ROOT);
        Self { nodes: vec![root], index, labels: BTreeSet::new() }
    }

    /// Labels observed so far.
    pub fn labels(&self) -> &BTreeSet<Label> {
        &self.labels
    }

    /// Whether the formula is housed in the tree.
    pub fn contains(&self, f: &Conjunction) -> bool {
        self.index.contains_key(f)
    }

    /// Number of non-root nodes.
    pub fn len(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() == 1
    }

    fn subsumes_node(&self, x: usize, y: usize) -> bool {
        subsumes(&self.nodes[x].formula, &self.nodes[y].formula, &self.labels)
    }

    /// Inserts a formula; re-adding an existing one is a no-op.
    pub fn add_formula(&mut self, f: Conjunction) {
        if self.index.contains_key(&f) || !f.is_satisfiable() {
            return;
        }
        let id = self.nodes.len();
        self.nodes.push(Node { formula: f, parent: None, children: Vec::new() });
        self.index.insert(f, id);
        self.add_node(id);
    }

    fn add_node(&mut self, new: usize) {
        let mut current = Self::ROOT;
        loop {
            let next = self.nodes[current]
                .children
                .iter()
                .copied()
                .find(|&c| self.subsumes_node(c, new));
            match next {
                Some(c) => current = c,
                None => {
                    let subsumed: Vec<usize> = self.nodes[current]
                        .children
                        .iter()
                        .copied()
                        .filter(|&c| self.subsumes_node(new, c))
                        .collect();
                    self.nodes[current].children.retain(|c| !subsumed.contains(c));
                    for &c in &subsumed {
                        self.nodes[c].parent = Some(new);
                        self.nodes[new].children.push(c);
                    }
                    self.nodes[current].children.push(new);
                    self.nodes[new].parent = Some(current);
                    return;
                }
            }
        }
    }

    /// Records a label and repairs every parent-child pair it breaks.
    pub fn on_label(&mut self, label: Label) {
        if !self.labels.insert(label) {
            return;
        }
        let mut inconsistent = Vec::new();
        for &c in &self.nodes[Self::ROOT].children {
            self.find_inconsistent(c, label, &mut inconsistent);
        }
        for &n in &inconsistent {
            if let Some(p) = self.nodes[n].parent.take() {
                self.nodes[p].children.retain(|&c| c != n);
            }
        }
        for n in inconsistent {
            self.add_node(n);
        }
    }

    /// Collects inconsistent children below `node`, descending into their
    /// subtrees as well so that moved subtrees are repaired too.
    fn find_inconsistent(&self, node: usize, label: Label, out: &mut Vec<usize>) {
        let parent_sat = self.nodes[node].formula.satisfied_by(label);
        for &c in &self.nodes[node].children {
            if parent_sat != self.nodes[c].formula.satisfied_by(label) {
                out.push(c);
            }
            self.find_inconsistent(c, label, out);
        }
    }

    /// Root-child ancestor of `f`, inserting `f` first if needed.
    pub fn q_key(&mut self, f: Conjunction) -> Conjunction {
        self.add_formula(f);
        self.key_of(&f).unwrap_or(Conjunction::TRUE)
    }

    /// Root-child ancestor of `f` without inserting; `None` if absent.
    pub fn key_of(&self, f: &Conjunction) -> Option<Conjunction> {
        let mut n = *self.index.get(f)?;
        if n == Self::ROOT {
            return Some(Conjunction::TRUE);
        }
        while let Some(p) = self.nodes[n].parent {
            if p == Self::ROOT {
                return Some(self.nodes[n].formula);
            }
            n = p;
        }
        None
    }

    /// Formulas of the root's children, in canonical order.
    pub fn root_children(&self) -> Vec<Conjunction> {
        let mut v: Vec<Conjunction> =
            self.nodes[Self::ROOT].children.iter().map(|&c| self.nodes[c].formula).collect();
        v.sort();
        v
    }

    /// Parent formula of `f`, if `f` is a non-root node.
    pub fn parent_of(&self, f: &Conjunction) -> Option<Conjunction> {
        let n = *self.index.get(f)?;
        self.nodes[n].parent.map(|p| self.nodes[p].formula)
    }

    /// All `(parent, child)` formula pairs.
    pub fn edges(&self) -> Vec<(Conjunction, Conjunction)> {
        self.nodes
            .iter()
            .filter_map(|n| n.parent.map(|p| (self.nodes[p].formula, n.formula)))
            .collect()
    }

    /// Whether every edge satisfies subsumption and every node is reachable once.
    pub fn check_invariants(&self) -> bool {
        let edges_ok = self.edges().iter().all(|(p, c)| subsumes(p, c, &self.labels));
        let mut seen = vec![0usize; self.nodes.len()];
        let mut stack = vec![Self::ROOT];
        while let Some(n) = stack.pop() {
            seen[n] += 1;
            for &c in &self.nodes[n].children {
                if self.nodes[c].parent != Some(n) {
                    return false;
                }
                stack.push(c);
            }
        }
        edges_ok && seen.iter().all(|&s| s == 1)
    }
}
