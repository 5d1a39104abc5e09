//! The bank of learned roots and their example sets.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::logic::PropositionSet;
use crate::machines::{EdgeSpec, HrmSpec, MachineSpec};
use crate::machines::{Hrm, LabelTrace};
use crate::Result;

/// Root and examples of one task.
#[derive(Debug, Clone, Serialize)]
pub struct BankEntry {
    pub name: String,
    pub level: usize,
    pub root: MachineSpec,
    /// Examples the root was last induced from, counterexamples included.
    #[serde(skip)]
    pub examples: Vec<LabelTrace>,
    /// Whether `root` came from induction rather than initialization.
    pub learned: bool,
}

/// Current root of every task; callees are resolved by name.
#[derive(Debug, Clone, Serialize)]
pub struct HrmBank {
    pub props: Vec<String>,
    pub entries: Vec<BankEntry>,
}

/// Root with states `u0`, `uA` and `uR` and no edges.
pub fn empty_root(name: &str) -> MachineSpec {
    MachineSpec {
        id: name.to_string(),
        states: vec!["u0".into(), "uA".into(), "uR".into()],
        initial: "u0".into(),
        accepting: vec!["uA".into()],
        rejecting: vec!["uR".into()],
        edges: Vec::<EdgeSpec>::new(),
    }
}

impl HrmBank {
    pub fn new(props: &PropositionSet, tasks: &[(String, usize)]) -> Self {
        let entries = tasks
            .iter()
            .map(|(name, level)| BankEntry {
                name: name.clone(),
                level: *level,
                root: empty_root(name),
                examples: Vec::new(),
                learned: false,
            })
            .collect();
        Self { props: props.names().to_vec(), entries }
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }

    /// Tasks whose root reaches task `i` through calls, excluding `i`.
    pub fn dependents(&self, i: usize) -> Vec<usize> {
        (0..self.entries.len()).filter(|&k| k != i && self.closure(k).contains(&i)).collect()
    }

    /// Task `i` and every task it calls, transitively.
    pub fn closure(&self, i: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![i];
        while let Some(k) = stack.pop() {
            if !seen.insert(k) {
                continue;
            }
            for e in &self.entries[k].root.edges {
                if let Some(c) = self.index_of(&e.call) {
                    stack.push(c);
                }
            }
        }
        seen
    }

    /// Hierarchy rooted at task `i`.
    pub fn hrm(&self, i: usize) -> Result<Hrm> {
        let mut order: Vec<usize> = vec![i];
        order.extend(self.closure(i).into_iter().filter(|&k| k != i));
        let spec = HrmSpec {
            propositions: self.props.clone(),
            root: self.entries[i].name.clone(),
            machines: order.iter().map(|&k| self.entries[k].root.clone()).collect(),
        };
        Hrm::from_spec(&spec)
    }

    /// Learned hierarchies of the tasks below `level`.
    pub fn callable_below(&self, level: usize) -> Result<Vec<Hrm>> {
        (0..self.entries.len())
            .filter(|&k| self.entries[k].learned && self.entries[k].level < level)
            .map(|k| self.hrm(k))
            .collect()
    }
}
