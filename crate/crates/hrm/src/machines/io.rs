//! JSON formats for hierarchies and label traces.
//!
//! Hierarchy file:
//!
//! ```json
//! {"propositions": ["a", "b"], "root": "M0",
//!  "machines": [{"id": "M0", "states": ["u0", "uA"], "initial": "u0",
//!                "accepting": ["uA"], "rejecting": [],
//!                "edges": [{"from": "u0", "to": "uA", "call": "leaf", "formula": "a&!b"}]}]}
//! ```
//!
//! Trace file: one JSON object per line,
//! `{"labels": [["a"], [], ["a", "b"]], "kind": "goal"}`.

use serde::{Deserialize, Serialize};

use super::{Hrm, LabelTrace, MachineId, RewardMachine, TraceKind};
use crate::error::{Error, Result};
use crate::logic::PropositionSet;

/// Serialized hierarchy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HrmSpec {
    pub propositions: Vec<String>,
    pub root: String,
    pub machines: Vec<MachineSpec>,
}

/// Serialized machine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineSpec {
    pub id: String,
    pub states: Vec<String>,
    pub initial: String,
    #[serde(default)]
    pub accepting: Vec<String>,
    #[serde(default)]
    pub rejecting: Vec<String>,
    #[serde(default)]
    pub edges: Vec<EdgeSpec>,
}

/// Serialized edge; `call` is a machine id or `leaf`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub from: String,
    pub to: String,
    pub call: String,
    pub formula: String,
}

fn schema(path: String, e: Error) -> Error {
    match e {
        Error::Schema { .. } => e,
        other => Error::Schema { path, message: other.to_string() },
    }
}

impl Hrm {
    /// Builds a hierarchy from its serialized form.
    pub fn from_spec(spec: &HrmSpec) -> Result<Hrm> {
        let props = PropositionSet::new(spec.propositions.iter().cloned())
            .map_err(|e| schema("propositions".into(), e))?;
        let index_of = |name: &str| spec.machines.iter().position(|m| m.id == name);
        let mut machines = Vec::with_capacity(spec.machines.len());
        for (mi, ms) in spec.machines.iter().enumerate() {
            let at = |field: &str| format!("machines[{mi}].{field}");
            let mut m = RewardMachine::new(ms.id.clone(), ms.states.iter().cloned())
                .map_err(|e| schema(at("states"), e))?;
            let initial = m.state_index(&ms.initial).map_err(|e| schema(at("initial"), e))?;
            m.set_initial(initial)?;
            for (k, s) in ms.accepting.iter().enumerate() {
                let u = m.state_index(s).map_err(|e| schema(at(&format!("accepting[{k}]")), e))?;
                m.set_accepting(u).map_err(|e| schema(at(&format!("accepting[{k}]")), e))?;
            }
            for (k, s) in ms.rejecting.iter().enumerate() {
                let u = m.state_index(s).map_err(|e| schema(at(&format!("rejecting[{k}]")), e))?;
                m.set_rejecting(u).map_err(|e| schema(at(&format!("rejecting[{k}]")), e))?;
            }
            for (k, es) in ms.edges.iter().enumerate() {
                let field = |f: &str| at(&format!("edges[{k}].{f}"));
                let from = m.state_index(&es.from).map_err(|e| schema(field("from"), e))?;
                let to = m.state_index(&es.to).map_err(|e| schema(field("to"), e))?;
                let callee = if es.call == "leaf" {
                    MachineId::Leaf
                } else {
                    MachineId::Index(index_of(&es.call).ok_or_else(|| Error::Schema {
                        path: field("call"),
                        message: format!("undeclared machine '{}'", es.call),
                    })?)
                };
                let context = props.parse(&es.formula).map_err(|e| schema(field("formula"), e))?;
                m.add_edge(from, to, callee, context).map_err(|e| schema(at(&format!("edges[{k}]")), e))?;
            }
            machines.push(m);
        }
        let root = index_of(&spec.root).ok_or_else(|| Error::Schema {
            path: "root".into(),
            message: format!("undeclared machine '{}'", spec.root),
        })?;
        Hrm::new(props, machines, root)
    }

    /// Serialized form with canonical formulas.
    pub fn to_spec(&self) -> HrmSpec {
        let props = self.props();
        HrmSpec {
            propositions: props.names().to_vec(),
            root: self.root_machine().name().to_string(),
            machines: self
                .machines()
                .iter()
                .map(|m| MachineSpec {
                    id: m.name().to_string(),
                    states: m.states().to_vec(),
                    initial: m.state_name(m.initial()).to_string(),
                    accepting: m.accepting().iter().map(|&u| m.state_name(u).to_string()).collect(),
                    rejecting: m.rejecting().iter().map(|&u| m.state_name(u).to_string()).collect(),
                    edges: m
                        .edges()
                        .iter()
                        .map(|e| EdgeSpec {
                            from: m.state_name(e.from).to_string(),
                            to: m.state_name(e.to).to_string(),
                            call: self.callee_name(e.callee).to_string(),
                            formula: props.format(&e.context),
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

/// Parses a hierarchy file.
pub fn load_hrm(text: &str) -> Result<Hrm> {
    let spec: HrmSpec = serde_json::from_str(text)?;
    Hrm::from_spec(&spec)
}

/// Serializes a hierarchy as pretty-printed JSON.
pub fn save_hrm(hrm: &Hrm) -> String {
    serde_json::to_string_pretty(&hrm.to_spec()).expect("spec serialization cannot fail")
}

/// One line of a trace file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub labels: Vec<Vec<String>>,
    pub kind: TraceKind,
}

/// Parses a JSON-lines trace file; blank lines are skipped.
pub fn load_traces(text: &str, props: &PropositionSet) -> Result<Vec<LabelTrace>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let at = |field: String| format!("line {}{field}", i + 1);
        let rec: TraceRecord = serde_json::from_str(line)
            .map_err(|e| Error::Schema { path: at(String::new()), message: e.to_string() })?;
        let labels = rec
            .labels
            .iter()
            .enumerate()
            .map(|(k, l)| props.label(l).map_err(|e| schema(at(format!(".labels[{k}]")), e)))
            .collect::<Result<Vec<_>>>()?;
        out.push(LabelTrace::new(labels, rec.kind).map_err(|e| schema(at(String::new()), e))?);
    }
    Ok(out)
}

/// Serializes traces as JSON lines.
pub fn save_traces(props: &PropositionSet, traces: &[LabelTrace]) -> String {
    let mut s = String::new();
    for t in traces {
        let rec = TraceRecord {
            labels: t
                .labels
                .iter()
                .map(|l| props.label_names(*l).into_iter().map(String::from).collect())
                .collect(),
            kind: t.kind,
        };
        s.push_str(&serde_json::to_string(&rec).expect("trace serialization cannot fail"));
        s.push('\n');
    }
    s
}
