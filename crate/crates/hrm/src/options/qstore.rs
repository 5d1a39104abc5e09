//! Tabular Q-functions, exploration schedules and the update-key sampler.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::logic::{Conjunction, PropositionSet};

/// Learning hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnParams {
    pub alpha_formula: f64,
    pub alpha_call: f64,
    pub gamma_formula: f64,
    pub gamma_call: f64,
    pub formula_exploration: ExplorationSchedule,
    pub call_exploration: ExplorationSchedule,
    /// Formula Q-functions updated per step.
    pub updates_per_step: usize,
}

impl Default for LearnParams {
    fn default() -> Self {
        Self {
            alpha_formula: 0.1,
            alpha_call: 0.1,
            gamma_formula: 0.9,
            gamma_call: 0.99,
            formula_exploration: ExplorationSchedule::new(1.0, 0.1, 50_000),
            call_exploration: ExplorationSchedule::new(1.0, 0.1, 5_000),
            updates_per_step: 4,
        }
    }
}

/// Linear decay of ε with a counter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplorationSchedule {
    pub initial: f64,
    pub last: f64,
    pub anneal: u64,
}

impl ExplorationSchedule {
    pub fn new(initial: f64, last: f64, anneal: u64) -> Self {
        Self { initial, last, anneal }
    }

    /// ε after `n` counted events, clamped to `[last, initial]`.
    pub fn epsilon(&self, n: u64) -> f64 {
        if self.anneal == 0 || n >= self.anneal {
            return self.last;
        }
        let frac = n as f64 / self.anneal as f64;
        (self.initial + (self.last - self.initial) * frac).clamp(self.last.min(self.initial), self.initial.max(self.last))
    }
}

/// Action-value contract for formula options.
pub trait ActionValues {
    /// Values of every action at `obs`; missing entries read as 0.
    fn values(&self, obs: u64, num_actions: usize) -> Vec<f64>;
    /// Moves `q(obs, action)` toward `target` with step size `alpha`.
    fn update(&mut self, obs: u64, action: usize, num_actions: usize, target: f64, alpha: f64);
}

/// Lookup table over observation keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TabularQ {
    table: HashMap<u64, Vec<f64>>,
}

impl TabularQ {
    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&u64, &Vec<f64>)> {
        self.table.iter()
    }
}

impl ActionValues for TabularQ {
    fn values(&self, obs: u64, num_actions: usize) -> Vec<f64> {
        self.table.get(&obs).cloned().unwrap_or_else(|| vec![0.0; num_actions])
    }

    fn update(&mut self, obs: u64, action: usize, num_actions: usize, target: f64, alpha: f64) {
        let row = self.table.entry(obs).or_insert_with(|| vec![0.0; num_actions]);
        row[action] += alpha * (target - row[action]);
    }
}

/// Key of a call-option value inside a machine's table.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CallKey {
    pub obs: u64,
    pub state: usize,
    pub context: Conjunction,
    /// Callee machine name, `leaf` for formula calls.
    pub callee: String,
    pub phi: Conjunction,
}

/// Step counters driving exploration and update-key sampling.
#[derive(Debug, Clone, Default)]
pub struct UpdateCounters {
    /// Steps taken with each formula key's policy.
    pub formula_steps: HashMap<Conjunction, u64>,
    /// Terminated options per `(machine, state, context)`.
    pub call_terminations: HashMap<(String, usize, Conjunction), u64>,
    /// Updates applied to each formula key.
    pub formula_updates: HashMap<Conjunction, u64>,
    /// Total formula updates.
    pub total_updates: u64,
}

/// Formula Q-functions keyed by formula-tree root children and call
/// Q-functions keyed by machine name.
#[derive(Debug, Clone, Default)]
pub struct QStore {
    pub formula: HashMap<Conjunction, TabularQ>,
    pub call: HashMap<String, HashMap<CallKey, f64>>,
}

impl QStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn formula_values(&self, key: &Conjunction, obs: u64, num_actions: usize) -> Vec<f64> {
        match self.formula.get(key) {
            Some(q) => q.values(obs, num_actions),
            None => vec![0.0; num_actions],
        }
    }

    pub fn update_formula(&mut self, key: Conjunction, obs: u64, action: usize, num_actions: usize, target: f64, alpha: f64) {
        self.formula.entry(key).or_default().update(obs, action, num_actions, target, alpha);
    }

    pub fn call_value(&self, machine: &str, key: &CallKey) -> f64 {
        self.call.get(machine).and_then(|t| t.get(key)).copied().unwrap_or(0.0)
    }

    pub fn update_call(&mut self, machine: &str, key: CallKey, target: f64, alpha: f64) {
        let v = self.call.entry(machine.to_string()).or_default().entry(key).or_insert(0.0);
        *v += alpha * (target - *v);
    }

    /// Drops a machine's call table, e.g. after it is re-induced.
    pub fn forget_machine(&mut self, machine: &str) {
        self.call.remove(machine);
    }

    /// Every stored value.
    pub fn all_values(&self) -> impl Iterator<Item = f64> + '_ {
        let f = self.formula.values().flat_map(|q| q.iter().flat_map(|(_, r)| r.iter().copied()));
        let c = self.call.values().flat_map(|t| t.values().copied());
        f.chain(c)
    }

    /// JSON checkpoint with sorted keys.
    pub fn to_json(&self, props: &PropositionSet) -> Value {
        let mut formula = BTreeMap::new();
        for (k, q) in &self.formula {
            let rows: BTreeMap<String, &Vec<f64>> = q.iter().map(|(o, r)| (format!("{o:016x}"), r)).collect();
            formula.insert(k.display(props).to_string(), rows);
        }
        let mut call = BTreeMap::new();
        for (m, t) in &self.call {
            let mut rows: Vec<(&CallKey, f64)> = t.iter().map(|(k, v)| (k, *v)).collect();
            rows.sort_by(|a, b| a.0.cmp(b.0));
            let rows: Vec<Value> = rows
                .into_iter()
                .map(|(k, v)| {
                    json!({
                        "obs": format!("{:016x}", k.obs),
                        "state": k.state,
                        "context": k.context.display(props).to_string(),
                        "callee": k.callee,
                        "phi": k.phi.display(props).to_string(),
                        "value": v,
                    })
                })
                .collect();
            call.insert(m.clone(), rows);
        }
        json!({ "formula": formula, "call": call })
    }
}

/// Samples up to `count` keys without replacement.
///
/// Key `φ` has weight `max(0, c − c_φ − 1)` where `c` is the total update
/// count and `c_φ` the key's own; when every weight is zero the remaining
/// keys are drawn uniformly. Counters of chosen keys are incremented.
pub fn choose_update_keys<R: Rng + ?Sized>(
    keys: &[Conjunction],
    counters: &mut UpdateCounters,
    count: usize,
    rng: &mut R,
) -> Vec<Conjunction> {
    let mut pool: Vec<Conjunction> = keys.to_vec();
    let mut chosen = Vec::new();
    while chosen.len() < count && !pool.is_empty() {
        let weights: Vec<f64> = pool
            .iter()
            .map(|k| {
                let c = counters.total_updates as f64;
                let ck = *counters.formula_updates.get(k).unwrap_or(&0) as f64;
                (c - ck - 1.0).max(0.0)
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let idx = if total <= 0.0 {
            rng.gen_range(0..pool.len())
        } else {
            let mut x = rng.gen::<f64>() * total;
            let mut pick = pool.len() - 1;
            for (i, w) in weights.iter().enumerate() {
                if x < *w {
                    pick = i;
                    break;
                }
                x -= w;
            }
            pick
        };
        chosen.push(pool.swap_remove(idx));
    }
    for k in &chosen {
        *counters.formula_updates.entry(*k).or_insert(0) += 1;
        counters.total_updates += 1;
    }
    chosen
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
