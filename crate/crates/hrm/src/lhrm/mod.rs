//! Interleaved learning of hierarchies and their policies.
//!
//! # Loop
//!
//! Every task starts with a root that has an initial, an accepting and a
//! rejecting state and no edges, so it decides nothing. Each episode samples
//! a task and an instance from the [`Curriculum`]:
//!
//! - a task without a learned root explores, with random actions or with the
//!   greedy policies of learned lower-level tasks, until enough goal traces
//!   are collected; its first root is induced from the shortest of them;
//! - a task with a learned root trains its policies; the first step at which
//!   the root's verdict disagrees with the environment ends a counterexample
//!   prefix, which is stored and triggers re-induction.
//!
//! Re-induction searches from the previous root size upwards and may call
//! the learned roots of every lower-level task. After a root changes, its
//! returns are reset and tasks calling it are re-checked against their
//! examples.
//!
//! # Curriculum
//!
//! Greedy evaluation episodes update the running returns periodically. A
//! level unlocks once every return of the active levels passes the
//! threshold.
//!
//! # Traces
//!
//! Traces are compressed by merging consecutive equal labels. A
//! counterexample is stored compressed when the compressed form is still
//! misclassified and does not clash with a stored example, and raw
//! otherwise.

mod bank;
mod curriculum;
mod run;

pub use bank::{empty_root, BankEntry, HrmBank};
pub use curriculum::Curriculum;
pub use run::{lhrm_run, EvalRecord, InductionEvent, LevelEvent, LhrmReport};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::{CraftWorldConfig, Domain, EnvConfig, Observation, TaskEnv};
use crate::logic::Label;
use crate::machines::{Hrm, LabelTrace, TraceKind};
use crate::options::{Agent, LearnParams};
use crate::{Error, Result};

/// How tasks without a learned root explore.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exploration {
    /// Uniformly chosen learned lower-level hierarchies run greedily, mixed
    /// with single random actions.
    Options,
    /// Random actions only.
    Actions,
}

/// Run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LhrmConfig {
    /// Catalog task names; levels come from the catalog.
    pub tasks: Vec<String>,
    /// Environment of instance 0; instance `j` adds `j` to its seed.
    pub env: EnvConfig,
    pub instances: usize,
    pub beta: f64,
    pub threshold: f64,
    /// Goal traces collected before the first induction of a level-1 task.
    pub rho: usize,
    /// Goal traces collected before the first induction of higher tasks.
    pub rho_upper: usize,
    /// Shortest goal traces used by the first induction.
    pub rho_s: usize,
    pub kappa: usize,
    /// Largest root size tried by induction.
    pub max_states: usize,
    pub induction_nodes: u64,
    pub induction_seconds: Option<f64>,
    pub max_episodes: usize,
    /// Training episodes between greedy evaluations.
    pub eval_every: usize,
    pub exploration: Exploration,
    /// Step cap of one option during exploration.
    pub option_steps: usize,
    pub learn: LearnParams,
    pub seed: u64,
    /// Stop once every task is learned, the last level is active and every
    /// running return passes the threshold.
    pub stop_on_convergence: bool,
}

impl Default for LhrmConfig {
    fn default() -> Self {
        Self {
            tasks: Vec::new(),
            env: EnvConfig::Craftworld(CraftWorldConfig::default()),
            instances: 1,
            beta: 0.99,
            threshold: 0.85,
            rho: 25,
            rho_upper: 150,
            rho_s: 10,
            kappa: 1,
            max_states: 8,
            induction_nodes: 20_000_000,
            induction_seconds: Some(600.0),
            max_episodes: 100_000,
            eval_every: 100,
            exploration: Exploration::Options,
            option_steps: 200,
            learn: LearnParams::default(),
            seed: 0,
            stop_on_convergence: false,
        }
    }
}

impl LhrmConfig {
    /// Defaults for `tasks` in `env`, with the domain's threshold.
    pub fn new(tasks: &[&str], env: EnvConfig) -> Self {
        let threshold = match env.domain() {
            Domain::CraftWorld => 0.85,
            Domain::WaterWorld => 0.75,
        };
        Self { tasks: tasks.iter().map(|t| t.to_string()).collect(), env, threshold, ..Self::default() }
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.tasks.is_empty() {
            return bad("at least one task is required");
        }
        if self.instances == 0 {
            return bad("at least one instance is required");
        }
        if !(0.0..1.0).contains(&self.beta) {
            return bad("β must lie in [0, 1)");
        }
        if self.rho_s == 0 || self.rho_s > self.rho.min(self.rho_upper) {
            return bad("ρ_s must be positive and at most ρ");
        }
        if self.kappa == 0 || self.eval_every == 0 || self.option_steps == 0 {
            return bad("κ, the evaluation period and the option step cap must be positive");
        }
        Ok(())
    }

    /// Goal traces needed before the first induction of a task at `level`.
    pub fn goal_traces_for(&self, level: usize) -> usize {
        if level <= 1 {
            self.rho
        } else {
            self.rho_upper
        }
    }

    /// Environment of instance `j`.
    pub fn instance(&self, j: usize) -> EnvConfig {
        self.env.with_seed(self.env.seed().wrapping_add(j as u64))
    }
}

/// Merges consecutive equal labels.
pub fn compress_labels(labels: &[Label]) -> Vec<Label> {
    let mut out = labels.to_vec();
    out.dedup();
    out
}

/// Trace with consecutive equal labels merged; the kind is kept.
pub fn compress_trace(trace: &LabelTrace) -> LabelTrace {
    LabelTrace { labels: compress_labels(&trace.labels), kind: trace.kind }
}

/// The `k` shortest traces, ties in input order.
pub fn shortest(traces: &[LabelTrace], k: usize) -> Vec<LabelTrace> {
    let mut sorted = traces.to_vec();
    sorted.sort_by_key(|t| t.labels.len());
    sorted.truncate(k);
    sorted
}

/// Goal traces gathered by [`collect_goal_traces`].
#[derive(Debug, Clone)]
pub struct GoalTraces {
    /// Compressed goal traces in order of collection.
    pub traces: Vec<LabelTrace>,
    pub episodes: usize,
    /// The episode budget ran out before enough traces were found.
    pub exhausted: bool,
}

/// Runs one exploration episode and returns its classified raw trace and
/// length.
///
/// Each choice is uniform over `options` and a random walk that stops at the
/// first non-empty label; [`Exploration::Actions`] only walks. Hierarchies
/// run greedily until they decide. Every choice ends with the episode or
/// after `option_steps` steps.
pub fn explore_episode<R: Rng + ?Sized>(
    agent: &mut Agent,
    env: &mut TaskEnv,
    options: &[Hrm],
    mode: Exploration,
    option_steps: usize,
    rng: &mut R,
) -> Result<(LabelTrace, usize)> {
    let mut obs = env.reset();
    let mut steps = 0;
    let n = match mode {
        Exploration::Options => options.len(),
        Exploration::Actions => 0,
    };
    loop {
        let k = rng.gen_range(0..=n);
        if k < n {
            let f = agent.follow(env, &options[k], obs, option_steps)?;
            obs = f.obs;
            steps += f.steps;
            if f.episode_over {
                break;
            }
        } else if random_walk(env, option_steps, rng, &mut obs, &mut steps)? {
            break;
        }
    }
    Ok((env.classified_trace(), steps))
}

/// Random actions until a non-empty label, the end of the episode or
/// `max_steps` steps. Returns whether the episode ended.
fn random_walk<R: Rng + ?Sized>(
    env: &mut TaskEnv,
    max_steps: usize,
    rng: &mut R,
    obs: &mut Observation,
    steps: &mut usize,
) -> Result<bool> {
    for _ in 0..max_steps {
        let out = env.step(rng.gen_range(0..env.num_actions()))?;
        *obs = out.obs;
        *steps += 1;
        if out.terminal || out.truncated {
            return Ok(true);
        }
        if out.obs.label != Label::EMPTY {
            break;
        }
    }
    Ok(false)
}

/// Explores until `rho` compressed goal traces are found or `max_episodes`
/// episodes pass.
pub fn collect_goal_traces<R: Rng + ?Sized>(
    agent: &mut Agent,
    env: &mut TaskEnv,
    options: &[Hrm],
    rho: usize,
    mode: Exploration,
    option_steps: usize,
    max_episodes: usize,
    rng: &mut R,
) -> Result<GoalTraces> {
    let mut traces = Vec::new();
    let mut episodes = 0;
    while traces.len() < rho && episodes < max_episodes {
        let (t, _) = explore_episode(agent, env, options, mode, option_steps, rng)?;
        episodes += 1;
        if t.kind == TraceKind::Goal {
            traces.push(compress_trace(&t));
        }
    }
    Ok(GoalTraces { exhausted: traces.len() < rho, traces, episodes })
}
