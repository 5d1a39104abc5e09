//! The learning agent and the episode executor.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::qstore::{argmax, choose_update_keys, CallKey, LearnParams, QStore, UpdateCounters};
use super::{align_option_stack, enumerate_options, options_at, terminate_options, OptionId, RunningOption};
use crate::envs::{StepOutcome, TaskEnv};
use crate::envs::Observation;
use crate::logic::{Conjunction, FormulaTree};
use crate::machines::{Advance, HierarchyState, Hrm, LabelTrace, MachineId, Symbol, Verdict};
use crate::{Error, Result};

/// Whether an episode learns or only follows the greedy policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}

/// Summary of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStats {
    /// Undiscounted return.
    pub ret: f64,
    pub steps: usize,
    /// Verdict of the task's reference hierarchy.
    pub verdict: Verdict,
    pub trace: LabelTrace,
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub task: String,
    pub instance: usize,
    #[serde(rename = "return")]
    pub ret: f64,
    pub steps: usize,
    pub verdict: Verdict,
}

/// Result of [`Agent::follow`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FollowOutcome {
    pub obs: Observation,
    pub steps: usize,
    pub ret: f64,
    /// The environment terminated or truncated the episode.
    pub episode_over: bool,
}

/// Q-functions, formula tree, counters and random state shared across tasks.
#[derive(Debug, Clone)]
pub struct Agent {
    pub params: LearnParams,
    pub qs: QStore,
    pub tree: FormulaTree,
    pub counters: UpdateCounters,
    rng: ChaCha8Rng,
}

impl Agent {
    pub fn new(params: LearnParams, seed: u64) -> Self {
        Self {
            params,
            qs: QStore::new(),
            tree: FormulaTree::new(),
            counters: UpdateCounters::default(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Adds the formulas of a hierarchy's formula options to the tree.
    pub fn register(&mut self, hrm: &Hrm) {
        for o in enumerate_options(hrm) {
            if o.is_formula() {
                self.tree.add_formula(o.goal_formula());
            }
        }
    }

    fn call_key(hrm: &Hrm, obs: u64, o: &OptionId) -> CallKey {
        CallKey {
            obs,
            state: o.state,
            context: o.context,
            callee: hrm.callee_name(o.callee).to_string(),
            phi: o.phi,
        }
    }

    fn call_values(&self, hrm: &Hrm, obs: u64, candidates: &[OptionId]) -> Vec<f64> {
        let name = hrm.machine(candidates[0].machine).name();
        candidates.iter().map(|o| self.qs.call_value(name, &Self::call_key(hrm, obs, o))).collect()
    }

    fn call_epsilon(&self, hrm: &Hrm, machine: usize, state: usize, context: Conjunction) -> f64 {
        let k = (hrm.machine(machine).name().to_string(), state, context);
        let n = self.counters.call_terminations.get(&k).copied().unwrap_or(0);
        self.params.call_exploration.epsilon(n)
    }

    /// ε-greedy choice among the options at `(machine, state, context)`.
    pub fn select_option(
        &mut self,
        hrm: &Hrm,
        obs: u64,
        machine: usize,
        state: usize,
        context: Conjunction,
        mode: Mode,
    ) -> Result<OptionId> {
        let candidates = options_at(hrm, machine, state, context);
        if candidates.is_empty() {
            let m = hrm.machine(machine);
            return Err(Error::NoOption { machine: m.name().to_string(), state: m.state_name(state).to_string() });
        }
        let eps = match mode {
            Mode::Train => self.call_epsilon(hrm, machine, state, context),
            Mode::Eval => 0.0,
        };
        if self.rng.gen::<f64>() < eps {
            return Ok(*candidates.choose(&mut self.rng).expect("non-empty"));
        }
        Ok(candidates[argmax(&self.call_values(hrm, obs, &candidates))])
    }

    /// Pushes options from the hierarchy state until a formula option ends the stack.
    pub fn fill_option_stack(
        &mut self,
        hrm: &Hrm,
        hs: &HierarchyState,
        obs: u64,
        t: usize,
        stack: Vec<RunningOption>,
        mode: Mode,
    ) -> Result<Vec<RunningOption>> {
        let mut stack = stack;
        let MachineId::Index(mut machine) = hs.machine else {
            return Err(Error::InvalidMachine("hierarchy state rests in the leaf".into()));
        };
        let mut state = hs.state;
        let mut context = Conjunction::TRUE;
        while !stack.last().is_some_and(|o| o.id.is_formula()) {
            let o = self.select_option(hrm, obs, machine, state, context, mode)?;
            stack.push(RunningOption { id: o, start_key: obs, start_t: t });
            if let MachineId::Index(j) = o.callee {
                machine = j;
                state = hrm.machine(j).initial();
                context = o.goal_formula();
            }
        }
        Ok(stack)
    }

    /// ε-greedy action of the stack's formula option.
    pub fn select_action(&mut self, option: &OptionId, obs: u64, num_actions: usize, mode: Mode) -> usize {
        let key = self.tree.q_key(option.goal_formula());
        let eps = match mode {
            Mode::Train => {
                let n = self.counters.formula_steps.entry(key).or_insert(0);
                let e = self.params.formula_exploration.epsilon(*n);
                *n += 1;
                e
            }
            Mode::Eval => 0.0,
        };
        if self.rng.gen::<f64>() < eps {
            return self.rng.gen_range(0..num_actions);
        }
        argmax(&self.qs.formula_values(&key, obs, num_actions))
    }

    /// Target of a formula Q-function for one transition.
    pub fn formula_target(gamma: f64, satisfied: bool, deadend: bool, next_max: f64) -> f64 {
        if satisfied {
            1.0
        } else if deadend {
            0.0
        } else {
            gamma * next_max
        }
    }

    /// Updates a sampled subset of formula Q-functions from one transition.
    pub fn update_formula_q(&mut self, obs: u64, action: usize, num_actions: usize, next: &StepOutcome) {
        let keys = self.tree.root_children();
        let chosen = choose_update_keys(&keys, &mut self.counters, self.params.updates_per_step, &mut self.rng);
        let deadend = next.terminal && !next.goal;
        for key in chosen {
            let satisfied = key.satisfied_by(next.obs.label);
            let next_max = if satisfied || deadend {
                0.0
            } else {
                self.qs.formula_values(&key, next.obs.key, num_actions).into_iter().fold(f64::MIN, f64::max)
            };
            let y = Self::formula_target(self.params.gamma_formula, satisfied, deadend, next_max);
            self.qs.update_formula(key, obs, action, num_actions, y, self.params.alpha_formula);
        }
    }

    /// Target of a call Q-function for an option that lasted `k` steps.
    pub fn call_target(gamma: f64, k: usize, reached_accept: bool, next_terminal: bool, next_max: f64) -> f64 {
        let r = if reached_accept { gamma.powi(k as i32 - 1) } else { 0.0 };
        if next_terminal {
            r
        } else {
            r + gamma.powi(k as i32) * next_max
        }
    }

    /// SMDP updates for terminated options that reached their intended next state.
    ///
    /// Returns how many updates were applied.
    pub fn update_call_q(&mut self, hrm: &Hrm, terminated: &[RunningOption], events: &[Advance], obs: u64, t: usize) -> usize {
        let mut applied = 0;
        for ro in terminated {
            let o = ro.id;
            let m = hrm.machine(o.machine);
            *self.counters.call_terminations.entry((m.name().to_string(), o.state, o.context)).or_insert(0) += 1;
            let Some(next) = o.achieved(events) else {
                continue;
            };
            let k = t.saturating_sub(ro.start_t).max(1);
            let reached = !m.is_accepting(o.state) && m.is_accepting(next);
            let next_ctx = if next != o.state { Conjunction::TRUE } else { o.context };
            let terminal = m.is_terminal(next);
            let next_max = if terminal {
                0.0
            } else {
                let cands = options_at(hrm, o.machine, next, next_ctx);
                if cands.is_empty() {
                    0.0
                } else {
                    self.call_values(hrm, obs, &cands).into_iter().fold(f64::MIN, f64::max)
                }
            };
            let y = Self::call_target(self.params.gamma_call, k, reached, terminal, next_max);
            let key = Self::call_key(hrm, ro.start_key, &o);
            self.qs.update_call(m.name(), key, y, self.params.alpha_call);
            applied += 1;
        }
        applied
    }

    /// Runs one episode of `env` guided by `hrm`.
    pub fn run_episode(&mut self, env: &mut TaskEnv, hrm: &Hrm, mode: Mode) -> Result<EpisodeStats> {
        self.run_episode_observed(env, hrm, mode, |_, _, _| {})
    }

    /// Like [`Agent::run_episode`], calling `observe(hrm_state, stack, outcome)`
    /// after every step.
    pub fn run_episode_observed<F>(&mut self, env: &mut TaskEnv, hrm: &Hrm, mode: Mode, mut observe: F) -> Result<EpisodeStats>
    where
        F: FnMut(&HierarchyState, &[RunningOption], &StepOutcome),
    {
        self.register(hrm);
        let num_actions = env.num_actions();
        let mut obs = env.reset();
        let mut hs = hrm.initial_state();
        let mut stack: Vec<RunningOption> = Vec::new();
        let mut ret = 0.0;
        let mut t = 0;
        let mut events = Vec::new();
        loop {
            let hrm_done = hrm.verdict(&hs) != Verdict::None;
            let mut formula = None;
            if !hrm_done {
                match self.fill_option_stack(hrm, &hs, obs.key, t, std::mem::take(&mut stack), mode) {
                    Ok(s) => {
                        formula = s.last().map(|o| o.id);
                        stack = s;
                    }
                    Err(Error::NoOption { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
            let action = match formula {
                Some(o) => self.select_action(&o, obs.key, num_actions, mode),
                None => self.rng.gen_range(0..num_actions),
            };
            let out = env.step(action)?;
            ret += out.reward;
            events.clear();
            let next_hs = if hrm_done { hs.clone() } else { hrm.step_traced(&hs, Symbol::Label(out.obs.label), &mut events)? };
            if mode == Mode::Train {
                self.tree.on_label(out.obs.label);
                self.update_formula_q(obs.key, action, num_actions, &out);
            }
            let (terminated, rest) = terminate_options(&stack, out.terminal, hs != next_hs, &next_hs.stack);
            if mode == Mode::Train {
                self.update_call_q(hrm, &terminated, &events, out.obs.key, t + 1);
            }
            stack = if terminated.is_empty() {
                rest
            } else {
                align_option_stack(rest, &next_hs.stack, &terminated, &mut self.rng)
            };
            hs = next_hs;
            obs = out.obs;
            t += 1;
            observe(&hs, &stack, &out);
            if out.terminal || out.truncated {
                let trace = env.classified_trace();
                let verdict = trace.kind.expected_verdict();
                return Ok(EpisodeStats { ret, steps: t, verdict, trace });
            }
        }
    }

    /// Runs the greedy policy of `hrm` from observation `obs` of an ongoing
    /// episode until the hierarchy reaches a verdict, the episode ends or
    /// `max_steps` steps pass. Nothing is learned.
    pub fn follow(&mut self, env: &mut TaskEnv, hrm: &Hrm, obs: Observation, max_steps: usize) -> Result<FollowOutcome> {
        self.register(hrm);
        let num_actions = env.num_actions();
        let mut obs = obs;
        let mut hs = hrm.initial_state();
        let mut stack: Vec<RunningOption> = Vec::new();
        let mut ret = 0.0;
        let mut steps = 0;
        while steps < max_steps {
            let mut formula = None;
            match self.fill_option_stack(hrm, &hs, obs.key, steps, std::mem::take(&mut stack), Mode::Eval) {
                Ok(s) => {
                    formula = s.last().map(|o| o.id);
                    stack = s;
                }
                Err(Error::NoOption { .. }) => {}
                Err(e) => return Err(e),
            }
            let action = match formula {
                Some(o) => self.select_action(&o, obs.key, num_actions, Mode::Eval),
                None => self.rng.gen_range(0..num_actions),
            };
            let out = env.step(action)?;
            ret += out.reward;
            steps += 1;
            let next_hs = hrm.step(&hs, Symbol::Label(out.obs.label))?;
            let (terminated, rest) = terminate_options(&stack, out.terminal, hs != next_hs, &next_hs.stack);
            stack = if terminated.is_empty() {
                rest
            } else {
                align_option_stack(rest, &next_hs.stack, &terminated, &mut self.rng)
            };
            hs = next_hs;
            obs = out.obs;
            if out.terminal || out.truncated {
                return Ok(FollowOutcome { obs, steps, ret, episode_over: true });
            }
            if hrm.verdict(&hs) != Verdict::None {
                break;
            }
        }
        Ok(FollowOutcome { obs, steps, ret, episode_over: false })
    }

    /// Mean return of `episodes` greedy episodes.
    pub fn evaluate(&mut self, env: &mut TaskEnv, hrm: &Hrm, episodes: usize) -> Result<f64> {
        let mut total = 0.0;
        for _ in 0..episodes {
            total += self.run_episode(env, hrm, Mode::Eval)?.ret;
        }
        Ok(total / episodes.max(1) as f64)
    }
}
