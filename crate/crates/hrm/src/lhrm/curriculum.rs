//! Return-driven curriculum over task–instance pairs.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Running returns per task and instance, and the active level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curriculum {
    /// `returns[i][j]` estimates the undiscounted return of task `i` on instance `j`.
    pub returns: Vec<Vec<f64>>,
    /// Level of each task.
    pub levels: Vec<usize>,
    pub beta: f64,
    pub threshold: f64,
    pub active_level: usize,
}

impl Curriculum {
    /// All returns start at zero and the lowest level is active.
    pub fn new(levels: Vec<usize>, instances: usize, beta: f64, threshold: f64) -> Self {
        let active_level = levels.iter().copied().min().unwrap_or(1);
        Self { returns: vec![vec![0.0; instances]; levels.len()], levels, beta, threshold, active_level }
    }

    pub fn num_instances(&self) -> usize {
        self.returns.first().map_or(0, Vec::len)
    }

    pub fn eligible(&self, task: usize) -> bool {
        self.levels[task] <= self.active_level
    }

    /// Moving-average update with an episode's undiscounted return.
    pub fn update(&mut self, task: usize, instance: usize, ret: f64) {
        let r = &mut self.returns[task][instance];
        *r = self.beta * *r + (1.0 - self.beta) * ret;
    }

    /// Forgets the returns of a task after its hierarchy changes.
    pub fn reset_task(&mut self, task: usize) {
        self.returns[task].iter_mut().for_each(|r| *r = 0.0);
    }

    /// Lowest return over the pairs of eligible tasks.
    pub fn min_eligible_return(&self) -> f64 {
        (0..self.levels.len())
            .filter(|&i| self.eligible(i))
            .flat_map(|i| self.returns[i].iter().copied())
            .fold(f64::INFINITY, f64::min)
    }

    /// Activates the next level when every eligible return exceeds the
    /// threshold. Returns whether the level changed.
    pub fn maybe_advance(&mut self) -> bool {
        let Some(next) = self.levels.iter().copied().filter(|&l| l > self.active_level).min() else {
            return false;
        };
        if self.min_eligible_return() > self.threshold {
            self.active_level = next;
            true
        } else {
            false
        }
    }

    /// Probability of each eligible task, proportional to its worst score
    /// `max_j (1 - R_ij)`; uniform when every score is zero.
    pub fn task_probabilities(&self) -> Vec<f64> {
        let scores: Vec<f64> = (0..self.levels.len())
            .map(|i| {
                if self.eligible(i) {
                    self.returns[i].iter().map(|r| 1.0 - r).fold(0.0, f64::max)
                } else {
                    0.0
                }
            })
            .collect();
        let eligible: Vec<bool> = (0..self.levels.len()).map(|i| self.eligible(i)).collect();
        normalize(&scores, &eligible)
    }

    /// Probability of each instance of `task`, proportional to `1 - R_ij`.
    pub fn instance_probabilities(&self, task: usize) -> Vec<f64> {
        let scores: Vec<f64> = self.returns[task].iter().map(|r| 1.0 - r).collect();
        normalize(&scores, &vec![true; scores.len()])
    }

    /// Draws a task and then one of its instances.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        let task = draw(&self.task_probabilities(), rng);
        let instance = draw(&self.instance_probabilities(task), rng);
        (task, instance)
    }
}

fn normalize(scores: &[f64], allowed: &[bool]) -> Vec<f64> {
    let total: f64 = scores.iter().zip(allowed).filter(|(_, &a)| a).map(|(s, _)| s.max(0.0)).sum();
    if total > 0.0 {
        scores.iter().zip(allowed).map(|(s, &a)| if a { s.max(0.0) / total } else { 0.0 }).collect()
    } else {
        let n = allowed.iter().filter(|&&a| a).count() as f64;
        allowed.iter().map(|&a| if a { 1.0 / n } else { 0.0 }).collect()
    }
}

fn draw<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let x: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if x < acc {
            return i;
        }
    }
    last
}
