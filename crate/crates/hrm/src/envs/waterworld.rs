//! Box of coloured balls moving at constant speed.
//!
//! # Dynamics
//!
//! Every ball moves in a straight line and bounces elastically off the
//! walls; balls pass through each other. The agent is a ball of the same
//! radius whose velocity changes by a fixed impulse in one of the four
//! cardinal directions, or stays unchanged on the no-op action. The label
//! holds the colours of every ball overlapping the agent.
//!
//! # Constants
//!
//! Box side, radius, ball speed, impulse and the agent speed cap are
//! configuration defaults fixed so that a uniformly random policy observes a
//! given colour within roughly 200 steps.
//!
//! # State key
//!
//! The tabular key is the agent's position on a grid of one-radius cells and
//! its rounded velocity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{fnv1a, Environment, Observation};
use crate::error::{Error, Result};
use crate::logic::{Label, PropositionSet};

/// Ball colours.
pub const WATERWORLD_COLORS: [&str; 6] = ["r", "g", "b", "c", "m", "y"];

/// Colour of the balls to avoid in the dead-end setting.
pub const DEADEND_COLOR: &str = "k";

/// WaterWorld instance parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaterWorldConfig {
    pub size: f64,
    pub radius: f64,
    pub ball_speed: f64,
    pub impulse: f64,
    pub max_agent_speed: f64,
    pub balls_per_color: usize,
    /// Adds two balls of [`DEADEND_COLOR`].
    pub deadends: bool,
    pub seed: u64,
    pub max_steps: usize,
}

impl Default for WaterWorldConfig {
    fn default() -> Self {
        Self {
            size: 400.0,
            radius: 15.0,
            ball_speed: 4.0,
            impulse: 1.0,
            max_agent_speed: 8.0,
            balls_per_color: 2,
            deadends: false,
            seed: 0,
            max_steps: 1000,
        }
    }
}

/// A moving ball; `color` is a proposition index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ball {
    pub color: usize,
    pub pos: [f64; 2],
    pub vel: [f64; 2],
}

/// A WaterWorld instance.
#[derive(Debug, Clone)]
pub struct WaterWorld {
    cfg: WaterWorldConfig,
    props: PropositionSet,
    start_agent: [f64; 2],
    start_balls: Vec<Ball>,
    agent: Ball,
    balls: Vec<Ball>,
}

impl WaterWorld {
    pub const NOOP: usize = 0;
    pub const UP: usize = 1;
    pub const RIGHT: usize = 2;
    pub const DOWN: usize = 3;
    pub const LEFT: usize = 4;

    /// Places the agent at the centre and the balls at random positions not
    /// overlapping it, each heading in a random direction.
    pub fn new(cfg: WaterWorldConfig) -> Result<Self> {
        Self::check(&cfg)?;
        let props = Self::props_for(cfg.deadends)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let r = cfg.radius;
        let centre = [cfg.size / 2.0, cfg.size / 2.0];
        let mut balls = Vec::new();
        let mut groups: Vec<(&str, usize)> = WATERWORLD_COLORS.iter().map(|&c| (c, cfg.balls_per_color)).collect();
        if cfg.deadends {
            groups.push((DEADEND_COLOR, 2));
        }
        for (name, count) in groups {
            let color = props.index_of(name)?;
            for _ in 0..count {
                let pos = loop {
                    let p = [rng.gen_range(r..cfg.size - r), rng.gen_range(r..cfg.size - r)];
                    if dist(p, centre) > 2.0 * r {
                        break p;
                    }
                };
                let angle = rng.gen_range(0.0..std::f64::consts::TAU);
                let vel = [cfg.ball_speed * angle.cos(), cfg.ball_speed * angle.sin()];
                balls.push(Ball { color, pos, vel });
            }
        }
        Self::with_state(cfg, centre, balls)
    }

    /// Builds an instance with explicit positions; the agent starts at rest.
    pub fn with_state(cfg: WaterWorldConfig, agent: [f64; 2], balls: Vec<Ball>) -> Result<Self> {
        Self::check(&cfg)?;
        let props = Self::props_for(cfg.deadends)?;
        if let Some(b) = balls.iter().find(|b| b.color >= props.len()) {
            return Err(Error::Config(format!("ball colour index {} out of range", b.color)));
        }
        let agent_ball = Ball { color: usize::MAX, pos: agent, vel: [0.0, 0.0] };
        Ok(Self { cfg, props, start_agent: agent, start_balls: balls.clone(), agent: agent_ball, balls })
    }

    fn check(cfg: &WaterWorldConfig) -> Result<()> {
        if !(cfg.size > 4.0 * cfg.radius && cfg.radius > 0.0) {
            return Err(Error::Config("box must be larger than four radii".into()));
        }
        if cfg.ball_speed < 0.0 || cfg.impulse < 0.0 || cfg.max_agent_speed < 0.0 {
            return Err(Error::Config("speeds must be non-negative".into()));
        }
        Ok(())
    }

    /// Colour propositions, plus the dead-end colour when enabled.
    pub fn props_for(deadends: bool) -> Result<PropositionSet> {
        let mut names: Vec<&str> = WATERWORLD_COLORS.to_vec();
        if deadends {
            names.push(DEADEND_COLOR);
        }
        PropositionSet::new(names)
    }

    pub fn config(&self) -> &WaterWorldConfig {
        &self.cfg
    }

    pub fn balls(&self) -> &[Ball] {
        &self.balls
    }

    pub fn agent_position(&self) -> [f64; 2] {
        self.agent.pos
    }

    pub fn agent_velocity(&self) -> [f64; 2] {
        self.agent.vel
    }

    fn advance(&self, b: &mut Ball) {
        let (lo, hi) = (self.cfg.radius, self.cfg.size - self.cfg.radius);
        for k in 0..2 {
            b.pos[k] += b.vel[k];
            if b.pos[k] < lo {
                b.pos[k] = 2.0 * lo - b.pos[k];
                b.vel[k] = -b.vel[k];
            } else if b.pos[k] > hi {
                b.pos[k] = 2.0 * hi - b.pos[k];
                b.vel[k] = -b.vel[k];
            }
            b.pos[k] = b.pos[k].clamp(lo, hi);
        }
    }

    fn observe(&self) -> Observation {
        let reach = 2.0 * self.cfg.radius;
        let mut label = 0u64;
        for b in &self.balls {
            if dist(b.pos, self.agent.pos) <= reach {
                label |= 1 << b.color;
            }
        }
        let cell = |v: f64| (v / self.cfg.radius).floor() as i64 as u64;
        let speed = |v: f64| v.round() as i64 as u64;
        let key = fnv1a(&[
            cell(self.agent.pos[0]),
            cell(self.agent.pos[1]),
            speed(self.agent.vel[0]),
            speed(self.agent.vel[1]),
        ]);
        Observation { key, label: Label(label) }
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

impl Environment for WaterWorld {
    fn props(&self) -> &PropositionSet {
        &self.props
    }

    fn num_actions(&self) -> usize {
        5
    }

    fn reset(&mut self) -> Observation {
        self.agent.pos = self.start_agent;
        self.agent.vel = [0.0, 0.0];
        self.balls = self.start_balls.clone();
        self.observe()
    }

    fn step(&mut self, action: usize) -> Observation {
        let j = self.cfg.impulse;
        let dv = match action {
            Self::UP => [0.0, -j],
            Self::RIGHT => [j, 0.0],
            Self::DOWN => [0.0, j],
            Self::LEFT => [-j, 0.0],
            _ => [0.0, 0.0],
        };
        let cap = self.cfg.max_agent_speed;
        for k in 0..2 {
            self.agent.vel[k] = (self.agent.vel[k] + dv[k]).clamp(-cap, cap);
        }
        let mut agent = self.agent;
        self.advance(&mut agent);
        self.agent = agent;
        let mut balls = std::mem::take(&mut self.balls);
        for b in &mut balls {
            self.advance(b);
        }
        self.balls = balls;
        self.observe()
    }

    fn max_steps(&self) -> usize {
        self.cfg.max_steps
    }
}
