//! Grid world with objects to visit.
//!
//! # Layouts
//!
//! | layout | size    | rooms | lava                        |
//! |--------|---------|-------|-----------------------------|
//! | `OP`   | 7 × 7   | 1     | none                        |
//! | `OPL`  | 7 × 7   | 1     | one random cell             |
//! | `FR`   | 13 × 13 | 4     | none                        |
//! | `FRL`  | 13 × 13 | 4     | one fixed cell per room     |
//!
//! Sizes include the border walls. Open layouts hold one object of each
//! type; four-room layouts hold one or two, never in a doorway or next to
//! one. The agent starts on a random free cell facing a random direction.
//!
//! # Dynamics
//!
//! Actions are forward, rotate left and rotate right; moving into a wall
//! leaves the agent in place. The label is the object under the agent.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{fnv1a, Environment, Observation};
use crate::error::{Error, Result};
use crate::logic::{Label, PropositionSet};

/// Object propositions.
pub const CRAFTWORLD_OBJECTS: [&str; 10] =
    ["chicken", "cow", "iron", "rabbit", "redstone", "squid", "sugarcane", "table", "wheat", "workbench"];

/// Dead-end proposition of the lava layouts.
pub const LAVA: &str = "lava";

/// Grid layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Layout {
    Op,
    Opl,
    Fr,
    Frl,
}

impl Layout {
    /// Side length including border walls.
    pub fn size(self) -> usize {
        match self {
            Layout::Op | Layout::Opl => 7,
            Layout::Fr | Layout::Frl => 13,
        }
    }

    pub fn has_lava(self) -> bool {
        matches!(self, Layout::Opl | Layout::Frl)
    }

    pub fn four_rooms(self) -> bool {
        matches!(self, Layout::Fr | Layout::Frl)
    }
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "OP" => Ok(Layout::Op),
            "OPL" => Ok(Layout::Opl),
            "FR" => Ok(Layout::Fr),
            "FRL" => Ok(Layout::Frl),
            _ => Err(Error::Config(format!("unknown layout '{s}' (expected OP, OPL, FR or FRL)"))),
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Layout::Op => "OP",
            Layout::Opl => "OPL",
            Layout::Fr => "FR",
            Layout::Frl => "FRL",
        };
        f.write_str(s)
    }
}

fn default_max_steps() -> usize {
    1000
}

/// CraftWorld instance parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CraftWorldConfig {
    pub layout: Layout,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

impl Default for CraftWorldConfig {
    fn default() -> Self {
        Self { layout: Layout::Op, seed: 0, max_steps: default_max_steps() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cell {
    Empty,
    Wall,
    /// Proposition index.
    Prop(usize),
}

/// Headings: north, east, south, west.
const DIRS: [(isize, isize); 4] = [(0, -1), (1, 0), (0, 1), (-1, 0)];

/// Doorways of the four-room layouts as `(x, y)`.
const DOORS: [(usize, usize); 4] = [(6, 3), (6, 10), (2, 6), (9, 7)];

/// Lava cells of `FRL`, one per room.
const FRL_LAVA: [(usize, usize); 4] = [(2, 3), (9, 3), (2, 10), (9, 10)];

/// A CraftWorld instance.
#[derive(Debug, Clone)]
pub struct CraftWorld {
    cfg: CraftWorldConfig,
    props: PropositionSet,
    size: usize,
    cells: Vec<Cell>,
    start: (usize, usize, usize),
    pos: (usize, usize),
    dir: usize,
    grid_hash: u64,
}

impl CraftWorld {
    pub const FORWARD: usize = 0;
    pub const LEFT: usize = 1;
    pub const RIGHT: usize = 2;

    /// Generates the instance determined by the configuration's seed.
    pub fn new(cfg: CraftWorldConfig) -> Result<Self> {
        let props = Self::props_for(cfg.layout)?;
        let size = cfg.layout.size();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut cells = vec![Cell::Empty; size * size];
        for i in 0..size {
            for (x, y) in [(i, 0), (i, size - 1), (0, i), (size - 1, i)] {
                cells[y * size + x] = Cell::Wall;
            }
        }
        if cfg.layout.four_rooms() {
            for i in 0..size {
                cells[i * size + 6] = Cell::Wall;
            }
            for x in 0..6 {
                cells[6 * size + x] = Cell::Wall;
            }
            for x in 7..size {
                cells[7 * size + x] = Cell::Wall;
            }
            for (x, y) in DOORS {
                cells[y * size + x] = Cell::Empty;
            }
        }
        let near_door = |x: usize, y: usize| {
            cfg.layout.four_rooms() && DOORS.iter().any(|&(dx, dy)| dx.abs_diff(x) + dy.abs_diff(y) <= 1)
        };
        let lava = props.index_of(LAVA).ok();
        if let Some(li) = lava {
            if cfg.layout == Layout::Frl {
                for (x, y) in FRL_LAVA {
                    cells[y * size + x] = Cell::Prop(li);
                }
            }
        }
        let free = |cells: &[Cell]| -> Vec<usize> {
            (0..size * size).filter(|&i| cells[i] == Cell::Empty && !near_door(i % size, i / size)).collect()
        };
        if let (Some(li), Layout::Opl) = (lava, cfg.layout) {
            let i = *free(&cells).choose(&mut rng).expect("grid has free cells");
            cells[i] = Cell::Prop(li);
        }
        for name in CRAFTWORLD_OBJECTS {
            let p = props.index_of(name)?;
            let count = if cfg.layout.four_rooms() { rng.gen_range(1..=2) } else { 1 };
            for _ in 0..count {
                let i = *free(&cells).choose(&mut rng).expect("grid has free cells");
                cells[i] = Cell::Prop(p);
            }
        }
        let empty: Vec<usize> = (0..size * size).filter(|&i| cells[i] == Cell::Empty).collect();
        let s = *empty.choose(&mut rng).expect("grid has free cells");
        let dir = rng.gen_range(0..4);
        let words: Vec<u64> = cells
            .iter()
            .map(|c| match c {
                Cell::Empty => 0,
                Cell::Wall => 1,
                Cell::Prop(p) => 2 + *p as u64,
            })
            .collect();
        let grid_hash = fnv1a(&words);
        Ok(Self {
            cfg,
            props,
            size,
            cells,
            start: (s % size, s / size, dir),
            pos: (s % size, s / size),
            dir,
            grid_hash,
        })
    }

    /// Proposition set of a layout: the objects, plus lava when present.
    pub fn props_for(layout: Layout) -> Result<PropositionSet> {
        let mut names: Vec<&str> = CRAFTWORLD_OBJECTS.to_vec();
        if layout.has_lava() {
            names.push(LAVA);
        }
        PropositionSet::new(names)
    }

    pub fn config(&self) -> &CraftWorldConfig {
        &self.cfg
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Agent position `(x, y)` and heading (0 north, 1 east, 2 south, 3 west).
    pub fn pose(&self) -> (usize, usize, usize) {
        (self.pos.0, self.pos.1, self.dir)
    }

    /// Places the agent; fails on walls.
    pub fn set_pose(&mut self, x: usize, y: usize, dir: usize) -> Result<()> {
        if x >= self.size || y >= self.size || dir >= 4 || self.cell(x, y) == Cell::Wall {
            return Err(Error::Config(format!("invalid pose ({x}, {y}, {dir})")));
        }
        self.pos = (x, y);
        self.dir = dir;
        Ok(())
    }

    fn cell(&self, x: usize, y: usize) -> Cell {
        self.cells[y * self.size + x]
    }

    pub fn is_wall(&self, x: usize, y: usize) -> bool {
        self.cell(x, y) == Cell::Wall
    }

    /// Proposition name at a cell, if any.
    pub fn object_at(&self, x: usize, y: usize) -> Option<&str> {
        match self.cell(x, y) {
            Cell::Prop(p) => Some(&self.props.names()[p]),
            _ => None,
        }
    }

    /// Cells holding the named proposition.
    pub fn cells_of(&self, name: &str) -> Vec<(usize, usize)> {
        (0..self.size * self.size)
            .filter(|&i| matches!(self.cells[i], Cell::Prop(p) if self.props.names()[p] == name))
            .map(|i| (i % self.size, i / self.size))
            .collect()
    }

    fn observe(&self) -> Observation {
        let label = match self.cell(self.pos.0, self.pos.1) {
            Cell::Prop(p) => Label::singleton(p),
            _ => Label::EMPTY,
        };
        let key = fnv1a(&[self.grid_hash, self.pos.0 as u64, self.pos.1 as u64, self.dir as u64]);
        Observation { key, label }
    }

    /// Text rendering: `#` wall, `.` empty, first two letters of objects,
    /// and the agent as `^>v<`.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for y in 0..self.size {
            for x in 0..self.size {
                let t = if (x, y) == self.pos {
                    ["^ ", "> ", "v ", "< "][self.dir].to_string()
                } else {
                    match self.cell(x, y) {
                        Cell::Empty => ". ".into(),
                        Cell::Wall => "# ".into(),
                        Cell::Prop(p) => self.props.names()[p].chars().take(2).collect(),
                    }
                };
                s.push_str(&t);
                s.push(' ');
            }
            s.truncate(s.trim_end().len());
            s.push('\n');
        }
        s
    }
}

impl Environment for CraftWorld {
    fn props(&self) -> &PropositionSet {
        &self.props
    }

    fn num_actions(&self) -> usize {
        3
    }

    fn reset(&mut self) -> Observation {
        self.pos = (self.start.0, self.start.1);
        self.dir = self.start.2;
        self.observe()
    }

    fn step(&mut self, action: usize) -> Observation {
        match action {
            Self::FORWARD => {
                let (dx, dy) = DIRS[self.dir];
                let nx = self.pos.0.wrapping_add_signed(dx);
                let ny = self.pos.1.wrapping_add_signed(dy);
                if nx < self.size && ny < self.size && self.cell(nx, ny) != Cell::Wall {
                    self.pos = (nx, ny);
                }
            }
            Self::LEFT => self.dir = (self.dir + 3) % 4,
            Self::RIGHT => self.dir = (self.dir + 1) % 4,
            _ => {}
        }
        self.observe()
    }

    fn max_steps(&self) -> usize {
        self.cfg.max_steps
    }
}
