//! Hierarchies of reward machines.
//!
//! A reward machine is a finite-state machine whose transitions are guarded by
//! propositional formulas over observed labels. A hierarchy lets a machine's
//! transitions call other machines, which makes task structure reusable and
//! can be exponentially more compact than a single flat machine.
//!
//! # Modules
//!
//! - [`logic`]: labels, DNF formulas and the formula tree.
//! - [`machines`]: machines, hierarchies, the call-stack semantics and file formats.
//! - [`flattening`]: conversion of a hierarchy into an equivalent flat machine.
//! - [`envs`]: CraftWorld and WaterWorld with their task catalog.
//! - [`options`]: option-based policy learning over a hierarchy.
//! - [`induction`]: learning a root machine from labeled traces.
//! - [`lhrm`]: the interleaved curriculum learning loop.
//! - [`cli`]: the command-line front end.

pub mod cli;
pub mod envs;
pub mod error;
pub mod flattening;
pub mod induction;
pub mod lhrm;
pub mod logic;
pub mod machines;
pub mod options;

pub use error::{Error, Result};
