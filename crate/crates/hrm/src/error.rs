//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A formula or label referenced a proposition outside the governing set.
    #[error("unknown proposition '{0}'")]
    UnknownProposition(String),

    /// A formula string could not be parsed.
    #[error("formula parse error: {0}")]
    FormulaParse(String),

    /// Proposition sets are stored as 64-bit masks.
    #[error("too many propositions: {0} (at most 64 are supported)")]
    TooManyPropositions(usize),

    /// The same proposition name was declared twice.
    #[error("duplicate proposition '{0}'")]
    DuplicateProposition(String),

    /// A machine or hierarchy violates a structural rule.
    #[error("invalid machine: {0}")]
    InvalidMachine(String),

    /// The call graph of a hierarchy contains a cycle.
    #[error("call cycle: {0}")]
    CallCycle(String),

    /// Two transitions were applicable in the same hierarchy state.
    #[error("nondeterministic transition in machine '{machine}' at state '{state}' on label {label}")]
    Nondeterministic {
        machine: String,
        state: String,
        label: String,
    },

    /// An operation that requires a flat hierarchy received a non-flat one.
    #[error("hierarchy is not flat: {0}")]
    NotFlat(String),

    /// A JSON document had the right syntax but the wrong content.
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },

    /// Invalid configuration value.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A task name not present in the catalog.
    #[error("unknown task '{0}'")]
    UnknownTask(String),

    /// No option can be started from a non-terminal hierarchy state.
    #[error("no applicable option in machine '{machine}' at state '{state}'")]
    NoOption { machine: String, state: String },

    /// Induction could not produce a hierarchy.
    #[error("induction failed: {0}")]
    Induction(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Result alias using [`enum@Error`].
pub type Result<T> = std::result::Result<T, Error>;
