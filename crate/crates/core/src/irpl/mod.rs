//! Exhaustive plan-library model on tiny tasks: enumerate every maximal
//! acyclic trajectory, weigh them, evaluate prefix probabilities exactly and
//! replay the two argmax-ordered searches to check the model's properties.

mod library;
mod oracle_search;
mod properties;
mod random;

use thiserror::Error;

pub use library::{
    enumerate_maximal, IrplProbs, Trajectory, TrajectoryLibrary, TrieNode, WeightScheme,
    COST_RANKED_LAMBDA, DEFAULT_CAP,
};
pub use oracle_search::{oracle_search, OracleTrace, Ordering};
pub use properties::{
    check_properties, check_properties_with, PropertyReport, Violation, PROPERTIES, SCHEDULE_COUNT,
};
pub use random::{random_tiny_task, TinyTask, TinyTaskLimits};

use crate::task::ActionId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IrplError {
    #[error("more than {0} maximal trajectories")]
    CapExceeded(usize),
    #[error("trajectory {0} is a prefix of, or equal to, another trajectory")]
    NotMaximal(usize),
    #[error("inconsistent library: {0}")]
    Inconsistent(String),
    #[error("library contains no plan")]
    NoPlan,
}

/// True iff `observation` is a subsequence of `sequence`.
pub fn embeds(sequence: &[ActionId], observation: &[ActionId]) -> bool {
    let mut it = sequence.iter();
    observation.iter().all(|o| it.any(|a| a == o))
}
