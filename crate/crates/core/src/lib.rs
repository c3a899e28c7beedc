//! Best-first width search with intention-based tie-breaking, plus
//! verification labs for trajectory-library recognition and
//! factored-divergence invariance.

pub mod bench;
pub mod cli;
pub mod divergence;
pub mod fixtures;
pub mod heuristics;
pub mod irpl;
pub mod pddl;
pub mod relaxation;
pub mod sampling;
pub mod search;
pub mod task;
