use std::collections::BTreeSet;

use super::{IrplError, TrajectoryLibrary};
use crate::task::ActionId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ordering {
    /// `P(G|O)` descending, then longer prefixes first.
    MaxPosteriorTiesLong,
    /// `P(O|G)` descending, then shorter prefixes first.
    MaxLikelihood,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleTrace {
    /// Trie nodes in expansion order; the selected goal node is not included.
    pub expanded: Vec<usize>,
    pub first_plan: Vec<ActionId>,
    /// Nodes expanded before the goal node was selected.
    pub expansions: usize,
    /// `Σ |A(s)|` over expanded nodes.
    pub generations: u64,
    /// Expansions completed before the one that generated the first goal;
    /// `None` when the root is a goal.
    pub expansions_before_goal_generated: Option<usize>,
    /// Generations once the first goal node was generated.
    pub generations_at_goal_generated: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key {
    p: f64,
    depth: usize,
    long_first: bool,
}

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other.p.total_cmp(&self.p).then_with(|| {
            if self.long_first {
                other.depth.cmp(&self.depth)
            } else {
                self.depth.cmp(&other.depth)
            }
        })
    }
}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Best-first search over the library's prefix trie. Remaining ties go to
/// insertion order.
pub fn oracle_search(
    lib: &TrajectoryLibrary,
    ordering: Ordering,
) -> Result<OracleTrace, IrplError> {
    if lib.num_plans() == 0 {
        return Err(IrplError::NoPlan);
    }
    let key = |id: usize| {
        let p = lib.probs_at(id);
        match ordering {
            Ordering::MaxPosteriorTiesLong => Key {
                p: p.p_g_given_o,
                depth: lib.node(id).depth,
                long_first: true,
            },
            Ordering::MaxLikelihood => Key {
                p: p.p_o_given_g,
                depth: lib.node(id).depth,
                long_first: false,
            },
        }
    };
    let is_goal = |id: usize| {
        lib.node(id)
            .terminal
            .is_some_and(|t| lib.trajectories()[t].is_plan)
    };
    let mut open: BTreeSet<(Key, usize, usize)> = BTreeSet::new();
    open.insert((key(0), 0, 0));
    let mut seq = 1;
    let mut trace = OracleTrace {
        expanded: Vec::new(),
        first_plan: Vec::new(),
        expansions: 0,
        generations: 0,
        expansions_before_goal_generated: None,
        generations_at_goal_generated: None,
    };
    while let Some((_, _, id)) = open.pop_first() {
        if is_goal(id) {
            trace.first_plan = lib.prefix(id);
            return Ok(trace);
        }
        let node = lib.node(id);
        trace.expansions += 1;
        trace.generations += u64::from(node.branching);
        trace.expanded.push(id);
        for &(_, child) in &node.children {
            if trace.generations_at_goal_generated.is_none() && is_goal(child) {
                trace.expansions_before_goal_generated = Some(trace.expansions - 1);
                trace.generations_at_goal_generated = Some(trace.generations);
            }
            open.insert((key(child), seq, child));
            seq += 1;
        }
    }
    unreachable!("every plan leaf is eventually selected")
}
