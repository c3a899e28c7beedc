use crate::sampling::FactProbTable;
use crate::task::FactId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IntentMode {
    /// `Σ ln P_rel(q|G)`
    Likelihood,
    /// `Σ ln P_rel(q|G) − ln P_rel(q|¬G)`
    Posterior,
}

/// Running intention score of a path segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntentAccumulator {
    pub score: f64,
    /// Best `h_primary` seen along the path.
    pub baseline_h: u32,
}

impl IntentAccumulator {
    pub fn root(h: u32) -> Self {
        IntentAccumulator {
            score: 0.0,
            baseline_h: h,
        }
    }
}

/// Per-fact contribution. A posterior table without ¬G entries scores like
/// the likelihood.
pub fn log_term(table: &FactProbTable, mode: IntentMode, q: FactId) -> f64 {
    match mode {
        IntentMode::Likelihood => table.log_p_goal(q),
        IntentMode::Posterior => table.log_p_goal(q) - table.log_p_nongoal(q).unwrap_or(0.0),
    }
}

/// Extends `parent` by one transition that made `newly_true` true.
///
/// When `new_h` improves on the baseline the segment restarts and the score
/// becomes the sum over this transition's facts alone. Otherwise each fact
/// not yet observed in the segment (per `already_observed`) adds its term.
/// Returns the child accumulator and whether a restart happened.
pub fn intent_update(
    parent: &IntentAccumulator,
    new_h: u32,
    newly_true: &[FactId],
    table: &FactProbTable,
    mode: IntentMode,
    already_observed: impl Fn(FactId) -> bool,
) -> (IntentAccumulator, bool) {
    let sum = |facts: &mut dyn Iterator<Item = &FactId>| -> f64 {
        facts.map(|&q| log_term(table, mode, q)).sum()
    };
    if new_h < parent.baseline_h {
        let acc = IntentAccumulator {
            score: sum(&mut newly_true.iter()),
            baseline_h: new_h,
        };
        return (acc, true);
    }
    let score = parent.score + sum(&mut newly_true.iter().filter(|&&q| !already_observed(q)));
    (
        IntentAccumulator {
            score,
            baseline_h: parent.baseline_h,
        },
        false,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::two_achievers;
    use crate::sampling::{build_goal_table, build_nongoal_table, Weighting};
    use crate::task::{PlanningTask, TaskBuilder};
    use proptest::prelude::*;

    // g has two achievers sampled half the time each: P_rel(g|G) = 0.75
    fn table() -> (PlanningTask, FactProbTable) {
        let t = two_achievers();
        let table = build_goal_table(&t, 100, 0, Weighting::Uniform).unwrap();
        (t, table)
    }

    #[test]
    fn likelihood_adds_log_term() {
        let (_, table) = table();
        let parent = IntentAccumulator {
            score: -0.2,
            baseline_h: 1,
        };
        let (acc, restarted) =
            intent_update(&parent, 1, &[1], &table, IntentMode::Likelihood, |_| false);
        assert!(!restarted);
        assert!((acc.score - (-0.2 + 0.75f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn half_probability_example() {
        // one achiever sampled in exactly half of the samples
        let t = TaskBuilder::new("half")
            .facts(&["s", "q", "r"])
            .action("x", &["s"], &["q"], &[])
            .action("y", &["s"], &["q", "r"], &[])
            .action("z", &["s"], &["r"], &[])
            .init(&["s"])
            .goal(&["r"])
            .build()
            .unwrap();
        let table = build_goal_table(&t, 100, 0, Weighting::Uniform).unwrap();
        // r: achievers y,z at 1/2 each; q only through y
        assert_eq!(table.p_goal(2), 0.75);
        assert_eq!(table.p_goal(1), 0.5);
        let parent = IntentAccumulator {
            score: -0.2,
            baseline_h: 1,
        };
        let (acc, _) = intent_update(&parent, 1, &[1], &table, IntentMode::Likelihood, |_| false);
        assert!((acc.score - (-0.893147)).abs() < 1e-6);
    }

    #[test]
    fn restart_scores_only_this_transition() {
        let (_, table) = table();
        let parent = IntentAccumulator {
            score: -5.0,
            baseline_h: 1,
        };
        let (acc, restarted) =
            intent_update(&parent, 0, &[1], &table, IntentMode::Likelihood, |_| true);
        assert!(restarted);
        assert_eq!(acc.baseline_h, 0);
        assert_eq!(acc.score, 0.75f64.ln());
    }

    #[test]
    fn observed_fact_changes_nothing() {
        let (_, table) = table();
        let parent = IntentAccumulator {
            score: -0.3,
            baseline_h: 1,
        };
        let (acc, _) = intent_update(&parent, 1, &[1], &table, IntentMode::Likelihood, |q| q == 1);
        assert_eq!(acc, parent);
    }

    #[test]
    fn posterior_sign_follows_probability_ratio() {
        let t = crate::fixtures::shared_achiever();
        let table = build_goal_table(&t, 100, 0, Weighting::Uniform)
            .unwrap()
            .with_nongoal(build_nongoal_table(&t, 100, 0).unwrap());
        let parent = IntentAccumulator {
            score: 0.0,
            baseline_h: 1,
        };
        for q in 0..t.num_facts() {
            let (acc, _) =
                intent_update(&parent, 1, &[q], &table, IntentMode::Posterior, |_| false);
            let (pg, png) = (table.p_goal(q), table.p_nongoal(q).unwrap());
            if pg > png {
                assert!(acc.score > 0.0);
            } else if pg < png {
                assert!(acc.score < 0.0);
            } else {
                assert_eq!(acc.score, 0.0);
            }
        }
    }

    proptest! {
        #[test]
        fn likelihood_never_increases_within_a_segment(
            steps in proptest::collection::vec(proptest::collection::vec(0usize..2, 0..3), 1..10)
        ) {
            let (_, table) = table();
            let mut acc = IntentAccumulator::root(1);
            for facts in steps {
                let (next, restarted) =
                    intent_update(&acc, 1, &facts, &table, IntentMode::Likelihood, |_| false);
                prop_assert!(!restarted);
                prop_assert!(next.score <= acc.score);
                acc = next;
            }
        }
    }
}
