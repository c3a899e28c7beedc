//! Evaluators behind the search's lexicographic node ordering.

mod intent;
mod novelty;

use std::cmp::Ordering;

pub use intent::{intent_update, log_term, IntentAccumulator, IntentMode};
pub use novelty::NoveltyStore;

use crate::relaxation::LandmarkSet;
use crate::task::{PlanningTask, State};

/// Number of goal facts not true in `s`.
pub fn goal_count(task: &PlanningTask, s: &State) -> u32 {
    task.goal().iter().filter(|&&g| !s.contains(g)).count() as u32
}

/// Landmarks never true along the path so far.
pub fn landmark_count(lms: &LandmarkSet, path_achieved: &State) -> u32 {
    lms.facts()
        .iter()
        .filter(|&&l| !path_achieved.contains(l))
        .count() as u32
}

/// Relaxed-plan facts achieved along the path so far.
pub fn num_r(r_facts: &State, path_achieved: &State) -> u32 {
    r_facts.intersection_count(path_achieved) as u32
}

/// Sort key of a search node: novelty, then `h_primary`, then intention score
/// (higher first), then `g`.
#[derive(Debug, Clone, Copy)]
pub struct EvalKey {
    pub novelty: u8,
    pub h_primary: u32,
    pub intent_score: f64,
    pub g: u32,
}

impl EvalKey {
    pub fn new(novelty: u8, h_primary: u32, intent_score: f64, g: u32) -> Self {
        debug_assert!((1..=3).contains(&novelty));
        EvalKey {
            novelty,
            h_primary,
            // folds -0.0 into 0.0 so equal scores compare equal
            intent_score: intent_score + 0.0,
            g,
        }
    }
}

impl Ord for EvalKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.novelty
            .cmp(&other.novelty)
            .then(self.h_primary.cmp(&other.h_primary))
            .then(other.intent_score.total_cmp(&self.intent_score))
            .then(self.g.cmp(&other.g))
    }
}

impl PartialOrd for EvalKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for EvalKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for EvalKey {}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::chain3;
    use crate::relaxation::{extract_landmarks, relaxed_plan_facts};

    #[test]
    fn goal_count_examples() {
        let t = chain3();
        assert_eq!(goal_count(&t, &t.initial_state()), 1);
        assert_eq!(goal_count(&t, &State::from_facts(4, [3])), 0);
        let empty = crate::task::TaskBuilder::new("e")
            .facts(&["a"])
            .build()
            .unwrap();
        assert_eq!(goal_count(&empty, &State::empty(1)), 0);
    }

    #[test]
    fn landmark_and_r_counts_on_chain3() {
        let t = chain3();
        let lms = extract_landmarks(&t).unwrap();
        let init = t.initial_state();
        assert_eq!(landmark_count(&lms, &init), 3);
        assert_eq!(landmark_count(&lms, &State::from_facts(4, 0..4)), 0);
        assert_eq!(landmark_count(&LandmarkSet::new(vec![]), &init), 0);
        let r = State::from_facts(4, relaxed_plan_facts(&t).unwrap());
        assert_eq!(num_r(&r, &init), 0);
        assert_eq!(num_r(&r, &State::from_facts(4, 0..4)), 3);
        assert_eq!(num_r(&State::empty(4), &init), 0);
    }

    #[test]
    fn key_order_prefers_higher_intent_then_lower_g() {
        let a = EvalKey::new(1, 2, -0.5, 7);
        let b = EvalKey::new(1, 2, -1.0, 1);
        assert!(a < b);
        assert!(EvalKey::new(1, 2, 0.0, 1) < EvalKey::new(1, 2, 0.0, 2));
        assert!(EvalKey::new(1, 3, 5.0, 0) > EvalKey::new(1, 2, -9.0, 9));
        assert!(EvalKey::new(2, 0, 0.0, 0) > EvalKey::new(1, 9, -9.0, 9));
        assert_eq!(EvalKey::new(1, 0, -0.0, 0), EvalKey::new(1, 0, 0.0, 0));
    }
}
