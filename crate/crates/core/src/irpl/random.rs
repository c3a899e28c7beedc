use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{enumerate_maximal, TrajectoryLibrary};
use crate::task::{Action, PlanningTask};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TinyTaskLimits {
    pub max_facts: usize,
    pub max_trajectories: usize,
    /// Fewest trajectories accepted, so libraries are not trivially small.
    pub min_trajectories: usize,
    /// Longest plan allowed in the library.
    pub max_plan_len: usize,
}

impl Default for TinyTaskLimits {
    fn default() -> Self {
        TinyTaskLimits {
            max_facts: 12,
            max_trajectories: 2_000,
            min_trajectories: 3,
            max_plan_len: usize::MAX,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TinyTask {
    pub task: PlanningTask,
    pub library: TrajectoryLibrary,
    /// Generator attempts consumed before one satisfied the limits.
    pub attempts: u32,
}

fn draw_task(rng: &mut ChaCha8Rng, max_facts: usize) -> PlanningTask {
    let n = rng.gen_range(5..=max_facts.clamp(5, 10));
    let m = rng.gen_range(4..=12);
    let pick = |rng: &mut ChaCha8Rng, lo: usize, hi: usize| {
        let k = rng.gen_range(lo..=hi).min(n);
        sample(rng, n, k).into_vec()
    };
    let actions = (0..m)
        .map(|i| {
            let pre = pick(rng, 1, 2);
            let add = pick(rng, 1, 3);
            let mut del: Vec<usize> = pre.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
            if rng.gen_bool(0.2) {
                del.push(rng.gen_range(0..n));
            }
            Action {
                name: format!("a{i}"),
                pre,
                add,
                del,
            }
        })
        .collect();
    let init = pick(rng, 2, 4);
    let goal: Vec<usize> = pick(rng, 1, 3);
    let facts = (0..n).map(|i| format!("f{i}")).collect();
    PlanningTask::new("tiny", facts, actions, init, goal).expect("generated ids are in range")
}

/// Seeded random STRIPS task with at least one plan whose trajectory library
/// respects `limits`; redraws until one does.
pub fn random_tiny_task(seed: u64, limits: &TinyTaskLimits) -> TinyTask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut attempts = 0;
    loop {
        attempts += 1;
        let task = draw_task(&mut rng, limits.max_facts);
        if task.is_goal(&task.initial_state()) {
            continue;
        }
        let Ok(library) = enumerate_maximal(&task, limits.max_trajectories) else {
            continue;
        };
        let plans = library.trajectories().iter().filter(|t| t.is_plan);
        if library.num_plans() == 0
            || library.len() < limits.min_trajectories
            || plans.clone().any(|t| t.len() > limits.max_plan_len)
        {
            continue;
        }
        return TinyTask {
            task,
            library,
            attempts,
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_tasks_respect_limits() {
        let limits = TinyTaskLimits {
            max_plan_len: 8,
            ..TinyTaskLimits::default()
        };
        for seed in 0..20 {
            let t = random_tiny_task(seed, &limits);
            assert!(t.task.num_facts() <= 12);
            assert!(t.library.len() <= 2_000);
            assert!(t.library.num_plans() >= 1);
            for tr in t.library.trajectories().iter().filter(|t| t.is_plan) {
                assert!(tr.len() <= 8);
                let plan = crate::task::Plan::new(tr.actions.clone());
                assert!(t.task.validate_plan(&plan).is_valid());
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = random_tiny_task(42, &TinyTaskLimits::default());
        let b = random_tiny_task(42, &TinyTaskLimits::default());
        assert_eq!(a.library, b.library);
        assert_eq!(a.attempts, b.attempts);
    }
}
