//! Delete relaxation: relaxed planning graph, h_add, the relaxed-plan fact
//! set behind the #r partition, and single-fact landmarks.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use thiserror::Error;

use crate::task::{ActionId, FactId, PlanningTask, State};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RelaxationError {
    #[error("task is unsolvable under delete relaxation; unreachable goal facts {0:?}")]
    RelaxedUnsolvable(Vec<FactId>),
}

/// Layered relaxed planning graph from a source state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rpg {
    source: State,
    fact_level: Vec<Option<u32>>,
    action_level: Vec<Option<u32>>,
    /// `layers[t]` holds the actions first enabled at layer `t`.
    layers: Vec<Vec<ActionId>>,
    levels: u32,
}

impl Rpg {
    pub fn source(&self) -> &State {
        &self.source
    }

    pub fn fact_level(&self, f: FactId) -> Option<u32> {
        self.fact_level[f]
    }

    pub fn action_level(&self, a: ActionId) -> Option<u32> {
        self.action_level[a]
    }

    /// Highest finite fact level.
    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn layer(&self, t: usize) -> &[ActionId] {
        self.layers.get(t).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_reachable(&self, f: FactId) -> bool {
        self.fact_level[f].is_some()
    }

    /// Facts with a finite level, ascending.
    pub fn reachable_facts(&self) -> Vec<FactId> {
        (0..self.fact_level.len())
            .filter(|&f| self.fact_level[f].is_some())
            .collect()
    }
}

pub fn build_rpg(task: &PlanningTask, s: &State) -> Rpg {
    let nf = task.num_facts();
    let na = task.num_actions();
    let mut fact_level = vec![None; nf];
    let mut action_level = vec![None; na];
    let mut unmet: Vec<usize> = task.actions().iter().map(|a| a.pre.len()).collect();
    let mut layers: Vec<Vec<ActionId>> = Vec::new();

    let mut current: Vec<ActionId> = (0..na).filter(|&a| unmet[a] == 0).collect();
    for f in s.iter() {
        fact_level[f] = Some(0);
        for &a in task.consumers(f) {
            unmet[a] -= 1;
            if unmet[a] == 0 {
                current.push(a);
            }
        }
    }
    let mut levels = 0;
    let mut t = 0u32;
    while !current.is_empty() {
        current.sort_unstable();
        let mut next = Vec::new();
        for &a in &current {
            action_level[a] = Some(t);
            for &f in &task.action(a).add {
                if fact_level[f].is_none() {
                    fact_level[f] = Some(t + 1);
                    levels = t + 1;
                    for &c in task.consumers(f) {
                        unmet[c] -= 1;
                        if unmet[c] == 0 {
                            next.push(c);
                        }
                    }
                }
            }
        }
        layers.push(std::mem::replace(&mut current, next));
        t += 1;
    }
    Rpg {
        source: s.clone(),
        fact_level,
        action_level,
        layers,
        levels,
    }
}

/// Additive costs for every fact and action from a source state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HAddTable {
    fact_cost: Vec<Option<u64>>,
    action_cost: Vec<Option<u64>>,
}

impl HAddTable {
    pub fn compute(task: &PlanningTask, s: &State) -> Self {
        let nf = task.num_facts();
        let na = task.num_actions();
        let mut fact_cost: Vec<Option<u64>> = vec![None; nf];
        let mut action_cost: Vec<Option<u64>> = vec![None; na];
        let mut unmet: Vec<usize> = task.actions().iter().map(|a| a.pre.len()).collect();
        let mut sum = vec![0u64; na];
        let mut closed = vec![false; nf];
        let mut heap = BinaryHeap::new();

        let relax =
            |c: u64, f: FactId, fact_cost: &mut Vec<Option<u64>>, heap: &mut BinaryHeap<_>| {
                if fact_cost[f].is_none_or(|old| c < old) {
                    fact_cost[f] = Some(c);
                    heap.push(Reverse((c, f)));
                }
            };
        for f in s.iter() {
            relax(0, f, &mut fact_cost, &mut heap);
        }
        for a in 0..na {
            if unmet[a] == 0 {
                action_cost[a] = Some(1);
                for &f in &task.action(a).add {
                    relax(1, f, &mut fact_cost, &mut heap);
                }
            }
        }
        while let Some(Reverse((c, f))) = heap.pop() {
            if closed[f] {
                continue;
            }
            closed[f] = true;
            for &a in task.consumers(f) {
                unmet[a] -= 1;
                sum[a] += c;
                if unmet[a] == 0 {
                    let ac = 1 + sum[a];
                    action_cost[a] = Some(ac);
                    for &q in &task.action(a).add {
                        relax(ac, q, &mut fact_cost, &mut heap);
                    }
                }
            }
        }
        HAddTable {
            fact_cost,
            action_cost,
        }
    }

    pub fn fact(&self, f: FactId) -> Option<u64> {
        self.fact_cost[f]
    }

    /// `1 + Σ h_add(pre)`, or `None` if some precondition is unreachable.
    pub fn action(&self, a: ActionId) -> Option<u64> {
        self.action_cost[a]
    }

    pub fn sum(&self, targets: &[FactId]) -> Option<u64> {
        targets
            .iter()
            .try_fold(0u64, |acc, &f| Some(acc + self.fact_cost[f]?))
    }
}

/// `Σ_{q ∈ targets} h_add(q)`; `None` encodes infinity.
pub fn h_add(task: &PlanningTask, s: &State, targets: &[FactId]) -> Option<u64> {
    HAddTable::compute(task, s).sum(targets)
}

fn unreachable_goals(task: &PlanningTask, hadd: &HAddTable) -> Vec<FactId> {
    task.goal()
        .iter()
        .copied()
        .filter(|&g| hadd.fact(g).is_none())
        .collect()
}

/// Achiever of `f` with minimal h_add action cost, lowest id on ties.
pub(crate) fn best_supporter(task: &PlanningTask, hadd: &HAddTable, f: FactId) -> Option<ActionId> {
    task.achievers(f)
        .iter()
        .filter_map(|&a| hadd.action(a).map(|c| (c, a)))
        .min()
        .map(|(_, a)| a)
}

/// Add effects of one greedy min-h_add relaxed plan from init, plus the goal.
pub fn relaxed_plan_facts(task: &PlanningTask) -> Result<Vec<FactId>, RelaxationError> {
    let init = task.initial_state();
    let hadd = HAddTable::compute(task, &init);
    let missing = unreachable_goals(task, &hadd);
    if !missing.is_empty() {
        return Err(RelaxationError::RelaxedUnsolvable(missing));
    }
    let mut achieved = init;
    let mut chosen = BTreeSet::new();
    let mut stack: Vec<FactId> = task.goal().iter().rev().copied().collect();
    while let Some(q) = stack.pop() {
        if achieved.contains(q) {
            continue;
        }
        let a = best_supporter(task, &hadd, q).expect("reachable fact has a finite achiever");
        chosen.insert(a);
        let action = task.action(a);
        for &p in action.pre.iter().rev() {
            if !achieved.contains(p) {
                stack.push(p);
            }
        }
        for &f in &action.add {
            achieved.insert(f);
        }
    }
    let mut facts: BTreeSet<FactId> = task.goal().iter().copied().collect();
    for a in chosen {
        facts.extend(task.action(a).add.iter().copied());
    }
    Ok(facts.into_iter().collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LandmarkSet {
    landmarks: Vec<FactId>,
}

impl LandmarkSet {
    pub fn new(mut landmarks: Vec<FactId>) -> Self {
        landmarks.sort_unstable();
        landmarks.dedup();
        LandmarkSet { landmarks }
    }

    pub fn facts(&self) -> &[FactId] {
        &self.landmarks
    }

    pub fn len(&self) -> usize {
        self.landmarks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.landmarks.is_empty()
    }

    pub fn contains(&self, f: FactId) -> bool {
        self.landmarks.binary_search(&f).is_ok()
    }
}

/// Goal facts plus, by backchaining, every fact shared by the preconditions
/// of all relaxed-reachable achievers of an established landmark.
pub fn extract_landmarks(task: &PlanningTask) -> Result<LandmarkSet, RelaxationError> {
    let init = task.initial_state();
    let rpg = build_rpg(task, &init);
    let missing: Vec<FactId> = task
        .goal()
        .iter()
        .copied()
        .filter(|&g| !rpg.is_reachable(g))
        .collect();
    if !missing.is_empty() {
        return Err(RelaxationError::RelaxedUnsolvable(missing));
    }
    let mut landmarks: BTreeSet<FactId> = task.goal().iter().copied().collect();
    let mut queue: Vec<FactId> = task.goal().to_vec();
    while let Some(q) = queue.pop() {
        if init.contains(q) {
            continue;
        }
        let mut shared: Option<BTreeSet<FactId>> = None;
        for &a in task.achievers(q) {
            if rpg.action_level(a).is_none() {
                continue;
            }
            let pre: BTreeSet<FactId> = task.action(a).pre.iter().copied().collect();
            shared = Some(match shared {
                None => pre,
                Some(s) => s.intersection(&pre).copied().collect(),
            });
        }
        for p in shared.unwrap_or_default() {
            if landmarks.insert(p) {
                queue.push(p);
            }
        }
    }
    Ok(LandmarkSet::new(landmarks.into_iter().collect()))
}

/// Facts reachable from `s` under delete relaxation using only actions
/// accepted by `allowed`.
pub fn relaxed_closure(
    task: &PlanningTask,
    s: &State,
    allowed: impl Fn(ActionId) -> bool,
) -> State {
    let mut reached = s.clone();
    loop {
        let mut changed = false;
        for (a, action) in task.actions().iter().enumerate() {
            if allowed(a) && reached.contains_all(&action.pre) {
                for &f in &action.add {
                    if !reached.contains(f) {
                        reached.insert(f);
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            return reached;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{chain3, fork};
    use crate::task::{Action, TaskBuilder};
    use proptest::prelude::*;

    fn id(t: &PlanningTask, n: &str) -> FactId {
        t.fact_id(n).unwrap()
    }

    #[test]
    fn chain3_rpg_levels() {
        let t = chain3();
        let rpg = build_rpg(&t, &t.initial_state());
        let levels: Vec<_> = ["p0", "p1", "p2", "gl"]
            .iter()
            .map(|n| rpg.fact_level(id(&t, n)))
            .collect();
        assert_eq!(levels, [Some(0), Some(1), Some(2), Some(3)]);
        assert_eq!(rpg.levels(), 3);
        assert_eq!(rpg.layer(0), &[0]);
    }

    #[test]
    fn goal_state_has_goal_at_level_zero() {
        let t = chain3();
        let s = State::from_facts(4, [id(&t, "gl")]);
        assert_eq!(build_rpg(&t, &s).fact_level(id(&t, "gl")), Some(0));
    }

    #[test]
    fn unreachable_fact_is_infinite() {
        let t = TaskBuilder::new("u")
            .facts(&["a", "b"])
            .init(&["a"])
            .build()
            .unwrap();
        let s = t.initial_state();
        assert_eq!(build_rpg(&t, &s).fact_level(1), None);
        assert_eq!(h_add(&t, &s, &[1]), None);
    }

    #[test]
    fn chain3_h_add() {
        let t = chain3();
        let s = t.initial_state();
        assert_eq!(h_add(&t, &s, &[id(&t, "gl")]), Some(3));
        assert_eq!(h_add(&t, &s, &[id(&t, "p0")]), Some(0));
    }

    #[test]
    fn h_add_sums_shared_preconditions() {
        // g needs a and b, both from init via one step: h_add(g) = 1 + 1 + 1
        let t = TaskBuilder::new("sum")
            .facts(&["i", "a", "b", "g"])
            .action("ta", &["i"], &["a"], &[])
            .action("tb", &["i"], &["b"], &[])
            .action("tg", &["a", "b"], &["g"], &[])
            .init(&["i"])
            .build()
            .unwrap();
        assert_eq!(h_add(&t, &t.initial_state(), &[3]), Some(3));
    }

    #[test]
    fn chain3_relaxed_plan_facts() {
        let t = chain3();
        let mut expected = vec![id(&t, "p1"), id(&t, "p2"), id(&t, "gl")];
        expected.sort();
        assert_eq!(relaxed_plan_facts(&t).unwrap(), expected);
    }

    #[test]
    fn relaxed_plan_facts_goal_in_init() {
        let t = TaskBuilder::new("g")
            .facts(&["g", "h"])
            .action("x", &["g"], &["h"], &[])
            .init(&["g"])
            .goal(&["g"])
            .build()
            .unwrap();
        assert_eq!(relaxed_plan_facts(&t).unwrap(), vec![0]);
    }

    #[test]
    fn relaxed_unsolvable_errors() {
        let t = TaskBuilder::new("u")
            .facts(&["a", "b"])
            .init(&["a"])
            .goal(&["b"])
            .build()
            .unwrap();
        assert_eq!(
            relaxed_plan_facts(&t),
            Err(RelaxationError::RelaxedUnsolvable(vec![1]))
        );
        assert!(extract_landmarks(&t).is_err());
    }

    #[test]
    fn chain3_landmarks() {
        let t = chain3();
        let lms = extract_landmarks(&t).unwrap();
        assert_eq!(lms.len(), 4);
    }

    #[test]
    fn disjoint_achievers_yield_only_goal() {
        let t = TaskBuilder::new("d")
            .facts(&["i", "a", "b", "g"])
            .action("ta", &["i"], &["a"], &[])
            .action("tb", &["i"], &["b"], &[])
            .action("ga", &["a"], &["g"], &[])
            .action("gb", &["b"], &["g"], &[])
            .init(&["i"])
            .goal(&["g"])
            .build()
            .unwrap();
        assert_eq!(extract_landmarks(&t).unwrap().facts(), &[3]);
    }

    #[test]
    fn goal_in_init_landmarks_are_goal() {
        let t = fork();
        let t2 = TaskBuilder::new("gi")
            .facts(&["s0", "s1"])
            .action("a", &["s0"], &["s1"], &[])
            .init(&["s0"])
            .goal(&["s0"])
            .build()
            .unwrap();
        assert_eq!(extract_landmarks(&t2).unwrap().facts(), &[0]);
        assert!(extract_landmarks(&t).unwrap().contains(id(&t, "s1")));
    }

    fn random_task(
        spec: Vec<(Vec<usize>, Vec<usize>)>,
        init: Vec<usize>,
        goal: Vec<usize>,
    ) -> PlanningTask {
        let n = 7;
        let actions = spec
            .into_iter()
            .enumerate()
            .map(|(i, (pre, add))| Action {
                name: format!("a{i}"),
                pre,
                add,
                del: vec![],
            })
            .collect();
        PlanningTask::new(
            "r",
            (0..n).map(|i| format!("f{i}")).collect(),
            actions,
            init,
            goal,
        )
        .unwrap()
    }

    fn arb() -> impl Strategy<Value = PlanningTask> {
        let list = proptest::collection::vec(0..7usize, 0..3);
        (
            proptest::collection::vec((list.clone(), list.clone()), 1..9),
            proptest::collection::vec(0..7usize, 1..3),
            proptest::collection::vec(0..7usize, 1..3),
        )
            .prop_map(|(s, i, g)| random_task(s, i, g))
    }

    proptest! {
        #[test]
        fn h_add_zero_iff_subset_and_level_bounded(t in arb()) {
            let s = t.initial_state();
            let rpg = build_rpg(&t, &s);
            let table = HAddTable::compute(&t, &s);
            for f in 0..t.num_facts() {
                prop_assert_eq!(rpg.fact_level(f).is_some(), table.fact(f).is_some());
                if let (Some(l), Some(h)) = (rpg.fact_level(f), table.fact(f)) {
                    prop_assert!(u64::from(l) <= h);
                }
                prop_assert_eq!(table.fact(f) == Some(0), s.contains(f));
            }
        }

        #[test]
        fn landmarks_are_necessary(t in arb()) {
            let Ok(lms) = extract_landmarks(&t) else { return Ok(()); };
            let init = t.initial_state();
            for &g in t.goal() {
                prop_assert!(lms.contains(g));
            }
            for &l in lms.facts() {
                // Remove the landmark from init and all of its achievers.
                let mut s = init.clone();
                s.remove(l);
                let reach = relaxed_closure(&t, &s, |a| !t.action(a).add.contains(&l));
                prop_assert!(!t.goal().iter().all(|&g| reach.contains(g)),
                    "landmark {} not necessary", l);
            }
        }
    }
}
