//! Grounded STRIPS tasks, bit-set states, and plan validation.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use thiserror::Error;

pub type FactId = usize;
pub type ActionId = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TaskError {
    #[error("fact id {0} out of range")]
    FactOutOfRange(FactId),
    #[error("duplicate fact name '{0}'")]
    DuplicateFact(String),
    #[error("duplicate action name '{0}'")]
    DuplicateAction(String),
    #[error("unknown fact '{0}'")]
    UnknownFact(String),
    #[error("action '{name}' is not applicable: missing {missing:?}")]
    Inapplicable { name: String, missing: Vec<FactId> },
    #[error("unknown action '{0}' in plan")]
    UnknownAction(String),
    #[error("malformed plan line {line}: {msg}")]
    PlanSyntax { line: usize, msg: String },
}

/// Fixed-width bit set over fact ids.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State {
    words: Box<[u64]>,
    width: usize,
}

impl State {
    pub fn empty(width: usize) -> Self {
        State {
            words: vec![0u64; width.div_ceil(64)].into_boxed_slice(),
            width,
        }
    }

    pub fn from_facts(width: usize, facts: impl IntoIterator<Item = FactId>) -> Self {
        let mut s = State::empty(width);
        for f in facts {
            s.insert(f);
        }
        s
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn contains(&self, f: FactId) -> bool {
        self.words[f >> 6] & (1u64 << (f & 63)) != 0
    }

    #[inline]
    pub fn insert(&mut self, f: FactId) {
        assert!(
            f < self.width,
            "fact {f} outside state width {}",
            self.width
        );
        self.words[f >> 6] |= 1u64 << (f & 63);
    }

    #[inline]
    pub fn remove(&mut self, f: FactId) {
        self.words[f >> 6] &= !(1u64 << (f & 63));
    }

    pub fn contains_all(&self, facts: &[FactId]) -> bool {
        facts.iter().all(|&f| self.contains(f))
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn union_with(&mut self, other: &State) {
        for (a, b) in self.words.iter_mut().zip(other.words.iter()) {
            *a |= *b;
        }
    }

    /// Number of facts set in both.
    pub fn intersection_count(&self, other: &State) -> usize {
        self.words
            .iter()
            .zip(other.words.iter())
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    /// Facts in `self` but not in `other`, ascending.
    pub fn difference(&self, other: &State) -> Vec<FactId> {
        let mut out = Vec::new();
        for (i, (a, b)) in self.words.iter().zip(other.words.iter()).enumerate() {
            let mut w = a & !b;
            while w != 0 {
                out.push(i * 64 + w.trailing_zeros() as usize);
                w &= w - 1;
            }
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = FactId> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let bit = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(i * 64 + bit)
                }
            })
        })
    }

    pub fn heap_bytes(&self) -> usize {
        self.words.len() * std::mem::size_of::<u64>()
    }
}

impl fmt::Debug for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Action {
    /// Printable name without parentheses, e.g. `pick ball1 rooma left`.
    pub name: String,
    pub pre: Vec<FactId>,
    pub add: Vec<FactId>,
    pub del: Vec<FactId>,
}

impl Action {
    /// Every action costs exactly one.
    pub fn cost(&self) -> u32 {
        1
    }
}

#[derive(Debug, Clone)]
pub struct PlanningTask {
    pub name: String,
    facts: Vec<String>,
    actions: Vec<Action>,
    init: Vec<FactId>,
    goal: Vec<FactId>,
    achievers: Vec<Vec<ActionId>>,
    consumers: Vec<Vec<ActionId>>,
    action_index: HashMap<String, ActionId>,
}

fn normalize(list: &mut Vec<FactId>) {
    list.sort_unstable();
    list.dedup();
}

impl PlanningTask {
    /// Builds a task, sorting and de-duplicating every fact list and removing
    /// add effects from delete lists.
    pub fn new(
        name: impl Into<String>,
        facts: Vec<String>,
        mut actions: Vec<Action>,
        mut init: Vec<FactId>,
        mut goal: Vec<FactId>,
    ) -> Result<Self, TaskError> {
        let n = facts.len();
        let mut seen = HashMap::new();
        for (i, f) in facts.iter().enumerate() {
            if seen.insert(f.as_str(), i).is_some() {
                return Err(TaskError::DuplicateFact(f.clone()));
            }
        }
        let check = |list: &[FactId]| match list.iter().find(|&&f| f >= n) {
            Some(&f) => Err(TaskError::FactOutOfRange(f)),
            None => Ok(()),
        };
        normalize(&mut init);
        normalize(&mut goal);
        check(&init)?;
        check(&goal)?;
        let mut achievers = vec![Vec::new(); n];
        let mut consumers = vec![Vec::new(); n];
        let mut action_index = HashMap::new();
        for (id, a) in actions.iter_mut().enumerate() {
            normalize(&mut a.pre);
            normalize(&mut a.add);
            normalize(&mut a.del);
            a.del.retain(|f| a.add.binary_search(f).is_err());
            check(&a.pre)?;
            check(&a.add)?;
            check(&a.del)?;
            for &f in &a.add {
                achievers[f].push(id);
            }
            for &f in &a.pre {
                consumers[f].push(id);
            }
            if action_index.insert(a.name.clone(), id).is_some() {
                return Err(TaskError::DuplicateAction(a.name.clone()));
            }
        }
        Ok(PlanningTask {
            name: name.into(),
            facts,
            actions,
            init,
            goal,
            achievers,
            consumers,
            action_index,
        })
    }

    pub fn num_facts(&self) -> usize {
        self.facts.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn fact_name(&self, f: FactId) -> &str {
        &self.facts[f]
    }

    pub fn fact_names(&self) -> &[String] {
        &self.facts
    }

    pub fn fact_id(&self, name: &str) -> Option<FactId> {
        self.facts.iter().position(|f| f == name)
    }

    pub fn action(&self, a: ActionId) -> &Action {
        &self.actions[a]
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn action_id(&self, name: &str) -> Option<ActionId> {
        self.action_index.get(name).copied()
    }

    pub fn init(&self) -> &[FactId] {
        &self.init
    }

    pub fn goal(&self) -> &[FactId] {
        &self.goal
    }

    /// Actions whose add list contains `f`, ascending.
    pub fn achievers(&self, f: FactId) -> &[ActionId] {
        &self.achievers[f]
    }

    /// Actions whose precondition contains `f`, ascending.
    pub fn consumers(&self, f: FactId) -> &[ActionId] {
        &self.consumers[f]
    }

    pub fn initial_state(&self) -> State {
        State::from_facts(self.num_facts(), self.init.iter().copied())
    }

    pub fn is_goal(&self, s: &State) -> bool {
        s.contains_all(&self.goal)
    }

    /// Applicable actions in ascending id order.
    pub fn applicable(&self, s: &State) -> Vec<ActionId> {
        self.actions
            .iter()
            .enumerate()
            .filter(|(_, a)| s.contains_all(&a.pre))
            .map(|(i, _)| i)
            .collect()
    }

    /// Successor `(s \ del) ∪ add`.
    pub fn apply(&self, s: &State, a: ActionId) -> Result<State, TaskError> {
        let action = &self.actions[a];
        if !s.contains_all(&action.pre) {
            return Err(TaskError::Inapplicable {
                name: action.name.clone(),
                missing: action
                    .pre
                    .iter()
                    .copied()
                    .filter(|&f| !s.contains(f))
                    .collect(),
            });
        }
        Ok(self.apply_unchecked(s, a))
    }

    pub(crate) fn apply_unchecked(&self, s: &State, a: ActionId) -> State {
        let action = &self.actions[a];
        let mut next = s.clone();
        for &f in &action.del {
            next.remove(f);
        }
        for &f in &action.add {
            next.insert(f);
        }
        next
    }

    pub fn validate_plan(&self, plan: &Plan) -> ValidationReport {
        let mut s = self.initial_state();
        for (index, &a) in plan.actions.iter().enumerate() {
            if a >= self.num_actions() {
                return ValidationReport {
                    cost: plan.cost(),
                    failure: Some(PlanFailure::UnknownAction { index, action: a }),
                };
            }
            match self.apply(&s, a) {
                Ok(next) => s = next,
                Err(TaskError::Inapplicable { missing, .. }) => {
                    return ValidationReport {
                        cost: plan.cost(),
                        failure: Some(PlanFailure::Inapplicable { index, missing }),
                    }
                }
                Err(e) => unreachable!("apply only fails with Inapplicable: {e}"),
            }
        }
        let missing: Vec<FactId> = self
            .goal
            .iter()
            .copied()
            .filter(|&g| !s.contains(g))
            .collect();
        ValidationReport {
            cost: plan.cost(),
            failure: (!missing.is_empty()).then_some(PlanFailure::GoalUnsatisfied { missing }),
        }
    }

    /// IPC plan file: one `(name args)` per line and a trailing cost comment.
    pub fn format_plan(&self, plan: &Plan) -> String {
        let mut out = String::new();
        for &a in &plan.actions {
            let _ = writeln!(out, "({})", self.actions[a].name);
        }
        let _ = writeln!(out, "; cost = {} (unit cost)", plan.cost());
        out
    }

    pub fn parse_plan(&self, text: &str) -> Result<Plan, TaskError> {
        let mut actions = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split(';').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let inner = line
                .strip_prefix('(')
                .and_then(|l| l.strip_suffix(')'))
                .ok_or_else(|| TaskError::PlanSyntax {
                    line: i + 1,
                    msg: "expected '(name args...)'".into(),
                })?;
            let name = inner
                .split_whitespace()
                .map(str::to_ascii_lowercase)
                .collect::<Vec<_>>()
                .join(" ");
            let id = self
                .action_id(&name)
                .ok_or_else(|| TaskError::UnknownAction(name.clone()))?;
            actions.push(id);
        }
        Ok(Plan { actions })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Plan {
    pub actions: Vec<ActionId>,
}

impl Plan {
    pub fn new(actions: Vec<ActionId>) -> Self {
        Plan { actions }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn cost(&self) -> usize {
        self.actions.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanFailure {
    UnknownAction { index: usize, action: ActionId },
    Inapplicable { index: usize, missing: Vec<FactId> },
    GoalUnsatisfied { missing: Vec<FactId> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub cost: usize,
    pub failure: Option<PlanFailure>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.failure.is_none()
    }
}

/// Action name with precondition, add and delete fact names.
type NamedAction = (String, Vec<String>, Vec<String>, Vec<String>);

/// Name-based construction of small tasks.
#[derive(Debug, Default)]
pub struct TaskBuilder {
    name: String,
    facts: Vec<String>,
    actions: Vec<NamedAction>,
    init: Vec<String>,
    goal: Vec<String>,
}

impl TaskBuilder {
    pub fn new(name: &str) -> Self {
        TaskBuilder {
            name: name.to_string(),
            ..Default::default()
        }
    }

    pub fn facts(mut self, names: &[&str]) -> Self {
        self.facts.extend(names.iter().map(|s| s.to_string()));
        self
    }

    pub fn action(mut self, name: &str, pre: &[&str], add: &[&str], del: &[&str]) -> Self {
        let own = |l: &[&str]| l.iter().map(|s| s.to_string()).collect();
        self.actions
            .push((name.to_string(), own(pre), own(add), own(del)));
        self
    }

    pub fn init(mut self, names: &[&str]) -> Self {
        self.init = names.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn goal(mut self, names: &[&str]) -> Self {
        self.goal = names.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn build(self) -> Result<PlanningTask, TaskError> {
        let index: HashMap<&str, FactId> = self
            .facts
            .iter()
            .enumerate()
            .map(|(i, f)| (f.as_str(), i))
            .collect();
        let resolve = |names: &[String]| -> Result<Vec<FactId>, TaskError> {
            names
                .iter()
                .map(|n| {
                    index
                        .get(n.as_str())
                        .copied()
                        .ok_or_else(|| TaskError::UnknownFact(n.clone()))
                })
                .collect()
        };
        let mut actions = Vec::new();
        for (name, pre, add, del) in &self.actions {
            actions.push(Action {
                name: name.clone(),
                pre: resolve(pre)?,
                add: resolve(add)?,
                del: resolve(del)?,
            });
        }
        let init = resolve(&self.init)?;
        let goal = resolve(&self.goal)?;
        PlanningTask::new(self.name, self.facts.clone(), actions, init, goal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::chain3;
    use proptest::prelude::*;

    fn ids(t: &PlanningTask, names: &[&str]) -> Vec<FactId> {
        names.iter().map(|n| t.fact_id(n).unwrap()).collect()
    }

    #[test]
    fn chain3_applicable_and_apply() {
        let t = chain3();
        let init = t.initial_state();
        assert_eq!(t.applicable(&init), vec![t.action_id("a1").unwrap()]);
        let next = t.apply(&init, t.action_id("a1").unwrap()).unwrap();
        assert_eq!(next, State::from_facts(4, ids(&t, &["p1"])));
        let err = t.apply(&init, t.action_id("a3").unwrap()).unwrap_err();
        assert_eq!(
            err,
            TaskError::Inapplicable {
                name: "a3".into(),
                missing: ids(&t, &["p2"])
            }
        );
    }

    #[test]
    fn full_state_enables_every_action_and_empty_state_none() {
        let t = chain3();
        let full = State::from_facts(4, 0..4);
        assert_eq!(t.applicable(&full), vec![0, 1, 2]);
        assert!(t.applicable(&State::empty(4)).is_empty());
    }

    #[test]
    fn identity_action_leaves_state_unchanged() {
        let t = TaskBuilder::new("noop")
            .facts(&["p"])
            .action("noop", &[], &[], &[])
            .init(&["p"])
            .build()
            .unwrap();
        let s = t.initial_state();
        assert_eq!(t.apply(&s, 0).unwrap(), s);
    }

    #[test]
    fn validate_chain3_plans() {
        let t = chain3();
        let a = |n| t.action_id(n).unwrap();
        let ok = t.validate_plan(&Plan::new(vec![a("a1"), a("a2"), a("a3")]));
        assert!(ok.is_valid());
        assert_eq!(ok.cost, 3);
        let bad = t.validate_plan(&Plan::new(vec![a("a2")]));
        assert_eq!(
            bad.failure,
            Some(PlanFailure::Inapplicable {
                index: 0,
                missing: ids(&t, &["p1"])
            })
        );
        let short = t.validate_plan(&Plan::new(vec![a("a1")]));
        assert!(matches!(
            short.failure,
            Some(PlanFailure::GoalUnsatisfied { .. })
        ));
    }

    #[test]
    fn empty_plan_valid_when_goal_in_init() {
        let t = TaskBuilder::new("trivial")
            .facts(&["g"])
            .init(&["g"])
            .goal(&["g"])
            .build()
            .unwrap();
        let r = t.validate_plan(&Plan::default());
        assert!(r.is_valid());
        assert_eq!(r.cost, 0);
    }

    #[test]
    fn plan_file_round_trip() {
        let t = chain3();
        let plan = Plan::new(vec![0, 1, 2]);
        let text = t.format_plan(&plan);
        assert_eq!(text, "(a1)\n(a2)\n(a3)\n; cost = 3 (unit cost)\n");
        assert_eq!(t.parse_plan(&text).unwrap(), plan);
    }

    #[test]
    fn builder_normalizes_lists() {
        let t = TaskBuilder::new("n")
            .facts(&["a", "b"])
            .action("x", &["b", "a", "b"], &["a"], &["a", "b"])
            .build()
            .unwrap();
        assert_eq!(t.action(0).pre, vec![0, 1]);
        assert_eq!(t.action(0).del, vec![1]);
    }

    fn arb_task() -> impl Strategy<Value = (PlanningTask, Vec<FactId>)> {
        let n = 6usize;
        let list = proptest::collection::vec(0..n, 0..3);
        let action = (list.clone(), list.clone(), list);
        (
            proptest::collection::vec(action, 1..6),
            proptest::collection::vec(0..n, 0..n),
        )
            .prop_map(move |(acts, state)| {
                let actions = acts
                    .into_iter()
                    .enumerate()
                    .map(|(i, (pre, add, del))| Action {
                        name: format!("a{i}"),
                        pre,
                        add,
                        del,
                    })
                    .collect();
                let facts = (0..n).map(|i| format!("f{i}")).collect();
                (
                    PlanningTask::new("rand", facts, actions, vec![], vec![]).unwrap(),
                    state,
                )
            })
    }

    proptest! {
        #[test]
        fn apply_consistent_with_applicable((t, facts) in arb_task()) {
            let s = State::from_facts(t.num_facts(), facts);
            let app = t.applicable(&s);
            for a in 0..t.num_actions() {
                let res = t.apply(&s, a);
                prop_assert_eq!(res.is_ok(), app.contains(&a));
                if let Ok(next) = res {
                    let act = t.action(a);
                    for f in 0..t.num_facts() {
                        if !act.add.contains(&f) && !act.del.contains(&f) {
                            prop_assert_eq!(next.contains(f), s.contains(f));
                        }
                    }
                }
            }
        }
    }
}
