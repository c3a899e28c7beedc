//! Fact observation probabilities from sampled delete-relaxed supporter sets.
//!
//! Supporters are sampled backwards over the relaxed planning graph: at each
//! layer every pending fact gets one achiever drawn from the least-used of its
//! minimal-h_add achievers available at that layer. A precondition only counts
//! as supported by an action enabled at a strictly earlier layer than its
//! consumer, so every sample replays as a relaxed plan. Each fact's probability
//! is then the chance that at least one of its achievers appears in a sample.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{Map, Value};
use thiserror::Error;

use crate::relaxation::{build_rpg, HAddTable, Rpg};
use crate::task::{ActionId, FactId, PlanningTask};

pub const DEFAULT_SAMPLES: usize = 100;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SamplingError {
    #[error("sample targets unreachable under delete relaxation: {0:?}")]
    UnreachableTarget(Vec<FactId>),
    #[error("number of samples must be at least 1")]
    ZeroSamples,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Weighting {
    Uniform,
    /// Each sample weighted by the product of `1/|candidates|` over its random choices.
    Utp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupporterSample {
    /// Ascending action ids.
    pub supporters: Vec<ActionId>,
    /// `Σ −ln |candidates|` over the random choices made; always `≤ 0`.
    pub choice_log_weight: f64,
}

/// Draws `n` supporter sets for `targets`. The usage counter balancing
/// candidate choices is shared by all `n` samples.
pub fn sample_supporters(
    task: &PlanningTask,
    rpg: &Rpg,
    targets: &[FactId],
    n: usize,
    rng_seed: u64,
) -> Result<Vec<SupporterSample>, SamplingError> {
    let missing: Vec<FactId> = targets
        .iter()
        .copied()
        .filter(|&f| !rpg.is_reachable(f))
        .collect();
    if !missing.is_empty() {
        return Err(SamplingError::UnreachableTarget(missing));
    }
    let hadd = HAddTable::compute(task, rpg.source());
    let init = rpg.source();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut count = vec![0u64; task.num_actions()];
    let mut samples = Vec::with_capacity(n);

    let top = rpg.levels() + 1;
    for _ in 0..n {
        // Pending facts map to a deadline: their supporter's action level must
        // be strictly below it, which keeps every sample acyclic.
        let mut pending: BTreeMap<FactId, u32> = targets
            .iter()
            .filter(|&&f| !init.contains(f))
            .map(|&f| (f, top))
            .collect();
        // Lowest action level among chosen supporters of each fact.
        let mut supported: Vec<Option<u32>> = vec![None; task.num_facts()];
        let mut sups: BTreeSet<ActionId> = BTreeSet::new();
        let mut log_weight = 0.0;
        for t in (0..=rpg.levels()).rev() {
            let mut next: BTreeMap<FactId, u32> = BTreeMap::new();
            while let Some((p, deadline)) = pending.pop_first() {
                let bound = t.min(deadline.saturating_sub(1));
                let candidates = min_hadd_supporters(task, rpg, &hadd, p, bound);
                let least = candidates.iter().map(|&a| count[a]).min().unwrap_or(0);
                let balanced: Vec<ActionId> = candidates
                    .into_iter()
                    .filter(|&a| count[a] == least)
                    .collect();
                let Some(&a) = balanced.choose(&mut rng) else {
                    log::warn!("no supporter for fact {p} below level {deadline} at layer {t}");
                    continue;
                };
                if balanced.len() > 1 {
                    log_weight -= (balanced.len() as f64).ln();
                }
                let level = rpg.action_level(a).expect("candidates are reachable");
                sups.insert(a);
                count[a] += 1;
                let action = task.action(a);
                for &r in &action.add {
                    supported[r] = Some(supported[r].map_or(level, |l| l.min(level)));
                    for queue in [&mut pending, &mut next] {
                        if queue.get(&r).is_some_and(|&d| level < d) {
                            queue.remove(&r);
                        }
                    }
                }
                for &q in &action.pre {
                    if init.contains(q) || supported[q].is_some_and(|l| l < level) {
                        continue;
                    }
                    if let Some(d) = pending.get_mut(&q) {
                        *d = (*d).min(level);
                    } else {
                        let d = next.entry(q).or_insert(level);
                        *d = (*d).min(level);
                    }
                }
            }
            pending = next;
        }
        samples.push(SupporterSample {
            supporters: sups.into_iter().collect(),
            choice_log_weight: log_weight,
        });
    }
    Ok(samples)
}

/// Achievers of `p` enabled at or before layer `t` with minimal h_add cost.
fn min_hadd_supporters(
    task: &PlanningTask,
    rpg: &Rpg,
    hadd: &HAddTable,
    p: FactId,
    t: u32,
) -> Vec<ActionId> {
    let eligible = task
        .achievers(p)
        .iter()
        .copied()
        .filter(|&a| rpg.action_level(a).is_some_and(|l| l <= t));
    let costed: Vec<(u64, ActionId)> = eligible
        .filter_map(|a| hadd.action(a).map(|c| (c, a)))
        .collect();
    let best = costed.iter().map(|&(c, _)| c).min();
    costed
        .into_iter()
        .filter(|&(c, _)| Some(c) == best)
        .map(|(_, a)| a)
        .collect()
}

/// Normalized sample weights.
pub fn sample_weights(samples: &[SupporterSample], weighting: Weighting) -> Vec<f64> {
    let n = samples.len();
    match weighting {
        Weighting::Uniform => vec![1.0 / n as f64; n],
        Weighting::Utp => {
            let max = samples
                .iter()
                .map(|s| s.choice_log_weight)
                .fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = samples
                .iter()
                .map(|s| (s.choice_log_weight - max).exp())
                .collect();
            let total: f64 = exps.iter().sum();
            exps.into_iter().map(|e| e / total).collect()
        }
    }
}

/// Per-fact probabilities with cached natural logs.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbColumn {
    p: Vec<f64>,
    log_p: Vec<f64>,
}

impl ProbColumn {
    fn new(p: Vec<f64>) -> Self {
        let log_p = p.iter().map(|x| x.ln()).collect();
        ProbColumn { p, log_p }
    }

    pub fn p(&self, f: FactId) -> f64 {
        self.p[f]
    }

    pub fn log_p(&self, f: FactId) -> f64 {
        self.log_p[f]
    }

    pub fn values(&self) -> &[f64] {
        &self.p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactProbTable {
    goal: ProbColumn,
    nongoal: Option<ProbColumn>,
    n_samples: usize,
    epsilon: f64,
}

impl FactProbTable {
    pub fn p_goal(&self, f: FactId) -> f64 {
        self.goal.p(f)
    }

    pub fn log_p_goal(&self, f: FactId) -> f64 {
        self.goal.log_p(f)
    }

    pub fn goal_column(&self) -> &ProbColumn {
        &self.goal
    }

    pub fn nongoal_column(&self) -> Option<&ProbColumn> {
        self.nongoal.as_ref()
    }

    pub fn p_nongoal(&self, f: FactId) -> Option<f64> {
        self.nongoal.as_ref().map(|c| c.p(f))
    }

    pub fn log_p_nongoal(&self, f: FactId) -> Option<f64> {
        self.nongoal.as_ref().map(|c| c.log_p(f))
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Attaches `P_rel(q|¬G)` entries.
    pub fn with_nongoal(mut self, column: ProbColumn) -> Self {
        self.nongoal = Some(column);
        self
    }

    /// One JSON object per column, mapping fact name to probability.
    pub fn debug_json(&self, task: &PlanningTask) -> Vec<Value> {
        let column = |c: &ProbColumn| {
            let map: Map<String, Value> = (0..task.num_facts())
                .map(|f| (task.fact_name(f).to_string(), Value::from(c.p(f))))
                .collect();
            Value::Object(map)
        };
        std::iter::once(&self.goal)
            .chain(self.nongoal.as_ref())
            .map(column)
            .collect()
    }
}

pub fn epsilon_for(n: usize) -> f64 {
    1.0 / (10.0 * n as f64)
}

/// `P_rel(q) = max(ε, 1 − Π_{a ∈ achievers(q)} (1 − p(a)))`, and 1 on init facts.
pub fn complement_product(task: &PlanningTask, action_prob: &[f64], epsilon: f64) -> Vec<f64> {
    let init = task.initial_state();
    (0..task.num_facts())
        .map(|q| {
            if init.contains(q) {
                return 1.0;
            }
            let miss: f64 = task
                .achievers(q)
                .iter()
                .map(|&a| 1.0 - action_prob[a])
                .product();
            (1.0 - miss).clamp(epsilon, 1.0)
        })
        .collect()
}

/// `p(a) = Σ_{i : a ∈ supporters_i} W_i`.
pub fn action_probabilities(
    task: &PlanningTask,
    samples: &[SupporterSample],
    weighting: Weighting,
) -> Vec<f64> {
    let mut p = vec![0.0; task.num_actions()];
    match weighting {
        Weighting::Uniform => {
            // count/n exactly, not a float sum of 1/n terms
            let mut counts = vec![0usize; task.num_actions()];
            for s in samples {
                for &a in &s.supporters {
                    counts[a] += 1;
                }
            }
            let n = samples.len() as f64;
            for (pa, c) in p.iter_mut().zip(counts) {
                *pa = c as f64 / n;
            }
        }
        Weighting::Utp => {
            for (s, w) in samples.iter().zip(sample_weights(samples, weighting)) {
                for &a in &s.supporters {
                    p[a] += w;
                }
            }
        }
    }
    p
}

fn column_for(
    task: &PlanningTask,
    rpg: &Rpg,
    targets: &[FactId],
    n: usize,
    seed: u64,
    weighting: Weighting,
) -> Result<ProbColumn, SamplingError> {
    if n == 0 {
        return Err(SamplingError::ZeroSamples);
    }
    let samples = sample_supporters(task, rpg, targets, n, seed)?;
    let probs = action_probabilities(task, &samples, weighting);
    Ok(ProbColumn::new(complement_product(
        task,
        &probs,
        epsilon_for(n),
    )))
}

/// `P_rel(q|G)` from `n` samples supporting the goal.
pub fn build_goal_table(
    task: &PlanningTask,
    n: usize,
    seed: u64,
    weighting: Weighting,
) -> Result<FactProbTable, SamplingError> {
    let rpg = build_rpg(task, &task.initial_state());
    let goal = column_for(task, &rpg, task.goal(), n, seed, weighting)?;
    Ok(FactProbTable {
        goal,
        nongoal: None,
        n_samples: n,
        epsilon: epsilon_for(n),
    })
}

/// `P_rel(q|¬G)` from `n` samples supporting every reachable non-goal fact.
pub fn build_nongoal_table(
    task: &PlanningTask,
    n: usize,
    seed: u64,
) -> Result<ProbColumn, SamplingError> {
    let rpg = build_rpg(task, &task.initial_state());
    let goal: BTreeSet<FactId> = task.goal().iter().copied().collect();
    let targets: Vec<FactId> = rpg
        .reachable_facts()
        .into_iter()
        .filter(|f| !goal.contains(f))
        .collect();
    column_for(task, &rpg, &targets, n, seed, Weighting::Uniform)
}
