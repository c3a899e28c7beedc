//! Best-first width search with lexicographic keys
//! `(novelty, h, intention score, g)` and FIFO final ties.
//!
//! Novelty is partitioned by `(h, #r)` where `#r` counts relaxed-plan facts
//! achieved along the path. `h` is the goal count, or the unachieved-landmark
//! count in the landmark variants. Intention scores come from sampled fact
//! probability tables and restart whenever `h` improves along a path.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::heuristics::{
    goal_count, intent_update, landmark_count, num_r, EvalKey, IntentAccumulator, IntentMode,
    NoveltyStore,
};
use crate::relaxation::{extract_landmarks, relaxed_plan_facts, LandmarkSet};
use crate::sampling::{build_goal_table, build_nongoal_table, FactProbTable, Weighting};
use crate::task::{ActionId, FactId, Plan, PlanningTask, State};

/// Landmark variants fall back to goal count above this many goal facts.
pub const LANDMARK_GOAL_LIMIT: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "F5")]
    F5,
    #[serde(rename = "F5_OL")]
    F5Ol,
    #[serde(rename = "F5_OP")]
    F5Op,
    #[serde(rename = "F5LM_OL")]
    F5LmOl,
    #[serde(rename = "F5LM_OL_UTP")]
    F5LmOlUtp,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::F5,
        Variant::F5Ol,
        Variant::F5Op,
        Variant::F5LmOl,
        Variant::F5LmOlUtp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::F5 => "F5",
            Variant::F5Ol => "F5_OL",
            Variant::F5Op => "F5_OP",
            Variant::F5LmOl => "F5LM_OL",
            Variant::F5LmOlUtp => "F5LM_OL_UTP",
        }
    }

    pub fn intent_mode(self) -> Option<IntentMode> {
        match self {
            Variant::F5 => None,
            Variant::F5Op => Some(IntentMode::Posterior),
            Variant::F5Ol | Variant::F5LmOl | Variant::F5LmOlUtp => Some(IntentMode::Likelihood),
        }
    }

    pub fn uses_landmarks(self) -> bool {
        matches!(self, Variant::F5LmOl | Variant::F5LmOlUtp)
    }

    pub fn weighting(self) -> Weighting {
        if self == Variant::F5LmOlUtp {
            Weighting::Utp
        } else {
            Weighting::Uniform
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.to_ascii_uppercase().replace('-', "_");
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == norm)
            .ok_or_else(|| {
                let names: Vec<_> = Variant::ALL.iter().map(|v| v.name()).collect();
                format!(
                    "unknown variant '{s}' (expected one of {})",
                    names.join(", ")
                )
            })
    }
}

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub variant: Variant,
    /// Maximum open-list size; worst entries beyond it are evicted.
    pub trim_capacity: Option<usize>,
    pub n_samples: usize,
    pub seed: u64,
    pub max_time: Option<Duration>,
    pub max_memory: Option<usize>,
    /// Walk the parent chain to decide which facts a segment has already
    /// observed. When off, every newly true fact is scored.
    pub exact_segments: bool,
    /// Record the key of every expanded node in the stats.
    pub record_trace: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            variant: Variant::F5,
            trim_capacity: None,
            n_samples: crate::sampling::DEFAULT_SAMPLES,
            seed: 0,
            max_time: None,
            max_memory: None,
            exact_segments: true,
            record_trace: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Sampling(#[from] crate::sampling::SamplingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LimitKind {
    Time,
    Memory,
}

/// One expansion: the node's key, its insertion sequence number, and the best
/// key left in the open list right after it was popped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub key: EvalKey,
    pub seq: u64,
    pub best_remaining: Option<EvalKey>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SearchStats {
    pub expansions: u64,
    pub generations: u64,
    pub evaluations: u64,
    pub peak_open: usize,
    pub evicted: u64,
    pub peak_memory_bytes: usize,
    pub preprocess_time_s: f64,
    pub search_time_s: f64,
    #[serde(skip)]
    pub trace: Vec<TraceEntry>,
}

#[derive(Debug, Clone)]
pub enum Outcome {
    Solved {
        plan: Plan,
        stats: SearchStats,
    },
    /// Open list ran empty. `incomplete` is set when trimming evicted nodes,
    /// in which case the task may still be solvable.
    Exhausted {
        stats: SearchStats,
        incomplete: bool,
    },
    ResourceLimit {
        kind: LimitKind,
        stats: SearchStats,
    },
}

impl Outcome {
    pub fn stats(&self) -> &SearchStats {
        match self {
            Outcome::Solved { stats, .. }
            | Outcome::Exhausted { stats, .. }
            | Outcome::ResourceLimit { stats, .. } => stats,
        }
    }

    pub fn plan(&self) -> Option<&Plan> {
        match self {
            Outcome::Solved { plan, .. } => Some(plan),
            _ => None,
        }
    }

    pub fn status(&self) -> &'static str {
        match self {
            Outcome::Solved { .. } => "solved",
            Outcome::Exhausted {
                incomplete: false, ..
            } => "exhausted",
            Outcome::Exhausted {
                incomplete: true, ..
            } => "exhausted-incomplete",
            Outcome::ResourceLimit {
                kind: LimitKind::Time,
                ..
            } => "time-limit",
            Outcome::ResourceLimit {
                kind: LimitKind::Memory,
                ..
            } => "memory-limit",
        }
    }

    /// Single-line JSON record for logs and the CLI.
    pub fn stats_json(&self, task: &PlanningTask, variant: Variant, seed: u64) -> String {
        #[derive(Serialize)]
        struct Record<'a> {
            problem: &'a str,
            variant: Variant,
            seed: u64,
            status: &'a str,
            plan_cost: Option<usize>,
            #[serde(flatten)]
            stats: &'a SearchStats,
        }
        serde_json::to_string(&Record {
            problem: &task.name,
            variant,
            seed,
            status: self.status(),
            plan_cost: self.plan().map(Plan::cost),
            stats: self.stats(),
        })
        .expect("stats serialize")
    }
}

/// Everything computed from the initial state before search starts.
#[derive(Debug, Clone)]
pub struct Preprocessed {
    r_facts: State,
    landmarks: Option<LandmarkSet>,
    table: Option<FactProbTable>,
    relaxed_unsolvable: bool,
}

impl Preprocessed {
    pub fn build(task: &PlanningTask, cfg: &SearchConfig) -> Result<Self, SearchError> {
        let n = task.num_facts();
        let r = match relaxed_plan_facts(task) {
            Ok(r) => r,
            Err(_) => {
                return Ok(Preprocessed {
                    r_facts: State::empty(n),
                    landmarks: None,
                    table: None,
                    relaxed_unsolvable: true,
                })
            }
        };
        let landmarks = if cfg.variant.uses_landmarks() && task.goal().len() <= LANDMARK_GOAL_LIMIT
        {
            Some(extract_landmarks(task).expect("relaxed-solvable task has landmarks"))
        } else {
            None
        };
        let table = match cfg.variant.intent_mode() {
            None => None,
            Some(mode) => {
                let t = build_goal_table(task, cfg.n_samples, cfg.seed, cfg.variant.weighting())?;
                Some(if mode == IntentMode::Posterior {
                    t.with_nongoal(build_nongoal_table(task, cfg.n_samples, cfg.seed)?)
                } else {
                    t
                })
            }
        };
        Ok(Preprocessed {
            r_facts: State::from_facts(n, r),
            landmarks,
            table,
            relaxed_unsolvable: false,
        })
    }

    pub fn table(&self) -> Option<&FactProbTable> {
        self.table.as_ref()
    }

    pub fn landmarks(&self) -> Option<&LandmarkSet> {
        self.landmarks.as_ref()
    }

    pub fn r_facts(&self) -> &State {
        &self.r_facts
    }
}

const NO_PARENT: u32 = u32::MAX;

#[derive(Debug)]
struct Node {
    state: State,
    parent: u32,
    action: u32,
    g: u32,
    key: EvalKey,
    acc: IntentAccumulator,
    /// First node of the current intention segment: an ancestor or self.
    restart_marker: u32,
    /// Facts made true by the transition into this node.
    newly: Box<[FactId]>,
    path_achieved: State,
}

impl Node {
    fn bytes(&self) -> usize {
        std::mem::size_of::<Node>()
            + self.state.heap_bytes()
            + self.path_achieved.heap_bytes()
            + self.newly.len() * std::mem::size_of::<FactId>()
    }
}

type OpenEntry = (EvalKey, u64, u32);

/// Evicts the worst entries until `open` holds at most `capacity`; calls
/// `on_evict` for each and returns how many were evicted.
pub fn trim_open<T: Ord>(
    open: &mut BTreeSet<T>,
    capacity: usize,
    mut on_evict: impl FnMut(T),
) -> usize {
    let mut evicted = 0;
    while open.len() > capacity {
        match open.pop_last() {
            Some(e) => {
                on_evict(e);
                evicted += 1;
            }
            None => break,
        }
    }
    evicted
}

/// Preprocesses and searches.
pub fn search(task: &PlanningTask, cfg: &SearchConfig) -> Result<Outcome, SearchError> {
    let start = Instant::now();
    if cfg.trim_capacity == Some(0) {
        return Err(SearchError::InvalidConfig(
            "trim capacity must be at least 1".into(),
        ));
    }
    let pre = Preprocessed::build(task, cfg)?;
    Ok(search_with(task, cfg, &pre, start))
}

/// Searches with prebuilt tables. `start` is when the whole run began, so
/// time limits include preprocessing.
pub fn search_with(
    task: &PlanningTask,
    cfg: &SearchConfig,
    pre: &Preprocessed,
    start: Instant,
) -> Outcome {
    Engine::new(task, cfg, pre, start).run()
}

struct Engine<'a> {
    task: &'a PlanningTask,
    cfg: &'a SearchConfig,
    pre: &'a Preprocessed,
    mode: Option<IntentMode>,
    start: Instant,
    search_start: Instant,
    nodes: Vec<Node>,
    seen: HashSet<State>,
    open: BTreeSet<OpenEntry>,
    novelty: NoveltyStore,
    seq: u64,
    memory: usize,
    stats: SearchStats,
}

impl<'a> Engine<'a> {
    fn new(
        task: &'a PlanningTask,
        cfg: &'a SearchConfig,
        pre: &'a Preprocessed,
        start: Instant,
    ) -> Self {
        let now = Instant::now();
        let mode = cfg.variant.intent_mode().filter(|_| pre.table.is_some());
        Engine {
            task,
            cfg,
            pre,
            mode,
            start,
            search_start: now,
            nodes: Vec::new(),
            seen: HashSet::new(),
            open: BTreeSet::new(),
            novelty: NoveltyStore::new(task.num_facts()),
            seq: 0,
            memory: 0,
            stats: SearchStats {
                preprocess_time_s: now.duration_since(start).as_secs_f64(),
                ..Default::default()
            },
        }
    }

    fn h_primary(&self, s: &State, path_achieved: &State) -> u32 {
        match &self.pre.landmarks {
            Some(lms) => landmark_count(lms, path_achieved),
            None => goal_count(self.task, s),
        }
    }

    fn finish(mut self, plan: Option<Plan>) -> Outcome {
        self.stats.search_time_s = self.search_start.elapsed().as_secs_f64();
        let incomplete = self.stats.evicted > 0;
        match plan {
            Some(plan) => Outcome::Solved {
                plan,
                stats: self.stats,
            },
            None => Outcome::Exhausted {
                stats: self.stats,
                incomplete,
            },
        }
    }

    fn limit(mut self, kind: LimitKind) -> Outcome {
        self.stats.search_time_s = self.search_start.elapsed().as_secs_f64();
        Outcome::ResourceLimit {
            kind,
            stats: self.stats,
        }
    }

    fn extract_plan(&self, mut id: u32) -> Plan {
        let mut actions = Vec::new();
        while self.nodes[id as usize].parent != NO_PARENT {
            actions.push(self.nodes[id as usize].action as ActionId);
            id = self.nodes[id as usize].parent;
        }
        actions.reverse();
        Plan::new(actions)
    }

    /// Facts observed in the segment ending at `id`.
    fn segment_facts(&self, mut id: u32) -> HashSet<FactId> {
        let mut out = HashSet::new();
        loop {
            let node = &self.nodes[id as usize];
            out.extend(node.newly.iter().copied());
            if node.restart_marker == id || node.parent == NO_PARENT {
                return out;
            }
            id = node.parent;
        }
    }

    fn insert(&mut self, node: Node) {
        let id = self.nodes.len() as u32;
        self.memory += node.bytes() + node.state.heap_bytes() + 48;
        self.seen.insert(node.state.clone());
        self.open.insert((node.key, self.seq, id));
        self.seq += 1;
        self.nodes.push(node);
        if let Some(cap) = self.cfg.trim_capacity {
            let nodes = &self.nodes;
            let seen = &mut self.seen;
            let evicted = trim_open(&mut self.open, cap, |(_, _, victim)| {
                seen.remove(&nodes[victim as usize].state);
            });
            self.stats.evicted += evicted as u64;
        }
        self.stats.peak_open = self.stats.peak_open.max(self.open.len());
    }

    fn over_limit(&mut self) -> Option<LimitKind> {
        if self.cfg.max_time.is_some_and(|t| self.start.elapsed() >= t) {
            return Some(LimitKind::Time);
        }
        let used = self.memory + self.novelty.heap_bytes();
        self.stats.peak_memory_bytes = self.stats.peak_memory_bytes.max(used);
        if self.cfg.max_memory.is_some_and(|m| used > m) {
            return Some(LimitKind::Memory);
        }
        None
    }

    fn run(mut self) -> Outcome {
        let task = self.task;
        if self.pre.relaxed_unsolvable {
            log::info!("goal unreachable under delete relaxation");
            return self.finish(None);
        }
        let root = task.initial_state();
        self.stats.evaluations += 1;
        if task.is_goal(&root) {
            return self.finish(Some(Plan::default()));
        }
        let h = self.h_primary(&root, &root);
        let r = num_r(&self.pre.r_facts, &root);
        let novelty = self.novelty.evaluate((h, r), &root);
        let root_node = Node {
            path_achieved: root.clone(),
            state: root,
            parent: NO_PARENT,
            action: u32::MAX,
            g: 0,
            key: EvalKey::new(novelty, h, 0.0, 0),
            acc: IntentAccumulator::root(h),
            restart_marker: 0,
            newly: Box::new([]),
        };
        self.insert(root_node);

        while let Some((key, seq, id)) = self.open.pop_first() {
            if let Some(kind) = self.over_limit() {
                return self.limit(kind);
            }
            self.stats.expansions += 1;
            if self.cfg.record_trace {
                let best_remaining = self.open.first().map(|e| e.0);
                self.stats.trace.push(TraceEntry {
                    key,
                    seq,
                    best_remaining,
                });
            }
            let parent = &self.nodes[id as usize];
            let state = parent.state.clone();
            let path = parent.path_achieved.clone();
            let (parent_acc, parent_marker, g) = (parent.acc, parent.restart_marker, parent.g + 1);
            let observed = match self.mode {
                Some(_) if self.cfg.exact_segments => self.segment_facts(id),
                _ => HashSet::new(),
            };
            for a in task.applicable(&state) {
                self.stats.generations += 1;
                let child = task.apply_unchecked(&state, a);
                if self.seen.contains(&child) {
                    continue;
                }
                self.stats.evaluations += 1;
                let newly = child.difference(&state);
                let mut child_path = path.clone();
                child_path.union_with(&child);
                let h = self.h_primary(&child, &child_path);
                if task.is_goal(&child) {
                    let mut plan = self.extract_plan(id);
                    plan.actions.push(a);
                    return self.finish(Some(plan));
                }
                let r = num_r(&self.pre.r_facts, &child_path);
                let novelty = self.novelty.evaluate((h, r), &child);
                let child_id = self.nodes.len() as u32;
                let (acc, marker) = match (self.mode, self.pre.table.as_ref()) {
                    (Some(mode), Some(table)) => {
                        let (acc, restarted) =
                            intent_update(&parent_acc, h, &newly, table, mode, |q| {
                                observed.contains(&q)
                            });
                        (acc, if restarted { child_id } else { parent_marker })
                    }
                    _ => {
                        let acc = IntentAccumulator {
                            score: 0.0,
                            baseline_h: parent_acc.baseline_h.min(h),
                        };
                        let marker = if h < parent_acc.baseline_h {
                            child_id
                        } else {
                            parent_marker
                        };
                        (acc, marker)
                    }
                };
                let node = Node {
                    state: child,
                    parent: id,
                    action: a as u32,
                    g,
                    key: EvalKey::new(novelty, h, acc.score, g),
                    acc,
                    restart_marker: marker,
                    newly: newly.into_boxed_slice(),
                    path_achieved: child_path,
                };
                self.insert(node);
            }
        }
        self.finish(None)
    }
}
