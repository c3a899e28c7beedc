use std::collections::{BTreeMap, HashSet};

use super::IrplError;
use crate::task::{ActionId, PlanningTask, State};

/// Default bound on enumerated trajectories.
pub const DEFAULT_CAP: usize = 20_000;

/// A maximal acyclic, non-goal-extending action sequence from the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub actions: Vec<ActionId>,
    /// `|A(s_i)|` for each state before an action, so `branching.len() == actions.len()`.
    pub branching: Vec<u32>,
    /// `|A(s_k)|` at the final state.
    pub terminal_branching: u32,
    pub weight: f64,
    pub is_plan: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightScheme {
    /// Every trajectory weighs 1.
    Ump,
    /// Product of `1/|A(s_i)|` along the trajectory.
    Utp,
    /// `λ^(−cost)`, strictly decreasing in cost for `λ > 1`.
    CostRanked(f64),
}

pub const COST_RANKED_LAMBDA: f64 = 2.0;

impl WeightScheme {
    pub fn weight(self, t: &Trajectory) -> f64 {
        match self {
            WeightScheme::Ump => 1.0,
            WeightScheme::Utp => t.branching.iter().map(|&b| 1.0 / f64::from(b)).product(),
            WeightScheme::CostRanked(lambda) => lambda.powi(-(t.len() as i32)),
        }
    }
}

/// Node of the prefix trie; node 0 is the empty prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct TrieNode {
    pub parent: Option<usize>,
    pub action: Option<ActionId>,
    pub depth: usize,
    /// `(action, child)` ascending by action.
    pub children: Vec<(ActionId, usize)>,
    /// `|A(s)|` at the state this prefix reaches.
    pub branching: u32,
    /// Index of the trajectory ending here; terminal nodes are leaves.
    pub terminal: Option<usize>,
    /// `Σ w` over `C(O)` and over `C_G(O)`.
    pub weight_all: f64,
    pub weight_plan: f64,
    pub count_all: usize,
    pub count_plan: usize,
}

/// Exact probabilities of one prefix `O`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrplProbs {
    pub p_g: f64,
    pub p_not_g: f64,
    pub p_o: f64,
    pub p_o_given_g: f64,
    pub p_g_given_o: f64,
    pub p_o_given_not_g: f64,
    pub n_t: usize,
    pub n_g: usize,
    pub n_c: usize,
    pub n_cg: usize,
}

/// Library of maximal trajectories with a prefix index over them.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLibrary {
    trajectories: Vec<Trajectory>,
    nodes: Vec<TrieNode>,
    total_weight: f64,
    plan_weight: f64,
    nonplan_weight: f64,
}

impl TrajectoryLibrary {
    /// Builds a library from explicit trajectories, checking that none is a
    /// prefix of another, that weights are positive, and that branching
    /// factors agree on shared prefixes and cover the observed children.
    pub fn from_trajectories(trajectories: Vec<Trajectory>) -> Result<Self, IrplError> {
        let mut nodes = vec![TrieNode {
            parent: None,
            action: None,
            depth: 0,
            children: Vec::new(),
            branching: 0,
            terminal: None,
            weight_all: 0.0,
            weight_plan: 0.0,
            count_all: 0,
            count_plan: 0,
        }];
        let mut branching_set = vec![false];
        for (ti, t) in trajectories.iter().enumerate() {
            if t.branching.len() != t.actions.len() {
                return Err(IrplError::Inconsistent(format!(
                    "trajectory {ti} has {} actions but {} branching factors",
                    t.actions.len(),
                    t.branching.len()
                )));
            }
            if !(t.weight > 0.0 && t.weight.is_finite()) {
                return Err(IrplError::Inconsistent(format!(
                    "trajectory {ti} has non-positive weight {}",
                    t.weight
                )));
            }
            let mut cur = 0;
            let steps = t
                .branching
                .iter()
                .copied()
                .zip(t.actions.iter().map(Some))
                .chain(std::iter::once((t.terminal_branching, None)));
            for (b, action) in steps {
                let ends_here = action.is_none() && nodes[cur].count_all > 0;
                if nodes[cur].terminal.is_some() || ends_here {
                    return Err(IrplError::NotMaximal(ti));
                }
                if branching_set[cur] && nodes[cur].branching != b {
                    return Err(IrplError::Inconsistent(format!(
                        "trajectory {ti} disagrees on branching at depth {}",
                        nodes[cur].depth
                    )));
                }
                nodes[cur].branching = b;
                branching_set[cur] = true;
                nodes[cur].weight_all += t.weight;
                nodes[cur].count_all += 1;
                if t.is_plan {
                    nodes[cur].weight_plan += t.weight;
                    nodes[cur].count_plan += 1;
                }
                let Some(&a) = action else { break };
                cur = match nodes[cur].children.iter().find(|(ca, _)| *ca == a) {
                    Some(&(_, c)) => c,
                    None => {
                        let id = nodes.len();
                        let depth = nodes[cur].depth + 1;
                        nodes.push(TrieNode {
                            parent: Some(cur),
                            action: Some(a),
                            depth,
                            children: Vec::new(),
                            branching: 0,
                            terminal: None,
                            weight_all: 0.0,
                            weight_plan: 0.0,
                            count_all: 0,
                            count_plan: 0,
                        });
                        branching_set.push(false);
                        nodes[cur].children.push((a, id));
                        id
                    }
                };
            }
            if !nodes[cur].children.is_empty() || nodes[cur].count_all > 1 {
                return Err(IrplError::NotMaximal(ti));
            }
            nodes[cur].terminal = Some(ti);
        }
        for (i, n) in nodes.iter_mut().enumerate() {
            n.children.sort_unstable();
            if (n.branching as usize) < n.children.len() {
                return Err(IrplError::Inconsistent(format!(
                    "prefix node {i} has {} children but branching {}",
                    n.children.len(),
                    n.branching
                )));
            }
        }
        let plan_weight = trajectories
            .iter()
            .filter(|t| t.is_plan)
            .map(|t| t.weight)
            .sum();
        let nonplan_weight = trajectories
            .iter()
            .filter(|t| !t.is_plan)
            .map(|t| t.weight)
            .sum();
        Ok(TrajectoryLibrary {
            total_weight: trajectories.iter().map(|t| t.weight).sum(),
            trajectories,
            nodes,
            plan_weight,
            nonplan_weight,
        })
    }

    /// Hand-built library; each prefix's branching is its number of children,
    /// terminal states have none, weights are 1.
    pub fn from_sequences(seqs: &[(Vec<ActionId>, bool)]) -> Result<Self, IrplError> {
        let mut children: BTreeMap<Vec<ActionId>, HashSet<ActionId>> = BTreeMap::new();
        for (s, _) in seqs {
            for i in 0..s.len() {
                children.entry(s[..i].to_vec()).or_default().insert(s[i]);
            }
        }
        let trajectories = seqs
            .iter()
            .map(|(s, is_plan)| Trajectory {
                actions: s.clone(),
                branching: (0..s.len())
                    .map(|i| children[&s[..i]].len() as u32)
                    .collect(),
                terminal_branching: 0,
                weight: 1.0,
                is_plan: *is_plan,
            })
            .collect();
        Self::from_trajectories(trajectories)
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn nodes(&self) -> &[TrieNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &TrieNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn num_plans(&self) -> usize {
        self.trajectories.iter().filter(|t| t.is_plan).count()
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn plan_weight(&self) -> f64 {
        self.plan_weight
    }

    /// Replaces every weight according to `scheme`.
    pub fn weigh(&self, scheme: WeightScheme) -> TrajectoryLibrary {
        let trajectories = self
            .trajectories
            .iter()
            .map(|t| Trajectory {
                weight: scheme.weight(t),
                ..t.clone()
            })
            .collect();
        Self::from_trajectories(trajectories).expect("reweighting keeps a valid library")
    }

    /// Library restricted to the given trajectory indices, in that order.
    pub fn subset(&self, indices: &[usize]) -> TrajectoryLibrary {
        let trajectories = indices
            .iter()
            .map(|&i| self.trajectories[i].clone())
            .collect();
        Self::from_trajectories(trajectories).expect("subsets of a valid library are valid")
    }

    /// Trie node of prefix `o`, if some trajectory extends it.
    pub fn find(&self, o: &[ActionId]) -> Option<usize> {
        let mut cur = 0;
        if self.trajectories.is_empty() {
            return None;
        }
        for &a in o {
            cur = self.nodes[cur]
                .children
                .iter()
                .find(|(ca, _)| *ca == a)
                .map(|&(_, c)| c)?;
        }
        Some(cur)
    }

    /// Action sequence leading to trie node `id`.
    pub fn prefix(&self, mut id: usize) -> Vec<ActionId> {
        let mut out = Vec::new();
        while let (Some(p), Some(a)) = (self.nodes[id].parent, self.nodes[id].action) {
            out.push(a);
            id = p;
        }
        out.reverse();
        out
    }

    fn ratio(num: f64, den: f64) -> f64 {
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }

    /// Probabilities of the prefix ending at trie node `id`.
    pub fn probs_at(&self, id: usize) -> IrplProbs {
        let n = &self.nodes[id];
        self.assemble(n.weight_all, n.weight_plan, n.count_all, n.count_plan)
    }

    fn assemble(&self, w_c: f64, w_cg: f64, n_c: usize, n_cg: usize) -> IrplProbs {
        let w = self.total_weight;
        IrplProbs {
            p_g: Self::ratio(self.plan_weight, w),
            p_not_g: Self::ratio(self.nonplan_weight, w),
            p_o: Self::ratio(w_c, w),
            p_o_given_g: Self::ratio(w_cg, self.plan_weight),
            p_g_given_o: Self::ratio(w_cg, w_c),
            p_o_given_not_g: Self::ratio(w_c - w_cg, self.nonplan_weight),
            n_t: self.trajectories.len(),
            n_g: self.num_plans(),
            n_c,
            n_cg,
        }
    }

    /// Probabilities of prefix `o`; prefixes outside the library get zero
    /// conditionals.
    pub fn probs(&self, o: &[ActionId]) -> IrplProbs {
        match self.find(o) {
            Some(id) => self.probs_at(id),
            None => self.assemble(0.0, 0.0, 0, 0),
        }
    }

    /// Same quantities by scanning every trajectory, without the index.
    pub fn probs_brute_force(&self, o: &[ActionId]) -> IrplProbs {
        let (mut w_c, mut w_cg, mut n_c, mut n_cg) = (0.0, 0.0, 0, 0);
        for t in &self.trajectories {
            if t.actions.starts_with(o) {
                w_c += t.weight;
                n_c += 1;
                if t.is_plan {
                    w_cg += t.weight;
                    n_cg += 1;
                }
            }
        }
        self.assemble(w_c, w_cg, n_c, n_cg)
    }
}

/// Depth-first enumeration of all maximal trajectories from the initial state.
/// A branch ends at a goal state, at a dead end, or when every applicable
/// action revisits a state on the current path.
pub fn enumerate_maximal(task: &PlanningTask, cap: usize) -> Result<TrajectoryLibrary, IrplError> {
    struct Dfs<'a> {
        task: &'a PlanningTask,
        cap: usize,
        on_path: HashSet<State>,
        actions: Vec<ActionId>,
        branching: Vec<u32>,
        out: Vec<Trajectory>,
    }

    impl Dfs<'_> {
        fn visit(&mut self, s: &State) -> Result<(), IrplError> {
            let applicable = self.task.applicable(s);
            let b = applicable.len() as u32;
            let is_goal = self.task.is_goal(s);
            let mut extended = false;
            if !is_goal {
                for a in applicable {
                    let next = self.task.apply_unchecked(s, a);
                    if self.on_path.contains(&next) {
                        continue;
                    }
                    extended = true;
                    self.on_path.insert(next.clone());
                    self.actions.push(a);
                    self.branching.push(b);
                    self.visit(&next)?;
                    self.branching.pop();
                    self.actions.pop();
                    self.on_path.remove(&next);
                }
            }
            if !extended {
                if self.out.len() >= self.cap {
                    return Err(IrplError::CapExceeded(self.cap));
                }
                self.out.push(Trajectory {
                    actions: self.actions.clone(),
                    branching: self.branching.clone(),
                    terminal_branching: b,
                    weight: 1.0,
                    is_plan: is_goal,
                });
            }
            Ok(())
        }
    }

    let init = task.initial_state();
    let mut dfs = Dfs {
        task,
        cap,
        on_path: HashSet::from([init.clone()]),
        actions: Vec::new(),
        branching: Vec::new(),
        out: Vec::new(),
    };
    dfs.visit(&init)?;
    TrajectoryLibrary::from_trajectories(dfs.out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{chain3, fork};
    use crate::task::TaskBuilder;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-15
    }

    #[test]
    fn chain3_single_plan() {
        let lib = enumerate_maximal(&chain3(), DEFAULT_CAP).unwrap();
        assert_eq!(lib.len(), 1);
        assert!(lib.trajectories()[0].is_plan);
        assert_eq!(lib.trajectories()[0].actions, vec![0, 1, 2]);
    }

    #[test]
    fn fork_has_two_trajectories_one_plan() {
        let t = fork();
        let lib = enumerate_maximal(&t, DEFAULT_CAP).unwrap();
        assert_eq!(lib.len(), 2);
        assert_eq!(lib.num_plans(), 1);
        let plan = lib.trajectories().iter().find(|t| t.is_plan).unwrap();
        assert_eq!(
            plan.actions,
            vec![t.action_id("a").unwrap(), t.action_id("c").unwrap()]
        );
        assert_eq!(plan.branching, vec![2, 1]);
    }

    #[test]
    fn goal_in_init_gives_empty_plan() {
        let t = TaskBuilder::new("g")
            .facts(&["g", "h"])
            .action("x", &["g"], &["h"], &[])
            .init(&["g"])
            .goal(&["g"])
            .build()
            .unwrap();
        let lib = enumerate_maximal(&t, DEFAULT_CAP).unwrap();
        assert_eq!(lib.len(), 1);
        assert!(lib.trajectories()[0].is_empty() && lib.trajectories()[0].is_plan);
    }

    #[test]
    fn cycles_terminate_branches() {
        // p <-> q with no goal reachable: two one-step-then-stuck trajectories
        let t = TaskBuilder::new("cyc")
            .facts(&["p", "q", "g"])
            .action("pq", &["p"], &["q"], &["p"])
            .action("qp", &["q"], &["p"], &["q"])
            .init(&["p"])
            .goal(&["g"])
            .build()
            .unwrap();
        let lib = enumerate_maximal(&t, DEFAULT_CAP).unwrap();
        assert_eq!(lib.len(), 1);
        assert_eq!(lib.trajectories()[0].actions, vec![0]);
        assert_eq!(lib.trajectories()[0].terminal_branching, 1);
        assert!(!lib.trajectories()[0].is_plan);
    }

    #[test]
    fn cap_is_enforced() {
        let t = fork();
        assert_eq!(enumerate_maximal(&t, 1), Err(IrplError::CapExceeded(1)));
    }

    #[test]
    fn hand_library_probabilities() {
        // a=0, b=1, c=2, d=3
        let lib = TrajectoryLibrary::from_sequences(&[
            (vec![0, 1], true),
            (vec![0, 2], false),
            (vec![3], false),
        ])
        .unwrap();
        let p = lib.probs(&[0]);
        assert!(close(p.p_g, 1.0 / 3.0));
        assert!(close(p.p_o, 2.0 / 3.0));
        assert!(close(p.p_o_given_g, 1.0));
        assert!(close(p.p_g_given_o, 0.5));
        let empty = lib.probs(&[]);
        assert_eq!((empty.p_o, empty.p_o_given_g), (1.0, 1.0));
        assert!(close(empty.p_g_given_o, empty.p_g));
        let outside = lib.probs(&[2]);
        assert_eq!(
            (outside.p_o, outside.p_o_given_g, outside.p_g_given_o),
            (0.0, 0.0, 0.0)
        );
        assert_eq!(lib.probs(&[0]), lib.probs_brute_force(&[0]));
    }

    #[test]
    fn weight_schemes() {
        let t = Trajectory {
            actions: vec![0, 1],
            branching: vec![2, 3],
            terminal_branching: 0,
            weight: 1.0,
            is_plan: true,
        };
        assert_eq!(WeightScheme::Ump.weight(&t), 1.0);
        assert!(close(WeightScheme::Utp.weight(&t), 1.0 / 6.0));
        assert_eq!(WeightScheme::CostRanked(2.0).weight(&t), 0.25);
        let t3 = Trajectory {
            actions: vec![0, 1, 2],
            branching: vec![1, 1, 1],
            ..t
        };
        assert_eq!(WeightScheme::CostRanked(2.0).weight(&t3), 0.125);
    }

    #[test]
    fn invalid_libraries_rejected() {
        assert_eq!(
            TrajectoryLibrary::from_sequences(&[(vec![0], true), (vec![0, 1], false)]),
            Err(IrplError::NotMaximal(1))
        );
        assert_eq!(
            TrajectoryLibrary::from_sequences(&[(vec![0, 1], true), (vec![0], false)]),
            Err(IrplError::NotMaximal(1))
        );
        assert_eq!(
            TrajectoryLibrary::from_sequences(&[(vec![0], true), (vec![0], true)]),
            Err(IrplError::NotMaximal(1))
        );
        let bad = Trajectory {
            actions: vec![0],
            branching: vec![0],
            terminal_branching: 0,
            weight: 1.0,
            is_plan: true,
        };
        assert!(matches!(
            TrajectoryLibrary::from_trajectories(vec![bad]),
            Err(IrplError::Inconsistent(_))
        ));
    }
}
