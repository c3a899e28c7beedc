//! Discrete factored distributions with marginalization, conditioning on a
//! partial assignment, and KL divergence; used to check that the divergence
//! between the observation-updated and prior marginals does not depend on the
//! intermediate domain and equals the observation's negative log-likelihood.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::irpl::TrajectoryLibrary;
use crate::task::ActionId;

/// Largest outcome count accepted for a dense table.
pub const DENSE_CAP: usize = 1_000_000;

/// Padding action for plans shorter than the longest one.
pub const DUMMY_ACTION: ActionId = ActionId::MAX;

pub const INVARIANCE_TOL: f64 = 1e-9;

const SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DivergenceError {
    #[error("variable {0} has an empty value set")]
    EmptyVariable(usize),
    #[error("dense table with {0} outcomes exceeds the cap of {DENSE_CAP}")]
    TooLarge(u128),
    #[error("table has {got} entries, domain has {expected}")]
    WrongLength { expected: usize, got: usize },
    #[error("outcome {0:?} is outside the domain")]
    OutcomeOutOfDomain(Vec<usize>),
    #[error("probability {0} is negative or not finite")]
    BadProbability(f64),
    #[error("probabilities sum to {0}, not 1")]
    NotNormalized(f64),
    #[error("observation assigns variable {var} value {value} outside its domain")]
    ObservationOutOfDomain { var: usize, value: usize },
    #[error("no outcome with positive probability is consistent with the observation")]
    ZeroConsistency,
    #[error("distributions are over different domains")]
    DomainMismatch,
    #[error("divergence is infinite: outcome {0:?} has mass in p but not in q")]
    SupportViolation(Vec<usize>),
}

/// Distribution over `X_1 × … × X_v` with `X_i = {0, …, sizes[i] − 1}`,
/// stored sparsely by outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredDist {
    sizes: Vec<usize>,
    pmf: BTreeMap<Vec<usize>, f64>,
}

impl FactoredDist {
    pub fn new(sizes: Vec<usize>, pmf: BTreeMap<Vec<usize>, f64>) -> Result<Self, DivergenceError> {
        if let Some(i) = sizes.iter().position(|&s| s == 0) {
            return Err(DivergenceError::EmptyVariable(i));
        }
        let mut total = 0.0;
        for (x, &p) in &pmf {
            if x.len() != sizes.len() || x.iter().zip(&sizes).any(|(v, s)| v >= s) {
                return Err(DivergenceError::OutcomeOutOfDomain(x.clone()));
            }
            if !(p >= 0.0 && p.is_finite()) {
                return Err(DivergenceError::BadProbability(p));
            }
            total += p;
        }
        if (total - 1.0).abs() > SUM_TOL {
            return Err(DivergenceError::NotNormalized(total));
        }
        let pmf = pmf.into_iter().filter(|&(_, p)| p > 0.0).collect();
        Ok(FactoredDist { sizes, pmf })
    }

    /// Row-major table, last variable fastest.
    pub fn from_dense(sizes: Vec<usize>, probs: &[f64]) -> Result<Self, DivergenceError> {
        let n = Self::outcome_count(&sizes)?;
        if probs.len() != n {
            return Err(DivergenceError::WrongLength {
                expected: n,
                got: probs.len(),
            });
        }
        let pmf = probs
            .iter()
            .enumerate()
            .filter(|&(_, &p)| p != 0.0)
            .map(|(i, &p)| (Self::unrank(&sizes, i), p))
            .collect();
        Self::new(sizes, pmf)
    }

    pub fn uniform(sizes: Vec<usize>) -> Result<Self, DivergenceError> {
        let n = Self::outcome_count(&sizes)?;
        Self::from_dense(sizes, &vec![1.0 / n as f64; n])
    }

    fn outcome_count(sizes: &[usize]) -> Result<usize, DivergenceError> {
        if let Some(i) = sizes.iter().position(|&s| s == 0) {
            return Err(DivergenceError::EmptyVariable(i));
        }
        let n: u128 = sizes.iter().map(|&s| s as u128).product();
        if n > DENSE_CAP as u128 {
            return Err(DivergenceError::TooLarge(n));
        }
        Ok(n as usize)
    }

    fn unrank(sizes: &[usize], mut i: usize) -> Vec<usize> {
        let mut x = vec![0; sizes.len()];
        for (slot, &s) in x.iter_mut().zip(sizes).rev() {
            *slot = i % s;
            i /= s;
        }
        x
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn num_vars(&self) -> usize {
        self.sizes.len()
    }

    pub fn prob(&self, x: &[usize]) -> f64 {
        self.pmf.get(x).copied().unwrap_or(0.0)
    }

    /// Outcomes with positive probability, ascending.
    pub fn support(&self) -> impl Iterator<Item = (&[usize], f64)> {
        self.pmf.iter().map(|(x, &p)| (x.as_slice(), p))
    }

    /// Distribution of the variables in `keep` (sorted, de-duplicated).
    /// An empty `keep` gives the one-point distribution.
    pub fn marginalize(&self, keep: &[usize]) -> FactoredDist {
        let keep: Vec<usize> = keep
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .filter(|&k| k < self.sizes.len())
            .collect();
        let mut pmf: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        for (x, &p) in &self.pmf {
            *pmf.entry(keep.iter().map(|&k| x[k]).collect()).or_default() += p;
        }
        FactoredDist {
            sizes: keep.iter().map(|&k| self.sizes[k]).collect(),
            pmf,
        }
    }

    fn check_observation(&self, obs: &Observation) -> Result<(), DivergenceError> {
        for (&var, &value) in &obs.assignments {
            if var >= self.sizes.len() || value >= self.sizes[var] {
                return Err(DivergenceError::ObservationOutOfDomain { var, value });
            }
        }
        Ok(())
    }

    /// Marginal probability of the observed assignment.
    pub fn observation_prob(&self, obs: &Observation) -> Result<f64, DivergenceError> {
        self.check_observation(obs)?;
        Ok(self
            .pmf
            .iter()
            .filter(|(x, _)| obs.consistent(x))
            .map(|(_, &p)| p)
            .sum())
    }

    /// Bayesian update on `obs`.
    pub fn condition(&self, obs: &Observation) -> Result<FactoredDist, DivergenceError> {
        let mass = self.observation_prob(obs)?;
        if mass <= 0.0 {
            return Err(DivergenceError::ZeroConsistency);
        }
        let pmf = self
            .pmf
            .iter()
            .filter(|(x, _)| obs.consistent(x))
            .map(|(x, &p)| (x.clone(), p / mass))
            .collect();
        Ok(FactoredDist {
            sizes: self.sizes.clone(),
            pmf,
        })
    }
}

/// Deterministic partial assignment `y*` over the variables `J`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Observation {
    assignments: BTreeMap<usize, usize>,
}

impl Observation {
    pub fn new(assignments: BTreeMap<usize, usize>) -> Self {
        Observation { assignments }
    }

    /// Observed variables, ascending.
    pub fn vars(&self) -> Vec<usize> {
        self.assignments.keys().copied().collect()
    }

    pub fn assignments(&self) -> &BTreeMap<usize, usize> {
        &self.assignments
    }

    pub fn consistent(&self, x: &[usize]) -> bool {
        self.assignments
            .iter()
            .all(|(&var, &value)| x[var] == value)
    }
}

/// `Σ p ln(p/q)` in nats.
pub fn kl(p: &FactoredDist, q: &FactoredDist) -> Result<f64, DivergenceError> {
    if p.sizes != q.sizes {
        return Err(DivergenceError::DomainMismatch);
    }
    let mut total = 0.0;
    for (x, &px) in &p.pmf {
        let qx = q.prob(x);
        if qx <= 0.0 {
            return Err(DivergenceError::SupportViolation(x.clone()));
        }
        total += px * (px / qx).ln();
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceTrial {
    pub keep: Vec<usize>,
    pub kl: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceReport {
    /// `−ln ρ(y*)`.
    pub expected: f64,
    /// The observed variables alone, then all variables, then random supersets.
    pub trials: Vec<InvarianceTrial>,
}

impl InvarianceReport {
    pub fn max_deviation(&self) -> f64 {
        self.trials.iter().map(|t| t.delta).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_deviation() <= INVARIANCE_TOL
    }
}

/// Divergence between conditioned and prior marginals on `K = J`, on all
/// variables, and on `trials` random `K ⊇ J`, each against `−ln ρ(y*)`.
pub fn verify_invariance(
    d_g: &FactoredDist,
    obs: &Observation,
    trials: usize,
    seed: u64,
) -> Result<InvarianceReport, DivergenceError> {
    let updated = d_g.condition(obs)?;
    let expected = -d_g.observation_prob(obs)?.ln();
    let j = obs.vars();
    let rest: Vec<usize> = (0..d_g.num_vars()).filter(|v| !j.contains(v)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sets = vec![j.clone(), (0..d_g.num_vars()).collect()];
    for _ in 0..trials {
        let mut k = j.clone();
        k.extend(rest.iter().copied().filter(|_| rng.gen_bool(0.5)));
        k.sort_unstable();
        sets.push(k);
    }
    let trials = sets
        .into_iter()
        .map(|keep| {
            let d = kl(&updated.marginalize(&keep), &d_g.marginalize(&keep))?;
            Ok(InvarianceTrial {
                delta: (d - expected).abs(),
                kl: d,
                keep,
            })
        })
        .collect::<Result<_, DivergenceError>>()?;
    Ok(InvarianceReport { expected, trials })
}

/// Random dense distribution with at most `max_outcomes` outcomes, about a
/// quarter of them zero, and an observation consistent with its support.
pub fn random_instance(seed: u64, max_outcomes: usize) -> (FactoredDist, Observation) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = rng.gen_range(1..=5);
    let mut sizes = Vec::with_capacity(v);
    let mut n = 1;
    for _ in 0..v {
        let s = rng.gen_range(1..=6).min(max_outcomes / n).max(1);
        sizes.push(s);
        n *= s;
    }
    let mut probs: Vec<f64> = (0..n)
        .map(|_| {
            if rng.gen_bool(0.25) {
                0.0
            } else {
                rng.gen::<f64>() + 1e-3
            }
        })
        .collect();
    if probs.iter().all(|&p| p == 0.0) {
        probs[0] = 1.0;
    }
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    let d = FactoredDist::from_dense(sizes, &probs).expect("normalized within cap");
    let support: Vec<&[usize]> = d.support().map(|(x, _)| x).collect();
    let x = support[rng.gen_range(0..support.len())].to_vec();
    let j = rng.gen_range(0..=v);
    let obs = sample(&mut rng, v, j)
        .into_iter()
        .map(|var| (var, x[var]))
        .collect();
    (d, Observation::new(obs))
}

/// Plans of `lib` as one variable per timestep, shorter plans padded with
/// [`DUMMY_ACTION`], weighted by their normalized plan weight. Returns the
/// distribution and each timestep's action alphabet.
pub fn plan_distribution(lib: &TrajectoryLibrary) -> (FactoredDist, Vec<Vec<ActionId>>) {
    let plans: Vec<_> = lib.trajectories().iter().filter(|t| t.is_plan).collect();
    let horizon = plans.iter().map(|t| t.len()).max().unwrap_or(0);
    let alphabets: Vec<Vec<ActionId>> = (0..horizon)
        .map(|i| {
            let set: BTreeSet<ActionId> = plans
                .iter()
                .map(|t| t.actions.get(i).copied().unwrap_or(DUMMY_ACTION))
                .collect();
            set.into_iter().collect()
        })
        .collect();
    let mut pmf: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for t in &plans {
        let x = (0..horizon)
            .map(|i| {
                let a = t.actions.get(i).copied().unwrap_or(DUMMY_ACTION);
                alphabets[i]
                    .binary_search(&a)
                    .expect("alphabet holds every plan action")
            })
            .collect();
        *pmf.entry(x).or_default() += t.weight / lib.plan_weight();
    }
    let sizes = alphabets.iter().map(Vec::len).collect();
    // The weights are normalized by construction; skip the sum check so
    // rounding in large libraries cannot reject them.
    (FactoredDist { sizes, pmf }, alphabets)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    /// `P(O|G)` from the library.
    pub expected: f64,
    /// `exp(−KL)` with the observed timesteps as the intermediate domain, and
    /// with all timesteps; `None` when no plan extends the observation.
    pub exp_neg_kl_observed: Option<f64>,
    pub exp_neg_kl_full: Option<f64>,
}

impl ConsistencyReport {
    /// Largest `|exp(−KL) − P(O|G)|`; `None` when the check is degenerate.
    pub fn delta(&self) -> Option<f64> {
        let a = self.exp_neg_kl_observed?;
        let b = self.exp_neg_kl_full?;
        Some((a - self.expected).abs().max((b - self.expected).abs()))
    }

    pub fn passed(&self) -> bool {
        self.delta().is_none_or(|d| d <= INVARIANCE_TOL)
    }
}

/// Compares the divergence-based likelihood of observing prefix `o` on the
/// timestep encoding of `lib`'s plans with the library's `P(O|G)`.
pub fn irpl_consistency(lib: &TrajectoryLibrary, o: &[ActionId]) -> ConsistencyReport {
    let expected = lib.probs(o).p_o_given_g;
    let degenerate = ConsistencyReport {
        expected,
        exp_neg_kl_observed: None,
        exp_neg_kl_full: None,
    };
    let (d, alphabets) = plan_distribution(lib);
    if o.len() > alphabets.len() {
        return degenerate;
    }
    let mut obs = BTreeMap::new();
    for (i, a) in o.iter().enumerate() {
        match alphabets[i].binary_search(a) {
            Ok(v) => obs.insert(i, v),
            Err(_) => return degenerate,
        };
    }
    let obs = Observation::new(obs);
    let Ok(updated) = d.condition(&obs) else {
        return degenerate;
    };
    let at = |keep: &[usize]| {
        kl(&updated.marginalize(keep), &d.marginalize(keep))
            .map(|k| (-k).exp())
            .ok()
    };
    ConsistencyReport {
        expected,
        exp_neg_kl_observed: at(&obs.vars()),
        exp_neg_kl_full: at(&(0..d.num_vars()).collect::<Vec<_>>()),
    }
}
