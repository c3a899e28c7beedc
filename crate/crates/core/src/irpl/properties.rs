use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    oracle_search, IrplProbs, Ordering, TrajectoryLibrary, WeightScheme, COST_RANKED_LAMBDA,
};
use crate::task::ActionId;

pub const EXTENSION_LIKELIHOOD: &str = "extension-likelihood-nonincreasing";
pub const NO_PLAN_ZERO: &str = "no-plan-prefix-zero";
pub const CHILD_POSTERIOR: &str = "child-posterior-dominates";
pub const COUNT_RATIOS: &str = "uniform-count-ratios";
pub const INDEX_SCAN: &str = "index-matches-scan";
pub const IDENTITIES: &str = "probability-identities";
pub const POSTERIOR_DEPTH: &str = "posterior-search-depth-bound";
pub const MIN_COST_FIRST: &str = "likelihood-min-cost-first";
pub const EXPANSION_BOUNDS: &str = "likelihood-expansion-bounds";
pub const GENERATION_LOWER: &str = "transition-generation-lower-bound";
pub const SAMPLING_MONOTONE: &str = "sampling-schedule-monotone";

/// Every property name, in report order.
pub const PROPERTIES: [&str; 11] = [
    EXTENSION_LIKELIHOOD,
    NO_PLAN_ZERO,
    CHILD_POSTERIOR,
    COUNT_RATIOS,
    INDEX_SCAN,
    IDENTITIES,
    POSTERIOR_DEPTH,
    MIN_COST_FIRST,
    EXPANSION_BOUNDS,
    GENERATION_LOWER,
    SAMPLING_MONOTONE,
];

/// Nested sampling schedules per library, each with this many stages.
pub const SCHEDULE_COUNT: usize = 5;
const SCHEDULE_STAGES: usize = 5;

const TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub property: &'static str,
    pub weighting: WeightScheme,
    pub prefix: Vec<ActionId>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} under {:?} at prefix {:?}: {}",
            self.property, self.weighting, self.prefix, self.detail
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PropertyReport {
    /// Number of individual checks per property.
    pub checks: BTreeMap<&'static str, usize>,
    pub violations: Vec<Violation>,
}

impl PropertyReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn merge(&mut self, other: PropertyReport) {
        for (k, v) in other.checks {
            *self.checks.entry(k).or_default() += v;
        }
        self.violations.extend(other.violations);
    }

    /// Violations of one property.
    pub fn failures(&self, property: &str) -> usize {
        self.violations
            .iter()
            .filter(|v| v.property == property)
            .count()
    }

    fn check(
        &mut self,
        property: &'static str,
        ok: bool,
        weighting: WeightScheme,
        prefix: impl FnOnce() -> Vec<ActionId>,
        detail: impl FnOnce() -> String,
    ) {
        *self.checks.entry(property).or_default() += 1;
        if !ok {
            self.violations.push(Violation {
                property,
                weighting,
                prefix: prefix(),
                detail: detail(),
            });
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

/// Checks every property on `lib` with the library's own probability evaluator.
pub fn check_properties(lib: &TrajectoryLibrary, seed: u64) -> PropertyReport {
    check_properties_with(lib, seed, &TrajectoryLibrary::probs_at)
}

/// As [`check_properties`], with the per-prefix probabilities supplied by
/// `eval` so alternative evaluators can be audited against the oracle.
pub fn check_properties_with(
    lib: &TrajectoryLibrary,
    seed: u64,
    eval: &dyn Fn(&TrajectoryLibrary, usize) -> IrplProbs,
) -> PropertyReport {
    let mut report = PropertyReport::default();
    if lib.is_empty() {
        return report;
    }
    let schemes = [
        WeightScheme::Ump,
        WeightScheme::Utp,
        WeightScheme::CostRanked(COST_RANKED_LAMBDA),
    ];
    for scheme in schemes {
        let lw = lib.weigh(scheme);
        prefix_checks(&lw, scheme, eval, &mut report);
        if lw.num_plans() > 0 {
            search_checks(&lw, scheme, &mut report);
        }
    }
    if lib.num_plans() > 0 {
        schedule_checks(lib, seed, &mut report);
    }
    report
}

fn prefix_checks(
    lw: &TrajectoryLibrary,
    scheme: WeightScheme,
    eval: &dyn Fn(&TrajectoryLibrary, usize) -> IrplProbs,
    report: &mut PropertyReport,
) {
    let probs: Vec<IrplProbs> = (0..lw.nodes().len()).map(|id| eval(lw, id)).collect();
    for (id, node) in lw.nodes().iter().enumerate() {
        let p = probs[id];
        let prefix = || lw.prefix(id);

        let values = [
            p.p_g,
            p.p_not_g,
            p.p_o,
            p.p_o_given_g,
            p.p_g_given_o,
            p.p_o_given_not_g,
        ];
        let in_range = values.iter().all(|v| (-TOL..=1.0 + TOL).contains(v));
        let joint = p.p_o_given_g * p.p_g + p.p_o_given_not_g * p.p_not_g;
        report.check(
            IDENTITIES,
            in_range && near(p.p_g + p.p_not_g, 1.0) && near(joint, p.p_o),
            scheme,
            prefix,
            || format!("values {values:?}, P(O,G)+P(O,not G) = {joint}"),
        );

        let brute = lw.probs_brute_force(&lw.prefix(id));
        let same = near(brute.p_o, p.p_o)
            && near(brute.p_o_given_g, p.p_o_given_g)
            && near(brute.p_g_given_o, p.p_g_given_o)
            && (brute.n_c, brute.n_cg) == (p.n_c, p.n_cg);
        report.check(INDEX_SCAN, same, scheme, prefix, || {
            format!("index {p:?} vs scan {brute:?}")
        });

        if node.count_plan == 0 {
            report.check(
                NO_PLAN_ZERO,
                p.p_o_given_g == 0.0 && p.p_g_given_o == 0.0,
                scheme,
                prefix,
                || format!("P(O|G) = {}, P(G|O) = {}", p.p_o_given_g, p.p_g_given_o),
            );
        }

        for &(_, child) in &node.children {
            let c = probs[child];
            report.check(
                EXTENSION_LIKELIHOOD,
                c.p_o_given_g <= p.p_o_given_g + TOL,
                scheme,
                || lw.prefix(child),
                || {
                    format!(
                        "P(O_e|G) = {} > P(O_p|G) = {}",
                        c.p_o_given_g, p.p_o_given_g
                    )
                },
            );
        }
        if !node.children.is_empty() {
            let best = node
                .children
                .iter()
                .map(|&(_, c)| probs[c].p_g_given_o)
                .fold(f64::NEG_INFINITY, f64::max);
            report.check(
                CHILD_POSTERIOR,
                best >= p.p_g_given_o - TOL,
                scheme,
                prefix,
                || {
                    format!(
                        "best child P(G|O_e) = {best} < P(G|O_p) = {}",
                        p.p_g_given_o
                    )
                },
            );
        }

        if scheme == WeightScheme::Ump {
            let expect = [
                ratio(p.n_g, p.n_t),
                ratio(p.n_c, p.n_t),
                ratio(p.n_cg, p.n_g),
                ratio(p.n_cg, p.n_c),
            ];
            let got = [p.p_g, p.p_o, p.p_o_given_g, p.p_g_given_o];
            report.check(
                COUNT_RATIOS,
                expect.iter().zip(got).all(|(&e, g)| near(e, g)),
                scheme,
                prefix,
                || {
                    format!(
                        "[P(G), P(O), P(O|G), P(G|O)] = {got:?}, count ratios {expect:?} \
                         (N_T={}, N_G={}, N_C={}, N_CG={})",
                        p.n_t, p.n_g, p.n_c, p.n_cg
                    )
                },
            );
        }
    }
}

fn plan_lengths(lib: &TrajectoryLibrary) -> Vec<usize> {
    lib.trajectories()
        .iter()
        .filter(|t| t.is_plan)
        .map(|t| t.len())
        .collect()
}

/// Upper bound on expansions before a goal is selected: `Σ(|π|−1) + 1`.
fn expansion_bound(lengths: &[usize]) -> i64 {
    lengths.iter().map(|&l| l as i64 - 1).sum::<i64>() + 1
}

/// Upper bound on expansions before a goal is generated:
/// `Σ_{|π|≥2}(|π|−2) + [no plan has length 1]`. It equals `Σ(|π|−2) + 1`
/// unless two or more plans have length 1, where that form goes negative.
fn generation_bound(lengths: &[usize]) -> i64 {
    let long: i64 = lengths
        .iter()
        .filter(|&&l| l >= 2)
        .map(|&l| l as i64 - 2)
        .sum();
    long + i64::from(!lengths.contains(&1))
}

fn search_checks(lw: &TrajectoryLibrary, scheme: WeightScheme, report: &mut PropertyReport) {
    let lengths = plan_lengths(lw);
    let max_len = *lengths.iter().max().expect("library has plans");
    let min_len = *lengths.iter().min().expect("library has plans");

    let post = oracle_search(lw, Ordering::MaxPosteriorTiesLong).expect("library has plans");
    report.check(
        POSTERIOR_DEPTH,
        post.expansions <= max_len,
        scheme,
        || post.first_plan.clone(),
        || format!("{} expansions > longest plan {max_len}", post.expansions),
    );

    let like = oracle_search(lw, Ordering::MaxLikelihood).expect("library has plans");
    // Strictly cost-decreasing weights, or equal weights with shorter-first ties.
    if matches!(scheme, WeightScheme::Ump | WeightScheme::CostRanked(_)) {
        report.check(
            MIN_COST_FIRST,
            like.first_plan.len() == min_len,
            scheme,
            || like.first_plan.clone(),
            || {
                format!(
                    "first plan has cost {}, cheapest {min_len}",
                    like.first_plan.len()
                )
            },
        );
    }
    let before_gen = like.expansions_before_goal_generated;
    report.check(
        EXPANSION_BOUNDS,
        like.expansions as i64 <= expansion_bound(&lengths)
            && before_gen.is_none_or(|e| e as i64 <= generation_bound(&lengths)),
        scheme,
        || like.first_plan.clone(),
        || {
            format!(
                "expanded {} before selecting a goal (bound {}), {:?} before generating one (bound {})",
                like.expansions,
                expansion_bound(&lengths),
                before_gen,
                generation_bound(&lengths)
            )
        },
    );

    if scheme == WeightScheme::Utp {
        if let Some(gens) = like.generations_at_goal_generated {
            for k in 0..=like.first_plan.len() {
                let o = &like.first_plan[..k];
                let p = lw.probs(o);
                let bound = std::f64::consts::E * -(p.p_o_given_g * p.p_g).ln();
                report.check(
                    GENERATION_LOWER,
                    gens as f64 >= bound - 1e-9 && lw.total_weight() <= 1.0 + TOL,
                    scheme,
                    || o.to_vec(),
                    || {
                        format!(
                            "{gens} generations < e*(-ln P(O|G)P(G)) = {bound} (total weight {})",
                            lw.total_weight()
                        )
                    },
                );
            }
        }
    }
}

/// Nested uniform-without-replacement samples of the library; every stage
/// holds at least one plan.
fn nested_stages(lib: &TrajectoryLibrary, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..lib.len()).collect();
    order.shuffle(rng);
    let first_plan = order
        .iter()
        .position(|&i| lib.trajectories()[i].is_plan)
        .expect("library has plans");
    let n = order.len();
    let mut sizes: Vec<usize> = (1..=SCHEDULE_STAGES)
        .map(|k| (n * k).div_ceil(SCHEDULE_STAGES).max(first_plan + 1))
        .collect();
    sizes.dedup();
    sizes.into_iter().map(|s| order[..s].to_vec()).collect()
}

fn schedule_checks(lib: &TrajectoryLibrary, seed: u64, report: &mut PropertyReport) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for schedule in 0..SCHEDULE_COUNT {
        let stages = nested_stages(lib, &mut rng);
        for scheme in [
            WeightScheme::Ump,
            WeightScheme::CostRanked(COST_RANKED_LAMBDA),
        ] {
            let mut prev: Option<(usize, i64)> = None;
            for (stage, indices) in stages.iter().enumerate() {
                let sub = lib.subset(indices).weigh(scheme);
                let lengths = plan_lengths(&sub);
                let trace = oracle_search(&sub, Ordering::MaxLikelihood).expect("stage has plans");
                let now = (trace.first_plan.len(), expansion_bound(&lengths));
                let ok = trace.expansions as i64 <= now.1
                    && prev.is_none_or(|(len, bound)| now.0 <= len && now.1 >= bound);
                report.check(
                    SAMPLING_MONOTONE,
                    ok,
                    scheme,
                    || trace.first_plan.clone(),
                    || {
                        format!(
                            "schedule {schedule} stage {stage} ({} samples): first plan length {} \
                             and bound {} after {prev:?}, {} expansions",
                            indices.len(),
                            now.0,
                            now.1,
                            trace.expansions
                        )
                    },
                );
                prev = Some(now);
            }
        }
    }
}
