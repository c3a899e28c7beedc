//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so every line is printed; exits non-zero if any criterion fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use intent_search::bench::{self, agile_score, BenchConfig, RunRecord};
use intent_search::cli::{consistency_suite, invariance_suite, irpl_suite};
use intent_search::fixtures::{chain3, two_achievers};
use intent_search::irpl::{random_tiny_task, TinyTaskLimits, PROPERTIES, SCHEDULE_COUNT};
use intent_search::relaxation::build_rpg;
use intent_search::sampling::{build_goal_table, sample_supporters, sample_weights, Weighting};
use intent_search::search::Variant;
use intent_search::task::Plan;

struct Verdict {
    ok: bool,
    detail: String,
}

fn verdict(ok: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        ok,
        detail: detail.into(),
    }
}

fn suite_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../benchmarks/suite.toml")
}

fn jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn plan_library_properties() -> Verdict {
    const TASKS: u64 = 200;
    let start = Instant::now();
    let limits = TinyTaskLimits::default();
    for seed in 0..TASKS {
        let t = random_tiny_task(seed, &limits);
        if t.task.num_facts() > 12 || t.library.len() > 2_000 {
            return verdict(false, format!("task {seed} exceeds the size limits"));
        }
    }
    let report = irpl_suite(TASKS, 0, |_, _| {});
    let elapsed = start.elapsed();
    let missing: Vec<_> = PROPERTIES
        .iter()
        .filter(|p| !report.checks.contains_key(*p))
        .collect();
    let checks: usize = report.checks.values().sum();
    let ok = report.is_ok()
        && missing.is_empty()
        && SCHEDULE_COUNT >= 5
        && elapsed < Duration::from_secs(60);
    let first = report
        .violations
        .first()
        .map(|v| format!("; first violation: {v}"))
        .unwrap_or_default();
    verdict(
        ok,
        format!(
            "{TASKS} tasks, {checks} checks, {} violations, unchecked {missing:?}, {:.2}s{first}",
            report.violations.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn divergence_invariance() -> Verdict {
    let start = Instant::now();
    let s = invariance_suite(100, 0, 4, |_, _| {});
    let elapsed = start.elapsed();
    // each trial covers the observed variables, all variables and 4 random supersets
    let ok =
        s.failures.is_empty() && s.invariance_checks >= 600 && elapsed < Duration::from_secs(10);
    verdict(
        ok,
        format!(
            "100 distributions, {} intermediate domains, max |KL + ln p(y)| {:.2e}, {:.2}s",
            s.invariance_checks,
            s.invariance_max_dev,
            elapsed.as_secs_f64()
        ),
    )
}

fn library_consistency() -> Verdict {
    let start = Instant::now();
    let s = consistency_suite(50, 0);
    let elapsed = start.elapsed();
    let ok = s.failures.is_empty() && s.consistency_checks > 0 && elapsed < Duration::from_secs(30);
    let first = s
        .failures
        .first()
        .map(|f| format!("; {f}"))
        .unwrap_or_default();
    verdict(
        ok,
        format!(
            "50 libraries x 2 weightings, {} prefixes, max |exp(-KL) - P(O|G)| {:.2e}, {:.2}s{first}",
            s.consistency_checks,
            s.consistency_max_dev,
            elapsed.as_secs_f64()
        ),
    )
}

fn planner_soundness() -> Verdict {
    let instances = match bench::load_suite(&suite_path()) {
        Ok(i) => i,
        Err(e) => return verdict(false, e.to_string()),
    };
    let mut emitted = 0;
    let mut invalid = Vec::new();
    for inst in &instances {
        for variant in Variant::ALL {
            let cfg = BenchConfig {
                variants: vec![variant],
                ..BenchConfig::default()
            };
            let (rec, outcome) = match bench::run_instance(inst, variant, 0, &cfg) {
                Ok(x) => x,
                Err(e) => return verdict(false, e.to_string()),
            };
            if let Some(plan) = outcome.plan() {
                emitted += 1;
                let text = std::fs::read_to_string(&inst.domain_file).unwrap();
                let prob = std::fs::read_to_string(&inst.problem_file).unwrap();
                let task = intent_search::pddl::load(&text, &prob).unwrap();
                let replay = task.parse_plan(&task.format_plan(plan)).unwrap();
                if !task.validate_plan(&replay).is_valid()
                    || replay != Plan::new(plan.actions.clone())
                {
                    invalid.push(format!("{} {}", rec.problem, variant));
                }
            }
        }
    }
    let f5 = BenchConfig {
        variants: vec![Variant::F5],
        jobs: jobs(),
        ..BenchConfig::default()
    };
    let run = || -> Vec<(RunRecord, Option<Vec<usize>>)> {
        instances
            .iter()
            .map(|inst| {
                let (r, o) = bench::run_instance(inst, Variant::F5, 0, &f5).unwrap();
                (r, o.plan().map(|p| p.actions.clone()))
            })
            .collect()
    };
    let key = |v: Vec<(RunRecord, Option<Vec<usize>>)>| {
        v.into_iter()
            .map(|(r, p)| (r.problem, r.expansions, r.generations, r.plan_cost, p))
            .collect::<Vec<_>>()
    };
    let identical = key(run()) == key(run());
    verdict(
        invalid.is_empty() && identical && emitted > 0,
        format!(
            "{emitted} plans from {} variants on {} instances, invalid {invalid:?}, F5 repeat identical: {identical}",
            Variant::ALL.len(),
            instances.len()
        ),
    )
}

fn sampling_formulas() -> Verdict {
    let chain = chain3();
    let two = two_achievers();
    let c = build_goal_table(&chain, 100, 0, Weighting::Uniform).unwrap();
    let t = build_goal_table(&two, 100, 0, Weighting::Uniform).unwrap();
    // chain: every fact forced; two achievers drawn half the time each: 1 - (1/2)(1/2)
    let chain_ok = c.goal_column().values() == [1.0, 1.0, 1.0, 1.0];
    let two_ok = t.goal_column().values() == [1.0, 0.75];
    let instances = bench::load_suite(&suite_path()).unwrap();
    let inst = &instances[0];
    let task = intent_search::pddl::load(
        &std::fs::read_to_string(&inst.domain_file).unwrap(),
        &std::fs::read_to_string(&inst.problem_file).unwrap(),
    )
    .unwrap();
    let same_seed = build_goal_table(&task, 100, 9, Weighting::Utp).unwrap()
        == build_goal_table(&task, 100, 9, Weighting::Utp).unwrap();
    let rpg = build_rpg(&task, &task.initial_state());
    let samples = sample_supporters(&task, &rpg, task.goal(), 100, 3).unwrap();
    let sum: f64 = sample_weights(&samples, Weighting::Utp).iter().sum();
    let ok = chain_ok && two_ok && same_seed && (sum - 1.0).abs() <= 1e-12;
    verdict(
        ok,
        format!(
            "chain {:?}, two achievers {:?}, same seed identical: {same_seed}, UTP weight sum - 1 = {:.1e}",
            c.goal_column().values(),
            t.goal_column().values(),
            sum - 1.0
        ),
    )
}

fn expansion_direction() -> Verdict {
    let instances = bench::load_suite(&suite_path()).unwrap();
    let domains: std::collections::BTreeSet<_> =
        instances.iter().map(|i| i.domain.clone()).collect();
    let cfg = BenchConfig {
        variants: vec![Variant::F5, Variant::F5Ol],
        seeds: (0..5).collect(),
        jobs: jobs(),
        ..BenchConfig::default()
    };
    let (records, skipped) = match bench::run_suite(&instances, &cfg, |_| Ok(())) {
        Ok(x) => x,
        Err(e) => return verdict(false, e.to_string()),
    };
    let summary = bench::summarize(&records);
    let Some(p) = summary.pair(Variant::F5Ol, Variant::F5) else {
        return verdict(false, "no commonly solved instances");
    };
    let share = p.a_fewer_expansions as f64 / p.common.max(1) as f64;
    let ok = skipped == 0
        && instances.len() >= 20
        && domains.len() >= 4
        && share >= 0.4
        && p.a_fewer_expansions > p.b_fewer_expansions;
    verdict(
        ok,
        format!(
            "{} instances in {} domains, {} solved by both: F5_OL fewer on {} ({:.0}%), F5 fewer on {}, ties {}",
            instances.len(),
            domains.len(),
            p.common,
            p.a_fewer_expansions,
            share * 100.0,
            p.b_fewer_expansions,
            p.expansion_ties()
        ),
    )
}

fn agile_fixtures() -> Verdict {
    let cases = [
        (0.5, 1.0),
        (1.0, 1.0),
        (10.0, 1.0 - 10f64.ln() / 300f64.ln()),
        (300.0, 0.0),
        (301.0, 0.0),
    ];
    let worst = cases
        .iter()
        .map(|&(t, want)| (agile_score(true, t) - want).abs())
        .fold(0.0, f64::max);
    verdict(
        worst <= 1e-12 && agile_score(false, 0.5) == 0.0,
        format!("max deviation {worst:.1e}"),
    )
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("plan-library property suite", plan_library_properties),
        ("divergence invariance", divergence_invariance),
        ("divergence vs library likelihood", library_consistency),
        ("planner soundness and determinism", planner_soundness),
        ("sampling determinism and formulas", sampling_formulas),
        ("expansion direction F5_OL vs F5", expansion_direction),
        ("agile score fixtures", agile_fixtures),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        let tag = if v.ok { "PASS" } else { "FAIL" };
        println!("criterion {}: {tag} {name}: {}", i + 1, v.detail);
        failed += usize::from(!v.ok);
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
