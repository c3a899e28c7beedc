//! Command-line front end.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{self, BenchConfig, BenchError};
use crate::divergence::{irpl_consistency, random_instance, verify_invariance};
use crate::irpl::{
    check_properties, random_tiny_task, PropertyReport, TinyTaskLimits, WeightScheme, PROPERTIES,
};
use crate::search::{search, LimitKind, Outcome, SearchConfig, Variant};

/// Environment variable holding the log filter, e.g. `info` or `intent_search=debug`.
pub const LOG_ENV: &str = "INTENT_SEARCH_LOG";

#[derive(Debug, Parser)]
#[command(
    name = "intent-search",
    version,
    about = "Best-first width search with intention-based tie-breaking"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one PDDL problem.
    Plan(PlanArgs),
    /// Run every variant and seed over a suite manifest.
    Bench(BenchArgs),
    /// Run property suites over random tiny tasks and distributions.
    Verify(VerifyArgs),
    /// Per-task property table for the plan-library model.
    IrplVerify(TrialArgs),
    /// Per-trial divergence invariance deltas.
    DivergenceVerify(TrialArgs),
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long, default_value = "F5_OL")]
    pub variant: Variant,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Supporter samples per probability table.
    #[arg(long, default_value_t = crate::sampling::DEFAULT_SAMPLES)]
    pub samples: usize,
    /// Seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
    /// Megabytes.
    #[arg(long)]
    pub memory_limit: Option<usize>,
    /// Open-list capacity.
    #[arg(long)]
    pub trim: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    pub domain: PathBuf,
    pub problem: PathBuf,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Plan file; the plan goes to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Stats JSON file; the stats go to stderr when absent.
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    pub manifest: PathBuf,
    /// Repeatable; defaults to F5 and F5_OL.
    #[arg(long = "variant")]
    pub variants: Vec<Variant>,
    /// First seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of consecutive seeds.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    #[arg(long, default_value_t = crate::sampling::DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long)]
    pub time_limit: Option<f64>,
    #[arg(long)]
    pub memory_limit: Option<usize>,
    #[arg(long)]
    pub trim: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Results CSV.
    #[arg(long, default_value = "results.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Irpl,
    Divergence,
    All,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(value_enum, default_value = "all")]
    pub suite: Suite,
    #[command(flatten)]
    pub trials: TrialArgs,
}

#[derive(Debug, Args)]
pub struct TrialArgs {
    #[arg(long, default_value_t = 100)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env)
        .format_timestamp(None)
        .try_init();
}

pub fn run(cli: Cli) -> ExitCode {
    let code = match cli.command {
        Command::Plan(a) => cmd_plan(&a),
        Command::Bench(a) => cmd_bench(&a),
        Command::Verify(a) => cmd_verify(a.suite, &a.trials),
        Command::IrplVerify(a) => cmd_irpl_verify(&a),
        Command::DivergenceVerify(a) => cmd_divergence_verify(&a),
    };
    ExitCode::from(code)
}

fn secs(s: Option<f64>) -> Result<Option<Duration>, String> {
    s.map(|s| Duration::try_from_secs_f64(s).map_err(|e| format!("bad time limit {s}: {e}")))
        .transpose()
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

pub const EXIT_SOLVED: u8 = 0;
pub const EXIT_UNSOLVED: u8 = 1;
pub const EXIT_LIMIT: u8 = 2;
pub const EXIT_INPUT: u8 = 3;

fn cmd_plan(a: &PlanArgs) -> u8 {
    let start = Instant::now();
    let prepared = (|| {
        let domain = read(&a.domain)?;
        let problem = read(&a.problem)?;
        let task = crate::pddl::load(&domain, &problem).map_err(|e| e.to_string())?;
        Ok::<_, String>((task, secs(a.search.time_limit)?))
    })();
    let (task, limit) = match prepared {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INPUT;
        }
    };
    log::info!(
        "{}: {} facts, {} actions",
        task.name,
        task.num_facts(),
        task.num_actions()
    );
    let cfg = SearchConfig {
        variant: a.search.variant,
        trim_capacity: a.search.trim,
        n_samples: a.search.samples,
        seed: a.search.seed,
        max_time: limit.map(|t| t.saturating_sub(start.elapsed())),
        max_memory: a.search.memory_limit.map(|mb| mb.saturating_mul(1 << 20)),
        ..Default::default()
    };
    let outcome = match search(&task, &cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INPUT;
        }
    };
    let stats = outcome.stats_json(&task, cfg.variant, cfg.seed);
    let written = (|| -> io::Result<()> {
        if let Some(plan) = outcome.plan() {
            let text = task.format_plan(plan);
            match &a.out {
                Some(p) => fs::write(p, text)?,
                None => io::stdout().write_all(text.as_bytes())?,
            }
        }
        match &a.stats {
            Some(p) => fs::write(p, format!("{stats}\n")),
            None => writeln!(io::stderr(), "{stats}"),
        }
    })();
    if let Err(e) = written {
        eprintln!("error: cannot write output: {e}");
        return EXIT_INPUT;
    }
    match outcome {
        Outcome::Solved { .. } => EXIT_SOLVED,
        Outcome::Exhausted { incomplete, .. } => {
            eprintln!(
                "no plan found{}",
                if incomplete {
                    " (open list was trimmed)"
                } else {
                    ""
                }
            );
            EXIT_UNSOLVED
        }
        Outcome::ResourceLimit { kind, .. } => {
            let what = match kind {
                LimitKind::Time => "time",
                LimitKind::Memory => "memory",
            };
            eprintln!("{what} limit reached");
            EXIT_LIMIT
        }
    }
}

fn cmd_bench(a: &BenchArgs) -> u8 {
    let instances = match bench::load_suite(&a.manifest) {
        Ok(i) => i,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INPUT;
        }
    };
    let time_limit = match secs(a.time_limit) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INPUT;
        }
    };
    let cfg = BenchConfig {
        variants: if a.variants.is_empty() {
            BenchConfig::default().variants
        } else {
            a.variants.clone()
        },
        seeds: (a.seed..a.seed + a.seeds).collect(),
        n_samples: a.samples,
        time_limit,
        memory_limit: a.memory_limit.map(|mb| mb.saturating_mul(1 << 20)),
        trim: a.trim,
        jobs: a.jobs,
    };
    let result = (|| {
        let file = fs::File::create(&a.out).map_err(|source| BenchError::Io {
            path: a.out.clone(),
            source,
        })?;
        let mut writer = csv::Writer::from_writer(file);
        let (records, skipped) = bench::run_suite(&instances, &cfg, |r| {
            writer.serialize(r)?;
            writer.flush().map_err(csv::Error::from)?;
            Ok(())
        })?;
        Ok::<_, BenchError>((records, skipped))
    })();
    match result {
        Ok((records, skipped)) => {
            print!("{}", bench::summarize(&records).render());
            println!("results written to {}", a.out.display());
            if skipped > 0 {
                eprintln!("{skipped} scheduled runs were skipped");
                EXIT_UNSOLVED
            } else {
                EXIT_SOLVED
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

/// Property report over `trials` random tiny tasks; task `i` uses seed `seed + i`.
pub fn irpl_suite(
    trials: u64,
    seed: u64,
    mut per_task: impl FnMut(u64, &PropertyReport),
) -> PropertyReport {
    let mut total = PropertyReport::default();
    for i in 0..trials {
        let task_seed = seed.wrapping_add(i);
        let t = random_tiny_task(task_seed, &TinyTaskLimits::default());
        let report = check_properties(&t.library, task_seed);
        per_task(task_seed, &report);
        total.merge(report);
    }
    total
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DivergenceSummary {
    pub invariance_checks: usize,
    pub invariance_max_dev: f64,
    pub consistency_checks: usize,
    pub consistency_max_dev: f64,
    /// Human-readable reproductions of failures.
    pub failures: Vec<String>,
}

/// Divergence invariance over random distributions (`seed + i`) with
/// `intermediate` random intermediate domains each.
pub fn invariance_suite(
    trials: u64,
    seed: u64,
    intermediate: usize,
    mut per_trial: impl FnMut(u64, f64),
) -> DivergenceSummary {
    let mut s = DivergenceSummary::default();
    for i in 0..trials {
        let trial_seed = seed.wrapping_add(i);
        let (d, obs) = random_instance(trial_seed, 10_000);
        match verify_invariance(&d, &obs, intermediate, trial_seed) {
            Ok(r) => {
                s.invariance_checks += r.trials.len();
                let dev = r.max_deviation();
                s.invariance_max_dev = s.invariance_max_dev.max(dev);
                per_trial(trial_seed, dev);
                if !r.passed() {
                    let worst = r.trials.iter().max_by(|a, b| a.delta.total_cmp(&b.delta));
                    s.failures.push(format!(
                        "invariance: distribution seed {trial_seed}, sizes {:?}, observation {:?}, \
                         expected {}, worst {worst:?}",
                        d.sizes(),
                        obs.assignments(),
                        r.expected
                    ));
                }
            }
            Err(e) => s
                .failures
                .push(format!("invariance: distribution seed {trial_seed}: {e}")),
        }
    }
    s
}

/// Divergence likelihood against `P(O|G)` for every plan prefix of random
/// libraries (`seed + i`, plans of at most 8 steps) under uniform weights
/// per trajectory and per transition.
pub fn consistency_suite(trials: u64, seed: u64) -> DivergenceSummary {
    let limits = TinyTaskLimits {
        max_plan_len: 8,
        ..TinyTaskLimits::default()
    };
    let mut s = DivergenceSummary::default();
    for i in 0..trials {
        let lib_seed = seed.wrapping_add(i);
        let t = random_tiny_task(lib_seed, &limits);
        for scheme in [WeightScheme::Ump, WeightScheme::Utp] {
            let lib = t.library.weigh(scheme);
            let mut prefixes: Vec<&[usize]> = lib
                .trajectories()
                .iter()
                .filter(|t| t.is_plan)
                .flat_map(|t| (0..=t.len()).map(move |k| &t.actions[..k]))
                .collect();
            prefixes.sort_unstable();
            prefixes.dedup();
            for o in prefixes {
                let r = irpl_consistency(&lib, o);
                s.consistency_checks += 1;
                match r.delta() {
                    Some(d) if d <= crate::divergence::INVARIANCE_TOL => {
                        s.consistency_max_dev = s.consistency_max_dev.max(d);
                    }
                    other => {
                        s.consistency_max_dev =
                            s.consistency_max_dev.max(other.unwrap_or(f64::INFINITY));
                        s.failures.push(format!(
                            "consistency: library seed {lib_seed}, {scheme:?}, prefix {o:?}: {r:?}"
                        ));
                    }
                }
            }
        }
    }
    s
}

fn print_property_table(report: &PropertyReport) {
    println!(
        "{:<38} {:>9} {:>9}  result",
        "property", "checks", "failures"
    );
    for p in PROPERTIES {
        let checks = report.checks.get(p).copied().unwrap_or(0);
        let failures = report.failures(p);
        let verdict = if failures == 0 { "pass" } else { "FAIL" };
        println!("{p:<38} {checks:>9} {failures:>9}  {verdict}");
    }
}

fn report_irpl_failure(report: &PropertyReport) {
    if let Some(v) = report.violations.first() {
        eprintln!("violation: {v}");
        eprintln!("{} violations in total", report.violations.len());
    }
}

fn cmd_verify(suite: Suite, a: &TrialArgs) -> u8 {
    if a.trials == 0 {
        eprintln!("warning: --trials 0, no checks run");
        return EXIT_SOLVED;
    }
    let mut ok = true;
    if matches!(suite, Suite::Irpl | Suite::All) {
        let mut first_bad = None;
        let report = irpl_suite(a.trials, a.seed, |task_seed, r| {
            if !r.is_ok() && first_bad.is_none() {
                first_bad = Some(task_seed);
            }
        });
        println!(
            "plan-library properties over {} random tasks (seed {}):",
            a.trials, a.seed
        );
        print_property_table(&report);
        if let Some(task_seed) = first_bad {
            eprintln!("first failing task seed: {task_seed}");
            report_irpl_failure(&report);
            ok = false;
        }
    }
    if matches!(suite, Suite::Divergence | Suite::All) {
        let inv = invariance_suite(a.trials, a.seed, 4, |_, _| {});
        let con = consistency_suite(a.trials.div_ceil(2), a.seed);
        println!(
            "divergence invariance: {} checks, max deviation {:.3e}",
            inv.invariance_checks, inv.invariance_max_dev
        );
        println!(
            "library consistency:   {} checks, max deviation {:.3e}",
            con.consistency_checks, con.consistency_max_dev
        );
        for f in inv.failures.iter().chain(&con.failures) {
            eprintln!("violation: {f}");
            ok = false;
        }
    }
    if ok {
        println!("all properties hold");
        EXIT_SOLVED
    } else {
        EXIT_UNSOLVED
    }
}

fn cmd_irpl_verify(a: &TrialArgs) -> u8 {
    println!(
        "{:>6} {:>6} {:>6}  {}",
        "seed",
        "trajs",
        "plans",
        PROPERTIES
            .iter()
            .enumerate()
            .map(|(i, _)| format!("P{i:<2}"))
            .collect::<Vec<_>>()
            .join(" ")
    );
    let limits = TinyTaskLimits::default();
    let report = irpl_suite(a.trials, a.seed, |task_seed, r| {
        let t = random_tiny_task(task_seed, &limits);
        let cells: Vec<String> = PROPERTIES
            .iter()
            .map(|p| {
                if !r.checks.contains_key(p) {
                    "-  ".to_string()
                } else if r.failures(p) == 0 {
                    "ok ".to_string()
                } else {
                    "NO ".to_string()
                }
            })
            .collect();
        println!(
            "{task_seed:>6} {:>6} {:>6}  {}",
            t.library.len(),
            t.library.num_plans(),
            cells.join(" ")
        );
    });
    for (i, p) in PROPERTIES.iter().enumerate() {
        println!("P{i:<2} {p}");
    }
    if report.is_ok() {
        EXIT_SOLVED
    } else {
        report_irpl_failure(&report);
        EXIT_UNSOLVED
    }
}

fn cmd_divergence_verify(a: &TrialArgs) -> u8 {
    println!("{:>8} {:>12}", "seed", "max |delta|");
    let s = invariance_suite(a.trials, a.seed, 4, |seed, dev| {
        println!("{seed:>8} {dev:>12.3e}")
    });
    println!(
        "max deviation {:.3e} over {} checks",
        s.invariance_max_dev, s.invariance_checks
    );
    if s.failures.is_empty() {
        EXIT_SOLVED
    } else {
        for f in &s.failures {
            eprintln!("violation: {f}");
        }
        EXIT_UNSOLVED
    }
}
