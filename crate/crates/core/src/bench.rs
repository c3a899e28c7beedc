//! Benchmark harness: suite manifests, per-run records, CSV output, and
//! suite-level summaries (coverage, % score, agile score, pairwise counts).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::search::{search, Outcome, SearchConfig, Variant};

/// Runs slower than this score zero.
pub const AGILE_HORIZON_S: f64 = 300.0;

/// 1 up to one second, `1 − ln T / ln 300` up to 300 s, 0 beyond or unsolved.
pub fn agile_score(solved: bool, wall_time_s: f64) -> f64 {
    if !solved || wall_time_s > AGILE_HORIZON_S {
        0.0
    } else if wall_time_s <= 1.0 {
        1.0
    } else {
        1.0 - wall_time_s.ln() / AGILE_HORIZON_S.ln()
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("bad suite manifest {path}: {msg}")]
    Manifest { path: PathBuf, msg: String },
    #[error("{path}: {source}")]
    Pddl {
        path: PathBuf,
        source: crate::pddl::PddlError,
    },
    #[error(transparent)]
    Search(#[from] crate::search::SearchError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// One row of the results CSV, columns in declaration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub domain: String,
    pub problem: String,
    pub variant: Variant,
    pub seed: u64,
    pub solved: bool,
    pub expansions: u64,
    pub generations: u64,
    pub plan_cost: Option<usize>,
    pub search_time_s: f64,
    pub wall_time_s: f64,
    pub agile: f64,
}

pub const CSV_HEADER: [&str; 11] = [
    "domain",
    "problem",
    "variant",
    "seed",
    "solved",
    "expansions",
    "generations",
    "plan_cost",
    "search_time_s",
    "wall_time_s",
    "agile",
];

pub fn read_records(reader: impl io::Read) -> Result<Vec<RunRecord>, csv::Error> {
    csv::Reader::from_reader(reader).deserialize().collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub domain: String,
    pub domain_file: PathBuf,
    pub problem_file: PathBuf,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestEntry {
    domain: String,
    domain_file: PathBuf,
    problem_file: PathBuf,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    #[serde(default)]
    instance: Vec<ManifestEntry>,
}

/// Reads a TOML manifest of `[[instance]]` tables; file paths are relative
/// to the manifest's directory.
pub fn load_suite(path: &Path) -> Result<Vec<Instance>, BenchError> {
    let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let manifest: Manifest = toml::from_str(&text).map_err(|e| BenchError::Manifest {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(manifest
        .instance
        .into_iter()
        .map(|e| Instance {
            domain: e.domain,
            domain_file: base.join(e.domain_file),
            problem_file: base.join(e.problem_file),
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub variants: Vec<Variant>,
    pub seeds: Vec<u64>,
    pub n_samples: usize,
    pub time_limit: Option<Duration>,
    pub memory_limit: Option<usize>,
    pub trim: Option<usize>,
    /// Concurrent runs; 1 keeps timings undisturbed.
    pub jobs: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            variants: vec![Variant::F5, Variant::F5Ol],
            seeds: vec![0],
            n_samples: crate::sampling::DEFAULT_SAMPLES,
            time_limit: None,
            memory_limit: None,
            trim: None,
            jobs: 1,
        }
    }
}

fn read(path: &Path) -> Result<String, BenchError> {
    std::fs::read_to_string(path).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses, grounds and searches one instance; wall time covers all of it.
pub fn run_instance(
    inst: &Instance,
    variant: Variant,
    seed: u64,
    cfg: &BenchConfig,
) -> Result<(RunRecord, Outcome), BenchError> {
    let start = Instant::now();
    let domain = read(&inst.domain_file)?;
    let problem = read(&inst.problem_file)?;
    let task = crate::pddl::load(&domain, &problem).map_err(|source| BenchError::Pddl {
        path: inst.problem_file.clone(),
        source,
    })?;
    let search_cfg = SearchConfig {
        variant,
        trim_capacity: cfg.trim,
        n_samples: cfg.n_samples,
        seed,
        max_time: cfg.time_limit.map(|t| t.saturating_sub(start.elapsed())),
        max_memory: cfg.memory_limit,
        ..Default::default()
    };
    let outcome = search(&task, &search_cfg)?;
    let wall = start.elapsed().as_secs_f64();
    let stats = outcome.stats();
    let plan = outcome.plan();
    if let Some(p) = plan {
        debug_assert!(task.validate_plan(p).is_valid());
    }
    let solved = plan.is_some();
    let record = RunRecord {
        domain: inst.domain.clone(),
        problem: task.name.clone(),
        variant,
        seed,
        solved,
        expansions: stats.expansions,
        generations: stats.generations,
        plan_cost: plan.map(|p| p.cost()),
        search_time_s: stats.search_time_s,
        wall_time_s: wall,
        agile: agile_score(solved, wall),
    };
    Ok((record, outcome))
}

/// Runs every (instance, variant, seed) combination, streaming each record
/// to `sink` from a single thread as runs finish. Returns the records in
/// schedule order and the number of runs skipped because of input errors.
pub fn run_suite(
    instances: &[Instance],
    cfg: &BenchConfig,
    mut sink: impl FnMut(&RunRecord) -> Result<(), BenchError>,
) -> Result<(Vec<RunRecord>, usize), BenchError> {
    let mut jobs = Vec::new();
    for (i, inst) in instances.iter().enumerate() {
        for &v in &cfg.variants {
            for &s in &cfg.seeds {
                jobs.push((i, inst, v, s));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.max(1))
        .build()
        .expect("thread pool");
    let (tx, rx) = mpsc::channel();
    let mut results: Vec<(usize, RunRecord)> = Vec::new();
    let mut skipped = 0;
    let mut sink_error = None;
    std::thread::scope(|scope| {
        scope.spawn(|| {
            pool.install(|| {
                jobs.par_iter()
                    .enumerate()
                    .for_each_with(tx, |tx, (order, &(_, inst, v, s))| {
                        let res = run_instance(inst, v, s, cfg);
                        let _ = tx.send((order, inst, res));
                    });
            });
        });
        for (order, inst, res) in rx {
            match res {
                Ok((rec, _)) => {
                    if sink_error.is_none() {
                        if let Err(e) = sink(&rec) {
                            sink_error = Some(e);
                        }
                    }
                    results.push((order, rec));
                }
                Err(e) => {
                    log::warn!("skipping {}: {e}", inst.problem_file.display());
                    skipped += 1;
                }
            }
        }
    });
    if let Some(e) = sink_error {
        return Err(e);
    }
    results.sort_by_key(|(order, _)| *order);
    Ok((results.into_iter().map(|(_, r)| r).collect(), skipped))
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// Per (instance, variant) aggregate over seeds: solved only if every seed
/// solved it; numbers are medians over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub solved: bool,
    pub expansions: f64,
    pub search_time_s: f64,
    pub plan_cost: f64,
    pub agile: f64,
}

type InstanceKey = (String, String);

fn aggregate(records: &[RunRecord]) -> BTreeMap<(InstanceKey, Variant), Aggregate> {
    let mut groups: BTreeMap<(InstanceKey, Variant), Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry(((r.domain.clone(), r.problem.clone()), r.variant))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|(k, rs)| {
            let solved = rs.iter().all(|r| r.solved);
            let agg = Aggregate {
                solved,
                expansions: median(rs.iter().map(|r| r.expansions as f64).collect()),
                search_time_s: median(rs.iter().map(|r| r.search_time_s).collect()),
                plan_cost: median(rs.iter().map(|r| r.plan_cost.unwrap_or(0) as f64).collect()),
                agile: rs.iter().map(|r| r.agile).sum::<f64>() / rs.len() as f64,
            };
            (k, agg)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantSummary {
    pub variant: Variant,
    pub instances: usize,
    pub coverage: usize,
    /// Mean over domains of the percentage of that domain's instances solved.
    pub percent_score: f64,
    pub agile_total: f64,
    /// Mean expansions per second of search time over instances every
    /// variant solved.
    pub eps: Option<f64>,
}

/// Head-to-head counts between two variants over commonly solved instances;
/// ties are not counted in either direction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pairwise {
    pub a: Variant,
    pub b: Variant,
    pub common: usize,
    pub a_fewer_expansions: usize,
    pub b_fewer_expansions: usize,
    pub a_lower_time: usize,
    pub b_lower_time: usize,
    pub a_lower_cost: usize,
    pub b_lower_cost: usize,
}

impl Pairwise {
    pub fn expansion_ties(&self) -> usize {
        self.common - self.a_fewer_expansions - self.b_fewer_expansions
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub variants: Vec<VariantSummary>,
    pub pairwise: Vec<Pairwise>,
}

fn tally(x: f64, y: f64, x_wins: &mut usize, y_wins: &mut usize) {
    if x < y {
        *x_wins += 1;
    } else if y < x {
        *y_wins += 1;
    }
}

pub fn summarize(records: &[RunRecord]) -> Summary {
    let agg = aggregate(records);
    let variants: Vec<Variant> = records
        .iter()
        .map(|r| r.variant)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let instances: BTreeSet<InstanceKey> = agg.keys().map(|(k, _)| k.clone()).collect();
    let solved_by =
        |k: &InstanceKey, v: Variant| agg.get(&(k.clone(), v)).is_some_and(|a| a.solved);
    let all_solved: Vec<&InstanceKey> = instances
        .iter()
        .filter(|k| variants.iter().all(|&v| solved_by(k, v)))
        .collect();

    let mut summaries = Vec::new();
    for &v in &variants {
        let mine: Vec<(&InstanceKey, &Aggregate)> = agg
            .iter()
            .filter(|((_, var), _)| *var == v)
            .map(|((k, _), a)| (k, a))
            .collect();
        let mut per_domain: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        for (k, a) in &mine {
            let e = per_domain.entry(k.0.as_str()).or_default();
            e.0 += usize::from(a.solved);
            e.1 += 1;
        }
        let percent_score = if per_domain.is_empty() {
            0.0
        } else {
            per_domain
                .values()
                .map(|&(s, n)| 100.0 * s as f64 / n as f64)
                .sum::<f64>()
                / per_domain.len() as f64
        };
        let rates: Vec<f64> = all_solved
            .iter()
            .map(|k| &agg[&((*k).clone(), v)])
            .filter(|a| a.search_time_s > 0.0)
            .map(|a| a.expansions / a.search_time_s)
            .collect();
        summaries.push(VariantSummary {
            variant: v,
            instances: mine.len(),
            coverage: mine.iter().filter(|(_, a)| a.solved).count(),
            percent_score,
            agile_total: mine.iter().map(|(_, a)| a.agile).sum(),
            eps: (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64),
        });
    }

    let mut pairwise = Vec::new();
    for (i, &a) in variants.iter().enumerate() {
        for &b in &variants[i + 1..] {
            let mut p = Pairwise {
                a,
                b,
                common: 0,
                a_fewer_expansions: 0,
                b_fewer_expansions: 0,
                a_lower_time: 0,
                b_lower_time: 0,
                a_lower_cost: 0,
                b_lower_cost: 0,
            };
            for k in &instances {
                if !(solved_by(k, a) && solved_by(k, b)) {
                    continue;
                }
                let (x, y) = (&agg[&(k.clone(), a)], &agg[&(k.clone(), b)]);
                p.common += 1;
                tally(
                    x.expansions,
                    y.expansions,
                    &mut p.a_fewer_expansions,
                    &mut p.b_fewer_expansions,
                );
                tally(
                    x.search_time_s,
                    y.search_time_s,
                    &mut p.a_lower_time,
                    &mut p.b_lower_time,
                );
                tally(
                    x.plan_cost,
                    y.plan_cost,
                    &mut p.a_lower_cost,
                    &mut p.b_lower_cost,
                );
            }
            pairwise.push(p);
        }
    }
    Summary {
        variants: summaries,
        pairwise,
    }
}

impl Summary {
    pub fn pair(&self, a: Variant, b: Variant) -> Option<Pairwise> {
        self.pairwise.iter().find_map(|p| {
            if p.a == a && p.b == b {
                Some(p.clone())
            } else if p.a == b && p.b == a {
                Some(Pairwise {
                    a,
                    b,
                    common: p.common,
                    a_fewer_expansions: p.b_fewer_expansions,
                    b_fewer_expansions: p.a_fewer_expansions,
                    a_lower_time: p.b_lower_time,
                    b_lower_time: p.a_lower_time,
                    a_lower_cost: p.b_lower_cost,
                    b_lower_cost: p.a_lower_cost,
                })
            } else {
                None
            }
        })
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<12} {:>9} {:>9} {:>8} {:>8} {:>12}",
            "variant", "instances", "coverage", "%score", "agile", "EpS(common)"
        );
        for v in &self.variants {
            let eps = v.eps.map_or("-".to_string(), |e| format!("{e:.0}"));
            let _ = writeln!(
                out,
                "{:<12} {:>9} {:>9} {:>8.1} {:>8.2} {:>12}",
                v.variant.name(),
                v.instances,
                v.coverage,
                v.percent_score,
                v.agile_total,
                eps
            );
        }
        for p in &self.pairwise {
            let _ = writeln!(
                out,
                "{} vs {} over {} common: fewer expansions {}/{}, lower time {}/{}, lower cost {}/{}",
                p.a, p.b, p.common,
                p.a_fewer_expansions, p.b_fewer_expansions,
                p.a_lower_time, p.b_lower_time,
                p.a_lower_cost, p.b_lower_cost
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn agile_fixtures() {
        assert_eq!(agile_score(true, 0.5), 1.0);
        assert_eq!(agile_score(true, 1.0), 1.0);
        assert!((agile_score(true, 10.0) - (1.0 - 10f64.ln() / 300f64.ln())).abs() < 1e-12);
        assert!(agile_score(true, 300.0).abs() < 1e-12);
        assert_eq!(agile_score(true, 301.0), 0.0);
        assert_eq!(agile_score(false, 0.1), 0.0);
    }

    fn rec(problem: &str, variant: Variant, seed: u64, solved: bool, exp: u64) -> RunRecord {
        RunRecord {
            domain: "d".into(),
            problem: problem.into(),
            variant,
            seed,
            solved,
            expansions: exp,
            generations: exp * 2,
            plan_cost: solved.then_some(exp as usize),
            search_time_s: exp as f64 / 100.0,
            wall_time_s: 0.5,
            agile: agile_score(solved, 0.5),
        }
    }

    #[test]
    fn csv_round_trip_and_header() {
        let rows = vec![
            rec("p1", Variant::F5, 0, true, 5),
            rec("p2", Variant::F5LmOlUtp, 3, false, 9),
        ];
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &rows {
            w.serialize(r).unwrap();
        }
        let bytes = w.into_inner().unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
        assert!(text.contains("p2,F5LM_OL_UTP,3,false,9,18,,"));
        assert_eq!(read_records(&bytes[..]).unwrap(), rows);
    }

    #[test]
    fn summary_counts() {
        let rows = vec![
            rec("p1", Variant::F5, 0, true, 10),
            rec("p1", Variant::F5Ol, 0, true, 5),
            rec("p2", Variant::F5, 0, true, 10),
            rec("p2", Variant::F5Ol, 0, true, 10),
            rec("p3", Variant::F5, 0, false, 10),
            rec("p3", Variant::F5Ol, 0, true, 3),
        ];
        let s = summarize(&rows);
        let p = s.pair(Variant::F5Ol, Variant::F5).unwrap();
        assert_eq!(
            (p.common, p.a_fewer_expansions, p.b_fewer_expansions),
            (2, 1, 0)
        );
        assert_eq!(p.expansion_ties(), 1);
        let f5 = &s.variants[0];
        assert_eq!((f5.variant, f5.coverage, f5.instances), (Variant::F5, 2, 3));
        assert!((f5.percent_score - 200.0 / 3.0).abs() < 1e-9);
        assert_eq!(s.variants[1].agile_total, 3.0);
        assert!(s.render().contains("F5 vs F5_OL over 2 common"));
    }

    #[test]
    fn seeds_aggregate_by_median() {
        let rows = vec![
            rec("p", Variant::F5Ol, 0, true, 1),
            rec("p", Variant::F5Ol, 1, true, 50),
            rec("p", Variant::F5Ol, 2, true, 7),
            rec("p", Variant::F5, 0, true, 8),
        ];
        let p = summarize(&rows).pair(Variant::F5Ol, Variant::F5).unwrap();
        assert_eq!(p.a_fewer_expansions, 1);
    }

    #[test]
    fn manifest_paths_are_relative() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("suite.toml");
        std::fs::write(
            &path,
            "[[instance]]\ndomain = \"x\"\ndomain_file = \"x/d.pddl\"\nproblem_file = \"x/p.pddl\"\n",
        )
        .unwrap();
        let suite = load_suite(&path).unwrap();
        assert_eq!(suite[0].problem_file, dir.path().join("x/p.pddl"));
        std::fs::write(&path, "[[instance]]\ndomain = 3\n").unwrap();
        assert!(matches!(
            load_suite(&path),
            Err(BenchError::Manifest { .. })
        ));
    }

    #[test]
    fn missing_files_are_skipped() {
        let inst = Instance {
            domain: "x".into(),
            domain_file: "/nonexistent/d.pddl".into(),
            problem_file: "/nonexistent/p.pddl".into(),
        };
        let (recs, skipped) = run_suite(&[inst], &BenchConfig::default(), |_| Ok(())).unwrap();
        assert!(recs.is_empty());
        assert_eq!(skipped, 2);
    }

    proptest! {
        #[test]
        fn agile_in_unit_interval(t in 0.0f64..1000.0, solved: bool) {
            let a = agile_score(solved, t);
            prop_assert!((0.0..=1.0).contains(&a));
        }

        #[test]
        fn pairwise_counts_partition_common(
            exps in proptest::collection::vec((1u64..5, 1u64..5, any::<bool>(), any::<bool>()), 1..20)
        ) {
            let mut rows = Vec::new();
            for (i, (x, y, sx, sy)) in exps.into_iter().enumerate() {
                rows.push(rec(&format!("p{i}"), Variant::F5, 0, sx, x));
                rows.push(rec(&format!("p{i}"), Variant::F5Ol, 0, sy, y));
            }
            let s = summarize(&rows);
            let ab = s.pair(Variant::F5, Variant::F5Ol).unwrap();
            let ba = s.pair(Variant::F5Ol, Variant::F5).unwrap();
            prop_assert_eq!(ab.a_fewer_expansions, ba.b_fewer_expansions);
            prop_assert_eq!(
                ab.a_fewer_expansions + ab.b_fewer_expansions + ab.expansion_ties(),
                ab.common
            );
        }
    }
}
