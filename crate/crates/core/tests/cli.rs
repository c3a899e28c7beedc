use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use intent_search::bench::{read_records, CSV_HEADER};
use intent_search::fixtures::{CHAIN3_DOMAIN, CHAIN3_PROBLEM, GRIPPER1_DOMAIN, GRIPPER1_PROBLEM};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_intent-search"));
    c.env_remove("INTENT_SEARCH_LOG");
    c
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn benchmarks() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../benchmarks")
}

#[test]
fn plan_chain3_writes_valid_plan_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let d = write(dir.path(), "d.pddl", CHAIN3_DOMAIN);
    let p = write(dir.path(), "p.pddl", CHAIN3_PROBLEM);
    let plan = dir.path().join("plan.txt");
    let stats = dir.path().join("stats.json");
    let out = bin()
        .args(["plan", "--variant", "F5_OL", "--out"])
        .arg(&plan)
        .arg("--stats")
        .arg(&stats)
        .arg(&d)
        .arg(&p)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let task = intent_search::pddl::load(CHAIN3_DOMAIN, CHAIN3_PROBLEM).unwrap();
    let parsed = task
        .parse_plan(&std::fs::read_to_string(&plan).unwrap())
        .unwrap();
    assert!(task.validate_plan(&parsed).is_valid());
    assert_eq!(parsed.len(), 3);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&stats).unwrap()).unwrap();
    assert_eq!(json["status"], "solved");
    assert_eq!(json["variant"], "F5_OL");
    assert_eq!(json["plan_cost"], 3);
}

#[test]
fn plan_to_stdout_by_default() {
    let dir = tempfile::tempdir().unwrap();
    let d = write(dir.path(), "d.pddl", GRIPPER1_DOMAIN);
    let p = write(dir.path(), "p.pddl", GRIPPER1_PROBLEM);
    let out = bin().arg("plan").arg(&d).arg(&p).output().unwrap();
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("(pick ball1 rooma"), "{stdout}");
    assert!(String::from_utf8_lossy(&out.stderr).contains("\"status\":\"solved\""));
}

#[test]
fn malformed_pddl_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = write(dir.path(), "d.pddl", "(define (domain broken");
    let p = write(dir.path(), "p.pddl", CHAIN3_PROBLEM);
    let out = bin().arg("plan").arg(&d).arg(&p).output().unwrap();
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    let missing = bin()
        .arg("plan")
        .arg(dir.path().join("nope.pddl"))
        .arg(&p)
        .output()
        .unwrap();
    assert_eq!(code(&missing), 3);
}

#[test]
fn unsolvable_problem_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = write(dir.path(), "d.pddl", CHAIN3_DOMAIN);
    let p = write(
        dir.path(),
        "p.pddl",
        "(define (problem stuck) (:domain chain) (:init (p1)) (:goal (and (p0))))",
    );
    let out = bin()
        .args(["plan", "--variant", "F5"])
        .arg(&d)
        .arg(&p)
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn zero_time_limit_exits_two_with_stats() {
    let g = benchmarks().join("gripper");
    let out = bin()
        .args(["plan", "--time-limit", "0"])
        .arg(g.join("domain.pddl"))
        .arg(g.join("p08.pddl"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("\"status\":\"time-limit\""));
}

#[test]
fn trim_zero_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = write(dir.path(), "d.pddl", CHAIN3_DOMAIN);
    let p = write(dir.path(), "p.pddl", CHAIN3_PROBLEM);
    let out = bin()
        .args(["plan", "--trim", "0"])
        .arg(&d)
        .arg(&p)
        .output()
        .unwrap();
    assert_eq!(code(&out), 3);
}

#[test]
fn bench_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let b = benchmarks();
    let manifest = write(
        dir.path(),
        "suite.toml",
        &format!(
            "[[instance]]\ndomain = \"gripper\"\ndomain_file = \"{0}/gripper/domain.pddl\"\nproblem_file = \"{0}/gripper/p02.pddl\"\n\n\
             [[instance]]\ndomain = \"blocks\"\ndomain_file = \"{0}/blocks/domain.pddl\"\nproblem_file = \"{0}/blocks/p01.pddl\"\n",
            b.display()
        ),
    );
    let csv = dir.path().join("out.csv");
    let out = bin()
        .arg("bench")
        .arg(&manifest)
        .args([
            "--variant",
            "F5",
            "--variant",
            "F5_OP",
            "--seeds",
            "2",
            "--jobs",
            "2",
            "--out",
        ])
        .arg(&csv)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    let records = read_records(text.as_bytes()).unwrap();
    assert_eq!(records.len(), 2 * 2 * 2);
    assert!(records.iter().all(|r| r.solved && r.plan_cost.is_some()));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("F5_OP"), "{stdout}");
}

#[test]
fn bench_skips_missing_files() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = write(
        dir.path(),
        "suite.toml",
        "[[instance]]\ndomain = \"x\"\ndomain_file = \"none.pddl\"\nproblem_file = \"none.pddl\"\n",
    );
    let out = bin()
        .arg("bench")
        .arg(&manifest)
        .arg("--out")
        .arg(dir.path().join("r.csv"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("skipping"));
}

#[test]
fn verify_suites_pass() {
    for suite in ["irpl", "divergence", "all"] {
        let out = bin()
            .args(["verify", suite, "--trials", "5", "--seed", "7"])
            .output()
            .unwrap();
        assert_eq!(
            code(&out),
            0,
            "{suite}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(String::from_utf8_lossy(&out.stdout).contains("all properties hold"));
    }
}

#[test]
fn verify_zero_trials_warns() {
    let out = bin()
        .args(["verify", "all", "--trials", "0"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
}

#[test]
fn per_trial_reports() {
    let out = bin()
        .args(["irpl-verify", "--trials", "3"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("uniform-count-ratios"));
    let out = bin()
        .args(["divergence-verify", "--trials", "3", "--seed", "1"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("max deviation"));
}

#[test]
fn log_level_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let d = write(dir.path(), "d.pddl", CHAIN3_DOMAIN);
    let p = write(dir.path(), "p.pddl", CHAIN3_PROBLEM);
    let out = bin()
        .env("INTENT_SEARCH_LOG", "info")
        .arg("plan")
        .arg(&d)
        .arg(&p)
        .output()
        .unwrap();
    assert!(String::from_utf8_lossy(&out.stderr).contains("INFO"));
}
