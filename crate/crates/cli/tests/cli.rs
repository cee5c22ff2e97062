//! End-to-end runs of the `epibarrier` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use serde_json::Value;
use tempfile::TempDir;

use epibarrier::barrier::assemble_set;
use epibarrier::export::SetDocument;
use epibarrier::{SetKind, StateVec};

const SIR: &str = r#"{"variant": "SIR_PERFECT", "beta": [0.6, 0.8], "gamma": 0.5, "i_max": 0.02}"#;
const SIR_OPEN: &str = r#"{"variant": "SIR_PERFECT", "beta": [0.6, 0.8], "gamma": 0.5, "i_max": 0.4}"#;
const SIR_IMPERFECT: &str = r#"{"variant": "SIR_IMPERFECT", "beta": [0.6, 0.8], "gamma": [0.3, 0.5], "i_max": 0.2}"#;
const SEIR: &str =
    r#"{"variant": "SEIR_PERFECT", "beta": [0.8, 1.0], "gamma": [0.2, 0.3333333333333333], "eta": 0.2, "i_max": 0.3}"#;

struct Run {
    code: i32,
    stdout: Value,
    stderr: String,
}

fn config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn epibarrier(args: &[&str]) -> Run {
    let Output { status, stdout, stderr } = Command::new(env!("CARGO_BIN_EXE_epibarrier")).args(args).output().unwrap();
    Run {
        code: status.code().unwrap(),
        stdout: serde_json::from_slice(&stdout).unwrap_or(Value::Null),
        stderr: String::from_utf8_lossy(&stderr).into_owned(),
    }
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

#[test]
fn classify_reports_tag_and_witnesses() {
    let dir = TempDir::new().unwrap();
    let open = config(&dir, "open.json", SIR_OPEN);
    let r = epibarrier(&["classify", "--config", path(&open)]);
    assert_eq!(r.code, 0);
    assert_eq!(r.stdout["tag"], "ALL_EQUAL_G");
    assert_eq!(r.stdout["witnesses"].as_array().unwrap().len(), 2);

    let imp = config(&dir, "imp.json", SIR_IMPERFECT);
    assert_eq!(epibarrier(&["classify", "--config", path(&imp)]).stdout["tag"], "M_PROPER");
}

#[test]
fn bad_inputs_exit_with_code_two() {
    let dir = TempDir::new().unwrap();
    let extra = config(&dir, "extra.json", r#"{"variant": "SIR_PERFECT", "beta": [0.6, 0.8], "gamma": 0.5, "i_max": 0.02, "x": 1}"#);
    let r = epibarrier(&["classify", "--config", path(&extra)]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("REJECT_FIELDS"), "{}", r.stderr);

    let broken = config(&dir, "broken.json", "{\"variant\":");
    assert_eq!(epibarrier(&["classify", "--config", path(&broken)]).code, 2);
    assert_eq!(epibarrier(&["classify", "--config", path(&dir.path().join("missing.json"))]).code, 2);

    let sir = config(&dir, "sir.json", SIR);
    let r = epibarrier(&["classify", "--config", path(&sir), "--tol", "nonsense=1"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("REJECT_TOLERANCES"), "{}", r.stderr);

    let imp = config(&dir, "imp.json", SIR_IMPERFECT);
    let out = dir.path().join("out");
    let r = epibarrier(&["barrier", "--config", path(&imp), "--set", "admissible", "--out", path(&out)]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("BAD_SET_KIND"), "{}", r.stderr);

    let r = epibarrier(&["simulate", "--config", path(&sir), "--policy", "constant:0.8", "--x0", "0.9,0.2", "--out", path(&out)]);
    assert_eq!(r.code, 2);
    let r = epibarrier(&["simulate", "--config", path(&sir), "--policy", "constant:0.9", "--x0", "0.8,0.01", "--out", path(&out)]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("BAD_POLICY"), "{}", r.stderr);
    let r = epibarrier(&["montecarlo", "--config", path(&sir), "--x0", "0.8,0.01", "--out", path(&out)]);
    assert_eq!(r.code, 2);
}

#[test]
fn sir_barrier_writes_curve_and_set() {
    let dir = TempDir::new().unwrap();
    let sir = config(&dir, "sir.json", SIR);
    let out = dir.path().join("out");
    let r = epibarrier(&["barrier", "--config", path(&sir), "--set", "admissible", "--out", path(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.stdout["curves"], 1);
    let csv = String::from_utf8(read(&out.join("curve_000.csv"))).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,S,I,lambda1,lambda2,beta,gamma,switch_flag");
    let doc = SetDocument::load(&out.join("set.json")).unwrap();
    let z = doc.set.curve_summaries[0].tangent_point.as_slice().to_vec();
    assert!((z[0] - 0.5 / 0.6).abs() < 1e-12 && z[1] == 0.02);
    let manifest: Value = serde_json::from_slice(&read(&out.join("manifest.json"))).unwrap();
    assert_eq!(manifest["command"], "barrier");
    assert!(manifest["runtime_seconds"].as_f64().unwrap() >= 0.0);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn seir_barrier_writes_one_file_per_curve() {
    let dir = TempDir::new().unwrap();
    let seir = config(&dir, "seir.json", SEIR);
    let out = dir.path().join("out");
    let r = epibarrier(&["barrier", "--config", path(&seir), "--set", "mrpi", "--curves", "30", "--out", path(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    for k in 0..30 {
        assert!(out.join(format!("curve_{k:03}.csv")).exists());
    }
    let json_out = dir.path().join("json");
    let r = epibarrier(&[
        "barrier", "--config", path(&seir), "--set", "mrpi", "--curves", "4", "--format", "json", "--out", path(&json_out),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let c: Value = serde_json::from_slice(&read(&json_out.join("curve_003.json"))).unwrap();
    assert!(c["samples"].as_array().unwrap().len() > 10);
}

#[test]
fn trivial_set_is_reported_not_computed() {
    let dir = TempDir::new().unwrap();
    let open = config(&dir, "open.json", SIR_OPEN);
    let out = dir.path().join("out");
    let r = epibarrier(&["barrier", "--config", path(&open), "--set", "mrpi", "--out", path(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.stdout["trivial"], true);
    assert_eq!(r.stdout["curves"], 0);
    let doc = SetDocument::load(&out.join("set.json")).unwrap();
    assert!(doc.set.trivial);

    let r = epibarrier(&["oracle", "--config", path(&open), "--set", "mrpi", "--grid", "5", "--out", path(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.stdout["agreement"], 1.0);
}

#[test]
fn simulate_policies() {
    let dir = TempDir::new().unwrap();
    let sir = config(&dir, "sir.json", SIR);
    let out = dir.path().join("out");
    let run = |policy: &str, t_end: &str| {
        epibarrier(&["simulate", "--config", path(&sir), "--policy", policy, "--x0", "0.8,0.012", "--t-end", t_end, "--out", path(&out)])
    };
    let r = run("switching", "500");
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.stdout["breached"], false);
    let r = run("constant:beta=0.8", "500");
    assert_eq!(r.stdout["breached"], true);
    assert!(r.stdout["first_breach_time"].as_f64().unwrap() > 0.0);
    let r = run("constant:0.6", "0");
    assert_eq!(r.stdout["samples"], 1);
    let csv = String::from_utf8(read(&out.join("trajectory.csv"))).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert_eq!(csv.lines().next().unwrap(), "t,S,I,R,beta,gamma");
}

#[test]
fn montecarlo_aggregate_and_determinism() {
    let dir = TempDir::new().unwrap();
    let imp = config(&dir, "imp.json", SIR_IMPERFECT);
    let run = |out: &Path, n: &str| {
        epibarrier(&[
            "montecarlo", "--config", path(&imp), "--x0", "0.8,0.1", "--n", n, "--seed", "2024", "--t-end", "200", "--out",
            path(out),
        ])
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let r = run(&a, "10");
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.stdout["n_breached"], 0);
    assert!(r.stdout["max_I"].as_f64().unwrap() < 0.2);
    run(&b, "10");
    for k in 0..10 {
        let name = format!("trial_{k:03}.csv");
        assert_eq!(read(&a.join(&name)), read(&b.join(&name)), "{name}");
    }
    assert_eq!(read(&a.join("aggregate.json")), read(&b.join("aggregate.json")));

    let r = run(&dir.path().join("empty"), "0");
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.stdout["n_trials"], 0);
    assert_eq!(r.stdout["max_I"], Value::Null);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let seir = config(&dir, "seir.json", SEIR);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let r = epibarrier(&["barrier", "--config", path(&seir), "--set", "admissible", "--curves", "6", "--out", path(out)]);
        assert_eq!(r.code, 0, "{}", r.stderr);
    }
    for k in 0..6 {
        let name = format!("curve_{k:03}.csv");
        assert_eq!(read(&a.join(&name)), read(&b.join(&name)), "{name}");
    }
    assert_eq!(read(&a.join("set.json")), read(&b.join("set.json")));
}

#[test]
fn reloaded_set_gives_the_same_verdicts() {
    let dir = TempDir::new().unwrap();
    let seir = config(&dir, "seir.json", SEIR);
    let out = dir.path().join("out");
    let r = epibarrier(&["barrier", "--config", path(&seir), "--set", "mrpi", "--curves", "30", "--out", path(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let doc = SetDocument::load(&out.join("set.json")).unwrap();
    let sc = doc.set.scenario.clone();
    let fresh = assemble_set(&sc, SetKind::Mrpi, 30, &doc.set.tolerances).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    let mut n = 0;
    while n < 100 {
        let (s, e, i) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.0..sc.i_max));
        if s + e + i > 1.0 {
            continue;
        }
        let p = StateVec::seir(s, e, i);
        assert_eq!(doc.set.membership(&p), fresh.membership(&p), "{:?}", p.as_slice());
        n += 1;
    }
}

#[test]
fn oracle_grid_and_points() {
    let dir = TempDir::new().unwrap();
    let sir = config(&dir, "sir.json", SIR);
    let out = dir.path().join("out");
    let r = epibarrier(&["oracle", "--config", path(&sir), "--set", "admissible", "--grid", "30", "--seed", "7", "--out", path(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout["agreement"].as_f64().unwrap() >= 0.98);
    let csv = String::from_utf8(read(&out.join("oracle.csv"))).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "S,I,verdict,distance,oracle_inside,oracle_agrees");
    assert_eq!(csv.lines().count(), 1 + r.stdout["cells"].as_u64().unwrap() as usize);

    let seir = config(&dir, "seir.json", SEIR);
    let r = epibarrier(&["oracle", "--config", path(&seir), "--set", "mrpi", "--grid", "10", "--out", path(&out)]);
    assert_eq!(r.code, 2);
    let r = epibarrier(&[
        "oracle", "--config", path(&seir), "--set", "mrpi", "--points", "0.05,0.1,0.1;0.5,0.2,0.25", "--out", path(&out),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.stdout["points"], 2);
}
