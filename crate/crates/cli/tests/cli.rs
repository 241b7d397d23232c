use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use elastica::DiscreteCurve;

fn elastica(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_elastica")).current_dir(dir).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn json(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const CONFIG: &str = "# converging run\nlambda=1\ndt=1e-4\nt_end=1\ntol_stationary=1e-9\nsnapshot_every=20\nseed=1\n";

/// A perturbed segment and a config that relaxes it to the straight elastica.
fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let out = elastica(dir.path(), &["--out", "curve", "make", "perturbed-segment", "--n", "60", "--amplitude", "0.1", "--seed", "1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::write(dir.path().join("a.cfg"), CONFIG).unwrap();
    dir
}

#[test]
fn make_segment_writes_the_unit_segment() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&elastica(dir.path(), &["--out", "s", "make", "segment", "--n", "100", "--dim", "2"])), 0);
    let c = DiscreteCurve::read_csv(&dir.path().join("s/curve.csv")).unwrap();
    assert_eq!((c.n_edges(), c.dim()), (100, 2));
    for j in 0..=100 {
        assert!((c.node(j)[0] - j as f64 / 100.0).abs() < 1e-15);
        assert_eq!(c.node(j)[1], 0.0);
    }
    let m = json(dir.path().join("s/manifest.json"));
    assert_eq!(m["command"], "make");
    assert_eq!(m["parameters"]["name"], "segment");
}

#[test]
fn make_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    for (out, seed) in [("a", "3"), ("b", "3"), ("c", "4")] {
        assert_eq!(code(&elastica(dir.path(), &["--out", out, "make", "perturbed-segment", "--seed", seed])), 0);
    }
    let read = |o: &str| std::fs::read(dir.path().join(o).join("curve.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}

#[test]
fn run_writes_trace_snapshots_and_manifest() {
    let dir = setup();
    let out = elastica(dir.path(), &["--out", "run", "run", "curve/curve.csv", "a.cfg"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let run = dir.path().join("run");
    let trace = std::fs::read_to_string(run.join("trace.csv")).unwrap();
    assert!(trace.lines().filter(|l| !l.starts_with('#')).count() > 2);
    let m = json(run.join("manifest.json"));
    assert_eq!(m["termination"], "stationary");
    assert_eq!(m["config"], std::fs::canonicalize(dir.path().join("a.cfg")).unwrap().to_str().unwrap());
    assert_eq!(m["inputs"][0], std::fs::canonicalize(dir.path().join("curve/curve.csv")).unwrap().to_str().unwrap());
    for o in m["outputs"].as_array().unwrap() {
        assert!(run.join(o.as_str().unwrap()).exists(), "{o}");
    }
    assert!(run.join("snapshots/index.csv").exists());
}

#[test]
fn runs_are_byte_identical() {
    let dir = setup();
    for out in ["r1", "r2"] {
        assert_eq!(code(&elastica(dir.path(), &["--out", out, "run", "curve/curve.csv", "a.cfg"])), 0);
    }
    let read = |o: &str| std::fs::read(dir.path().join(o).join("trace.csv")).unwrap();
    assert_eq!(read("r1"), read("r2"));
}

#[test]
fn sweeps_get_isolated_directories() {
    let dir = setup();
    std::fs::write(dir.path().join("b.cfg"), CONFIG.replace("lambda=1", "lambda=2")).unwrap();
    assert_eq!(code(&elastica(dir.path(), &["--out", "single", "run", "curve/curve.csv", "a.cfg"])), 0);
    let out = elastica(dir.path(), &["--out", "sweep", "--jobs", "2", "run", "curve/curve.csv", "a.cfg", "b.cfg"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let read = |p: &str| std::fs::read(dir.path().join(p)).unwrap();
    assert_eq!(read("sweep/a/trace.csv"), read("single/trace.csv"));
    assert_ne!(read("sweep/b/trace.csv"), read("single/trace.csv"));
    assert!(dir.path().join("sweep/b/manifest.json").exists());
}

#[test]
fn wrong_dimension_exits_with_three() {
    let dir = setup();
    std::fs::write(dir.path().join("d3.cfg"), "dim=3\n").unwrap();
    let out = elastica(dir.path(), &["--out", "x", "run", "curve/curve.csv", "d3.cfg"]);
    assert_eq!(code(&out), 3);
    assert_eq!(String::from_utf8_lossy(&out.stderr).trim().lines().count(), 1);
    assert!(!dir.path().join("x/manifest.json").exists());
}

#[test]
fn malformed_inputs_exit_with_two() {
    let dir = setup();
    std::fs::write(dir.path().join("bad.csv"), "0,0\n1,zero\n").unwrap();
    assert_eq!(code(&elastica(dir.path(), &["--out", "x", "run", "bad.csv", "a.cfg"])), 2);
    std::fs::write(dir.path().join("bad.cfg"), "lambda=one\n").unwrap();
    assert_eq!(code(&elastica(dir.path(), &["--out", "x", "run", "curve/curve.csv", "bad.cfg"])), 2);
    assert_eq!(code(&elastica(dir.path(), &["--out", "x", "run", "missing.csv", "a.cfg"])), 2);
    assert_eq!(code(&elastica(dir.path(), &["frobnicate"])), 2);
}

#[test]
fn step_budget_exhaustion_exits_with_four() {
    let dir = setup();
    std::fs::write(dir.path().join("short.cfg"), "lambda=1\ndt=1e-6\nmax_steps=3\n").unwrap();
    assert_eq!(code(&elastica(dir.path(), &["--out", "x", "run", "curve/curve.csv", "short.cfg"])), 4);
}

#[test]
fn spectrum_of_the_straight_segment() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&elastica(dir.path(), &["--out", "s", "make", "segment", "--n", "100"])), 0);
    let out = elastica(dir.path(), &["--out", "eig", "spectrum", "s/curve.csv", "--lambda", "0", "--count", "3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let s = json(dir.path().join("eig/spectrum.json"));
    let ev: Vec<f64> = s["eigenvalues"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert_eq!(ev.len(), 3);
    // clamped beam: k⁴ with cos k cosh k = 1, k = 4.730040744862704
    let beam = 4.730040744862704f64.powi(4);
    assert!((ev[0] - beam).abs() < 0.01 * beam, "{ev:?}");
    assert!(dir.path().join("eig/eigenfield_2.csv").exists());
    assert!(dir.path().join("eig/manifest.json").exists());
}

#[test]
fn diagnose_reports_an_admissible_exponent() {
    let dir = setup();
    assert_eq!(code(&elastica(dir.path(), &["--out", "run", "run", "curve/curve.csv", "a.cfg"])), 0);
    let out = elastica(dir.path(), &["--out", "diag", "diagnose", "run/trace.csv"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let d = json(dir.path().join("diag/diagnostics.json"));
    let theta = d["ls"]["theta"].as_f64().unwrap();
    assert!(theta > 0.0 && theta <= 0.5);
    assert_eq!(d["rate"]["kind"], "exponential");
    let m = json(dir.path().join("diag/manifest.json"));
    assert_eq!(m["inputs"].as_array().unwrap().len(), 2);
}

#[test]
fn project_writes_the_graph() {
    let dir = setup();
    assert_eq!(code(&elastica(dir.path(), &["--out", "s", "make", "segment", "--n", "60"])), 0);
    let out = elastica(dir.path(), &["--out", "p", "project", "s/curve.csv", "curve/curve.csv"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let sidecar = json(dir.path().join("p/phi.json"));
    assert!(sidecar["residual"].as_f64().unwrap() < 1e-10);
    assert_eq!(sidecar["sigma"].as_array().unwrap().len(), 61);
}
