use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use covpath_cli::summary::{
    BENCH_REPORT_SCHEMA, ONLINE_REPORT_SCHEMA, RUN_SUMMARY_SCHEMA, TIMINGS_SCHEMA, VERIFY_REPORT_SCHEMA,
};
use serde_json::Value;
use tempfile::TempDir;

fn covpath(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_covpath")).args(args).output().expect("spawn covpath")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

fn assert_schema(schema: &str, path: &Path) {
    let schema: Value = serde_json::from_str(schema).unwrap();
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    let doc = read_json(path);
    let errors: Vec<String> = validator.iter_errors(&doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{} violates its schema: {errors:?}", path.display());
}

fn stderr_error(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|_| panic!("stderr is not a JSON error: {text}"))
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, body).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SIGMA4: &str = "\
# small dense covariance
2.0, 0.6, 0.3, 0.1
0.6, 1.5, 0.4, 0.2
0.3, 0.4, 1.2, 0.5
0.1, 0.2, 0.5, 1.0
";

#[test]
fn solve_from_csv_writes_valid_outputs() {
    let dir = TempDir::new().unwrap();
    let sigma = write(&dir, "sigma.csv", SIGMA4);
    let out_dir = dir.path().join("out");
    let out = covpath(&["solve", "--sigma", s(&sigma), "--points", "6", "--verify", "--output", s(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    assert_schema(RUN_SUMMARY_SCHEMA, &out_dir.join("summary.json"));
    assert_schema(TIMINGS_SCHEMA, &out_dir.join("timings.json"));
    let summary = read_json(&out_dir.join("summary.json"));
    assert_eq!(summary["status"], "complete");
    assert_eq!(summary["points"].as_array().unwrap().len(), 6);
    assert_eq!(summary["verification"]["passed"], true);
    assert_eq!(summary["instance"]["n"], 4);

    for file in ["sigma.csv", "plot_cardinality.csv", "plot_cg_iterations.csv", "edges.csv", "state.json"] {
        assert!(out_dir.join(file).exists(), "missing {file}");
    }
    let plot = fs::read_to_string(out_dir.join("plot_cardinality.csv")).unwrap();
    assert_eq!(plot.lines().count(), 7, "header plus one row per point");
}

#[test]
fn samples_input_uses_the_biased_sample_covariance() {
    let dir = TempDir::new().unwrap();
    let samples = write(&dir, "x.csv", "1, 2\n3, 2\n2, 5\n2, 3\n");
    let out_dir = dir.path().join("out");
    let out = covpath(&["solve", "--samples", s(&samples), "--points", "3", "--output", s(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let sigma = fs::read_to_string(out_dir.join("sigma.csv")).unwrap();
    let rows: Vec<Vec<f64>> = sigma
        .lines()
        .map(|l| l.split(',').map(|v| v.trim().parse().unwrap()).collect())
        .collect();
    // Column means (2, 3); centered sums of squares 2 and 6, cross term 0, over m = 4.
    assert_eq!(rows, vec![vec![0.5, 0.0], vec![0.0, 1.5]]);
}

#[test]
fn write_matrices_then_verify_round_trips() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("out");
    let out = covpath(&[
        "solve", "--gen", "n=12,density=0.2,seed=3", "--points", "5", "--write-matrices", "--output", s(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("matrices").read_dir().unwrap().count() == 10);

    let out = covpath(&["verify", "--output", s(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_schema(VERIFY_REPORT_SCHEMA, &out_dir.join("verify.json"));
    assert_eq!(read_json(&out_dir.join("verify.json"))["passed"], true);
}

#[test]
fn predictor_and_scaling_modes_agree_on_cardinality() {
    let dir = TempDir::new().unwrap();
    let mut cards = Vec::new();
    for mode in ["scaling", "predictor"] {
        let out_dir = dir.path().join(mode);
        let out = covpath(&[
            "solve", "--gen", "n=20,density=0.1,seed=5", "--points", "8", "--mode", mode, "--output", s(&out_dir),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let summary = read_json(&out_dir.join("summary.json"));
        assert_eq!(summary["config"]["mode"], mode);
        let c: Vec<u64> = summary["points"]
            .as_array()
            .unwrap()
            .iter()
            .map(|p| p["cardinality"].as_u64().unwrap())
            .collect();
        cards.push(c);
    }
    assert_eq!(cards[0], cards[1]);
}

#[test]
fn identical_runs_give_identical_summaries() {
    let dir = TempDir::new().unwrap();
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = covpath(&["solve", "--gen", "n=15,density=0.2,seed=9", "--points", "5", "--output", s(&out_dir)]);
        assert_eq!(code(&out), 0);
        fs::read(out_dir.join("summary.json")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn seed_flag_overrides_generator_seed() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("out");
    let out = covpath(&[
        "solve", "--gen", "n=6,density=0.3,seed=1", "--seed", "42", "--points", "2", "--output", s(&out_dir),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(read_json(&out_dir.join("summary.json"))["instance"]["seed"], 42);
}

#[test]
fn online_zero_perturbation_returns_state_and_verifies() {
    let dir = TempDir::new().unwrap();
    let sigma = write(&dir, "sigma.csv", SIGMA4);
    let solve_dir = dir.path().join("solve");
    assert_eq!(code(&covpath(&["solve", "--sigma", s(&sigma), "--points", "3", "--output", s(&solve_dir)])), 0);

    let zero = write(&dir, "zero.csv", "0,0,0,0\n0,0,0,0\n0,0,0,0\n0,0,0,0\n");
    let online_dir = dir.path().join("online");
    let state = solve_dir.join("state.json");
    let out = covpath(&[
        "online", "--state", s(&state), "--perturbation", s(&zero), "--verify", "--output", s(&online_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_schema(ONLINE_REPORT_SCHEMA, &online_dir.join("online.json"));
    let report = read_json(&online_dir.join("online.json"));
    assert_eq!(report["steps"], 0);
    assert_eq!(report["verification"]["passed"], true);
    assert_eq!(read_json(&online_dir.join("state.json"))["u"], read_json(&state)["u"]);
}

#[test]
fn online_small_perturbation_matches_scratch() {
    let dir = TempDir::new().unwrap();
    let sigma = write(&dir, "sigma.csv", SIGMA4);
    let solve_dir = dir.path().join("solve");
    assert_eq!(code(&covpath(&["solve", "--sigma", s(&sigma), "--points", "4", "--output", s(&solve_dir)])), 0);
    let c = write(&dir, "c.csv", "1e-3,2e-4,0,0\n2e-4,-1e-3,0,1e-4\n0,0,5e-4,0\n0,1e-4,0,0\n");
    let online_dir = dir.path().join("online");
    let out = covpath(&[
        "online", "--state", s(&solve_dir.join("state.json")), "--perturbation", s(&c), "--k", "2", "--verify",
        "--output", s(&online_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&online_dir.join("online.json"));
    assert_eq!(report["k"], 2);
    assert!(report["verification"]["frobenius_discrepancy"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn bench_writes_a_valid_report() {
    let dir = TempDir::new().unwrap();
    let out = covpath(&[
        "bench", "--sizes", "5,10", "--lengths", "3", "--replicates", "2", "--output", s(dir.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_schema(BENCH_REPORT_SCHEMA, &dir.path().join("bench.json"));
    let report = read_json(&dir.path().join("bench.json"));
    assert_eq!(report["rows"].as_array().unwrap().len(), 2);
    assert!(String::from_utf8_lossy(&out.stdout).contains("median"));
}

#[test]
fn asymmetric_input_exits_with_input_error() {
    let dir = TempDir::new().unwrap();
    let sigma = write(&dir, "bad.csv", "1, 0.5\n0.2, 1\n");
    let out = covpath(&["solve", "--sigma", s(&sigma), "--output", s(&dir.path().join("out"))]);
    assert_eq!(code(&out), 2);
    assert_eq!(stderr_error(&out)["exit_code"], 2);
}

#[test]
fn malformed_and_missing_inputs_exit_2() {
    let dir = TempDir::new().unwrap();
    let ragged = write(&dir, "ragged.csv", "1, 0\n0\n");
    let text = write(&dir, "text.csv", "1, x\nx, 1\n");
    for path in [ragged, text, dir.path().join("missing.csv")] {
        let out = covpath(&["solve", "--sigma", s(&path), "--output", s(&dir.path().join("out"))]);
        assert_eq!(code(&out), 2, "{}", path.display());
        stderr_error(&out);
    }
}

#[test]
fn usage_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let sigma = write(&dir, "sigma.csv", SIGMA4);
    // Two input sources at once.
    let out = covpath(&["solve", "--sigma", s(&sigma), "--gen", "n=5,density=0.1,seed=1"]);
    assert_eq!(code(&out), 2);
    // No input at all.
    assert_eq!(code(&covpath(&["solve"])), 2);
    // Invalid generator spec.
    let out = covpath(&["solve", "--gen", "n=1,density=0.1,seed=1", "--output", s(&dir.path().join("o"))]);
    assert_eq!(code(&out), 2);
    // Grid of zero points.
    let out = covpath(&["solve", "--sigma", s(&sigma), "--points", "0", "--output", s(&dir.path().join("o"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn unsolvable_grid_point_yields_partial_path_exit_4() {
    let dir = TempDir::new().unwrap();
    // Nearly singular Σ with a grid reaching 1e-12 ρ_max: the dense end is out of reach.
    let sigma = write(&dir, "sigma.csv", "1, 0.999999999\n0.999999999, 1\n");
    let out_dir = dir.path().join("out");
    let out = covpath(&[
        "solve", "--sigma", s(&sigma), "--points", "5", "--rho-min-frac", "1e-12", "--output", s(&out_dir),
    ]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stderr_error(&out)["error"], "partial_path");
    assert_schema(RUN_SUMMARY_SCHEMA, &out_dir.join("summary.json"));
    let summary = read_json(&out_dir.join("summary.json"));
    assert_eq!(summary["status"], "partial");
    let kept = summary["points"].as_array().unwrap().len();
    assert!(kept >= 1 && kept < 5);
    assert_eq!(summary["failure"]["index"], kept);
}

#[test]
fn failed_online_verification_exits_3() {
    let dir = TempDir::new().unwrap();
    let sigma = write(&dir, "sigma.csv", SIGMA4);
    let solve_dir = dir.path().join("solve");
    assert_eq!(code(&covpath(&["solve", "--sigma", s(&sigma), "--points", "3", "--output", s(&solve_dir)])), 0);
    let c = write(&dir, "c.csv", "0.2,0.1,0,0\n0.1,0.2,0,0\n0,0,0.1,0\n0,0,0,0.1\n");
    // A residual tolerance this loose stops the corrector far from the central point.
    let out = covpath(&[
        "online", "--state", s(&solve_dir.join("state.json")), "--perturbation", s(&c), "--residual-tol", "1e3",
        "--verify", "--output", s(&dir.path().join("online")),
    ]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stderr_error(&out)["exit_code"], 3);
}
