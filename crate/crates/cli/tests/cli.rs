//! End-to-end runs of the `loclust` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use loclust::genmodel::perturb;
use loclust::PointCloud;
use loclust_cli::experiments::perturbation_seed;
use serde_json::Value;

fn loclust(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_loclust")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = loclust(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    text.lines().map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

fn report(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn column(rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let k = rows[0].iter().position(|h| h == name).unwrap();
    rows[1..].iter().map(|r| r[k].parse().unwrap()).collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_is_deterministic_and_labels_single_ball() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let model = dir.path().join("ball.json");
        fs::write(&model, r#"{"dim":2,"components":[{"center":[0,0],"radius":1,"mass":1}]}"#).unwrap();
        ok(&["generate", "--model", s(&model), "--n", "10", "--seed", "7", "--out", s(out)]);
    }
    let file = "cloud_n10_seed7.csv";
    assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap());
    let rows = read_csv(&a.join(file));
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|r| r.len() == 3 && r[2] == "0"));
}

#[test]
fn generate_two_ball_masses_are_binomial() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["generate", "--two-balls", "2,1,0.1", "--n", "10000", "--seed", "3", "--out", s(dir.path())]);
    let rows = read_csv(&dir.path().join("cloud_n10000_seed3.csv"));
    let zeros = rows.iter().filter(|r| r[2] == "0").count();
    // 3σ of Binomial(10⁴, ½)
    assert!(zeros.abs_diff(5000) <= 150, "{zeros}");
}

#[test]
fn solve_at_zero_lambda_returns_input_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.csv");
    fs::write(&input, "0.25,-1.5\n1e-3,2\n3.125,0.5\n-7,0\n").unwrap();
    let a = dir.path().join("a");
    let files = ["representatives.csv", "clusters.csv", "solve_report.json"];
    let mut first = Vec::new();
    for _ in 0..2 {
        ok(&["solve", s(&input), "--lambda", "0", "--gamma", "2", "--out", s(&a)]);
        let bytes: Vec<Vec<u8>> = files.iter().map(|f| fs::read(a.join(f)).unwrap()).collect();
        if first.is_empty() {
            first = bytes;
        } else {
            assert_eq!(first, bytes);
        }
    }
    let reps = read_csv(&a.join("representatives.csv"));
    let want = read_csv(&input);
    for (r, w) in reps.iter().zip(&want) {
        for (x, y) in r.iter().zip(w) {
            assert_eq!(x.parse::<f64>().unwrap(), y.parse::<f64>().unwrap());
        }
    }
    let rep = report(&a.join("solve_report.json"));
    for key in ["command", "config_hash", "seeds", "config", "lambda", "gamma", "edges", "clusters", "report"] {
        assert!(rep.get(key).is_some(), "missing {key}");
    }
    for key in ["objective", "iterations", "primal_residual", "dual_residual", "converged", "certificate"] {
        assert!(rep["report"].get(key).is_some(), "missing report.{key}");
    }
    assert_eq!(rep["clusters"], 4);
}

#[test]
fn malformed_input_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    fs::write(&input, "1,2\n3,4\n5,oops\n").unwrap();
    let out = loclust(&["solve", s(&input), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(loclust(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(loclust(&["sweep-n", "--gamma", "2", "--c0", "1"]).status.code(), Some(1));
    assert_eq!(loclust(&["--help"]).status.code(), Some(0));
}

#[test]
fn generate_then_solve_reproduces_sweep_cells() {
    let dir = tempfile::tempdir().unwrap();
    let common = ["--two-balls", "2,1,0.5", "--n", "150", "--seed", "4", "--lambda", "1.5", "--c0", "1"];
    let gen = dir.path().join("gen");
    let sweep = dir.path().join("sweep");
    let solved = dir.path().join("solved");
    ok(&[&["generate", "--out", s(&gen)][..], &common].concat());
    ok(&[&["sweep-n", "--out", s(&sweep)][..], &common].concat());
    let cloud = gen.join("cloud_n150_seed4.csv");
    ok(&[&["solve", s(&cloud), "--labeled", "--out", s(&solved)][..], &common].concat());

    let cells = read_csv(&sweep.join("sweep_n_cells.csv"));
    let rep = report(&solved.join("solve_report.json"));
    let objective = rep["report"]["objective"].as_f64().unwrap();
    assert_eq!(objective.to_bits(), column(&cells, "objective")[0].to_bits());
    assert_eq!(rep["gamma"].as_f64().unwrap().to_bits(), column(&cells, "gamma")[0].to_bits());
    assert_eq!(rep["clusters"].as_f64().unwrap(), column(&cells, "clusters")[0]);
}

#[test]
fn truncation_beyond_diameter_changes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&[
        "truncation-check", "--two-balls", "2,1,0.2", "--n", "120", "--gamma", "4", "--omega", "10", "--out", s(dir.path()),
    ]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("truncation_check.csv"));
    let rows = read_csv(&dir.path().join("truncation_check.csv"));
    let omega = column(&rows, "omega");
    let gap = column(&rows, "gap");
    let edges = column(&rows, "edges");
    let last = omega.len() - 1;
    assert_eq!(omega[last], 10.0);
    assert_eq!(edges[last], (120 * 119 / 2) as f64);
    assert!(gap[last] <= 1e-12, "{}", gap[last]);
    let rep = report(&dir.path().join("truncation_check_report.json"));
    assert_eq!(rep["violations"], 0);
}

#[test]
fn truncated_two_point_gap_matches_closed_form() {
    // x = ±1 with ω < 2 drops the only edge, so the truncated minimizer is x
    // itself while the full one is ±a with a = max(0, 1 - λw/2)
    let dir = tempfile::tempdir().unwrap();
    let cloud = dir.path().join("two.csv");
    fs::write(&cloud, "-1\n1\n").unwrap();
    let model = dir.path().join("line.json");
    fs::write(&model, r#"{"dim":1,"components":[{"center":[0],"radius":1,"mass":1}]}"#).unwrap();
    let (lambda, gamma): (f64, f64) = (4.0, 1.2);
    ok(&[
        "truncation-check", "--model", s(&model), "--cloud", s(&cloud), "--lambda", "4", "--gamma", "1.2",
        "--omega", "0.5", "--eps", "1e-12", "--out", s(dir.path()),
    ]);
    let rows = read_csv(&dir.path().join("truncation_check.csv"));
    let lw = lambda * gamma.powi(2) * (-2.0 * gamma).exp();
    let a = (1.0 - lw / 2.0).max(0.0);
    let want = (1.0 - a).powi(2);
    // root-mean-square distances obey the triangle inequality, and the full
    // solve is within its certificate of the true minimizer
    for k in 0..rows.len() - 1 {
        let (gap, edges, slack) = (column(&rows, "gap")[k], column(&rows, "edges")[k], column(&rows, "slack")[k]);
        assert_eq!(edges, 0.0);
        assert!((gap.sqrt() - want.sqrt()).abs() <= (slack / 2.0).sqrt() + 1e-12, "{gap} vs {want}");
    }
}

#[test]
fn stability_rows_behave() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "stability", "--two-balls", "2,1,0.3", "--n", "100", "--gamma", "5", "--delta", "0,0.001,0.01,0.1",
        "--seed", "1,2", "--out", s(dir.path()),
    ]);
    let rows = read_csv(&dir.path().join("stability.csv"));
    let (delta, lhs, rhs, slack) = (column(&rows, "delta"), column(&rows, "lhs"), column(&rows, "rhs"), column(&rows, "slack"));
    for k in 0..delta.len() {
        if delta[k] == 0.0 {
            assert!(lhs[k] <= slack[k]);
            assert_eq!(rhs[k], 0.0);
        }
        if k % 4 > 0 {
            assert!(rhs[k] >= rhs[k - 1]);
        }
    }
    let out = loclust(&["stability", "--n", "50", "--gamma", "5", "--delta", "0.5", "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
}

/// Optimal value for two points at distance `dist` on a line, exponential weights, N = 2.
fn two_point_optimum(dist: f64, lambda: f64, gamma: f64) -> f64 {
    let lw = lambda * gamma.powi(2) * (-gamma * dist).exp();
    if dist >= lw {
        lw * dist / 2.0 - lw * lw / 4.0
    } else {
        dist * dist / 4.0
    }
}

#[test]
fn two_point_stability_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let cloud = dir.path().join("two.csv");
    fs::write(&cloud, "-0.5\n0.5\n").unwrap();
    let model = dir.path().join("line.json");
    fs::write(&model, r#"{"dim":1,"components":[{"center":[0],"radius":1,"mass":1}]}"#).unwrap();
    ok(&[
        "stability", "--model", s(&model), "--cloud", s(&cloud), "--lambda", "1", "--gamma", "2",
        "--delta", "0.01,0.1", "--seed", "9", "--eps", "1e-12", "--out", s(dir.path()),
    ]);
    let rows = read_csv(&dir.path().join("stability.csv"));
    let x = PointCloud::new(1, vec![-0.5, 0.5]).unwrap();
    let base = two_point_optimum(1.0, 1.0, 2.0);
    for (k, (delta, lhs)) in column(&rows, "delta").into_iter().zip(column(&rows, "lhs")).enumerate() {
        let moved = perturb(&x, delta, perturbation_seed(9, 2, k)).unwrap();
        let dist = (moved.point(1)[0] - moved.point(0)[0]).abs();
        let want = (two_point_optimum(dist, 1.0, 2.0) - base).abs();
        assert!((lhs - want).abs() <= 1e-9, "δ={delta}: {lhs} vs {want}");
    }
}

#[test]
fn sweeps_have_expected_shape() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("ball.json");
    fs::write(&model, r#"{"dim":2,"components":[{"center":[0,0],"radius":1,"mass":1}]}"#).unwrap();
    ok(&["sweep-gamma", "--model", s(&model), "--n", "80", "--gamma", "3", "--out", s(dir.path())]);
    assert_eq!(read_csv(&dir.path().join("sweep_gamma.csv")).len(), 2);

    ok(&["sweep-n", "--model", s(&model), "--n", "200,50,100", "--seed", "0,1", "--out", s(dir.path())]);
    let rows = read_csv(&dir.path().join("sweep_n.csv"));
    let n = column(&rows, "n");
    let gamma = column(&rows, "gamma");
    assert_eq!(n, vec![50.0, 100.0, 200.0]);
    assert!(gamma.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(read_csv(&dir.path().join("sweep_n_cells.csv")).len(), 7);
    let rep = report(&dir.path().join("sweep_n_report.json"));
    let c = rep["fitted_c"].as_f64().unwrap();
    assert!(c.is_finite() && c > 0.0);
}

#[test]
fn uniform_weights_need_a_wide_gap() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "compare-unweighted", "--n", "200", "--gamma", "3", "--lambda", "4", "--gap", "0.1,200", "--out", s(dir.path()),
    ]);
    let rows = read_csv(&dir.path().join("compare_unweighted.csv"));
    let exp = column(&rows, "rand_exponential");
    let uni = column(&rows, "rand_uniform");
    assert_eq!(exp, vec![1.0, 1.0]);
    assert!(uni[0] < 1.0);
    assert_eq!(uni[1], 1.0);
    let rep = report(&dir.path().join("compare_unweighted_report.json"));
    assert_eq!(rep["uniform_recovers_from_gap"], 200.0);
    assert_eq!(rep["gaps_only_exponential_recovers"], serde_json::json!([0.1]));
}

#[test]
fn violations_exit_with_two() {
    // sound bounds do not fail on converged solves, so check the mapping directly
    let outcome = loclust_cli::Outcome {
        files: vec![],
        violations: 3,
        report: Value::Null,
    };
    assert_eq!(loclust_cli::exit_status(&outcome), loclust_cli::EXIT_BOUND_VIOLATION);
    let clean = loclust_cli::Outcome { violations: 0, ..outcome };
    assert_eq!(loclust_cli::exit_status(&clean), 0);
}
