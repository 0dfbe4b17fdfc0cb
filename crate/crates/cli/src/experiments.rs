//! The harness commands. Each one writes its tables and a JSON report into
//! the configured output directory and returns an [`Outcome`].

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use loclust::clusters::{centroid_mse, extract_clusters, rand_index, ClusterAssignment};
use loclust::genmodel::{derive_seed, perturb, sample, BallModel, LabeledCloud};
use loclust::rates::{rate_bound, stability_bound};
use loclust::weights::{diameter, truncation_error_bound, truncation_radius};
use loclust::*;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::calibrate::{fit_c0, fusion_threshold, SearchSetup};
use crate::config::ExperimentConfig;
use crate::table::Table;

#[derive(Debug, Clone)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// Rows whose bound check failed.
    pub violations: usize,
    pub report: Value,
}

/// The sample used for size `n` under `seed`. Every command draws through this
/// so that files written by `generate` match the clouds used in sweeps.
pub fn draw(model: &BallModel, n: usize, seed: u64) -> Result<LabeledCloud> {
    Ok(sample(model, n, derive_seed(seed, n as u64))?)
}

/// One solve with the quantities the tables need.
#[derive(Debug, Clone)]
pub struct Run {
    pub y: Representatives,
    pub report: SolveReport,
    pub clusters: ClusterAssignment,
    pub edges: usize,
    pub omega: Option<f64>,
}

impl Run {
    pub fn certificate(&self) -> f64 {
        self.report.distance_certificate.unwrap_or(0.0)
    }
}

pub fn run(cloud: &PointCloud, params: &ProblemParams, policy: TruncationPolicy, opts: &SolverOptions, tau_factor: f64) -> Result<Run> {
    let graph = build_weights(cloud, params, policy)?;
    let (y, report) = solve(cloud, params, &graph, opts)?;
    let clusters = extract_clusters(&y, tau_factor * diameter(cloud).value)?;
    Ok(Run {
        y,
        report,
        clusters,
        edges: graph.len(),
        omega: graph.omega(),
    })
}

fn params(cfg: &ExperimentConfig, lambda: f64, gamma: f64) -> Result<ProblemParams> {
    Ok(ProblemParams::new(lambda, gamma)?.with_mode(cfg.weight_mode))
}

fn prepare_out(cfg: &ExperimentConfig) -> Result<&Path> {
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    Ok(&cfg.out)
}

fn write_report(cfg: &ExperimentConfig, command: &str, body: Value) -> Result<(PathBuf, Value)> {
    let mut report = json!({
        "command": command,
        "config_hash": cfg.hash(),
        "seeds": cfg.seeds,
        "config": cfg,
    });
    if let (Value::Object(dst), Value::Object(src)) = (&mut report, body) {
        dst.extend(src);
    }
    let path = cfg.out.join(format!("{}_report.json", command.replace('-', "_")));
    let text = serde_json::to_string_pretty(&report)?;
    fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
    Ok((path, report))
}

fn finish(cfg: &ExperimentConfig, command: &str, tables: Vec<(&str, Table)>, violations: usize, body: Value) -> Result<Outcome> {
    let dir = prepare_out(cfg)?;
    let mut files = Vec::new();
    for (name, table) in tables {
        let path = dir.join(name);
        table.write(&path)?;
        files.push(path);
    }
    let (path, report) = write_report(cfg, command, body)?;
    files.push(path);
    Ok(Outcome {
        files,
        violations,
        report,
    })
}

/// Least-squares slope of `ln y` against `ln x`, over points with both positive.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

/// Writes one labeled cloud per `(N, seed)`.
pub fn cmd_generate(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    let dir = prepare_out(cfg)?;
    let mut files = Vec::new();
    for &n in &cfg.n {
        for &seed in &cfg.seeds {
            let s = draw(&cfg.model, n, seed)?;
            let path = dir.join(format!("cloud_n{n}_seed{seed}.csv"));
            let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            s.write_csv(std::io::BufWriter::new(file))?;
            files.push(path);
        }
    }
    let names: Vec<String> = files.iter().map(|p| p.display().to_string()).collect();
    let (path, report) = write_report(cfg, "generate", json!({ "files": names }))?;
    files.push(path);
    Ok(Outcome {
        files,
        violations: 0,
        report,
    })
}

/// Loads a cloud; with `labeled`, the last CSV column holds component labels and is dropped.
pub fn load_cloud(path: &Path, labeled: bool) -> Result<PointCloud> {
    if labeled {
        let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        Ok(LabeledCloud::read_csv(file, path)?.cloud)
    } else {
        Ok(PointCloud::load(path)?)
    }
}

/// Solves one cloud with the first `λ` and `γ` of the config.
pub fn cmd_solve(cfg: &ExperimentConfig, input: &Path, labeled: bool) -> Result<Outcome> {
    cfg.validate()?;
    let cloud = load_cloud(input, labeled)?;
    if cloud.dim() != cfg.dim() {
        bail!("cloud has dimension {}, model has {}", cloud.dim(), cfg.dim());
    }
    let gamma = cfg.gamma.first(cloud.len(), cloud.dim());
    let p = params(cfg, cfg.lambda[0], gamma)?;
    let r = run(&cloud, &p, cfg.truncation, &cfg.solver, cfg.tau_factor)?;

    let dir = prepare_out(cfg)?;
    let reps = dir.join("representatives.csv");
    r.y.write_csv(std::io::BufWriter::new(fs::File::create(&reps)?))?;
    let clusters = dir.join("clusters.csv");
    r.clusters.write_csv(std::io::BufWriter::new(fs::File::create(&clusters)?))?;
    let body = json!({
        "input": input.display().to_string(),
        "n": cloud.len(),
        "lambda": p.lambda,
        "gamma": gamma,
        "omega": r.omega,
        "edges": r.edges,
        "tau": cfg.tau_factor * diameter(&cloud).value,
        "clusters": r.clusters.k(),
        "report": r.report,
    });
    let (path, report) = write_report(cfg, "solve", body)?;
    Ok(Outcome {
        files: vec![reps, clusters, path],
        violations: 0,
        report,
    })
}

/// Error against the ball centers over points strictly inside their ball.
fn centroid_error(model: &BallModel, s: &LabeledCloud, y: &Representatives) -> Result<f64> {
    Ok(centroid_mse(y, &s.interior_labels(model), &model.centers())?)
}

/// Centroid error as a function of `γ` on one fixed sample.
pub fn cmd_sweep_gamma(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    let n = cfg.n[0];
    let s = draw(&cfg.model, n, cfg.seeds[0])?;
    let mut grid = cfg.gamma.grid(n, cfg.dim());
    grid.sort_by(f64::total_cmp);
    let lambda = cfg.lambda[0];
    let rows: Vec<(f64, Run, f64)> = grid
        .par_iter()
        .map(|&gamma| {
            let r = run(&s.cloud, &params(cfg, lambda, gamma)?, cfg.truncation, &cfg.solver, cfg.tau_factor)?;
            let mse = centroid_error(&cfg.model, &s, &r.y)?;
            Ok((gamma, r, mse))
        })
        .collect::<Result<_>>()?;

    let mut table = Table::new(&["gamma", "centroid_mse", "objective", "certificate", "clusters", "iterations"]);
    for (gamma, r, mse) in &rows {
        table.push(vec![
            (*gamma).into(),
            (*mse).into(),
            r.report.objective.into(),
            r.certificate().into(),
            r.clusters.k().into(),
            r.report.iterations.into(),
        ]);
    }
    let slope = log_log_slope(&table.column("gamma").unwrap(), &table.column("centroid_mse").unwrap());
    let body = json!({ "n": n, "lambda": lambda, "fitted_slope": slope, "rows": table.rows });
    finish(cfg, "sweep-gamma", vec![("sweep_gamma.csv", table)], 0, body)
}

/// Centroid error as a function of `N` with `γ` from the config rule.
pub fn cmd_sweep_n(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    let d = cfg.dim();
    let lambda = cfg.lambda[0];
    let mut sizes = cfg.n.clone();
    sizes.sort_unstable();
    sizes.dedup();
    let cells: Vec<(usize, u64)> = sizes.iter().flat_map(|&n| cfg.seeds.iter().map(move |&s| (n, s))).collect();
    let results: Vec<(usize, u64, f64, Run, f64)> = cells
        .par_iter()
        .map(|&(n, seed)| {
            let s = draw(&cfg.model, n, seed)?;
            let gamma = cfg.gamma.first(n, d);
            let r = run(&s.cloud, &params(cfg, lambda, gamma)?, cfg.truncation, &cfg.solver, cfg.tau_factor)?;
            let mse = centroid_error(&cfg.model, &s, &r.y)?;
            Ok((n, seed, gamma, r, mse))
        })
        .collect::<Result<_>>()?;

    let mut cell_table = Table::new(&["n", "seed", "gamma", "objective", "certificate", "centroid_mse", "clusters"]);
    for (n, seed, gamma, r, mse) in &results {
        cell_table.push(vec![
            (*n).into(),
            (*seed).into(),
            (*gamma).into(),
            r.report.objective.into(),
            r.certificate().into(),
            (*mse).into(),
            r.clusters.k().into(),
        ]);
    }

    // envelope constant: smallest C with mean error ≤ rate_bound(C) at every N
    let mut means = Vec::new();
    for &n in &sizes {
        let errs: Vec<f64> = results.iter().filter(|r| r.0 == n).map(|r| r.4).collect();
        let gamma = cfg.gamma.first(n, d);
        let unit = if n >= 2 { rate_bound(n, d, gamma, lambda, 1.0)? } else { f64::NAN };
        means.push((n, gamma, errs.iter().sum::<f64>() / errs.len() as f64, unit));
    }
    let fitted_c = means.iter().map(|m| m.2 / m.3).fold(0.0, f64::max);
    let mut table = Table::new(&["n", "gamma", "mean_centroid_mse", "rate_bound"]);
    for &(n, gamma, mean, unit) in &means {
        table.push(vec![n.into(), gamma.into(), mean.into(), (fitted_c * unit).into()]);
    }
    let slope = log_log_slope(&table.column("n").unwrap(), &table.column("mean_centroid_mse").unwrap());
    let body = json!({
        "lambda": lambda,
        "fitted_c": fitted_c,
        "fitted_slope": slope,
        "rows": table.rows,
    });
    finish(
        cfg,
        "sweep-n",
        vec![("sweep_n.csv", table), ("sweep_n_cells.csv", cell_table)],
        0,
        body,
    )
}

/// The configured cloud file, or the model sample for `(n, seed)`.
fn fixed_cloud(cfg: &ExperimentConfig, n: usize, seed: u64) -> Result<PointCloud> {
    let cloud = match &cfg.cloud {
        Some(path) => load_cloud(path, cfg.cloud_labeled)?,
        None => draw(&cfg.model, n, seed)?.cloud,
    };
    if cloud.dim() != cfg.dim() {
        bail!("cloud has dimension {}, model has {}", cloud.dim(), cfg.dim());
    }
    Ok(cloud)
}

/// Seed of the `k`-th perturbation applied to the cloud for `(n, seed)`.
pub fn perturbation_seed(seed: u64, n: usize, k: usize) -> u64 {
    derive_seed(derive_seed(seed, n as u64), 1 + k as u64)
}

/// Mean-square distance between truncated and full minimizers against the bound.
pub fn cmd_truncation_check(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    let x = fixed_cloud(cfg, cfg.n[0], cfg.seeds[0])?;
    let n = x.len();
    let d = cfg.dim();
    let gamma = cfg.gamma.first(n, d);
    let lambda = cfg.lambda[0];
    let p = params(cfg, lambda, gamma)?;
    let m = diameter(&x).value;
    let mut radii: Vec<(f64, bool)> = cfg.omega.iter().map(|&w| (w, false)).collect();
    if gamma > 1.0 {
        radii.push((truncation_radius(gamma, d)?, true));
    }
    radii.sort_by(|a, b| a.0.total_cmp(&b.0));

    let full = run(&x, &p, TruncationPolicy::None, &cfg.solver, cfg.tau_factor)?;
    let runs: Vec<Run> = radii
        .par_iter()
        .map(|&(omega, _)| run(&x, &p, TruncationPolicy::Explicit(omega), &cfg.solver, cfg.tau_factor))
        .collect::<Result<_>>()?;

    let mut table = Table::new(&["omega", "cutoff", "edges", "gap", "bound", "slack", "pass"]);
    let mut violations = 0;
    for (&(omega, cutoff), r) in radii.iter().zip(&runs) {
        let gap = full.y.mean_sq_distance(&r.y)?;
        let bound = truncation_error_bound(m, lambda, gamma, d, omega);
        let slack = 2.0 * (full.certificate() + r.certificate());
        let pass = gap <= bound + slack;
        violations += usize::from(!pass);
        table.push(vec![
            omega.into(),
            cutoff.into(),
            r.edges.into(),
            gap.into(),
            bound.into(),
            slack.into(),
            pass.into(),
        ]);
    }
    let body = json!({
        "n": n,
        "lambda": lambda,
        "gamma": gamma,
        "diameter": m,
        "full_edges": full.edges,
        "violations": violations,
        "rows": table.rows,
    });
    finish(cfg, "truncation-check", vec![("truncation_check.csv", table)], violations, body)
}

/// Change of the optimal value under perturbations of size `δ`, against the bound.
pub fn cmd_stability(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    let d = cfg.dim();
    let n = match &cfg.cloud {
        Some(_) => fixed_cloud(cfg, cfg.n[0], cfg.seeds[0])?.len(),
        None => cfg.n[0],
    };
    let gamma = cfg.gamma.first(n, d);
    let lambda = cfg.lambda[0];
    let p = params(cfg, lambda, gamma)?;
    let mut deltas = cfg.delta.clone();
    deltas.sort_by(f64::total_cmp);
    if deltas.is_empty() {
        bail!("delta grid is empty");
    }
    if let Some(&dl) = deltas.iter().find(|&&dl| !(dl >= 0.0 && gamma * dl <= 1.0)) {
        bail!("delta = {dl} violates 0 ≤ γδ ≤ 1 at γ = {gamma}");
    }

    let per_seed: Vec<Vec<[f64; 4]>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let x = fixed_cloud(cfg, n, seed)?;
            let base = run(&x, &p, cfg.truncation, &cfg.solver, cfg.tau_factor)?;
            deltas
                .iter()
                .enumerate()
                .map(|(k, &delta)| {
                    let moved = perturb(&x, delta, perturbation_seed(seed, n, k))?;
                    let r = run(&moved, &p, cfg.truncation, &cfg.solver, cfg.tau_factor)?;
                    let both = PointCloud::new(d, [x.as_flat(), moved.as_flat()].concat())?;
                    let m = diameter(&both).value;
                    let lhs = (r.report.objective - base.report.objective).abs();
                    let slack = 2.0 * (base.certificate() + r.certificate());
                    Ok([delta, lhs, stability_bound(m, gamma, delta), slack])
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut table = Table::new(&["seed", "delta", "lhs", "rhs", "slack", "pass"]);
    let mut violations = 0;
    for (&seed, rows) in cfg.seeds.iter().zip(&per_seed) {
        for &[delta, lhs, rhs, slack] in rows {
            let pass = lhs <= rhs + slack;
            violations += usize::from(!pass);
            table.push(vec![seed.into(), delta.into(), lhs.into(), rhs.into(), slack.into(), pass.into()]);
        }
    }
    let body = json!({
        "n": n,
        "lambda": lambda,
        "gamma": gamma,
        "violations": violations,
        "rows": table.rows,
    });
    finish(cfg, "stability", vec![("stability.csv", table)], violations, body)
}

/// Exponential against uniform weights on two balls at several surface gaps.
///
/// Both modes share `λ` and `γ`, so the uniform run uses the fusion coefficient
/// `λ γ^{d+1} / N²` on every pair while the exponential run damps it with distance.
pub fn cmd_compare_unweighted(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    if cfg.gap.is_empty() {
        bail!("gap grid is empty");
    }
    let n = cfg.n[0];
    let d = cfg.dim();
    let radius = cfg.model.components[0].radius;
    let gamma = cfg.gamma.first(n, d);
    let lambda = cfg.lambda[0];
    let mut gaps = cfg.gap.clone();
    gaps.sort_by(f64::total_cmp);

    let rows: Vec<[f64; 6]> = gaps
        .par_iter()
        .map(|&g| {
            let model = BallModel::two_balls(d, radius, g)?;
            let s = draw(&model, n, cfg.seeds[0])?;
            let truth = ClusterAssignment::from_labels(&s.labels);
            let exp_p = ProblemParams::new(lambda, gamma)?;
            let uni_p = exp_p.with_mode(WeightMode::Uniform);
            let e = run(&s.cloud, &exp_p, cfg.truncation, &cfg.solver, cfg.tau_factor)?;
            let u = run(&s.cloud, &uni_p, TruncationPolicy::None, &cfg.solver, cfg.tau_factor)?;
            Ok([
                g,
                rand_index(&e.clusters, &truth)?,
                rand_index(&u.clusters, &truth)?,
                e.clusters.k() as f64,
                u.clusters.k() as f64,
                centroid_error(&model, &s, &e.y)?,
            ])
        })
        .collect::<Result<_>>()?;

    let mut table = Table::new(&["gap", "rand_exponential", "rand_uniform", "clusters_exponential", "clusters_uniform", "centroid_mse_exponential"]);
    for r in &rows {
        table.push(vec![
            r[0].into(),
            r[1].into(),
            r[2].into(),
            (r[3] as usize).into(),
            (r[4] as usize).into(),
            r[5].into(),
        ]);
    }
    // smallest gap from which uniform weights recover the balls at every larger gap
    let mut uniform_from = None;
    for r in rows.iter().rev() {
        if r[2] == 1.0 {
            uniform_from = Some(r[0]);
        } else {
            break;
        }
    }
    let exponential_only: Vec<f64> = rows.iter().filter(|r| r[1] == 1.0 && r[2] < 1.0).map(|r| r[0]).collect();
    let body = json!({
        "n": n,
        "lambda": lambda,
        "gamma": gamma,
        "uniform_recovers_from_gap": uniform_from,
        "gaps_only_exponential_recovers": exponential_only,
        "rows": table.rows,
    });
    finish(cfg, "compare-unweighted", vec![("compare_unweighted.csv", table)], 0, body)
}

/// Settings for [`cmd_recovery`].
#[derive(Debug, Clone, Serialize)]
pub struct RecoveryPlan {
    pub c0_grid: Vec<f64>,
    pub calibration_seed: u64,
    pub lambda_factor: f64,
}

impl Default for RecoveryPlan {
    fn default() -> Self {
        Self {
            c0_grid: vec![0.5, 1.0, 2.0],
            calibration_seed: 1_000_003,
            lambda_factor: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Trial {
    pub seed: u64,
    pub rand_index: f64,
    pub centroid_mse: f64,
    pub clusters: usize,
    pub certificate: f64,
}

/// Fits the schedule constant and the fusion threshold on a calibration
/// sample, then solves every configured seed at `lambda_factor ×` threshold.
pub fn cmd_recovery(cfg: &ExperimentConfig, plan: &RecoveryPlan) -> Result<Outcome> {
    cfg.validate()?;
    if cfg.seeds.contains(&plan.calibration_seed) {
        bail!("calibration seed {} is also a test seed", plan.calibration_seed);
    }
    let n = cfg.n[0];
    let calib = draw(&cfg.model, n, plan.calibration_seed)?;
    let setup = SearchSetup {
        gamma: 0.0,
        mode: cfg.weight_mode,
        policy: cfg.truncation,
        opts: cfg.solver,
        tau_factor: cfg.tau_factor,
    };
    let fits = fit_c0(&cfg.model, &calib, &plan.c0_grid, plan.lambda_factor, &setup)?;
    let best = fits[0];
    let lambda = plan.lambda_factor * best.threshold.lambda;
    let p = params(cfg, lambda, best.gamma)?;

    let trials: Vec<Trial> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let s = draw(&cfg.model, n, seed)?;
            let r = run(&s.cloud, &p, cfg.truncation, &cfg.solver, cfg.tau_factor)?;
            Ok(Trial {
                seed,
                rand_index: rand_index(&r.clusters, &ClusterAssignment::from_labels(&s.labels))?,
                centroid_mse: centroid_error(&cfg.model, &s, &r.y)?,
                clusters: r.clusters.k(),
                certificate: r.certificate(),
            })
        })
        .collect::<Result<_>>()?;

    let mut table = Table::new(&["seed", "rand_index", "centroid_mse", "clusters", "certificate"]);
    for t in &trials {
        table.push(vec![
            t.seed.into(),
            t.rand_index.into(),
            t.centroid_mse.into(),
            t.clusters.into(),
            t.certificate.into(),
        ]);
    }
    let body = json!({
        "n": n,
        "plan": plan,
        "c0_fits": fits,
        "c0": best.c0,
        "gamma": best.gamma,
        "threshold": best.threshold,
        "lambda": lambda,
        "trials": trials,
    });
    finish(cfg, "recovery", vec![("recovery.csv", table)], 0, body)
}

/// Empirical fusion threshold of the configured model, per seed.
pub fn cmd_fusion_threshold(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    let n = cfg.n[0];
    let gamma = cfg.gamma.first(n, cfg.dim());
    let setup = SearchSetup {
        gamma,
        mode: cfg.weight_mode,
        policy: cfg.truncation,
        opts: cfg.solver,
        tau_factor: cfg.tau_factor,
    };
    let found: Vec<_> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let s = draw(&cfg.model, n, seed)?;
            fusion_threshold(&s, cfg.model.components.len(), &setup, cfg.lambda[0].max(1e-6), 0.05)
        })
        .collect::<Result<_>>()?;
    let mut table = Table::new(&["seed", "threshold", "below", "solves"]);
    for (&seed, t) in cfg.seeds.iter().zip(&found) {
        table.push(vec![seed.into(), t.lambda.into(), t.below.into(), t.solves.into()]);
    }
    let body = json!({ "n": n, "gamma": gamma, "rows": table.rows });
    finish(cfg, "fusion-threshold", vec![("fusion_threshold.csv", table)], 0, body)
}
