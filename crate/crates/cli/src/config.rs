//! Experiment configuration: one JSON file, optionally overridden by flags.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use loclust::genmodel::BallModel;
use loclust::rates::gamma_schedule;
use loclust::{SolverOptions, TruncationPolicy, WeightMode};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// How `γ` is chosen for a cloud of `N` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaRule {
    /// A fixed list; commands that need one value use the first.
    Explicit(Vec<f64>),
    /// `max(1, c0 N^{3/(4d)})`.
    Schedule { c0: f64 },
}

impl GammaRule {
    pub fn first(&self, n: usize, d: usize) -> f64 {
        match self {
            GammaRule::Explicit(values) => values[0],
            GammaRule::Schedule { c0 } => gamma_schedule(n, d, *c0),
        }
    }

    pub fn grid(&self, n: usize, d: usize) -> Vec<f64> {
        match self {
            GammaRule::Explicit(values) => values.clone(),
            GammaRule::Schedule { c0 } => vec![gamma_schedule(n, d, *c0)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: BallModel,
    /// Cloud file for `truncation-check` and `stability`; drawn from the model when absent.
    pub cloud: Option<PathBuf>,
    /// The cloud file's last column holds labels.
    pub cloud_labeled: bool,
    pub n: Vec<usize>,
    pub lambda: Vec<f64>,
    pub gamma: GammaRule,
    pub truncation: TruncationPolicy,
    pub weight_mode: WeightMode,
    pub seeds: Vec<u64>,
    pub solver: SolverOptions,
    /// Clusters are merged below `tau_factor · diameter(x)`.
    pub tau_factor: f64,
    /// Truncation radii for `truncation-check`; the cutoff radius is always added.
    pub omega: Vec<f64>,
    /// Perturbation sizes for `stability`.
    pub delta: Vec<f64>,
    /// Surface gaps for `compare-unweighted`.
    pub gap: Vec<f64>,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: BallModel::two_balls(2, 1.0, 0.1).expect("default model is valid"),
            cloud: None,
            cloud_labeled: false,
            n: vec![500],
            lambda: vec![1.0],
            gamma: GammaRule::Schedule { c0: 1.0 },
            truncation: TruncationPolicy::None,
            weight_mode: WeightMode::Exponential,
            seeds: vec![0],
            solver: harness_solver_defaults(),
            tau_factor: loclust::clusters::DEFAULT_TAU_FACTOR,
            omega: vec![0.3, 0.6],
            delta: vec![0.0, 1e-3, 1e-2],
            gap: vec![0.1, 0.5, 2.0],
            out: PathBuf::from("out"),
        }
    }
}

/// Solver settings used by the experiments unless the config says otherwise.
pub fn harness_solver_defaults() -> SolverOptions {
    SolverOptions {
        relaxation: 1.8,
        ..SolverOptions::default()
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.solver.validate()?;
        if self.n.is_empty() || self.lambda.is_empty() || self.seeds.is_empty() {
            bail!("n, lambda and seeds must be nonempty");
        }
        if let Some(&n) = self.n.iter().find(|&&n| n == 0) {
            bail!("N = {n} is not a valid sample size");
        }
        if self.lambda.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            bail!("lambda values must be finite and nonnegative");
        }
        match &self.gamma {
            GammaRule::Explicit(v) if v.is_empty() => bail!("explicit gamma list is empty"),
            GammaRule::Explicit(v) if v.iter().any(|g| !(g.is_finite() && *g > 0.0)) => {
                bail!("gamma values must be finite and positive")
            }
            GammaRule::Schedule { c0 } if !(c0.is_finite() && *c0 > 0.0) => bail!("c0 must be positive"),
            _ => {}
        }
        let distinct: HashSet<u64> = self.seeds.iter().copied().collect();
        if distinct.len() != self.seeds.len() {
            bail!("seeds must be distinct");
        }
        if !(self.tau_factor.is_finite() && self.tau_factor >= 0.0) {
            bail!("tau_factor must be nonnegative");
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serialization cannot fail");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn dim(&self) -> usize {
        self.model.dim
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.hash(), back.hash());
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"n": [10, 20], "gamma": {"explicit": [2.0, 20.0]}}"#).unwrap();
        assert_eq!(cfg.n, vec![10, 20]);
        assert_eq!(cfg.gamma.grid(10, 2), vec![2.0, 20.0]);
        assert_eq!(cfg.lambda, vec![1.0]);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = ExperimentConfig {
            seeds: vec![1, 1],
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().is_err());
        cfg.seeds = vec![];
        assert!(cfg.validate().is_err());
        cfg.seeds = vec![3];
        cfg.n = vec![0];
        assert!(cfg.validate().is_err());
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"unknown": 1}"#).is_err());
    }
}
