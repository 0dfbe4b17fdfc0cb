//! Empirical fusion threshold and schedule-constant fitting.
//!
//! The threshold is the smallest `λ` at which every true component ends up
//! inside a single extracted cluster. Fusion is monotone in `λ` for
//! sum-of-norms problems in practice, so a bracket-and-bisect search in log
//! space locates it.

use anyhow::{bail, Result};
use loclust::clusters::{centroid_mse, extract_clusters};
use loclust::genmodel::{BallModel, LabeledCloud};
use loclust::rates::gamma_schedule;
use loclust::weights::diameter;
use loclust::*;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Threshold {
    /// Smallest tested `λ` that fuses every component.
    pub lambda: f64,
    /// Largest tested `λ` that does not.
    pub below: f64,
    pub solves: usize,
}

/// Problem settings shared by every solve in a search.
#[derive(Debug, Clone, Copy)]
pub struct SearchSetup {
    pub gamma: f64,
    pub mode: WeightMode,
    pub policy: TruncationPolicy,
    pub opts: SolverOptions,
    pub tau_factor: f64,
}

/// True when each component's points share one extracted label.
pub fn components_fused(labels: &[usize], truth: &[usize], components: usize) -> bool {
    let mut seen = vec![None; components];
    for (&l, &t) in labels.iter().zip(truth) {
        match seen[t] {
            None => seen[t] = Some(l),
            Some(prev) if prev != l => return false,
            _ => {}
        }
    }
    true
}

fn fuses(sample: &LabeledCloud, components: usize, lambda: f64, setup: &SearchSetup) -> Result<bool> {
    let params = ProblemParams::new(lambda, setup.gamma)?.with_mode(setup.mode);
    let graph = build_weights(&sample.cloud, &params, setup.policy)?;
    let (y, _) = solve(&sample.cloud, &params, &graph, &setup.opts)?;
    let clusters = extract_clusters(&y, setup.tau_factor * diameter(&sample.cloud).value)?;
    Ok(components_fused(clusters.labels(), &sample.labels, components))
}

/// Brackets the threshold by doubling or halving from `start`, then bisects
/// in log space until the bracket ratio is below `1 + rel_precision`.
pub fn fusion_threshold(
    sample: &LabeledCloud,
    components: usize,
    setup: &SearchSetup,
    start: f64,
    rel_precision: f64,
) -> Result<Threshold> {
    if !(start > 0.0 && rel_precision > 0.0) {
        bail!("start and precision must be positive");
    }
    let mut solves = 0;
    let mut probe = |lambda: f64| {
        solves += 1;
        fuses(sample, components, lambda, setup)
    };
    let (mut lo, mut hi) = if probe(start)? {
        let mut hi = start;
        loop {
            let lo = hi / 2.0;
            if lo < 1e-8 {
                return Ok(Threshold {
                    lambda: hi,
                    below: 0.0,
                    solves,
                });
            }
            if !probe(lo)? {
                break (lo, hi);
            }
            hi = lo;
        }
    } else {
        let mut lo = start;
        loop {
            let hi = lo * 2.0;
            if hi > 1e8 {
                bail!("no fusion up to lambda = {hi}");
            }
            if probe(hi)? {
                break (lo, hi);
            }
            lo = hi;
        }
    };
    while hi / lo > 1.0 + rel_precision {
        let mid = (lo * hi).sqrt();
        if probe(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Threshold {
        lambda: hi,
        below: lo,
        solves,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct C0Fit {
    pub c0: f64,
    pub gamma: f64,
    pub threshold: Threshold,
    pub centroid_mse: f64,
}

/// Picks the schedule constant from `grid` that gives the smallest centroid
/// error at `factor ×` its own fusion threshold on the calibration sample.
/// Returns every candidate, best first.
pub fn fit_c0(
    model: &BallModel,
    sample: &LabeledCloud,
    grid: &[f64],
    factor: f64,
    setup: &SearchSetup,
) -> Result<Vec<C0Fit>> {
    if grid.is_empty() {
        bail!("c0 grid is empty");
    }
    let interior = sample.interior_labels(model);
    let mut fits = Vec::with_capacity(grid.len());
    for &c0 in grid {
        let gamma = gamma_schedule(sample.cloud.len(), model.dim, c0);
        let local = SearchSetup { gamma, ..*setup };
        let threshold = fusion_threshold(sample, model.components.len(), &local, 1.0, 0.05)?;
        let params = ProblemParams::new(factor * threshold.lambda, gamma)?.with_mode(setup.mode);
        let graph = build_weights(&sample.cloud, &params, setup.policy)?;
        let (y, _) = solve(&sample.cloud, &params, &graph, &setup.opts)?;
        fits.push(C0Fit {
            c0,
            gamma,
            threshold,
            centroid_mse: centroid_mse(&y, &interior, &model.centers())?,
        });
    }
    fits.sort_by(|a, b| a.centroid_mse.total_cmp(&b.centroid_mse));
    Ok(fits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fusion_predicate() {
        assert!(components_fused(&[0, 0, 1, 1], &[0, 0, 1, 1], 2));
        assert!(components_fused(&[0, 0, 0, 0], &[0, 0, 1, 1], 2));
        assert!(!components_fused(&[0, 1, 2, 2], &[0, 0, 1, 1], 2));
    }
}
