//! Sparse symmetric weight graphs and truncation formulas.
//!
//! A [`WeightGraph`] stores each unordered pair once, `m < n`, sorted by
//! `(m, n)`. Truncated graphs are built through a uniform grid whose cell side
//! equals the truncation radius, so only neighboring cells are compared; the
//! untruncated graph is built by the all-pairs routine
//! [`build_weights_all_pairs`], which also serves as the reference
//! construction for the grid path.
//!
//! Exponential weights `γ^{d+1} e^{-γ r}` may underflow to `0.0` for large
//! `γ r` on untruncated graphs. Such edges are kept; they contribute nothing
//! to the objective.

mod grid;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{euclidean, fmt_f64, PointCloud};
use crate::error::{invalid_param, Error, Result};
use crate::params::ProblemParams;

use grid::UniformGrid;

/// Clouds up to this size get an exact O(N²) diameter.
pub const EXACT_DIAMETER_LIMIT: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub m: usize,
    pub n: usize,
    pub dist: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightGraph {
    n_points: usize,
    dim: usize,
    omega: Option<f64>,
    edges: Vec<Edge>,
}

impl WeightGraph {
    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Truncation radius the graph was built with, if any.
    pub fn omega(&self) -> Option<f64> {
        self.omega
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Number of incident edges for every vertex.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_points];
        for e in &self.edges {
            deg[e.m] += 1;
            deg[e.n] += 1;
        }
        deg
    }

    pub(crate) fn check_cloud(&self, cloud: &PointCloud) -> Result<()> {
        if cloud.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: cloud.dim(),
                found: self.dim,
            });
        }
        if cloud.len() != self.n_points {
            return Err(Error::SizeMismatch {
                expected: cloud.len(),
                found: self.n_points,
            });
        }
        Ok(())
    }

    /// Relabels vertices: vertex `i` of the result is vertex `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut inverse = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let mut edges: Vec<Edge> = self
            .edges
            .iter()
            .map(|e| {
                let (a, b) = (inverse[e.m], inverse[e.n]);
                Edge {
                    m: a.min(b),
                    n: a.max(b),
                    ..*e
                }
            })
            .collect();
        edges.sort_unstable_by_key(|e| (e.m, e.n));
        Self {
            edges,
            ..self.clone()
        }
    }

    /// CSV rows `m,n,dist,weight` with a header, sorted by `(m, n)`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["m", "n", "dist", "weight"])?;
        for e in &self.edges {
            w.write_record([
                e.m.to_string(),
                e.n.to_string(),
                fmt_f64(e.dist),
                fmt_f64(e.weight),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Which pairs enter the fusion term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TruncationPolicy {
    /// Every pair.
    #[default]
    None,
    /// `ω = (d + 4/3) γ^{-1} log γ`.
    Cutoff,
    Explicit(f64),
}

impl TruncationPolicy {
    /// The radius this policy selects for the given `γ` and dimension.
    pub fn resolve(&self, gamma: f64, d: usize) -> Result<Option<f64>> {
        match *self {
            TruncationPolicy::None => Ok(None),
            TruncationPolicy::Cutoff => truncation_radius(gamma, d).map(Some),
            TruncationPolicy::Explicit(omega) if omega > 0.0 => Ok(Some(omega)),
            TruncationPolicy::Explicit(omega) => {
                Err(invalid_param("omega", format!("{omega} is not positive")))
            }
        }
    }
}

/// `(d + 4/3) γ^{-1} log γ`, the radius beyond which dropping pairs moves the
/// minimizer by at most `2 M λ γ^{-1/3}` in mean square.
pub fn truncation_radius(gamma: f64, d: usize) -> Result<f64> {
    if d == 0 {
        return Err(invalid_param("d", "dimension must be at least 1"));
    }
    if !(gamma > 1.0) {
        return Err(invalid_param(
            "gamma",
            format!("the cutoff radius needs gamma > 1 (got {gamma}); use no truncation or an explicit radius"),
        ));
    }
    Ok((d as f64 + 4.0 / 3.0) * gamma.ln() / gamma)
}

/// `2 M λ γ^{d+1} e^{-γ ω}`: mean-square distance between truncated and
/// untruncated minimizers is at most this.
pub fn truncation_error_bound(diameter: f64, lambda: f64, gamma: f64, d: usize, omega: f64) -> f64 {
    2.0 * diameter * lambda * gamma.powi(d as i32 + 1) * (-gamma * omega).exp()
}

/// Diameter of a cloud, either exact or a labeled upper bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diameter {
    pub value: f64,
    /// False when `value` is the bounding-box upper bound rather than the exact diameter.
    pub exact: bool,
}

pub fn diameter(cloud: &PointCloud) -> Diameter {
    let n = cloud.len();
    if n <= EXACT_DIAMETER_LIMIT {
        let value = (0..n)
            .into_par_iter()
            .map(|m| {
                let p = cloud.point(m);
                (m + 1..n)
                    .map(|k| euclidean(p, cloud.point(k)))
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max);
        Diameter { value, exact: true }
    } else {
        let d = cloud.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for p in cloud.points() {
            for k in 0..d {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let range = lo.iter().zip(&hi).map(|(l, h)| h - l).fold(0.0, f64::max);
        Diameter {
            value: (d as f64).sqrt() * range,
            exact: false,
        }
    }
}

fn effective_omega(cloud: &PointCloud, params: &ProblemParams, policy: TruncationPolicy) -> Result<Option<f64>> {
    params.validate()?;
    let from_policy = policy.resolve(params.gamma, cloud.dim())?;
    match (from_policy, params.omega) {
        (Some(a), Some(b)) if a != b => Err(invalid_param(
            "omega",
            format!("truncation policy selects {a} but parameters carry {b}"),
        )),
        (a, b) => Ok(a.or(b)),
    }
}

fn check_finite(cloud: &PointCloud) -> Result<()> {
    if cloud.as_flat().iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("point coordinates"))
    }
}

/// Builds the weight graph. Truncated graphs use a uniform grid with cell side
/// `ω`; without truncation every pair is enumerated.
pub fn build_weights(cloud: &PointCloud, params: &ProblemParams, policy: TruncationPolicy) -> Result<WeightGraph> {
    check_finite(cloud)?;
    let omega = effective_omega(cloud, params, policy)?;
    let Some(radius) = omega else {
        return build_weights_all_pairs(cloud, params, TruncationPolicy::None);
    };
    let d = cloud.dim();
    let n = cloud.len();
    let grid = UniformGrid::new(cloud, radius);
    let per_point: Vec<Vec<Edge>> = (0..n)
        .into_par_iter()
        .map_init(Vec::new, |scratch, m| {
            grid.candidates(m, scratch);
            let p = cloud.point(m);
            let mut out: Vec<Edge> = scratch
                .iter()
                .filter(|&&k| k > m)
                .filter_map(|&k| {
                    let dist = euclidean(p, cloud.point(k));
                    (dist <= radius).then(|| Edge {
                        m,
                        n: k,
                        dist,
                        weight: params.weight(d, dist),
                    })
                })
                .collect();
            out.sort_unstable_by_key(|e| e.n);
            out
        })
        .collect();
    Ok(WeightGraph {
        n_points: n,
        dim: d,
        omega,
        edges: per_point.into_iter().flatten().collect(),
    })
}

/// Reference construction comparing every pair; honours truncation by direct filtering.
pub fn build_weights_all_pairs(
    cloud: &PointCloud,
    params: &ProblemParams,
    policy: TruncationPolicy,
) -> Result<WeightGraph> {
    check_finite(cloud)?;
    let omega = effective_omega(cloud, params, policy)?;
    let d = cloud.dim();
    let n = cloud.len();
    let per_point: Vec<Vec<Edge>> = (0..n)
        .into_par_iter()
        .map(|m| {
            let p = cloud.point(m);
            (m + 1..n)
                .filter_map(|k| {
                    let dist = euclidean(p, cloud.point(k));
                    if omega.is_some_and(|w| dist > w) {
                        return None;
                    }
                    Some(Edge {
                        m,
                        n: k,
                        dist,
                        weight: params.weight(d, dist),
                    })
                })
                .collect()
        })
        .collect();
    Ok(WeightGraph {
        n_points: n,
        dim: d,
        omega,
        edges: per_point.into_iter().flatten().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::WeightMode;
    use approx::assert_relative_eq;

    fn params(gamma: f64) -> ProblemParams {
        ProblemParams::new(1.0, gamma).unwrap()
    }

    #[test]
    fn cutoff_radius_values() {
        let e = std::f64::consts::E;
        assert_relative_eq!(truncation_radius(e, 2).unwrap(), 1.226_264_803_904_807_9, max_relative = 1e-14);
        assert_relative_eq!(truncation_radius(e, 1).unwrap(), 0.858_385_362_733_365_5, max_relative = 1e-14);
        assert_relative_eq!(truncation_radius(e * e, 1).unwrap(), 0.631_564_655_104_192_7, max_relative = 1e-14);
        assert!(truncation_radius(1.0, 2).is_err());
        assert!(truncation_radius(0.5, 2).is_err());
    }

    #[test]
    fn error_bound_values() {
        assert_eq!(truncation_error_bound(3.0, 0.0, 4.0, 2, 0.1), 0.0);
        assert_relative_eq!(truncation_error_bound(1.0, 1.0, 2.0, 1, 1.0), 1.082_682_265_892_901_6, max_relative = 1e-14);
        for (gamma, d) in [(5.0, 2), (30.0, 1), (12.0, 3)] {
            let omega = truncation_radius(gamma, d).unwrap();
            let bound = truncation_error_bound(1.7, 0.8, gamma, d, omega);
            assert_relative_eq!(bound, 2.0 * 1.7 * 0.8 * gamma.powf(-1.0 / 3.0), max_relative = 1e-12);
        }
    }

    #[test]
    fn inclusive_boundary() {
        let cloud = PointCloud::from_rows(&[[0.0], [0.5]]).unwrap();
        let g = build_weights(&cloud, &params(2.0), TruncationPolicy::Explicit(0.5)).unwrap();
        assert_eq!(g.len(), 1);
    }

    #[test]
    fn collinear_filter() {
        let cloud = PointCloud::from_rows(&[[0.0], [1.0], [10.0]]).unwrap();
        let g = build_weights(&cloud, &params(2.0), TruncationPolicy::Explicit(2.0)).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!((g.edges()[0].m, g.edges()[0].n), (0, 1));
        assert_relative_eq!(g.edges()[0].weight, 0.541_341_132_946_450_8, max_relative = 1e-15);
    }

    #[test]
    fn untruncated_is_complete() {
        let cloud = PointCloud::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 9.0], [4.0, 4.0]]).unwrap();
        let g = build_weights(&cloud, &params(1.0), TruncationPolicy::None).unwrap();
        assert_eq!(g.len(), 6);
        assert!(g.edges().windows(2).all(|w| (w[0].m, w[0].n) < (w[1].m, w[1].n)));
        assert_eq!(g.degrees(), vec![3; 4]);
    }

    #[test]
    fn underflowing_weights_are_kept() {
        let cloud = PointCloud::from_rows(&[[0.0], [1.0e4]]).unwrap();
        let g = build_weights(&cloud, &params(10.0), TruncationPolicy::None).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.edges()[0].weight, 0.0);
    }

    #[test]
    fn uniform_mode_weights() {
        let cloud = PointCloud::from_rows(&[[0.0, 0.0], [3.0, 4.0]]).unwrap();
        let p = params(2.0).with_mode(WeightMode::Uniform);
        let g = build_weights(&cloud, &p, TruncationPolicy::None).unwrap();
        assert_eq!(g.edges()[0].weight, 8.0);
        assert_eq!(g.edges()[0].dist, 5.0);
    }

    #[test]
    fn conflicting_radii_are_rejected() {
        let cloud = PointCloud::from_rows(&[[0.0], [1.0]]).unwrap();
        let p = params(2.0).with_omega(Some(0.3));
        assert!(build_weights(&cloud, &p, TruncationPolicy::Explicit(0.4)).is_err());
        let g = build_weights(&cloud, &p, TruncationPolicy::None).unwrap();
        assert_eq!(g.omega(), Some(0.3));
        assert!(build_weights(&cloud, &params(0.9), TruncationPolicy::Cutoff).is_err());
    }

    #[test]
    fn diameters() {
        assert_eq!(diameter(&PointCloud::from_rows(&[[1.0, 2.0]]).unwrap()).value, 0.0);
        let d = diameter(&PointCloud::from_rows(&[[0.0, 0.0], [3.0, 4.0]]).unwrap());
        assert_eq!(d, Diameter { value: 5.0, exact: true });
        assert_eq!(diameter(&PointCloud::from_rows(&[[0.0], [1.0], [7.0]]).unwrap()).value, 7.0);
    }

    #[test]
    fn large_cloud_diameter_is_labeled_bound() {
        let coords: Vec<f64> = (0..(EXACT_DIAMETER_LIMIT + 1) * 2).map(|i| (i % 7) as f64).collect();
        let cloud = PointCloud::new(2, coords).unwrap();
        let d = diameter(&cloud);
        assert!(!d.exact);
        assert_relative_eq!(d.value, 2f64.sqrt() * 6.0);
    }

    #[test]
    fn csv_export_sorted_with_header() {
        let cloud = PointCloud::from_rows(&[[0.0], [1.0], [3.0]]).unwrap();
        let g = build_weights(&cloud, &params(1.0), TruncationPolicy::None).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "m,n,dist,weight");
        assert!(lines[1].starts_with("0,1,"));
        assert!(lines[2].starts_with("0,2,"));
        assert!(lines[3].starts_with("1,2,"));
    }
}
