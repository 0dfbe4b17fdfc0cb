//! Cluster extraction, centroid error and recovery scoring.
//!
//! Iterative solvers fuse representatives only up to their tolerance, so two
//! points share a cluster when their representatives are linked by a chain of
//! steps no longer than `τ`.

mod limit;
mod union_find;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cloud::{euclidean, PointCloud, Representatives};
use crate::error::{invalid_param, Error, Result};

pub use limit::{j_infinity_piecewise_constant, limit_constant_c, sphere_abs_first_moment};

use union_find::DisjointSet;

/// Above this size, clustering sweeps along the first coordinate instead of
/// comparing every pair.
pub const ALL_PAIRS_LIMIT: usize = 10_000;

/// Relative fusion threshold: `τ = DEFAULT_TAU_FACTOR · diameter`.
pub const DEFAULT_TAU_FACTOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    labels: Vec<usize>,
    k: usize,
}

impl ClusterAssignment {
    /// Canonicalizes arbitrary labels: clusters are renumbered by smallest member index.
    pub fn from_labels(raw: &[usize]) -> Self {
        let mut map = std::collections::HashMap::new();
        let labels = raw
            .iter()
            .map(|l| {
                let next = map.len();
                *map.entry(*l).or_insert(next)
            })
            .collect();
        Self { labels, k: map.len() }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// CSV rows `index,label` with a header.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["index", "label"])?;
        for (i, l) in self.labels.iter().enumerate() {
            w.write_record([i.to_string(), l.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Connected components of `{ (m, n) : |y_m - y_n| ≤ τ }`.
pub fn extract_clusters(y: &Representatives, tau: f64) -> Result<ClusterAssignment> {
    if !(tau >= 0.0) {
        return Err(invalid_param("tau", format!("{tau} is negative")));
    }
    let n = y.len();
    let mut ds = DisjointSet::new(n);
    if n <= ALL_PAIRS_LIMIT {
        for m in 0..n {
            let a = y.value(m);
            for k in m + 1..n {
                if euclidean(a, y.value(k)) <= tau {
                    ds.union(m, k);
                }
            }
        }
    } else {
        // Sort by first coordinate; only pairs within τ along it can be linked.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| y.value(a)[0].total_cmp(&y.value(b)[0]));
        for (i, &m) in order.iter().enumerate() {
            let a = y.value(m);
            for &k in &order[i + 1..] {
                let b = y.value(k);
                if b[0] - a[0] > tau {
                    break;
                }
                if euclidean(a, b) <= tau {
                    ds.union(m, k);
                }
            }
        }
    }
    let (labels, k) = ds.labels();
    Ok(ClusterAssignment { labels, k })
}

/// Mean of the selected points.
pub fn mu_centroid(cloud: &PointCloud, indices: &[usize]) -> Result<Vec<f64>> {
    if indices.is_empty() {
        return Err(Error::EmptyIndexSet);
    }
    let mut c = vec![0.0; cloud.dim()];
    for &i in indices {
        if i >= cloud.len() {
            return Err(Error::SizeMismatch {
                expected: cloud.len(),
                found: i + 1,
            });
        }
        for (ck, pk) in c.iter_mut().zip(cloud.point(i)) {
            *ck += pk;
        }
    }
    let count = indices.len() as f64;
    c.iter_mut().for_each(|v| *v /= count);
    Ok(c)
}

/// `(1/N) Σ_ℓ Σ_{n : label(n) = ℓ} |y_n - a_ℓ|²`. Points labeled `None` are
/// skipped but still counted in `N`.
pub fn centroid_mse(y: &Representatives, true_labels: &[Option<usize>], true_centroids: &[Vec<f64>]) -> Result<f64> {
    if true_labels.len() != y.len() {
        return Err(Error::SizeMismatch {
            expected: y.len(),
            found: true_labels.len(),
        });
    }
    let mut sum = 0.0;
    for (n, label) in true_labels.iter().enumerate() {
        let Some(l) = *label else { continue };
        let centroid = true_centroids.get(l).ok_or(Error::LabelOutOfRange {
            label: l,
            components: true_centroids.len(),
        })?;
        if centroid.len() != y.dim() {
            return Err(Error::DimensionMismatch {
                expected: y.dim(),
                found: centroid.len(),
            });
        }
        sum += y
            .value(n)
            .iter()
            .zip(centroid)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    Ok(sum / y.len() as f64)
}

/// Fraction of unordered point pairs on which the two assignments agree.
/// Computed from the contingency table; a single point scores 1.
pub fn rand_index(a: &ClusterAssignment, b: &ClusterAssignment) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let n = a.len() as u128;
    if n < 2 {
        return Ok(1.0);
    }
    let pairs = |c: u128| c * c.saturating_sub(1) / 2;
    let mut table = std::collections::HashMap::<(usize, usize), u128>::new();
    let mut rows = vec![0u128; a.k];
    let mut cols = vec![0u128; b.k];
    for (&la, &lb) in a.labels.iter().zip(&b.labels) {
        *table.entry((la, lb)).or_default() += 1;
        rows[la] += 1;
        cols[lb] += 1;
    }
    let same_both: u128 = table.values().map(|&c| pairs(c)).sum();
    let same_a: u128 = rows.iter().map(|&c| pairs(c)).sum();
    let same_b: u128 = cols.iter().map(|&c| pairs(c)).sum();
    let total = pairs(n);
    // agreements = pairs together in both + pairs apart in both
    let apart_both = total + same_both - same_a - same_b;
    Ok((same_both + apart_both) as f64 / total as f64)
}
