//! Uniform hash grid for exact fixed-radius neighbor queries.

use std::collections::HashMap;

use crate::cloud::PointCloud;

/// Points bucketed into axis-aligned cells of side `cell`.
pub(crate) struct UniformGrid<'a> {
    cloud: &'a PointCloud,
    cell: f64,
    cells: HashMap<Vec<i64>, Vec<usize>>,
    /// Occupied keys in sorted order, used when enumerating `3^d` offsets
    /// would cost more than scanning the occupied cells.
    keys: Vec<Vec<i64>>,
}

impl<'a> UniformGrid<'a> {
    /// The cell side is inflated by a relative 1e-9 so that two points within
    /// `radius` of each other never land more than one cell apart after rounding.
    pub(crate) fn new(cloud: &'a PointCloud, radius: f64) -> Self {
        let cell = radius * (1.0 + 1e-9);
        let mut cells: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for (n, p) in cloud.points().enumerate() {
            cells.entry(cell_key(p, cell)).or_default().push(n);
        }
        let mut keys: Vec<Vec<i64>> = cells.keys().cloned().collect();
        keys.sort_unstable();
        Self {
            cloud,
            cell,
            cells,
            keys,
        }
    }

    /// Indices of every point in the cells adjacent to (and including) the cell of `n`.
    /// The result is a superset of the radius ball; callers filter by exact distance.
    pub(crate) fn candidates(&self, n: usize, out: &mut Vec<usize>) {
        out.clear();
        let key = cell_key(self.cloud.point(n), self.cell);
        let d = key.len();
        let offsets = 3usize.saturating_pow(d as u32);
        if offsets <= self.keys.len() {
            let mut probe = key.clone();
            for code in 0..offsets {
                let mut c = code;
                for (k, p) in probe.iter_mut().enumerate() {
                    *p = key[k] + (c % 3) as i64 - 1;
                    c /= 3;
                }
                if let Some(bucket) = self.cells.get(&probe) {
                    out.extend_from_slice(bucket);
                }
            }
        } else {
            for other in &self.keys {
                if other.iter().zip(&key).all(|(a, b)| (a - b).abs() <= 1) {
                    out.extend_from_slice(&self.cells[other]);
                }
            }
        }
    }
}

fn cell_key(p: &[f64], cell: f64) -> Vec<i64> {
    p.iter().map(|&c| (c / cell).floor() as i64).collect()
}
