//! Bottleneck matching distance between equal-size point clouds.
//!
//! For two uniform empirical measures with the same number of atoms an optimal
//! `W∞` coupling can be taken to be a permutation, so `W∞` is the smallest
//! threshold `t` for which the bipartite graph `{(i, j) : |a_i - b_j| ≤ t}`
//! has a perfect matching. The threshold is found by binary search over the
//! sorted distinct pairwise distances, testing each candidate with
//! Hopcroft–Karp.

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::cloud::{euclidean, PointCloud};
use crate::error::{Error, Result};

pub const BOTTLENECK_MAX_POINTS: usize = 4096;

pub fn bottleneck_winf(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    if a.len() != b.len() {
        return Err(Error::SizeMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let n = a.len();
    if n > BOTTLENECK_MAX_POINTS {
        return Err(crate::error::invalid_param(
            "N",
            format!("bottleneck distance supports at most {BOTTLENECK_MAX_POINTS} points, got {n}"),
        ));
    }

    // Each row of `sorted` lists (distance, column) in increasing distance, so the
    // admissible neighbors for any threshold are a prefix of the row.
    let sorted: Vec<Vec<(f64, usize)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = a.point(i);
            let mut row: Vec<(f64, usize)> = (0..n).map(|j| (euclidean(p, b.point(j)), j)).collect();
            row.sort_unstable_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            row
        })
        .collect();

    // Every row and every column must reach at least one partner.
    let mut col_min = vec![f64::INFINITY; n];
    for row in &sorted {
        for &(dist, j) in row {
            col_min[j] = col_min[j].min(dist);
        }
    }
    let lower = sorted
        .iter()
        .map(|r| r[0].0)
        .chain(col_min.iter().copied())
        .fold(0.0, f64::max);

    let mut candidates: Vec<f64> = sorted
        .iter()
        .flat_map(|r| r.iter().map(|e| e.0))
        .filter(|&d| d >= lower)
        .collect();
    candidates.sort_unstable_by(f64::total_cmp);
    candidates.dedup();

    let mut matcher = HopcroftKarp::new(n);
    let (mut lo, mut hi) = (0, candidates.len() - 1);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if matcher.has_perfect_matching(&sorted, candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(candidates[lo])
}

struct HopcroftKarp {
    n: usize,
    match_left: Vec<usize>,
    match_right: Vec<usize>,
    dist: Vec<u32>,
    limit: Vec<usize>,
    queue: VecDeque<usize>,
}

const NIL: usize = usize::MAX;

impl HopcroftKarp {
    fn new(n: usize) -> Self {
        Self {
            n,
            match_left: vec![NIL; n],
            match_right: vec![NIL; n],
            dist: vec![0; n],
            limit: vec![0; n],
            queue: VecDeque::with_capacity(n),
        }
    }

    fn has_perfect_matching(&mut self, rows: &[Vec<(f64, usize)>], threshold: f64) -> bool {
        for (i, row) in rows.iter().enumerate() {
            self.limit[i] = row.partition_point(|e| e.0 <= threshold);
        }
        self.match_left.fill(NIL);
        self.match_right.fill(NIL);
        let mut matched = 0;
        // greedy warm start
        for i in 0..self.n {
            for &(_, j) in &rows[i][..self.limit[i]] {
                if self.match_right[j] == NIL {
                    self.match_left[i] = j;
                    self.match_right[j] = i;
                    matched += 1;
                    break;
                }
            }
        }
        while self.bfs(rows) {
            for i in 0..self.n {
                if self.match_left[i] == NIL && self.dfs(rows, i) {
                    matched += 1;
                }
            }
        }
        matched == self.n
    }

    fn bfs(&mut self, rows: &[Vec<(f64, usize)>]) -> bool {
        const INF: u32 = u32::MAX;
        self.queue.clear();
        for i in 0..self.n {
            if self.match_left[i] == NIL {
                self.dist[i] = 0;
                self.queue.push_back(i);
            } else {
                self.dist[i] = INF;
            }
        }
        let mut found = false;
        while let Some(i) = self.queue.pop_front() {
            for &(_, j) in &rows[i][..self.limit[i]] {
                let k = self.match_right[j];
                if k == NIL {
                    found = true;
                } else if self.dist[k] == INF {
                    self.dist[k] = self.dist[i] + 1;
                    self.queue.push_back(k);
                }
            }
        }
        found
    }

    fn dfs(&mut self, rows: &[Vec<(f64, usize)>], i: usize) -> bool {
        for idx in 0..self.limit[i] {
            let j = rows[i][idx].1;
            let k = self.match_right[j];
            if k == NIL || (self.dist[k] == self.dist[i] + 1 && self.dfs(rows, k)) {
                self.match_left[i] = j;
                self.match_right[j] = i;
                return true;
            }
        }
        self.dist[i] = u32::MAX;
        false
    }
}
