//! Jacobi-preconditioned conjugate gradient for the `y`-subproblem.
//!
//! The system matrix is `(2/N) I + ρ LᵀL` where `L` is the signed edge
//! incidence operator, so `LᵀL` is the unweighted graph Laplacian. It acts
//! identically on each coordinate; vectors are stored row-major `N × d` and
//! solved in one pass.

use crate::error::{Error, Result};
use crate::weights::Edge;

pub(crate) struct LaplacianSystem<'a> {
    pub edges: &'a [Edge],
    pub dim: usize,
    pub shift: f64,
    pub rho: f64,
    /// Inverse diagonal `1 / (shift + ρ deg_n)`, one entry per vertex.
    pub inv_diag: Vec<f64>,
}

impl<'a> LaplacianSystem<'a> {
    pub fn new(edges: &'a [Edge], n_points: usize, dim: usize, shift: f64, rho: f64) -> Self {
        let mut deg = vec![0.0; n_points];
        for e in edges {
            deg[e.m] += 1.0;
            deg[e.n] += 1.0;
        }
        let inv_diag = deg.iter().map(|k| 1.0 / (shift + rho * k)).collect();
        Self {
            edges,
            dim,
            shift,
            rho,
            inv_diag,
        }
    }

    pub fn apply(&self, p: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for (o, v) in out.iter_mut().zip(p) {
            *o = self.shift * v;
        }
        for e in self.edges {
            let (a, b) = (e.m * d, e.n * d);
            for k in 0..d {
                let diff = self.rho * (p[a + k] - p[b + k]);
                out[a + k] += diff;
                out[b + k] -= diff;
            }
        }
    }

    fn precondition(&self, r: &[f64], out: &mut [f64]) {
        for (n, &w) in self.inv_diag.iter().enumerate() {
            for k in 0..self.dim {
                out[n * self.dim + k] = w * r[n * self.dim + k];
            }
        }
    }

    /// Solves in place starting from the current contents of `x`.
    /// Returns the number of iterations used.
    pub fn solve(&self, b: &[f64], x: &mut [f64], tol: f64, max_iters: usize) -> Result<usize> {
        let len = b.len();
        let b_norm = norm(b);
        if b_norm == 0.0 {
            x.iter_mut().for_each(|v| *v = 0.0);
            return Ok(0);
        }
        let target = tol * b_norm;
        let mut r = vec![0.0; len];
        self.apply(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let mut res = norm(&r);
        if res <= target {
            return Ok(0);
        }
        let mut z = vec![0.0; len];
        self.precondition(&r, &mut z);
        let mut p = z.clone();
        let mut ap = vec![0.0; len];
        let mut rz = dot(&r, &z);
        for it in 1..=max_iters {
            self.apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::NonFinite("conjugate gradient curvature"));
            }
            let alpha = rz / pap;
            for i in 0..len {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            res = norm(&r);
            if !res.is_finite() {
                return Err(Error::NonFinite("conjugate gradient residual"));
            }
            if res <= target {
                return Ok(it);
            }
            self.precondition(&r, &mut z);
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..len {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(Error::CgNotConverged {
            iterations: max_iters,
            residual: res / b_norm,
        })
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_edges(n: usize) -> Vec<Edge> {
        (0..n - 1)
            .map(|m| Edge {
                m,
                n: m + 1,
                dist: 1.0,
                weight: 1.0,
            })
            .collect()
    }

    #[test]
    fn solves_path_laplacian_system() {
        let edges = path_edges(6);
        let sys = LaplacianSystem::new(&edges, 6, 2, 0.3, 1.7);
        let truth: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut b = vec![0.0; 12];
        sys.apply(&truth, &mut b);
        let mut x = vec![0.0; 12];
        sys.solve(&b, &mut x, 1e-12, 100).unwrap();
        for (a, t) in x.iter().zip(&truth) {
            assert!((a - t).abs() < 1e-10);
        }
    }

    #[test]
    fn reports_non_convergence() {
        let edges = path_edges(50);
        let sys = LaplacianSystem::new(&edges, 50, 1, 1e-6, 1.0);
        let b: Vec<f64> = (0..50).map(|i| if i % 2 == 0 { 1.0 } else { -0.5 }).collect();
        let mut x = vec![0.0; 50];
        let err = sys.solve(&b, &mut x, 1e-14, 2).unwrap_err();
        assert!(matches!(err, Error::CgNotConverged { iterations: 2, .. }));
    }
}
