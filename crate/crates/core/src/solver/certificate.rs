use crate::cloud::{PointCloud, Representatives};
use crate::error::{Error, Result};
use crate::objective::objective_value;
use crate::params::ProblemParams;
use crate::weights::WeightGraph;

use super::{apply_incidence, apply_incidence_t};

/// `½[J(y+v) + J(y-v)] - J(y) - (1/N) Σ |v_n|²`, nonnegative up to rounding
/// because the functional is uniformly convex with modulus `(1/N) Σ |v_n|²`.
pub fn convexity_gap(
    cloud: &PointCloud,
    params: &ProblemParams,
    graph: &WeightGraph,
    y: &Representatives,
    v: &Representatives,
) -> Result<f64> {
    y.check_shape(cloud.dim(), cloud.len())?;
    v.check_shape(cloud.dim(), cloud.len())?;
    let plus: Vec<f64> = y.as_flat().iter().zip(v.as_flat()).map(|(a, b)| a + b).collect();
    let minus: Vec<f64> = y.as_flat().iter().zip(v.as_flat()).map(|(a, b)| a - b).collect();
    let plus = Representatives::from_flat_unchecked(y.dim(), plus);
    let minus = Representatives::from_flat_unchecked(y.dim(), minus);
    let j_plus = objective_value(cloud, params, graph, &plus)?;
    let j_minus = objective_value(cloud, params, graph, &minus)?;
    let j = objective_value(cloud, params, graph, y)?;
    let v_sq: f64 = v.as_flat().iter().map(|a| a * a).sum::<f64>() / cloud.len() as f64;
    Ok(0.5 * (j_plus + j_minus) - j - v_sq)
}

/// `2 max(0, J(y) - J_ref)`. When `J_ref ≤ inf J` this bounds the mean-square
/// distance from `y` to the minimizer.
pub fn distance_certificate(j_y: f64, j_ref: f64) -> f64 {
    2.0 * (j_y - j_ref).max(0.0)
}

/// Evaluates the Lagrange dual `g(ν) = Σ_e ν_e·(Lx)_e - (N/4) |Lᵀν|²` after
/// projecting every `ν_e` onto the ball of radius `2 λ w_e / N²`. By weak
/// duality the result never exceeds the optimal value.
pub fn dual_objective(
    cloud: &PointCloud,
    params: &ProblemParams,
    graph: &WeightGraph,
    multipliers: &[f64],
) -> Result<f64> {
    graph.check_cloud(cloud)?;
    let d = cloud.dim();
    let edges = graph.edges();
    if multipliers.len() != edges.len() * d {
        return Err(Error::SizeMismatch {
            expected: edges.len() * d,
            found: multipliers.len(),
        });
    }
    let nf = cloud.len() as f64;
    let mut nu = multipliers.to_vec();
    for (e, edge) in edges.iter().enumerate() {
        let radius = 2.0 * params.lambda * edge.weight / (nf * nf);
        let block = &mut nu[e * d..(e + 1) * d];
        let len = block.iter().map(|v| v * v).sum::<f64>().sqrt();
        if len > radius {
            let s = if len > 0.0 { radius / len } else { 0.0 };
            block.iter_mut().for_each(|v| *v *= s);
        }
    }
    let mut lx = vec![0.0; edges.len() * d];
    apply_incidence(edges, d, cloud.as_flat(), &mut lx);
    let mut lt_nu = vec![0.0; cloud.len() * d];
    apply_incidence_t(edges, d, &nu, &mut lt_nu);
    let linear: f64 = nu.iter().zip(&lx).map(|(a, b)| a * b).sum();
    let quad: f64 = lt_nu.iter().map(|v| v * v).sum();
    Ok(linear - nf / 4.0 * quad)
}
