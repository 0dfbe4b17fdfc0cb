use crate::cloud::{euclidean, PointCloud, Representatives};
use crate::error::Result;
use crate::params::ProblemParams;
use crate::weights::WeightGraph;

/// `(1/N) Σ_n |y_n - x_n|²`.
pub fn fidelity(cloud: &PointCloud, y: &Representatives) -> Result<f64> {
    y.check_shape(cloud.dim(), cloud.len())?;
    let sum: f64 = cloud
        .as_flat()
        .iter()
        .zip(y.as_flat())
        .map(|(x, v)| (v - x) * (v - x))
        .sum();
    Ok(sum / cloud.len() as f64)
}

/// `Σ_{edges} w_e |y_m - y_n|` over unordered edges.
pub fn fusion_sum(graph: &WeightGraph, y: &Representatives) -> f64 {
    graph
        .edges()
        .iter()
        .map(|e| e.weight * euclidean(y.value(e.m), y.value(e.n)))
        .sum()
}

/// Value of the clustering functional at `y`:
/// `(1/N) Σ |y_n - x_n|² + (2λ/N²) Σ_{m<n} w_{mn} |y_m - y_n|`.
///
/// Each unordered edge stands for the two ordered pairs of the double sum,
/// hence the factor 2; diagonal terms vanish.
pub fn objective_value(
    cloud: &PointCloud,
    params: &ProblemParams,
    graph: &WeightGraph,
    y: &Representatives,
) -> Result<f64> {
    graph.check_cloud(cloud)?;
    let fid = fidelity(cloud, y)?;
    if params.lambda == 0.0 {
        return Ok(fid);
    }
    let n = cloud.len() as f64;
    Ok(fid + 2.0 * params.lambda / (n * n) * fusion_sum(graph, y))
}
