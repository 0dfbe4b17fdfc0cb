//! Localized sum-of-norms clustering.
//!
//! Given points `x_1, …, x_N ∈ R^d`, the crate minimizes
//!
//! ```text
//! J(y) = (1/N) Σ_n |y_n - x_n|² + (λ/N²) Σ_{m,n} w(|x_m - x_n|) |y_m - y_n|,
//! w(r) = γ^{d+1} e^{-γ r},
//! ```
//!
//! and reads clusters off as groups of (numerically) equal representatives.
//!
//! * [`weights`] builds exact, optionally truncated, weight graphs.
//! * [`solver`] runs ADMM and reports a distance-to-optimum certificate.
//! * [`clusters`] extracts clusters and scores them against ground truth.
//! * [`genmodel`] samples the stochastic ball model and measures `W∞`.
//! * [`rates`] collects closed-form bounds and rate expressions.

pub mod cloud;
pub mod clusters;
pub mod error;
pub mod genmodel;
pub mod objective;
pub mod params;
pub mod rates;
pub mod solver;
pub mod weights;

pub use cloud::{PointCloud, Representatives};
pub use error::{Error, Result};
pub use objective::objective_value;
pub use params::{ProblemParams, WeightMode};
pub use solver::{solve, SolveReport, SolverOptions};
pub use weights::{build_weights, TruncationPolicy, WeightGraph};
