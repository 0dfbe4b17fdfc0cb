//! Quantities of the `γ → ∞` limiting functional.

use std::f64::consts::{FRAC_PI_2, PI};

use statrs::function::gamma::gamma;

use crate::error::{invalid_param, Error, Result};
use crate::genmodel::BallModel;

/// `∫_{S^{d-1}} |ω_1| dσ(ω)`.
///
/// For `d ≥ 2` this is `|S^{d-2}| · 2 ∫_0^{π/2} cos θ sin^{d-2} θ dθ`, with the
/// angular integral evaluated by adaptive Simpson quadrature. For `d = 1` the
/// sphere is `{-1, +1}` with counting measure.
pub fn sphere_abs_first_moment(d: usize) -> Result<f64> {
    match d {
        0 => Err(invalid_param("d", "dimension must be at least 1")),
        1 => Ok(2.0),
        d => {
            let k = (d - 2) as i32;
            let area = 2.0 * PI.powf((d - 1) as f64 / 2.0) / gamma((d - 1) as f64 / 2.0);
            let angular = adaptive_simpson(&|t: f64| t.cos() * t.sin().powi(k), 0.0, FRAC_PI_2, 1e-14);
            Ok(area * 2.0 * angular)
        }
    }
}

/// `c = ∫_{R^d} e^{-|y|} |y·e_1| dy = Γ(d+1) · ∫_{S^{d-1}} |ω_1| dσ`, for `1 ≤ d ≤ 10`.
pub fn limit_constant_c(d: usize) -> Result<f64> {
    if !(1..=10).contains(&d) {
        return Err(invalid_param("d", format!("{d} is outside 1..=10")));
    }
    Ok(gamma(d as f64 + 1.0) * sphere_abs_first_moment(d)?)
}

/// Limiting functional at a candidate that is constant (`u_ℓ`) on each ball.
///
/// The total-variation term is zero for such candidates, so only the fidelity
/// remains: `Σ_ℓ m_ℓ (|u_ℓ - center_ℓ|² + r_ℓ² d/(d+2))`. The value does not
/// depend on `λ`; the argument is kept so the signature mirrors the functional.
pub fn j_infinity_piecewise_constant(model: &BallModel, _lambda: f64, u_values: &[Vec<f64>]) -> Result<f64> {
    if u_values.len() != model.components.len() {
        return Err(Error::SizeMismatch {
            expected: model.components.len(),
            found: u_values.len(),
        });
    }
    let d = model.dim as f64;
    let mut total = 0.0;
    for (comp, u) in model.components.iter().zip(u_values) {
        if u.len() != model.dim {
            return Err(Error::DimensionMismatch {
                expected: model.dim,
                found: u.len(),
            });
        }
        let bias: f64 = u.iter().zip(&comp.center).map(|(a, b)| (a - b) * (a - b)).sum();
        let second_moment = comp.radius * comp.radius * d / (d + 2.0);
        total += comp.mass * (bias + second_moment);
    }
    Ok(total)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    recurse(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 40)
}
