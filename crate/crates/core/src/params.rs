use serde::{Deserialize, Serialize};

use crate::error::{invalid_param, Result};

/// How pairwise weights depend on distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// `w(r) = γ^{d+1} e^{-γ r}`.
    #[default]
    Exponential,
    /// `w ≡ γ^{d+1}`, the unweighted problem at matched fusion strength.
    Uniform,
}

/// Parameters of the clustering functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    /// Fusion strength λ ≥ 0.
    pub lambda: f64,
    /// Localization γ > 0; the interaction length is `1/γ`.
    pub gamma: f64,
    /// Truncation radius ω. `None` keeps every pair.
    pub omega: Option<f64>,
    #[serde(default)]
    pub weight_mode: WeightMode,
}

impl ProblemParams {
    pub fn new(lambda: f64, gamma: f64) -> Result<Self> {
        let p = Self {
            lambda,
            gamma,
            omega: None,
            weight_mode: WeightMode::Exponential,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_omega(mut self, omega: Option<f64>) -> Self {
        self.omega = omega;
        self
    }

    pub fn with_mode(mut self, mode: WeightMode) -> Self {
        self.weight_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(invalid_param("lambda", format!("{} is not a finite nonnegative number", self.lambda)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(invalid_param("gamma", format!("{} is not a finite positive number", self.gamma)));
        }
        if let Some(omega) = self.omega {
            if !(omega > 0.0) {
                return Err(invalid_param("omega", format!("{omega} is not positive")));
            }
        }
        Ok(())
    }

    /// The weight `w(dist)` for a `dim`-dimensional problem.
    #[inline]
    pub fn weight(&self, dim: usize, dist: f64) -> f64 {
        let scale = self.gamma.powi(dim as i32 + 1);
        match self.weight_mode {
            WeightMode::Exponential => scale * (-self.gamma * dist).exp(),
            WeightMode::Uniform => scale,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(ProblemParams::new(-1.0, 1.0).is_err());
        assert!(ProblemParams::new(1.0, 0.0).is_err());
        assert!(ProblemParams::new(0.0, 1.0).is_ok());
        let p = ProblemParams::new(1.0, 1.0).unwrap().with_omega(Some(0.0));
        assert!(p.validate().is_err());
    }

    #[test]
    fn weights() {
        let p = ProblemParams::new(1.0, 2.0).unwrap();
        assert!((p.weight(1, 1.0) - 4.0 * (-2.0f64).exp()).abs() < 1e-15);
        let u = p.with_mode(WeightMode::Uniform);
        assert_eq!(u.weight(2, 100.0), 8.0);
    }
}
