use serde::{Deserialize, Serialize};

use crate::lp::{Pricing, RevisedSimplex, SimplexOptions, DEFAULT_TOL};

/// Numerical settings shared by all stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    pub lp_tol: f64,
    /// A series value counts as positive above this; defaults to
    /// `1e3 * lp_tol`.
    pub support_threshold: Option<f64>,
    /// Relative factor in the zero-objective test
    /// `Z <= acceptance * (1 + sum_i Q_i rho_i)`.
    pub acceptance: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            lp_tol: DEFAULT_TOL,
            support_threshold: None,
            acceptance: 1e-6,
        }
    }
}

impl SolveOptions {
    pub fn support(&self) -> f64 {
        self.support_threshold.unwrap_or(1e3 * self.lp_tol)
    }

    pub fn simplex(&self) -> RevisedSimplex {
        let mut o = SimplexOptions::with_tol(self.lp_tol);
        o.pricing = Pricing::Dantzig;
        RevisedSimplex::new(o)
    }
}
