use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Every numerical threshold used by the pipeline. Reports echo the values in force.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// `| |a|^2 - |b|^2 - 1 |` in the forward stage.
    pub unitarity: f64,
    /// Substep-halving convergence threshold for the Jost integrator.
    pub integrator_refine: f64,
    /// Samples below this fraction of the median magnitude count as zeros.
    pub zero_threshold: f64,
    /// Max defect of `a(k) = m(k) a(-k) + n(k)` after the solve.
    pub riemann_residual: f64,
    /// Residual of the second elimination identity used as a cross-check on `b`.
    pub cross_check_residual: f64,
    /// Unitarity of the recovered pair `(a, b)`.
    pub recovered_unitarity: f64,
    /// Norm of the lower-half-plane projection of `a - 1`.
    pub analyticity: f64,
    /// Max `|Im F|` before it is discarded.
    pub kernel_imag: f64,
    /// Marchenko residual at collocation nodes.
    pub marchenko_residual: f64,
    /// Largest accepted condition estimate of a Marchenko system.
    pub marchenko_condition: f64,
    /// Deadband around zero for eigenvalue classification.
    pub eps_spec: f64,
    /// Smallest accepted `k_min`.
    pub k_min_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            unitarity: 1e-8,
            integrator_refine: 1e-10,
            zero_threshold: 1e-10,
            riemann_residual: 1e-6,
            cross_check_residual: 1e-6,
            recovered_unitarity: 1e-6,
            analyticity: 1e-3,
            kernel_imag: 1e-9,
            marchenko_residual: 1e-8,
            marchenko_condition: 1e8,
            eps_spec: 1e-8,
            k_min_floor: crate::types::DEFAULT_K_MIN_FLOOR,
        }
    }
}

impl Tolerances {
    /// Every threshold must be finite and positive.
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("unitarity", self.unitarity),
            ("integrator_refine", self.integrator_refine),
            ("zero_threshold", self.zero_threshold),
            ("riemann_residual", self.riemann_residual),
            ("cross_check_residual", self.cross_check_residual),
            ("recovered_unitarity", self.recovered_unitarity),
            ("analyticity", self.analyticity),
            ("kernel_imag", self.kernel_imag),
            ("marchenko_residual", self.marchenko_residual),
            ("marchenko_condition", self.marchenko_condition),
            ("eps_spec", self.eps_spec),
            ("k_min_floor", self.k_min_floor),
        ];
        match all.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            Some((name, v)) => Err(Error::InvalidInput(format!("tolerance `{name}` must be finite and positive, got {v}"))),
            None => Ok(()),
        }
    }
}
