//! Iterative kernels shared by the trainers.

mod cg;
mod ista;
mod power;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cg::{ridge_sandwich_lsq, sandwich_lsq, sandwich_objective, CgOutput};
pub use ista::{ista, ista_lipschitz, ista_with_lipschitz, lasso_objective, IstaOutput};
pub use power::{spectral_norm_estimate, DEFAULT_POWER_ITERS};

/// Iteration controls for one inner solver.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Relative-change stopping threshold (objective change for ISTA,
    /// normal-equation residual for CG).
    pub tol: f64,
    /// Step-size safety factor in `(0, 1]`; ISTA uses `L = 2σ²/safety`.
    pub safety: f64,
    /// Power iterations used to estimate σ.
    pub power_iters: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions::ista_default()
    }
}

impl SolverOptions {
    pub fn ista_default() -> Self {
        SolverOptions {
            max_iters: 100,
            tol: 1e-6,
            safety: 0.95,
            power_iters: DEFAULT_POWER_ITERS,
        }
    }

    pub fn cg_default() -> Self {
        SolverOptions {
            max_iters: 50,
            ..SolverOptions::ista_default()
        }
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be >= 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidArgument(format!("tol must be >= 0, got {}", self.tol)));
        }
        if !(self.safety > 0.0 && self.safety <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "safety factor must lie in (0, 1], got {}",
                self.safety
            )));
        }
        if self.power_iters == 0 {
            return Err(Error::InvalidArgument("power_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// `sign(x) · max(|x| − tau, 0)`.
#[inline]
pub fn soft_threshold(x: f64, tau: f64) -> f64 {
    debug_assert!(tau >= 0.0);
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

/// Relative change `|prev − next| / |prev|`, with `0 → 0` treated as no change.
pub(crate) fn relative_change(prev: f64, next: f64) -> f64 {
    let diff = (prev - next).abs();
    if diff == 0.0 {
        0.0
    } else {
        diff / prev.abs().max(f64::MIN_POSITIVE)
    }
}
