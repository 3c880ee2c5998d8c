//! Stochastic backtracking line search.
//!
//! The initial step is `min(1, ξ/k)`. While the noisy Armijo test
//! `f̂(x + αp) > f̂(x) + c α gᵀp` fails the step is scaled by `ρ`, but at most
//! `max(0, τ - k)` times. Once `k ≥ τ` no backtracking happens and the step
//! follows the deterministic `ξ/k` schedule.

use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use crate::direction::McEstimate;
use crate::error::{Error, Result};
use crate::oracle::NoisyOracle;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchConfig {
    /// Armijo constant in `(0, 1)`.
    pub c: f64,
    /// Scale factor in `(0, 1)`.
    pub rho: f64,
    /// Reduction limit, `≥ 1`.
    pub xi: f64,
    /// Backtracking limit.
    pub tau: usize,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        Self {
            c: 1e-4,
            rho: 0.5,
            xi: 10.0,
            tau: 100,
        }
    }
}

impl LineSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err(Error::InvalidConfig("line search c must lie in (0, 1)"));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::InvalidConfig("line search rho must lie in (0, 1)"));
        }
        if !(self.xi >= 1.0) {
            return Err(Error::InvalidConfig("line search xi must be at least 1"));
        }
        if self.tau == 0 {
            return Err(Error::InvalidConfig("line search tau must be positive"));
        }
        Ok(())
    }

    /// Number of backtracking steps allowed at iteration `k`.
    pub fn budget(&self, k: usize) -> usize {
        self.tau.saturating_sub(k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchResult {
    pub alpha: f64,
    /// Cost evaluations at candidate points.
    pub trials: usize,
    /// Whether the noisy Armijo inequality held for the returned step.
    pub satisfied: bool,
}

/// `min(1, ξ/k)`.
pub fn schedule_initial(k: usize, xi: f64) -> f64 {
    assert!(k >= 1, "iteration index starts at 1");
    (xi / k as f64).min(1.0)
}

/// Runs the stochastic backtracking search from `x` along `p`.
///
/// `f_hat_x` is the cost already observed at `x`; it is reused for every
/// trial, as is the directional term `gᵀp` from the observed gradient.
#[allow(clippy::too_many_arguments)]
pub fn stochastic_backtrack<O: NoisyOracle + ?Sized>(
    k: usize,
    x: &DVector<f64>,
    p: &DVector<f64>,
    g: &DVector<f64>,
    f_hat_x: f64,
    oracle: &O,
    cfg: &LineSearchConfig,
    rng: &mut dyn RngCore,
) -> LineSearchResult {
    let mut alpha = schedule_initial(k, cfg.xi);
    let slope = g.dot(p);
    let budget = cfg.budget(k);
    let mut trials = 0;
    while trials < budget {
        let candidate = x + p * alpha;
        let f_new = oracle.cost(&candidate, rng);
        trials += 1;
        // NaN costs fail the test and keep backtracking
        if f_new <= f_hat_x + cfg.c * alpha * slope {
            return LineSearchResult {
                alpha,
                trials,
                satisfied: true,
            };
        }
        alpha *= cfg.rho;
    }
    LineSearchResult {
        alpha,
        trials,
        satisfied: false,
    }
}

/// Monte Carlo mean of the Armijo residual `f̂(x + αp) - f̂(x) - c α gᵀp`
/// with `p = -B g` and fresh cost and gradient draws each time.
///
/// For `B` fixed and `α` small the mean is non-positive exactly when `c`
/// does not exceed the bound from [`crate::direction::armijo_c_bound`].
#[allow(clippy::too_many_arguments)]
pub fn armijo_residuals<O: NoisyOracle + ?Sized>(
    oracle: &O,
    x: &DVector<f64>,
    b: &DMatrix<f64>,
    alpha: f64,
    c: f64,
    draws: usize,
    rng: &mut dyn RngCore,
) -> Result<McEstimate> {
    if draws == 0 {
        return Err(Error::InvalidConfig("draws must be at least 1"));
    }
    if b.nrows() != x.len() || b.ncols() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: b.nrows(),
        });
    }
    let samples = (0..draws).map(|_| {
        let (f_x, g) = oracle.cost_and_grad(x, rng);
        let p = -(b * &g);
        let f_new = oracle.cost(&(x + &p * alpha), rng);
        f_new - f_x - c * alpha * g.dot(&p)
    });
    Ok(McEstimate::from_samples(samples))
}
