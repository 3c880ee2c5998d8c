//! Scalar state-space models used as identification benchmarks.
//!
//! All models share the additive-Gaussian form
//!
//! ```text
//! x_0 ~ N(m0, P0)
//! x_t = F(x_{t-1}, t-1; θ) + v_t,   v_t ~ N(0, q)
//! y_t = G(x_t; θ) + e_t,            e_t ~ N(0, r),    t = 1..N
//! ```

mod kalman;
mod oracles;
mod pf;

use alloc::vec::Vec;

#[allow(unused_imports)] // inherent methods shadow it when std is linked
use num_traits::Float;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

pub use kalman::{kalman_loglik, kalman_loglik_grad};
pub use oracles::{LgssOracle, NlBenchOracle, LOG_VARIANCE_FLOOR};
pub use pf::{bootstrap_pf, ParticleFilterConfig, ParticleFilterEstimate, Resampling, ScoreMethod};

/// Additive-Gaussian scalar state-space model with parameters in natural
/// coordinates.
pub trait ScalarSsm {
    fn n_params(&self) -> usize;

    /// Mean and variance of `x_0`.
    fn initial(&self) -> (f64, f64);

    /// `F(x, t; θ)`.
    fn transition(&self, theta: &[f64], x: f64, t: usize) -> f64;

    /// Writes `∂F/∂θ` into `d_theta` and returns `∂F/∂x`.
    fn transition_grad(&self, theta: &[f64], x: f64, t: usize, d_theta: &mut [f64]) -> f64;

    /// `G(x; θ)`.
    fn observation(&self, theta: &[f64], x: f64) -> f64;

    /// Writes `∂G/∂θ` into `d_theta` and returns `∂G/∂x`.
    fn observation_grad(&self, theta: &[f64], x: f64, d_theta: &mut [f64]) -> f64;

    /// Position of the process-noise variance `q` in `θ`.
    fn q_index(&self) -> usize;

    /// Position of the measurement-noise variance `r` in `θ`.
    fn r_index(&self) -> usize;
}

/// `x_{t+1} = a x_t + v_t`, `y_t = c x_t + e_t` with `θ = (a, c, q, r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LgssModel {
    pub x0_mean: f64,
    pub x0_var: f64,
}

impl LgssModel {
    pub const TRUE_PARAMS: [f64; 4] = [0.9, 1.0, 0.1, 0.5];

    /// Stationary output variance `c² q / (1 - a²) + r`.
    pub fn stationary_output_variance(theta: &[f64]) -> f64 {
        let (a, c, q, r) = (theta[0], theta[1], theta[2], theta[3]);
        c * c * q / (1.0 - a * a) + r
    }
}

impl Default for LgssModel {
    fn default() -> Self {
        Self {
            x0_mean: 0.0,
            x0_var: 1.0,
        }
    }
}

impl ScalarSsm for LgssModel {
    fn n_params(&self) -> usize {
        4
    }
    fn initial(&self) -> (f64, f64) {
        (self.x0_mean, self.x0_var)
    }
    fn transition(&self, theta: &[f64], x: f64, _t: usize) -> f64 {
        theta[0] * x
    }
    fn transition_grad(&self, theta: &[f64], x: f64, _t: usize, d: &mut [f64]) -> f64 {
        d.fill(0.0);
        d[0] = x;
        theta[0]
    }
    fn observation(&self, theta: &[f64], x: f64) -> f64 {
        theta[1] * x
    }
    fn observation_grad(&self, theta: &[f64], x: f64, d: &mut [f64]) -> f64 {
        d.fill(0.0);
        d[1] = x;
        theta[1]
    }
    fn q_index(&self) -> usize {
        2
    }
    fn r_index(&self) -> usize {
        3
    }
}

/// The nonlinear benchmark
/// `x_{t+1} = a x_t + b x_t / (1 + x_t²) + c cos(1.2 t) + v_t`, `y_t = d x_t² + e_t`
/// with `θ = (a, b, c, d, q, r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlBenchModel {
    pub x0_mean: f64,
    pub x0_var: f64,
}

impl NlBenchModel {
    pub const TRUE_PARAMS: [f64; 6] = [0.5, 25.0, 8.0, 0.05, 0.0, 0.1];
}

impl Default for NlBenchModel {
    fn default() -> Self {
        Self {
            x0_mean: 0.0,
            x0_var: 5.0,
        }
    }
}

impl ScalarSsm for NlBenchModel {
    fn n_params(&self) -> usize {
        6
    }
    fn initial(&self) -> (f64, f64) {
        (self.x0_mean, self.x0_var)
    }
    fn transition(&self, theta: &[f64], x: f64, t: usize) -> f64 {
        theta[0] * x + theta[1] * x / (1.0 + x * x) + theta[2] * (1.2 * t as f64).cos()
    }
    fn transition_grad(&self, theta: &[f64], x: f64, t: usize, d: &mut [f64]) -> f64 {
        let den = 1.0 + x * x;
        d.fill(0.0);
        d[0] = x;
        d[1] = x / den;
        d[2] = (1.2 * t as f64).cos();
        theta[0] + theta[1] * (1.0 - x * x) / (den * den)
    }
    fn observation(&self, theta: &[f64], x: f64) -> f64 {
        theta[3] * x * x
    }
    fn observation_grad(&self, theta: &[f64], x: f64, d: &mut [f64]) -> f64 {
        d.fill(0.0);
        d[3] = x * x;
        2.0 * theta[3] * x
    }
    fn q_index(&self) -> usize {
        4
    }
    fn r_index(&self) -> usize {
        5
    }
}

/// Draws `y_{1:N}` from the model at `theta`.
pub fn simulate<M: ScalarSsm + ?Sized>(
    model: &M,
    theta: &[f64],
    n: usize,
    rng: &mut dyn RngCore,
) -> Vec<f64> {
    let (m0, p0) = model.initial();
    let q_std = theta[model.q_index()].max(0.0).sqrt();
    let r_std = theta[model.r_index()].max(0.0).sqrt();
    let mut normal = || -> f64 { StandardNormal.sample(&mut *rng) };
    let mut x = m0 + p0.max(0.0).sqrt() * normal();
    let mut y = Vec::with_capacity(n);
    for t in 1..=n {
        x = model.transition(theta, x, t - 1) + q_std * normal();
        y.push(model.observation(theta, x) + r_std * normal());
    }
    y
}

/// Maps unconstrained coordinates (variances on log scale) to natural ones.
///
/// Log-variances below [`LOG_VARIANCE_FLOOR`] are clamped to it.
pub fn to_natural<M: ScalarSsm + ?Sized>(model: &M, u: &[f64]) -> Vec<f64> {
    let mut theta = u.to_vec();
    for i in [model.q_index(), model.r_index()] {
        theta[i] = u[i].max(LOG_VARIANCE_FLOOR).exp();
    }
    theta
}

/// Inverse of [`to_natural`]; zero variances map to the floor.
pub fn to_unconstrained<M: ScalarSsm + ?Sized>(model: &M, theta: &[f64]) -> Vec<f64> {
    let mut u = theta.to_vec();
    for i in [model.q_index(), model.r_index()] {
        u[i] = if theta[i] > 0.0 {
            theta[i].ln().max(LOG_VARIANCE_FLOOR)
        } else {
            LOG_VARIANCE_FLOOR
        };
    }
    u
}

/// Chain rule for a natural-coordinate gradient into unconstrained coordinates.
pub(crate) fn natural_grad_to_unconstrained<M: ScalarSsm + ?Sized>(
    model: &M,
    u: &[f64],
    theta: &[f64],
    grad: &mut [f64],
) {
    for i in [model.q_index(), model.r_index()] {
        grad[i] = if u[i] < LOG_VARIANCE_FLOOR {
            0.0
        } else {
            grad[i] * theta[i]
        };
    }
}
