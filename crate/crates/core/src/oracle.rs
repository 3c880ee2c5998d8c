//! Noisy objective oracles.
//!
//! An oracle returns `f̂(x) = f(x) + e` and `g(x) = ∇f(x) + v` with
//! `E[e] = b`, `Var[e] = σ_f²`, `E[v] = 0` and `Cov[v] = R`. Failures such as
//! particle degeneracy surface as non-finite values.

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // inherent methods shadow it when std is linked
use num_traits::Float;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::direction::{gaussian_draw, psd_sqrt};
use crate::error::{Error, Result};

/// Declared moments of an oracle's noise.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub cost_bias: f64,
    pub cost_var: f64,
    /// Gradient-noise covariance, when known in closed form.
    pub grad_cov: Option<DMatrix<f64>>,
}

pub trait NoisyOracle {
    fn dim(&self) -> usize;

    fn cost(&self, x: &DVector<f64>, rng: &mut dyn RngCore) -> f64;

    fn grad(&self, x: &DVector<f64>, rng: &mut dyn RngCore) -> DVector<f64>;

    /// One joint draw of cost and gradient. Oracles that produce both from the
    /// same simulation (particle filters) override this.
    fn cost_and_grad(&self, x: &DVector<f64>, rng: &mut dyn RngCore) -> (f64, DVector<f64>) {
        let g = self.grad(x, rng);
        (self.cost(x, rng), g)
    }

    fn noise(&self) -> NoiseModel;

    fn exact_cost(&self, _x: &DVector<f64>) -> Option<f64> {
        None
    }

    fn exact_grad(&self, _x: &DVector<f64>) -> Option<DVector<f64>> {
        None
    }

    fn exact_hessian(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }
}

impl<O: NoisyOracle + ?Sized> NoisyOracle for &O {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn cost(&self, x: &DVector<f64>, rng: &mut dyn RngCore) -> f64 {
        (**self).cost(x, rng)
    }
    fn grad(&self, x: &DVector<f64>, rng: &mut dyn RngCore) -> DVector<f64> {
        (**self).grad(x, rng)
    }
    fn cost_and_grad(&self, x: &DVector<f64>, rng: &mut dyn RngCore) -> (f64, DVector<f64>) {
        (**self).cost_and_grad(x, rng)
    }
    fn noise(&self) -> NoiseModel {
        (**self).noise()
    }
    fn exact_cost(&self, x: &DVector<f64>) -> Option<f64> {
        (**self).exact_cost(x)
    }
    fn exact_grad(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        (**self).exact_grad(x)
    }
    fn exact_hessian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        (**self).exact_hessian(x)
    }
}

/// A deterministic objective with analytic derivatives.
pub trait SmoothFunction {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64>;
}

/// `f(x) = ½ (x - x*)ᵀ A (x - x*)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    pub a: DMatrix<f64>,
    pub minimizer: DVector<f64>,
}

impl Quadratic {
    pub fn new(a: DMatrix<f64>) -> Self {
        let n = a.nrows();
        Self {
            a,
            minimizer: DVector::zeros(n),
        }
    }
}

impl SmoothFunction for Quadratic {
    fn dim(&self) -> usize {
        self.a.nrows()
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        let d = x - &self.minimizer;
        0.5 * d.dot(&(&self.a * &d))
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * (x - &self.minimizer)
    }
    fn hessian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.a.clone()
    }
}

/// `f(x) = 4(x-6)² + e^{1.2x-5} + 10 - 10 sin(1.2x)`.
pub fn toy1d_f(x: f64) -> f64 {
    4.0 * (x - 6.0).powi(2) + (1.2 * x - 5.0).exp() + 10.0 - 10.0 * (1.2 * x).sin()
}

pub fn toy1d_grad(x: f64) -> f64 {
    8.0 * (x - 6.0) + 1.2 * (1.2 * x - 5.0).exp() - 12.0 * (1.2 * x).cos()
}

pub fn toy1d_hess(x: f64) -> f64 {
    8.0 + 1.44 * (1.2 * x - 5.0).exp() + 14.4 * (1.2 * x).sin()
}

/// The scalar test function [`toy1d_f`] as a [`SmoothFunction`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Toy1d;

impl SmoothFunction for Toy1d {
    fn dim(&self) -> usize {
        1
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        toy1d_f(x[0])
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, toy1d_grad(x[0]))
    }
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, toy1d_hess(x[0]))
    }
}

/// Wraps a [`SmoothFunction`] with additive Gaussian cost and gradient noise.
#[derive(Debug, Clone)]
pub struct AnalyticOracle<F> {
    function: F,
    cost_bias: f64,
    cost_std: f64,
    grad_cov: DMatrix<f64>,
    grad_factor: DMatrix<f64>,
}

impl<F: SmoothFunction> AnalyticOracle<F> {
    /// Noise-free oracle.
    pub fn exact(function: F) -> Self {
        let n = function.dim();
        Self::new(function, 0.0, 0.0, DMatrix::zeros(n, n)).expect("zero noise is valid")
    }

    pub fn new(function: F, cost_bias: f64, cost_var: f64, grad_cov: DMatrix<f64>) -> Result<Self> {
        let n = function.dim();
        if grad_cov.nrows() != n || grad_cov.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: grad_cov.nrows(),
            });
        }
        if !(cost_var >= 0.0) {
            return Err(Error::InvalidConfig("cost variance must be non-negative"));
        }
        let grad_factor = psd_sqrt(&grad_cov);
        Ok(Self {
            function,
            cost_bias,
            cost_std: cost_var.sqrt(),
            grad_cov,
            grad_factor,
        })
    }

    pub fn function(&self) -> &F {
        &self.function
    }
}

impl<F: SmoothFunction> NoisyOracle for AnalyticOracle<F> {
    fn dim(&self) -> usize {
        self.function.dim()
    }

    fn cost(&self, x: &DVector<f64>, rng: &mut dyn RngCore) -> f64 {
        let e: f64 = StandardNormal.sample(&mut *rng);
        self.function.value(x) + self.cost_bias + self.cost_std * e
    }

    fn grad(&self, x: &DVector<f64>, rng: &mut dyn RngCore) -> DVector<f64> {
        self.function.gradient(x) + gaussian_draw(&self.grad_factor, rng)
    }

    fn noise(&self) -> NoiseModel {
        NoiseModel {
            cost_bias: self.cost_bias,
            cost_var: self.cost_std * self.cost_std,
            grad_cov: Some(self.grad_cov.clone()),
        }
    }

    fn exact_cost(&self, x: &DVector<f64>) -> Option<f64> {
        Some(self.function.value(x))
    }

    fn exact_grad(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        Some(self.function.gradient(x))
    }

    fn exact_hessian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(self.function.hessian(x))
    }
}

/// The oracle in coordinates `z = s ⊙ x`, i.e. `f_z(z) = f(z ⊘ s)`.
///
/// Running the optimiser on `f_z` is a diagonal preconditioning of the
/// original problem; gradients scale by `1/s`, Hessians by `1/(s sᵀ)`.
#[derive(Debug, Clone)]
pub struct Rescaled<O> {
    inner: O,
    scale: DVector<f64>,
}

impl<O: NoisyOracle> Rescaled<O> {
    pub fn new(inner: O, scale: DVector<f64>) -> Result<Self> {
        if scale.len() != inner.dim() {
            return Err(Error::DimensionMismatch {
                expected: inner.dim(),
                got: scale.len(),
            });
        }
        if scale.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidConfig("scales must be positive and finite"));
        }
        Ok(Self { inner, scale })
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }

    pub fn scale(&self) -> &DVector<f64> {
        &self.scale
    }

    /// `x = z ⊘ s`.
    pub fn to_inner(&self, z: &DVector<f64>) -> DVector<f64> {
        z.component_div(&self.scale)
    }

    /// `z = s ⊙ x`.
    pub fn from_inner(&self, x: &DVector<f64>) -> DVector<f64> {
        x.component_mul(&self.scale)
    }

    fn grad_out(&self, g: DVector<f64>) -> DVector<f64> {
        g.component_div(&self.scale)
    }

    fn matrix_out(&self, m: DMatrix<f64>) -> DMatrix<f64> {
        let inv = self.scale.map(|s| 1.0 / s);
        DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * inv[i] * inv[j])
    }
}

impl<O: NoisyOracle> NoisyOracle for Rescaled<O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn cost(&self, z: &DVector<f64>, rng: &mut dyn RngCore) -> f64 {
        self.inner.cost(&self.to_inner(z), rng)
    }

    fn grad(&self, z: &DVector<f64>, rng: &mut dyn RngCore) -> DVector<f64> {
        self.grad_out(self.inner.grad(&self.to_inner(z), rng))
    }

    fn cost_and_grad(&self, z: &DVector<f64>, rng: &mut dyn RngCore) -> (f64, DVector<f64>) {
        let (f, g) = self.inner.cost_and_grad(&self.to_inner(z), rng);
        (f, self.grad_out(g))
    }

    fn noise(&self) -> NoiseModel {
        let n = self.inner.noise();
        NoiseModel {
            grad_cov: n.grad_cov.map(|r| self.matrix_out(r)),
            ..n
        }
    }

    fn exact_cost(&self, z: &DVector<f64>) -> Option<f64> {
        self.inner.exact_cost(&self.to_inner(z))
    }

    fn exact_grad(&self, z: &DVector<f64>) -> Option<DVector<f64>> {
        self.inner
            .exact_grad(&self.to_inner(z))
            .map(|g| self.grad_out(g))
    }

    fn exact_hessian(&self, z: &DVector<f64>) -> Option<DMatrix<f64>> {
        self.inner
            .exact_hessian(&self.to_inner(z))
            .map(|h| self.matrix_out(h))
    }
}

/// Sample covariance of `draws` gradient evaluations at `x`.
pub fn estimate_gradient_noise<O: NoisyOracle + ?Sized>(
    oracle: &O,
    x: &DVector<f64>,
    draws: usize,
    rng: &mut dyn RngCore,
) -> Result<DMatrix<f64>> {
    if draws < 2 {
        return Err(Error::InvalidConfig(
            "need at least 2 draws for a covariance",
        ));
    }
    let n = oracle.dim();
    let samples: alloc::vec::Vec<DVector<f64>> = (0..draws).map(|_| oracle.grad(x, rng)).collect();
    if samples.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFiniteGradient(0));
    }
    let mean = samples.iter().fold(DVector::zeros(n), |acc, g| acc + g) / draws as f64;
    let mut cov = DMatrix::zeros(n, n);
    for g in &samples {
        let d = g - &mean;
        cov += &d * d.transpose();
    }
    Ok(cov / (draws - 1) as f64)
}
