//! Negative log-likelihood oracles in unconstrained coordinates, where the
//! variances `q` and `r` are replaced by `ln q` and `ln r`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use super::{
    bootstrap_pf, kalman_loglik_grad, natural_grad_to_unconstrained, to_natural, LgssModel,
    NlBenchModel, ParticleFilterConfig, ParticleFilterEstimate,
};
use crate::error::Result;
use crate::oracle::{NoiseModel, NoisyOracle};

/// Log-variances are clamped here, i.e. variances never drop below `e^-30`.
pub const LOG_VARIANCE_FLOOR: f64 = -30.0;

fn noise_vector(n: usize, std: f64, rng: &mut dyn RngCore) -> DVector<f64> {
    DVector::from_fn(n, |_, _| {
        let z: f64 = StandardNormal.sample(&mut *rng);
        std * z
    })
}

/// Exact Kalman negative log-likelihood with injected Gaussian noise on the
/// cost (`N(0, σ²)`) and on every gradient component (`N(0, σ_g² I)`).
#[derive(Debug, Clone)]
pub struct LgssOracle {
    model: LgssModel,
    y: Vec<f64>,
    cost_noise_std: f64,
    grad_noise_std: f64,
}

impl LgssOracle {
    /// Unit injected noise on cost and gradient.
    pub fn new(model: LgssModel, y: Vec<f64>) -> Self {
        Self::with_noise(model, y, 1.0, 1.0)
    }

    pub fn with_noise(
        model: LgssModel,
        y: Vec<f64>,
        cost_noise_std: f64,
        grad_noise_std: f64,
    ) -> Self {
        Self {
            model,
            y,
            cost_noise_std,
            grad_noise_std,
        }
    }

    pub fn data(&self) -> &[f64] {
        &self.y
    }

    /// Exact negative log-likelihood and gradient at unconstrained `u`.
    pub fn evaluate(&self, u: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let theta = to_natural(&self.model, u.as_slice());
        let (ll, grad) = kalman_loglik_grad(&self.model, &theta, &self.y)?;
        let mut g = grad.to_vec();
        natural_grad_to_unconstrained(&self.model, u.as_slice(), &theta, &mut g);
        Ok((-ll, -DVector::from_vec(g)))
    }

    fn exact(&self, u: &DVector<f64>) -> (f64, DVector<f64>) {
        self.evaluate(u)
            .unwrap_or_else(|_| (f64::NAN, DVector::from_element(4, f64::NAN)))
    }
}

impl NoisyOracle for LgssOracle {
    fn dim(&self) -> usize {
        4
    }

    fn cost(&self, x: &DVector<f64>, rng: &mut dyn RngCore) -> f64 {
        let eta: f64 = StandardNormal.sample(&mut *rng);
        self.exact(x).0 + self.cost_noise_std * eta
    }

    fn grad(&self, x: &DVector<f64>, rng: &mut dyn RngCore) -> DVector<f64> {
        let (_, g) = self.exact(x);
        g + noise_vector(4, self.grad_noise_std, rng)
    }

    fn cost_and_grad(&self, x: &DVector<f64>, rng: &mut dyn RngCore) -> (f64, DVector<f64>) {
        let (f, g) = self.exact(x);
        let noise = noise_vector(4, self.grad_noise_std, rng);
        let eta: f64 = StandardNormal.sample(&mut *rng);
        (f + self.cost_noise_std * eta, g + noise)
    }

    fn noise(&self) -> NoiseModel {
        NoiseModel {
            cost_bias: 0.0,
            cost_var: self.cost_noise_std * self.cost_noise_std,
            grad_cov: Some(DMatrix::identity(4, 4) * (self.grad_noise_std * self.grad_noise_std)),
        }
    }

    fn exact_cost(&self, x: &DVector<f64>) -> Option<f64> {
        self.evaluate(x).ok().map(|(f, _)| f)
    }

    fn exact_grad(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        self.evaluate(x).ok().map(|(_, g)| g)
    }
}

/// Particle-filter negative log-likelihood and score for the nonlinear benchmark.
#[derive(Debug, Clone)]
pub struct NlBenchOracle {
    model: NlBenchModel,
    y: Vec<f64>,
    pf: ParticleFilterConfig,
}

impl NlBenchOracle {
    pub fn new(model: NlBenchModel, y: Vec<f64>, pf: ParticleFilterConfig) -> Self {
        Self { model, y, pf }
    }

    pub fn data(&self) -> &[f64] {
        &self.y
    }

    pub fn pf_config(&self) -> &ParticleFilterConfig {
        &self.pf
    }

    /// One particle-filter run at unconstrained `u`, score mapped to `u`.
    pub fn estimate(
        &self,
        u: &DVector<f64>,
        rng: &mut dyn RngCore,
    ) -> Result<ParticleFilterEstimate> {
        let theta = to_natural(&self.model, u.as_slice());
        let mut est = bootstrap_pf(&self.model, &theta, &self.y, &self.pf, rng)?;
        natural_grad_to_unconstrained(&self.model, u.as_slice(), &theta, &mut est.score);
        Ok(est)
    }
}

impl NoisyOracle for NlBenchOracle {
    fn dim(&self) -> usize {
        6
    }

    fn cost(&self, x: &DVector<f64>, rng: &mut dyn RngCore) -> f64 {
        self.estimate(x, rng).map(|e| -e.loglik).unwrap_or(f64::NAN)
    }

    fn grad(&self, x: &DVector<f64>, rng: &mut dyn RngCore) -> DVector<f64> {
        self.cost_and_grad(x, rng).1
    }

    fn cost_and_grad(&self, x: &DVector<f64>, rng: &mut dyn RngCore) -> (f64, DVector<f64>) {
        match self.estimate(x, rng) {
            Ok(e) => (-e.loglik, -DVector::from_vec(e.score)),
            Err(_) => (f64::NAN, DVector::from_element(6, f64::NAN)),
        }
    }

    fn noise(&self) -> NoiseModel {
        NoiseModel {
            cost_bias: 0.0,
            cost_var: f64::NAN,
            grad_cov: None,
        }
    }
}
