//! Bootstrap particle filter with a path-space score estimate.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // inherent methods shadow it when std is linked
use num_traits::Float;
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};

use super::ScalarSsm;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Resampling {
    #[default]
    Multinomial,
    Systematic,
}

/// Latent parametrisation used by the Fisher-identity score accumulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreMethod {
    /// Accumulate `∇θ log f(x_t | x_{t-1}) + ∇θ log g(y_t | x_t)` along each
    /// ancestral path. Requires `q > 0` and degrades as `q → 0`.
    #[default]
    StateSpace,
    /// Treat `(x_0, ε_{1:N})` with `x_t = F(x_{t-1}) + √q ε_t` as the latent
    /// path; each particle carries the tangent `∂x_t/∂θ` and accumulates the
    /// total derivative of `log g(y_t | x_t)`. Stays well conditioned for
    /// nearly deterministic dynamics.
    NoiseSpace,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleFilterConfig {
    pub particles: usize,
    pub resampling: Resampling,
    pub score: ScoreMethod,
}

impl Default for ParticleFilterConfig {
    fn default() -> Self {
        Self {
            particles: 50,
            resampling: Resampling::Multinomial,
            score: ScoreMethod::StateSpace,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleFilterEstimate {
    /// Estimate of `log p(y_{1:N} | θ)`; its exponential is unbiased.
    pub loglik: f64,
    /// Estimate of `∇θ log p(y_{1:N} | θ)` in natural coordinates.
    pub score: Vec<f64>,
    pub particles: usize,
    /// Effective sample size after weighting at each step.
    pub ess: Vec<f64>,
}

fn normalize(logw: &[f64], out: &mut [f64]) -> Option<f64> {
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let mut sum = 0.0;
    for (o, &lw) in out.iter_mut().zip(logw) {
        *o = (lw - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
    Some(max + sum.ln())
}

fn resample(weights: &[f64], scheme: Resampling, rng: &mut dyn RngCore, ancestors: &mut [usize]) {
    let m = ancestors.len();
    let u: Vec<f64> = match scheme {
        Resampling::Multinomial => {
            let mut u: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
            u.sort_unstable_by(|a, b| a.partial_cmp(b).expect("uniform draws are finite"));
            u
        }
        Resampling::Systematic => {
            let start: f64 = rng.random::<f64>() / m as f64;
            (0..m).map(|i| start + i as f64 / m as f64).collect()
        }
    };
    let mut cum = 0.0;
    let mut j = 0;
    for (i, &w) in weights.iter().enumerate() {
        cum += w;
        while j < m && u[j] < cum {
            ancestors[j] = i;
            j += 1;
        }
    }
    // rounding can leave cum slightly below 1
    let last = weights
        .iter()
        .rposition(|&w| w > 0.0)
        .unwrap_or(weights.len() - 1);
    for a in &mut ancestors[j..] {
        *a = last;
    }
}

/// Runs the bootstrap filter at natural parameters `theta`.
///
/// The process-noise derivative is reported as zero when `q = 0`, where it is
/// undefined.
pub fn bootstrap_pf<M: ScalarSsm + ?Sized>(
    model: &M,
    theta: &[f64],
    y: &[f64],
    cfg: &ParticleFilterConfig,
    rng: &mut dyn RngCore,
) -> Result<ParticleFilterEstimate> {
    let np = model.n_params();
    if theta.len() != np {
        return Err(Error::DimensionMismatch {
            expected: np,
            got: theta.len(),
        });
    }
    let m = cfg.particles;
    if m < 2 {
        return Err(Error::InvalidConfig(
            "particle filter needs at least 2 particles",
        ));
    }
    let (qi, ri) = (model.q_index(), model.r_index());
    let (q, r) = (theta[qi], theta[ri]);
    if !(r > 0.0) || !(q >= 0.0) {
        return Err(Error::InvalidConfig(
            "particle filter needs q >= 0 and r > 0",
        ));
    }
    if cfg.score == ScoreMethod::StateSpace && !(q > 0.0) {
        return Err(Error::InvalidConfig("state-space score needs q > 0"));
    }
    let q_std = q.sqrt();
    let d_qstd = if q > 0.0 { 0.5 / q_std } else { 0.0 };
    let half_ln_2pi_r = 0.5 * (2.0 * PI * r).ln();
    let ln_m = (m as f64).ln();

    let (m0, p0) = model.initial();
    let p0_std = p0.max(0.0).sqrt();
    let mut x: Vec<f64> = (0..m)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut *rng);
            m0 + p0_std * z
        })
        .collect();
    let mut x_new = vec![0.0; m];
    let mut acc = vec![0.0; m * np];
    let mut acc_new = vec![0.0; m * np];
    let mut tan = vec![0.0; m * np];
    let mut tan_new = vec![0.0; m * np];
    let mut logw = vec![0.0; m];
    let mut weights = vec![1.0 / m as f64; m];
    let mut ancestors: Vec<usize> = (0..m).collect();
    let mut d_f = vec![0.0; np];
    let mut d_g = vec![0.0; np];
    let mut ess = Vec::with_capacity(y.len());
    let mut loglik = 0.0;

    for (idx, &yt) in y.iter().enumerate() {
        let t = idx + 1;
        if t > 1 {
            resample(&weights, cfg.resampling, rng, &mut ancestors);
        }
        for i in 0..m {
            let a = ancestors[i];
            let xp = x[a];
            let eps: f64 = StandardNormal.sample(&mut *rng);
            let mean = model.transition(theta, xp, t - 1);
            let d_fx = model.transition_grad(theta, xp, t - 1, &mut d_f);
            let xn = mean + q_std * eps;
            x_new[i] = xn;

            let row = i * np..(i + 1) * np;
            acc_new[row.clone()].copy_from_slice(&acc[a * np..(a + 1) * np]);
            let acc_i = &mut acc_new[row.clone()];

            let g = model.observation(theta, xn);
            let d_gx = model.observation_grad(theta, xn, &mut d_g);
            let resid = yt - g;
            logw[i] = -half_ln_2pi_r - 0.5 * resid * resid / r;
            if !logw[i].is_finite() {
                logw[i] = f64::NEG_INFINITY;
            }

            match cfg.score {
                ScoreMethod::StateSpace => {
                    let v = xn - mean;
                    for k in 0..np {
                        acc_i[k] += v / q * d_f[k] + resid / r * d_g[k];
                    }
                    acc_i[qi] += -0.5 / q + 0.5 * v * v / (q * q);
                }
                ScoreMethod::NoiseSpace => {
                    let tan_i = &mut tan_new[row];
                    let tan_a = &tan[a * np..(a + 1) * np];
                    for k in 0..np {
                        tan_i[k] = d_f[k] + d_fx * tan_a[k];
                    }
                    tan_i[qi] += eps * d_qstd;
                    for k in 0..np {
                        acc_i[k] += resid / r * (d_g[k] + d_gx * tan_i[k]);
                    }
                }
            }
            acc_i[ri] += -0.5 / r + 0.5 * resid * resid / (r * r);
        }
        core::mem::swap(&mut x, &mut x_new);
        core::mem::swap(&mut acc, &mut acc_new);
        core::mem::swap(&mut tan, &mut tan_new);

        let log_sum = normalize(&logw, &mut weights).ok_or(Error::ParticleDegeneracy(t))?;
        loglik += log_sum - ln_m;
        ess.push(1.0 / weights.iter().map(|w| w * w).sum::<f64>());
    }

    let mut score = vec![0.0; np];
    for (i, w) in weights.iter().enumerate() {
        for k in 0..np {
            score[k] += w * acc[i * np + k];
        }
    }
    if q == 0.0 {
        score[qi] = 0.0;
    }
    Ok(ParticleFilterEstimate {
        loglik,
        score,
        particles: m,
        ess,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn resampling_respects_point_masses() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = [0.0, 1.0, 0.0, 0.0];
        for scheme in [Resampling::Multinomial, Resampling::Systematic] {
            let mut anc = [9usize; 4];
            resample(&w, scheme, &mut rng, &mut anc);
            assert_eq!(anc, [1, 1, 1, 1]);
        }
    }

    #[test]
    fn resampling_frequencies_match_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let w = [0.1, 0.2, 0.3, 0.4];
        let mut counts = [0usize; 4];
        let mut anc = [0usize; 1000];
        for _ in 0..100 {
            resample(&w, Resampling::Multinomial, &mut rng, &mut anc);
            for &a in anc.iter() {
                counts[a] += 1;
            }
        }
        for (c, w) in counts.iter().zip(w) {
            let frac = *c as f64 / 100_000.0;
            assert!((frac - w).abs() < 0.01, "{frac} vs {w}");
        }
    }

    #[test]
    fn systematic_is_sorted_and_balanced() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w = [0.25; 4];
        let mut anc = [0usize; 4];
        resample(&w, Resampling::Systematic, &mut rng, &mut anc);
        assert_eq!(anc, [0, 1, 2, 3]);
    }
}
