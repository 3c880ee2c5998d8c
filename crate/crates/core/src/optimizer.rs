//! The stochastic quasi-Newton iteration.
//!
//! Each iteration draws one gradient `g_k`, forms the pair `(s_{k-1}, y_{k-1})`,
//! computes `p_k = -(H_k + λ_k I)⁻¹ g_k` from the GP posterior mean and takes
//! the step chosen by the stochastic line search.
//!
//! `H_k` must not depend on `g_k`, so it is conditioned on pairs up to
//! index `k - 2` only. The pair formed at iteration `k` is held back and
//! enters the GP window one iteration later.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;

use crate::direction::{regularized_direction, DEFAULT_EPSILON};
use crate::error::{Error, Result};
use crate::gp::{GpPrior, HessianGp, MeasurementMode, ObservationPair, DEFAULT_QUAD_NODES};
use crate::linesearch::{stochastic_backtrack, LineSearchConfig};
use crate::oracle::NoisyOracle;
use crate::streams::{SeedTree, StreamId};
use crate::symtools::{unvech, SymVec};

#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    pub k_max: usize,
    /// Smallest eigenvalue enforced on `H_k + λ_k I`.
    pub epsilon: f64,
    /// GP memory `p`; the window holds `p + 1` pairs.
    pub memory_p: usize,
    pub prior: GpPrior,
    pub mode: MeasurementMode,
    pub quad_nodes: usize,
    /// Gradient-noise covariance `R`.
    pub noise_cov: DMatrix<f64>,
    pub line_search: LineSearchConfig,
    pub seed: u64,
}

impl OptimizerConfig {
    /// Isotropic defaults: `M = 10 I`, `V = I`, `μ = vech(I)`, `p = 5`.
    pub fn with_defaults(n: usize, noise_cov: DMatrix<f64>) -> Result<Self> {
        Ok(Self {
            k_max: 300,
            epsilon: DEFAULT_EPSILON,
            memory_p: 5,
            prior: GpPrior::isotropic(n, 10.0, 1.0, 1.0)?,
            mode: MeasurementMode::Full,
            quad_nodes: DEFAULT_QUAD_NODES,
            noise_cov,
            line_search: LineSearchConfig::default(),
            seed: 0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.line_search.validate()?;
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig("epsilon must be positive"));
        }
        if self.quad_nodes < 2 {
            return Err(Error::InvalidConfig("quadrature needs at least 2 nodes"));
        }
        Ok(())
    }

    fn build_gp(&self) -> Result<HessianGp> {
        HessianGp::new(
            self.prior.clone(),
            self.noise_cov.clone(),
            self.memory_p,
            self.mode,
        )?
        .with_quad_nodes(self.quad_nodes)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRow {
    pub k: usize,
    pub x: DVector<f64>,
    pub f_hat: f64,
    pub g_norm: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub ls_trials: usize,
    pub satisfied: bool,
    /// Search direction `p_k`.
    pub direction: DVector<f64>,
    /// Index range of the pairs `H_k` was conditioned on.
    pub window: Option<(usize, usize)>,
    /// The GP failed and the scaled-gradient direction was used.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Completed,
    Failed(Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub rows: Vec<IterationRow>,
    pub final_x: DVector<f64>,
    pub status: RunStatus,
}

impl RunRecord {
    pub fn iterations(&self) -> usize {
        self.rows.len()
    }

    pub fn fallbacks(&self) -> usize {
        self.rows.iter().filter(|r| r.fallback).count()
    }
}

/// Mean diagonal of the prior mean at `x`, used to scale the fallback direction.
fn prior_curvature(prior: &GpPrior, x: &DVector<f64>, epsilon: f64) -> f64 {
    let mu = prior.mean_at(x);
    let h0 = SymVec::new(mu)
        .map(|h| unvech(&h).diagonal().mean())
        .unwrap_or(1.0);
    if h0.is_finite() && h0 > epsilon {
        h0
    } else {
        1.0
    }
}

/// Runs the optimiser with streams derived from `cfg.seed`.
pub fn run<O: NoisyOracle + ?Sized>(
    oracle: &O,
    x0: DVector<f64>,
    cfg: &OptimizerConfig,
) -> Result<RunRecord> {
    let tree = SeedTree::new(cfg.seed);
    let mut grad_rng = tree.stream(StreamId::GRADIENT);
    let mut cost_rng = tree.stream(StreamId::COST);
    run_with_rngs(oracle, x0, cfg, &mut grad_rng, &mut cost_rng)
}

/// As [`run`], drawing gradients (and the cost at each iterate) from
/// `grad_rng` and line-search costs from `cost_rng`.
pub fn run_with_rngs<O: NoisyOracle + ?Sized>(
    oracle: &O,
    x0: DVector<f64>,
    cfg: &OptimizerConfig,
    grad_rng: &mut dyn RngCore,
    cost_rng: &mut dyn RngCore,
) -> Result<RunRecord> {
    cfg.validate()?;
    if x0.len() != oracle.dim() {
        return Err(Error::DimensionMismatch {
            expected: oracle.dim(),
            got: x0.len(),
        });
    }
    let mut gp = cfg.build_gp()?;
    let mut rows = Vec::with_capacity(cfg.k_max);
    let mut x = x0;
    let mut prev: Option<(DVector<f64>, DVector<f64>)> = None;
    let mut held_back: Option<ObservationPair> = None;
    let mut status = RunStatus::Completed;

    for k in 0..cfg.k_max {
        let (f_hat, g) = oracle.cost_and_grad(&x, grad_rng);
        if g.iter().any(|v| !v.is_finite()) {
            status = RunStatus::Failed(Error::NonFiniteGradient(k));
            break;
        }
        if let Some((x_prev, g_prev)) = prev.take() {
            let pair = ObservationPair::from_gradients(k - 1, x_prev, x.clone(), &g_prev, &g)?;
            if let Some(older) = held_back.replace(pair) {
                gp.push_observation(older)?;
            }
        }

        let window = match (gp.window().next(), gp.window().last()) {
            (Some(a), Some(b)) => Some((a.index(), b.index())),
            _ => None,
        };
        let direction = gp
            .hessian_mean(&x)
            .and_then(|h| regularized_direction(&h, &g, cfg.epsilon));
        let (p, lambda, fallback) = match direction {
            Ok(d) => (d.p, d.lambda, false),
            Err(_) => {
                let h0 = prior_curvature(&cfg.prior, &x, cfg.epsilon);
                (-&g / h0, 0.0, true)
            }
        };

        let ls = stochastic_backtrack(
            k.max(1),
            &x,
            &p,
            &g,
            f_hat,
            oracle,
            &cfg.line_search,
            cost_rng,
        );
        let x_next = &x + &p * ls.alpha;
        rows.push(IterationRow {
            k,
            x: x.clone(),
            f_hat,
            g_norm: g.norm(),
            alpha: ls.alpha,
            lambda,
            ls_trials: ls.trials,
            satisfied: ls.satisfied,
            direction: p,
            window,
            fallback,
        });
        prev = Some((x, g));
        x = x_next;
    }

    Ok(RunRecord {
        rows,
        final_x: x,
        status,
    })
}
