//! Gaussian-process model of the half-vectorised Hessian `h(x) = vech(∇²f(x))`,
//! conditioned on noisy gradient differences.
//!
//! Every observation pair `k` relates the iterate step `s_k = x_{k+1} - x_k`
//! to the gradient difference `y_k = g_{k+1} - g_k` through
//!
//! ```text
//! y_k = D̄_k ∫₀¹ h(x_k + τ s_k) dτ + w_k,    w_k = v_k - v_{k+1}
//! ```
//!
//! where `D̄_k = (s_kᵀ ⊗ I) D`. In [`MeasurementMode::Full`] the line integral
//! is kept and evaluated by quadrature; [`MeasurementMode::Simplified`]
//! replaces it with `h(x_k)`. Because consecutive `w_k` share a gradient noise
//! term, the noise covariance between pairs `i` and `j` is `R δ_{ij}` with
//! `δ = 2` on the diagonal, `-1` for neighbours and `0` otherwise.

mod kernel;

use alloc::collections::VecDeque;
use alloc::sync::Arc;
use core::fmt;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

pub use kernel::{kernel_line_integral_cross, kernel_line_integral_double, SeKernel};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::symtools::{dbar, half_dim, unvech, DuplicationMatrix, SymVec};

pub const DEFAULT_QUAD_NODES: usize = 16;

/// One iterate step and the matching gradient difference.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationPair {
    index: usize,
    x_start: DVector<f64>,
    x_end: DVector<f64>,
    s: DVector<f64>,
    y: DVector<f64>,
}

impl ObservationPair {
    pub fn new(
        index: usize,
        x_start: DVector<f64>,
        x_end: DVector<f64>,
        y: DVector<f64>,
    ) -> Result<Self> {
        let n = x_start.len();
        for len in [x_end.len(), y.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: len,
                });
            }
        }
        let s = &x_end - &x_start;
        Ok(Self {
            index,
            x_start,
            x_end,
            s,
            y,
        })
    }

    /// Pair from two iterates and the gradients observed at them.
    pub fn from_gradients(
        index: usize,
        x_start: DVector<f64>,
        x_end: DVector<f64>,
        g_start: &DVector<f64>,
        g_end: &DVector<f64>,
    ) -> Result<Self> {
        if g_start.len() != g_end.len() {
            return Err(Error::DimensionMismatch {
                expected: g_start.len(),
                got: g_end.len(),
            });
        }
        Self::new(index, x_start, x_end, g_end - g_start)
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn x_start(&self) -> &DVector<f64> {
        &self.x_start
    }

    pub fn x_end(&self) -> &DVector<f64> {
        &self.x_end
    }

    pub fn s(&self) -> &DVector<f64> {
        &self.s
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn dim(&self) -> usize {
        self.s.len()
    }
}

pub type MeanFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

/// Prior mean function `μ(x)` of the `vech`-Hessian.
#[derive(Clone)]
pub enum PriorMean {
    Constant(SymVec),
    Custom(MeanFn),
}

impl fmt::Debug for PriorMean {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorMean::Constant(h) => f.debug_tuple("Constant").field(h).finish(),
            PriorMean::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl PriorMean {
    /// `μ(x) = vech(h0 I)`.
    pub fn scaled_identity(n: usize, h0: f64) -> Self {
        PriorMean::Constant(SymVec::scaled_identity(n, h0))
    }

    pub fn eval(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            PriorMean::Constant(h) => h.as_vector().clone(),
            PriorMean::Custom(f) => f(x),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GpPrior {
    pub mean: PriorMean,
    pub kernel: SeKernel,
}

impl GpPrior {
    /// `M = m I`, `V = v I`, `μ = vech(h0 I)`.
    pub fn isotropic(n: usize, m: f64, v: f64, h0: f64) -> Result<Self> {
        Ok(Self {
            mean: PriorMean::scaled_identity(n, h0),
            kernel: SeKernel::isotropic(n, m, v)?,
        })
    }

    pub fn mean_at(&self, x: &DVector<f64>) -> DVector<f64> {
        self.mean.eval(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeasurementMode {
    /// Line-integral measurement model evaluated by quadrature.
    #[default]
    Full,
    /// Secant approximation: the Hessian is taken constant along each step.
    Simplified,
}

/// Posterior of `h(x)` given the current window.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianPosterior {
    pub phi: DVector<f64>,
    pub sigma: DMatrix<f64>,
}

/// Noise covariance block between gradient differences `i` and `j`.
pub fn noise_block(r: &DMatrix<f64>, i: usize, j: usize) -> DMatrix<f64> {
    let delta = match i.abs_diff(j) {
        0 => 2.0,
        1 => -1.0,
        _ => 0.0,
    };
    r * delta
}

#[derive(Debug, Clone)]
struct Stored {
    pair: ObservationPair,
    dbar: DMatrix<f64>,
}

/// GP over `vech(∇²f)` with a sliding window of the most recent `p + 1` pairs.
#[derive(Debug, Clone)]
pub struct HessianGp {
    prior: GpPrior,
    noise_cov: DMatrix<f64>,
    memory: usize,
    mode: MeasurementMode,
    rule: GaussLegendre,
    dup: DuplicationMatrix,
    window: VecDeque<Stored>,
}

impl HessianGp {
    /// `memory` is `p`; the window keeps at most `p + 1` pairs.
    pub fn new(
        prior: GpPrior,
        noise_cov: DMatrix<f64>,
        memory: usize,
        mode: MeasurementMode,
    ) -> Result<Self> {
        let n = prior.kernel.input_dim();
        if noise_cov.nrows() != n || noise_cov.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: noise_cov.nrows(),
            });
        }
        if noise_cov.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self {
            prior,
            noise_cov,
            memory,
            mode,
            rule: GaussLegendre::new(DEFAULT_QUAD_NODES),
            dup: DuplicationMatrix::new(n),
            window: VecDeque::new(),
        })
    }

    pub fn with_quad_nodes(mut self, nodes: usize) -> Result<Self> {
        if nodes < 2 {
            return Err(Error::InvalidConfig("quadrature needs at least 2 nodes"));
        }
        self.rule = GaussLegendre::new(nodes);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dup.dim()
    }

    pub fn prior(&self) -> &GpPrior {
        &self.prior
    }

    pub fn noise_cov(&self) -> &DMatrix<f64> {
        &self.noise_cov
    }

    pub fn mode(&self) -> MeasurementMode {
        self.mode
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn quad_nodes(&self) -> usize {
        self.rule.len()
    }

    pub fn window(&self) -> impl ExactSizeIterator<Item = &ObservationPair> + '_ {
        self.window.iter().map(|s| &s.pair)
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    pub fn clear(&mut self) {
        self.window.clear();
    }

    /// Appends `pair`, evicting the oldest pair once more than `p + 1` are held.
    pub fn push_observation(&mut self, pair: ObservationPair) -> Result<()> {
        if pair.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: pair.dim(),
            });
        }
        if let Some(last) = self.window.back() {
            let last = last.pair.index;
            if pair.index != last + 1 {
                return Err(Error::NonConsecutiveIndex {
                    last,
                    got: pair.index,
                });
            }
        }
        let dbar = dbar(&pair.s, &self.dup)?;
        self.window.push_back(Stored { pair, dbar });
        while self.window.len() > self.memory + 1 {
            self.window.pop_front();
        }
        Ok(())
    }

    /// `m_i = E[y_i]`.
    pub fn measurement_mean(&self, pair: &ObservationPair) -> Result<DVector<f64>> {
        let dbar = dbar(&pair.s, &self.dup)?;
        Ok(self.mean_with_dbar(pair, &dbar))
    }

    fn mean_with_dbar(&self, pair: &ObservationPair, dbar: &DMatrix<f64>) -> DVector<f64> {
        let mu = match (&self.prior.mean, self.mode) {
            (PriorMean::Constant(h), _) => h.as_vector().clone(),
            (mean, MeasurementMode::Simplified) => mean.eval(&pair.x_start),
            (mean, MeasurementMode::Full) => {
                let mut acc = DVector::zeros(half_dim(self.dim()));
                for (t, w) in self.rule.iter() {
                    let point = &pair.x_start + &pair.s * t;
                    acc.axpy(w, &mean.eval(&point), 1.0);
                }
                acc
            }
        };
        dbar * mu
    }

    /// Scalar kernel factor between two pairs; the `d_h x d_h` kernel block is this times `M`.
    fn pair_factor(&self, a: &ObservationPair, b: &ObservationPair) -> f64 {
        match self.mode {
            MeasurementMode::Simplified => self.prior.kernel.correlation(&a.x_start, &b.x_start),
            MeasurementMode::Full => self.prior.kernel.double_factor(a, b, &self.rule),
        }
    }

    fn point_factor(&self, x: &DVector<f64>, b: &ObservationPair) -> f64 {
        match self.mode {
            MeasurementMode::Simplified => self.prior.kernel.correlation(x, &b.x_start),
            MeasurementMode::Full => self.prior.kernel.cross_factor(x, b, &self.rule),
        }
    }

    /// Covariance `K_{ℓ,ℓ}` of the stacked gradient differences in the window.
    pub fn gram(&self) -> DMatrix<f64> {
        let n = self.dim();
        let w = self.window.len();
        let m = self.prior.kernel.output_cov();
        let dm: alloc::vec::Vec<DMatrix<f64>> = self.window.iter().map(|st| &st.dbar * m).collect();
        let mut k = DMatrix::zeros(n * w, n * w);
        for (i, si) in self.window.iter().enumerate() {
            for (j, sj) in self.window.iter().enumerate().skip(i) {
                let factor = self.pair_factor(&si.pair, &sj.pair);
                let mut block = &dm[i] * sj.dbar.transpose() * factor;
                block += noise_block(&self.noise_cov, si.pair.index, sj.pair.index);
                k.view_mut((i * n, j * n), (n, n)).copy_from(&block);
                if i != j {
                    k.view_mut((j * n, i * n), (n, n))
                        .copy_from(&block.transpose());
                }
            }
        }
        k
    }

    /// Cross-covariance `K_{x,ℓ}` between `h(x)` and the window.
    fn cross(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.dim();
        let dh = half_dim(n);
        let m = self.prior.kernel.output_cov();
        let mut kx = DMatrix::zeros(dh, n * self.window.len());
        for (j, st) in self.window.iter().enumerate() {
            let block = m * st.dbar.transpose() * self.point_factor(x, &st.pair);
            kx.view_mut((0, j * n), (dh, n)).copy_from(&block);
        }
        kx
    }

    fn residual(&self) -> DVector<f64> {
        let n = self.dim();
        let mut r = DVector::zeros(n * self.window.len());
        for (j, st) in self.window.iter().enumerate() {
            let m = self.mean_with_dbar(&st.pair, &st.dbar);
            r.rows_mut(j * n, n).copy_from(&(&st.pair.y - m));
        }
        r
    }

    pub fn posterior(&self, x: &DVector<f64>) -> Result<HessianPosterior> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let mu = self.prior.mean_at(x);
        let prior_cov = self.prior.kernel.output_cov().clone();
        if self.window.is_empty() {
            return Ok(HessianPosterior {
                phi: mu,
                sigma: prior_cov,
            });
        }
        let chol = factor_gram(self.gram())?;
        let kx = self.cross(x);
        let alpha = chol.solve(&self.residual());
        let phi = mu + &kx * alpha;
        let v = chol.solve(&kx.transpose());
        let mut sigma = prior_cov - &kx * v;
        symmetrize(&mut sigma);
        Ok(HessianPosterior { phi, sigma })
    }

    /// Posterior mean of the Hessian as a full symmetric matrix.
    pub fn hessian_mean(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let post = self.posterior(x)?;
        Ok(unvech(&SymVec::new(post.phi)?))
    }
}

fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for j in 0..n {
        for i in j + 1..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// Cholesky of the gram matrix. Falls back to diagonal jitter of
/// `1e-10` then `1e-6` times the mean diagonal before giving up.
fn factor_gram(k: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    if let Some(c) = k.clone().cholesky() {
        return Ok(c);
    }
    let mean_diag = k.diagonal().mean().abs().max(f64::MIN_POSITIVE);
    for scale in [1e-10, 1e-6] {
        let mut jittered = k.clone();
        for i in 0..jittered.nrows() {
            jittered[(i, i)] += scale * mean_diag;
        }
        if let Some(c) = jittered.cholesky() {
            return Ok(c);
        }
    }
    Err(Error::GramNotPositiveDefinite)
}
