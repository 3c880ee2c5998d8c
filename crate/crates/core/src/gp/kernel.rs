use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // inherent methods shadow it when std is linked
use num_traits::Float;

use super::ObservationPair;
use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::symtools::{half_dim, is_symmetric};

/// Squared-exponential kernel over `vech`-Hessian outputs,
/// `κ(x, x') = M exp(-½ (x - x')ᵀ V (x - x'))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeKernel {
    output_cov: DMatrix<f64>,
    inv_length: DMatrix<f64>,
}

fn check_spd(a: &DMatrix<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if !is_symmetric(a, 1e-12) {
        return Err(Error::NotSymmetric);
    }
    a.clone()
        .cholesky()
        .map(|_| ())
        .ok_or(Error::NotPositiveDefinite)
}

impl SeKernel {
    /// `output_cov` is `M` (`d_h x d_h`), `inv_length` is `V` (`n x n`); both SPD.
    pub fn new(output_cov: DMatrix<f64>, inv_length: DMatrix<f64>) -> Result<Self> {
        check_spd(&output_cov)?;
        check_spd(&inv_length)?;
        let n = inv_length.nrows();
        if output_cov.nrows() != half_dim(n) {
            return Err(Error::DimensionMismatch {
                expected: half_dim(n),
                got: output_cov.nrows(),
            });
        }
        Ok(Self {
            output_cov,
            inv_length,
        })
    }

    /// `M = m I`, `V = v I`.
    pub fn isotropic(n: usize, m: f64, v: f64) -> Result<Self> {
        let dh = half_dim(n);
        Self::new(DMatrix::identity(dh, dh) * m, DMatrix::identity(n, n) * v)
    }

    pub fn input_dim(&self) -> usize {
        self.inv_length.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.output_cov.nrows()
    }

    pub fn output_cov(&self) -> &DMatrix<f64> {
        &self.output_cov
    }

    pub fn inv_length(&self) -> &DMatrix<f64> {
        &self.inv_length
    }

    /// The scalar factor `exp(-½ dᵀ V d)` for `d = x - x'`.
    pub fn correlation(&self, x: &DVector<f64>, x2: &DVector<f64>) -> f64 {
        let d = x - x2;
        (-0.5 * d.dot(&(&self.inv_length * &d))).exp()
    }

    pub fn eval(&self, x: &DVector<f64>, x2: &DVector<f64>) -> DMatrix<f64> {
        &self.output_cov * self.correlation(x, x2)
    }

    /// Correlation between `x` and the point `start + t s`.
    fn correlation_on_segment(
        &self,
        x: &DVector<f64>,
        start: &DVector<f64>,
        s: &DVector<f64>,
        t: f64,
    ) -> f64 {
        let d = x - start - s * t;
        (-0.5 * d.dot(&(&self.inv_length * &d))).exp()
    }

    /// Quadrature approximation of `∫₀¹ exp(-½ ‖x - r_j(t)‖²_V) dt`.
    pub(crate) fn cross_factor(
        &self,
        x: &DVector<f64>,
        pair: &ObservationPair,
        rule: &GaussLegendre,
    ) -> f64 {
        if is_point(pair) {
            return self.correlation(x, pair.x_start());
        }
        rule.integrate(|t| self.correlation_on_segment(x, pair.x_start(), pair.s(), t))
    }

    /// Quadrature approximation of `∫₀¹∫₀¹ exp(-½ ‖r_i(τ) - r_j(t)‖²_V) dτ dt`.
    pub(crate) fn double_factor(
        &self,
        a: &ObservationPair,
        b: &ObservationPair,
        rule: &GaussLegendre,
    ) -> f64 {
        if is_point(a) && is_point(b) {
            return self.correlation(a.x_start(), b.x_start());
        }
        // r_i(τ) - r_j(t) = (x_i - x_j) + τ s_i - t s_j; expand the quadratic form once.
        let v = &self.inv_length;
        let d0 = a.x_start() - b.x_start();
        let vd0 = v * &d0;
        let vsa = v * a.s();
        let vsb = v * b.s();
        let c00 = d0.dot(&vd0);
        let caa = a.s().dot(&vsa);
        let cbb = b.s().dot(&vsb);
        let cab = a.s().dot(&vsb);
        let c0a = d0.dot(&vsa);
        let c0b = d0.dot(&vsb);
        rule.integrate2(|tau, t| {
            let q = c00 + tau * tau * caa + t * t * cbb + 2.0 * tau * c0a
                - 2.0 * t * c0b
                - 2.0 * tau * t * cab;
            (-0.5 * q.max(0.0)).exp()
        })
    }
}

fn is_point(pair: &ObservationPair) -> bool {
    pair.s().iter().all(|&v| v == 0.0)
}

fn rule_for(nodes: usize) -> Result<GaussLegendre> {
    if nodes < 2 {
        return Err(Error::InvalidConfig("quadrature needs at least 2 nodes"));
    }
    Ok(GaussLegendre::new(nodes))
}

/// `∫₀¹ κ(x, r_j(t)) dt` by Gauss–Legendre quadrature.
pub fn kernel_line_integral_cross(
    kernel: &SeKernel,
    x: &DVector<f64>,
    pair: &ObservationPair,
    nodes: usize,
) -> Result<DMatrix<f64>> {
    let rule = rule_for(nodes)?;
    Ok(kernel.output_cov() * kernel.cross_factor(x, pair, &rule))
}

/// `∫₀¹∫₀¹ κ(r_i(τ), r_j(t)) dτ dt` by tensor-product Gauss–Legendre quadrature.
pub fn kernel_line_integral_double(
    kernel: &SeKernel,
    pair_i: &ObservationPair,
    pair_j: &ObservationPair,
    nodes: usize,
) -> Result<DMatrix<f64>> {
    let rule = rule_for(nodes)?;
    Ok(kernel.output_cov() * kernel.double_factor(pair_i, pair_j, &rule))
}
