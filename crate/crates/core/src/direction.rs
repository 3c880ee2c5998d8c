//! Regularised quasi-Newton search directions and the descent diagnostics
//! that go with them.
//!
//! The shift `λ = ε - min(0, η)`, with `η` the smallest eigenvalue of `H`,
//! makes every eigenvalue of `H + λI` at least `ε`, so `B = (H + λI)⁻¹` is
//! positive definite and `p = -B g` is a descent direction in expectation.

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // inherent methods shadow it when std is linked
use num_traits::Float;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::symtools::is_symmetric;

pub const DEFAULT_EPSILON: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionResult {
    /// Search direction `p = -B g`.
    pub p: DVector<f64>,
    /// Eigenvalue shift `λ`.
    pub lambda: f64,
    /// Smallest eigenvalue `η` of `H`.
    pub eta: f64,
    /// Scaling matrix `B = (H + λI)⁻¹`.
    pub b: DMatrix<f64>,
}

pub fn regularized_direction(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    epsilon: f64,
) -> Result<DirectionResult> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidConfig("epsilon must be positive"));
    }
    if h.nrows() != h.ncols() {
        return Err(Error::NotSquare {
            rows: h.nrows(),
            cols: h.ncols(),
        });
    }
    if g.len() != h.nrows() {
        return Err(Error::DimensionMismatch {
            expected: h.nrows(),
            got: g.len(),
        });
    }
    if !is_symmetric(h, 1e-10) {
        return Err(Error::NotSymmetric);
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigendecomposition);
    }
    let eig = h.clone().symmetric_eigen();
    let eta = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let lambda = epsilon - eta.min(0.0);
    let q = &eig.eigenvectors;
    let inv = eig.eigenvalues.map(|d| 1.0 / (d + lambda));
    let mut b = q * DMatrix::from_diagonal(&inv) * q.transpose();
    // Q D Qᵀ is symmetric up to rounding; make it exact.
    let n = b.nrows();
    for j in 0..n {
        for i in j + 1..n {
            let v = 0.5 * (b[(i, j)] + b[(j, i)]);
            b[(i, j)] = v;
            b[(j, i)] = v;
        }
    }
    let p = -(&b * g);
    Ok(DirectionResult { p, lambda, eta, b })
}

/// Upper bound `c̄ = γ / (γ + β)` on the Armijo constant under gradient noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmijoBound {
    /// `∇fᵀ B ∇f`
    pub gamma: f64,
    /// `Tr(B R)`
    pub beta: f64,
    pub c_bar: f64,
}

pub fn armijo_c_bound(
    grad_true: &DVector<f64>,
    b: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<ArmijoBound> {
    let n = grad_true.len();
    for m in [b, r] {
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: m.nrows(),
            });
        }
    }
    if grad_true.iter().all(|&v| v == 0.0) {
        return Err(Error::StationaryPoint);
    }
    let gamma = grad_true.dot(&(b * grad_true));
    let beta = (b * r).trace();
    Ok(ArmijoBound {
        gamma,
        beta,
        c_bar: gamma / (gamma + beta),
    })
}

/// Square-root factor `L` with `L Lᵀ = R` for a positive semidefinite `R`.
pub fn psd_sqrt(r: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(c) = r.clone().cholesky() {
        return c.l();
    }
    let eig = r.clone().symmetric_eigen();
    let d = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d)
}

/// Draws `v ~ N(0, L Lᵀ)`.
pub fn gaussian_draw(factor: &DMatrix<f64>, rng: &mut dyn RngCore) -> DVector<f64> {
    let z = DVector::from_fn(factor.ncols(), |_, _| StandardNormal.sample(&mut *rng));
    factor * z
}

/// Sample mean and standard error of a Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub draws: usize,
}

impl McEstimate {
    pub fn from_samples<I: IntoIterator<Item = f64>>(samples: I) -> Self {
        // Welford
        let mut n = 0usize;
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for x in samples {
            n += 1;
            let d = x - mean;
            mean += d / n as f64;
            m2 += d * (x - mean);
        }
        let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
        Self {
            mean,
            std_err: (var / n.max(1) as f64).sqrt(),
            draws: n,
        }
    }

    /// `|mean - target| <= k · std_err`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_err
    }
}

/// Monte Carlo estimate of `E[pᵀ∇f]` for `p = -B(∇f + v)`, `v ~ N(0, R)`.
/// The exact value is `-∇fᵀ B ∇f`.
pub fn expected_descent_check(
    b: &DMatrix<f64>,
    grad_true: &DVector<f64>,
    r: &DMatrix<f64>,
    draws: usize,
    rng: &mut dyn RngCore,
) -> Result<McEstimate> {
    if draws == 0 {
        return Err(Error::InvalidConfig("draws must be at least 1"));
    }
    let factor = psd_sqrt(r);
    let samples = (0..draws).map(|_| {
        let g = grad_true + gaussian_draw(&factor, rng);
        -(b * g).dot(grad_true)
    });
    Ok(McEstimate::from_samples(samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diagonal_positive_definite() {
        let h = dmatrix![2.0, 0.0; 0.0, 3.0];
        let d = regularized_direction(&h, &dvector![2.0, 3.0], 0.5).unwrap();
        assert_eq!(d.eta, 2.0);
        assert_eq!(d.lambda, 0.5);
        assert!((d.p[0] + 0.8).abs() < 1e-15);
        assert!((d.p[1] + 6.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn indefinite_shift() {
        let h = dmatrix![2.0, 0.0; 0.0, -1.0];
        let d = regularized_direction(&h, &dvector![1.0, 1.0], 0.1).unwrap();
        assert!((d.lambda - 1.1).abs() < 1e-15);
        assert!((d.b[(0, 0)] - 1.0 / 3.1).abs() < 1e-15);
        assert!((d.b[(1, 1)] - 10.0).abs() < 1e-12);
        assert!(d.b[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_gives_zero_direction() {
        let h = dmatrix![1.0, 0.3; 0.3, 2.0];
        let d = regularized_direction(&h, &dvector![0.0, 0.0], 1e-4).unwrap();
        assert_eq!(d.p, dvector![0.0, 0.0]);
    }

    #[test]
    fn direction_input_validation() {
        let h = dmatrix![1.0, 0.3; 0.0, 2.0];
        assert_eq!(
            regularized_direction(&h, &dvector![1.0, 1.0], 1e-4),
            Err(Error::NotSymmetric)
        );
        let h = DMatrix::identity(2, 2);
        assert!(regularized_direction(&h, &dvector![1.0, 1.0], 0.0).is_err());
        assert!(regularized_direction(&h, &dvector![1.0], 1e-4).is_err());
    }

    #[test]
    fn c_bound_examples() {
        let g = dvector![1.0];
        let b = dmatrix![1.0];
        let bound = armijo_c_bound(&g, &b, &dmatrix![1.0]).unwrap();
        assert_eq!((bound.gamma, bound.beta, bound.c_bar), (1.0, 1.0, 0.5));
        let exact = armijo_c_bound(&g, &b, &dmatrix![0.0]).unwrap();
        assert_eq!(exact.c_bar, 1.0);
        let noisy = armijo_c_bound(&g, &b, &dmatrix![10.0]).unwrap();
        assert!(noisy.c_bar < bound.c_bar);
        assert_eq!(
            armijo_c_bound(&dvector![0.0], &b, &dmatrix![1.0]),
            Err(Error::StationaryPoint)
        );
    }

    #[test]
    fn descent_check_without_noise_is_exact() {
        let b = dmatrix![2.0, 0.5; 0.5, 1.0];
        let g = dvector![1.0, -2.0];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let est = expected_descent_check(&b, &g, &DMatrix::zeros(2, 2), 100, &mut rng).unwrap();
        let exact = -g.dot(&(&b * &g));
        assert!((est.mean - exact).abs() < 1e-12);
        assert!(est.std_err < 1e-12);
    }

    #[test]
    fn descent_check_stationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let est =
            expected_descent_check(&dmatrix![1.0], &dvector![0.0], &dmatrix![1.0], 10, &mut rng)
                .unwrap();
        assert_eq!(est.mean, 0.0);
        assert!(expected_descent_check(
            &dmatrix![1.0],
            &dvector![0.0],
            &dmatrix![1.0],
            0,
            &mut rng
        )
        .is_err());
    }

    #[test]
    fn psd_sqrt_handles_singular() {
        let r = dmatrix![1.0, 1.0; 1.0, 1.0];
        let l = psd_sqrt(&r);
        assert!((&l * l.transpose() - r).amax() < 1e-12);
    }

    #[test]
    fn mc_estimate_moments() {
        let est = McEstimate::from_samples([1.0, 2.0, 3.0, 4.0]);
        assert_eq!(est.mean, 2.5);
        assert!((est.std_err - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert!(est.within(2.6, 1.0));
    }
}
