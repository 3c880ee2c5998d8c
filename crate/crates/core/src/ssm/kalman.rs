//! Exact log-likelihood of the scalar linear model by the prediction-error
//! decomposition, with its gradient from forward sensitivity recursions.

use core::f64::consts::PI;

#[allow(unused_imports)] // inherent methods shadow it when std is linked
use num_traits::Float;

use super::LgssModel;
use crate::error::{Error, Result};

const A: usize = 0;
const C: usize = 1;
const Q: usize = 2;
const R: usize = 3;

fn unit(i: usize) -> [f64; 4] {
    let mut e = [0.0; 4];
    e[i] = 1.0;
    e
}

pub fn kalman_loglik(model: &LgssModel, theta: &[f64], y: &[f64]) -> Result<f64> {
    kalman_loglik_grad(model, theta, y).map(|(ll, _)| ll)
}

/// Log-likelihood and its gradient with respect to `θ = (a, c, q, r)`.
pub fn kalman_loglik_grad(model: &LgssModel, theta: &[f64], y: &[f64]) -> Result<(f64, [f64; 4])> {
    if theta.len() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            got: theta.len(),
        });
    }
    let (a, c, q, r) = (theta[A], theta[C], theta[Q], theta[R]);
    let ln_2pi = (2.0 * PI).ln();

    // filtered moments of x_{t-1} and their θ-derivatives
    let mut mf = model.x0_mean;
    let mut pf = model.x0_var;
    let mut dmf = [0.0; 4];
    let mut dpf = [0.0; 4];

    let mut ll = 0.0;
    let mut dll = [0.0; 4];
    let (da, dc, dq, dr) = (unit(A), unit(C), unit(Q), unit(R));

    for (idx, &yt) in y.iter().enumerate() {
        let t = idx + 1;
        let m = a * mf;
        let p = a * a * pf + q;
        let mut dm = [0.0; 4];
        let mut dp = [0.0; 4];
        for i in 0..4 {
            dm[i] = da[i] * mf + a * dmf[i];
            dp[i] = 2.0 * a * pf * da[i] + a * a * dpf[i] + dq[i];
        }

        let e = yt - c * m;
        let s = c * c * p + r;
        if !(s > 0.0) {
            return Err(Error::InnovationVariance(t));
        }
        let mut de = [0.0; 4];
        let mut ds = [0.0; 4];
        for i in 0..4 {
            de[i] = -dc[i] * m - c * dm[i];
            ds[i] = 2.0 * c * p * dc[i] + c * c * dp[i] + dr[i];
        }

        ll -= 0.5 * (ln_2pi + s.ln() + e * e / s);
        for i in 0..4 {
            dll[i] -= 0.5 * (ds[i] / s + 2.0 * e * de[i] / s - e * e * ds[i] / (s * s));
        }

        let k = c * p / s;
        let mut dk = [0.0; 4];
        for i in 0..4 {
            dk[i] = (dc[i] * p + c * dp[i]) / s - c * p * ds[i] / (s * s);
        }
        mf = m + k * e;
        pf = (1.0 - k * c) * p;
        for i in 0..4 {
            dmf[i] = dm[i] + dk[i] * e + k * de[i];
            dpf[i] = -(dk[i] * c + k * dc[i]) * p + (1.0 - k * c) * dp[i];
        }
    }
    Ok((ll, dll))
}
