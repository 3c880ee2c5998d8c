//! Independent reference computations shared by the integration and
//! acceptance tests. Nothing here calls into the library's GP code.

#![allow(dead_code)]

use sqn_core::nalgebra::{DMatrix, DVector};

/// Duplication matrix from its definition: column `k` is `vec(E)` for the
/// `k`-th lower-triangular basis matrix `E` in column-major order.
pub fn duplication(n: usize) -> DMatrix<f64> {
    let dh = n * (n + 1) / 2;
    let mut d = DMatrix::zeros(n * n, dh);
    let mut k = 0;
    for j in 0..n {
        for i in j..n {
            let mut e = DMatrix::<f64>::zeros(n, n);
            e[(i, j)] = 1.0;
            e[(j, i)] = 1.0;
            d.set_column(k, &DVector::from_column_slice(e.as_slice()));
            k += 1;
        }
    }
    d
}

/// `(sᵀ ⊗ I) D` via an explicit Kronecker product.
pub fn dbar_kron(s: &DVector<f64>) -> DMatrix<f64> {
    let n = s.len();
    s.transpose().kronecker(&DMatrix::<f64>::identity(n, n)) * duplication(n)
}

pub fn se_corr(v: &DMatrix<f64>, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let d = a - b;
    (-0.5 * d.dot(&(v * &d))).exp()
}

pub struct SecantPair {
    pub index: usize,
    pub start: DVector<f64>,
    pub end: DVector<f64>,
    pub y: DVector<f64>,
}

/// Posterior of `vech ∇²f(x)` under the secant model `y_i = D̄_i h(start_i) + v_i`,
/// by forming the joint Gaussian of `(h(x), h(start_1), ..., h(start_w))` and
/// conditioning with a dense inverse.
pub fn joint_conditioning(
    mu: &DVector<f64>,
    m: &DMatrix<f64>,
    v: &DMatrix<f64>,
    r: &DMatrix<f64>,
    x: &DVector<f64>,
    pairs: &[SecantPair],
) -> (DVector<f64>, DMatrix<f64>) {
    let n = x.len();
    let dh = mu.len();
    let w = pairs.len();
    let mut points = vec![x.clone()];
    points.extend(pairs.iter().map(|p| p.start.clone()));

    // prior covariance of the stacked latent Hessians
    let total = dh * (w + 1);
    let mut c = DMatrix::zeros(total, total);
    for (a, pa) in points.iter().enumerate() {
        for (b, pb) in points.iter().enumerate() {
            c.view_mut((a * dh, b * dh), (dh, dh))
                .copy_from(&(m * se_corr(v, pa, pb)));
        }
    }

    // observation map: zero block for h(x), D̄_i for h(start_i)
    let mut g = DMatrix::zeros(n * w, total);
    for (i, p) in pairs.iter().enumerate() {
        let s = &p.end - &p.start;
        g.view_mut((i * n, (i + 1) * dh), (n, dh))
            .copy_from(&dbar_kron(&s));
    }

    let mut noise = DMatrix::zeros(n * w, n * w);
    for (i, pi) in pairs.iter().enumerate() {
        for (j, pj) in pairs.iter().enumerate() {
            let delta = match (pi.index as i64 - pj.index as i64).abs() {
                0 => 2.0,
                1 => -1.0,
                _ => 0.0,
            };
            noise
                .view_mut((i * n, j * n), (n, n))
                .copy_from(&(r * delta));
        }
    }

    let mut mean = DVector::zeros(total);
    for a in 0..=w {
        mean.rows_mut(a * dh, dh).copy_from(mu);
    }
    let mut y = DVector::zeros(n * w);
    for (i, p) in pairs.iter().enumerate() {
        y.rows_mut(i * n, n).copy_from(&p.y);
    }

    let s_inv = (&g * &c * g.transpose() + noise)
        .try_inverse()
        .expect("observation covariance invertible");
    let c_x = c.rows(0, dh).into_owned();
    let gain = &c_x * g.transpose() * s_inv;
    let phi = mu + &gain * (y - &g * mean);
    let sigma = m - &gain * &g * c_x.transpose();
    (phi, sigma)
}

/// Central difference of a scalar function.
pub fn central_diff<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Central-difference gradient.
pub fn central_grad<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut up = x.to_vec();
            let mut down = x.to_vec();
            up[i] += h;
            down[i] -= h;
            (f(&up) - f(&down)) / (2.0 * h)
        })
        .collect()
}

/// Composite Simpson rule on `[a, b]` with `2k` panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, k: usize) -> f64 {
    let n = 2 * k;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}
