//! Monte Carlo check of the Armijo constant bound on a noisy quadratic.
//!
//! Writes `armijo.csv` with
//! `c_factor, c, alpha, mean, std_err, draws, holds, expected, pass`.

use anyhow::{bail, ensure, Result};
use serde::Serialize;
use sqn_core::direction::{armijo_c_bound, expected_descent_check};
use sqn_core::linesearch::armijo_residuals;
use sqn_core::nalgebra::{DMatrix, DVector};
use sqn_core::oracle::{AnalyticOracle, NoisyOracle, Quadratic};
use sqn_core::streams::{SeedTree, StreamId};

use super::{finish, verdict, Report};
use crate::config::{ArmijoProblem, ExperimentConfig, Problem};
use crate::output::{fmt_f64, Table};

#[derive(Debug, Clone, Serialize)]
pub struct ArmijoRow {
    pub c_factor: f64,
    pub c: f64,
    pub mean: f64,
    pub std_err: f64,
    /// Sample mean of the residual is at most zero.
    pub holds: bool,
    /// `c ≤ c̄`.
    pub expected: bool,
    /// The mean lies on the expected side of zero by more than the band.
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ArmijoStats {
    pub gamma: f64,
    pub beta: f64,
    pub c_bar: f64,
    /// `c̄` recomputed with `R = 0`.
    pub c_bar_noiseless: f64,
    pub alpha: f64,
    pub descent_mean: f64,
    pub descent_std_err: f64,
    pub descent_exact: f64,
    pub rows: Vec<ArmijoRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ArmijoChecks {
    pub residual_signs: bool,
    pub noiseless_bound_is_one: bool,
    pub expected_descent: bool,
}

fn square(v: &[f64], n: usize, what: &str) -> Result<DMatrix<f64>> {
    ensure!(
        v.len() == n * n,
        "{what} needs {} entries, got {}",
        n * n,
        v.len()
    );
    Ok(DMatrix::from_row_slice(n, n, v))
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let Problem::Armijo(p) = &cfg.problem else {
        bail!("armijo-check needs an armijo problem");
    };
    let stats = evaluate(p, cfg.seed)?;
    let mut table = Table::new(&[
        "c_factor", "c", "alpha", "mean", "std_err", "draws", "holds", "expected", "pass",
    ]);
    for r in &stats.rows {
        table.push(vec![
            fmt_f64(r.c_factor),
            fmt_f64(r.c),
            fmt_f64(stats.alpha),
            fmt_f64(r.mean),
            fmt_f64(r.std_err),
            p.draws.to_string(),
            u8::from(r.holds).to_string(),
            u8::from(r.expected).to_string(),
            u8::from(r.pass).to_string(),
        ]);
    }
    table.write(&cfg.out.join("armijo.csv"))?;

    let checks = ArmijoChecks {
        residual_signs: stats.rows.iter().all(|r| r.pass),
        noiseless_bound_is_one: stats.c_bar_noiseless == 1.0,
        expected_descent: (stats.descent_mean - stats.descent_exact).abs()
            <= p.band * stats.descent_std_err
            && stats.descent_mean < 0.0,
    };
    let mut lines = vec![
        format!(
            "gamma = {:.6}, beta = {:.6}, c_bar = {:.6}, alpha = {:.3e}",
            stats.gamma, stats.beta, stats.c_bar, stats.alpha
        ),
        format!(
            "c_bar with R = 0: {} {}",
            stats.c_bar_noiseless,
            verdict(checks.noiseless_bound_is_one)
        ),
        format!(
            "E[p'grad f]: {:.6} +- {:.2e}, exact {:.6} {}",
            stats.descent_mean,
            stats.descent_std_err,
            stats.descent_exact,
            verdict(checks.expected_descent)
        ),
    ];
    for r in &stats.rows {
        lines.push(format!(
            "c = {:.3} c_bar: residual mean {:.4e} +- {:.2e}, {} {}",
            r.c_factor,
            r.mean,
            r.std_err,
            if r.holds { "holds" } else { "violated" },
            verdict(r.pass)
        ));
    }
    finish(cfg, stats, checks, lines)
}

/// All statistics of the check, drawn from streams of `seed`.
pub fn evaluate(p: &ArmijoProblem, seed: u64) -> Result<ArmijoStats> {
    let n = p.x.len();
    ensure!(n > 0, "empty point");
    let a = square(&p.a, n, "a")?;
    let b = square(&p.b, n, "b")?;
    let r = square(&p.r, n, "r")?;
    let x = DVector::from_column_slice(&p.x);
    let oracle = AnalyticOracle::new(Quadratic::new(a), p.cost_bias, p.cost_noise_var, r.clone())?;
    let grad = oracle
        .exact_grad(&x)
        .expect("quadratic has an exact gradient");
    let bound = armijo_c_bound(&grad, &b, &r)?;
    let noiseless = armijo_c_bound(&grad, &b, &DMatrix::zeros(n, n))?;
    let alpha = p.alpha_scale * x.norm() / (&b * &grad).norm();

    let tree = SeedTree::new(seed);
    let mut mc = tree.stream(StreamId::MONTE_CARLO);
    let descent = expected_descent_check(&b, &grad, &r, p.draws, &mut mc)?;
    let mut rows = Vec::new();
    for (i, &factor) in p.c_factors.iter().enumerate() {
        let c = factor * bound.c_bar;
        let mut rng = tree.child(i as u64).stream(StreamId::MONTE_CARLO);
        let est = armijo_residuals(&oracle, &x, &b, alpha, c, p.draws, &mut rng)?;
        let expected = c <= bound.c_bar;
        let pass = if expected {
            est.mean + p.band * est.std_err < 0.0
        } else {
            est.mean - p.band * est.std_err > 0.0
        };
        rows.push(ArmijoRow {
            c_factor: factor,
            c,
            mean: est.mean,
            std_err: est.std_err,
            holds: est.mean <= 0.0,
            expected,
            pass,
        });
    }
    Ok(ArmijoStats {
        gamma: bound.gamma,
        beta: bound.beta,
        c_bar: bound.c_bar,
        c_bar_noiseless: noiseless.c_bar,
        alpha,
        descent_mean: descent.mean,
        descent_std_err: descent.std_err,
        descent_exact: -grad.dot(&(&b * &grad)),
        rows,
    })
}
