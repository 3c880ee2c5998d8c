//! Identification of the linear Gaussian state-space model from noisy
//! Kalman log-likelihoods.
//!
//! Per replicate: `data_NNNN.csv` (`t, y`) and `trace_NNNN.csv` with
//! coordinates `a, c, log_q, log_r`. `summary.csv` has
//! `run, status, a, c, q, r, var_y, iterations, fallbacks`.

use anyhow::{bail, Result};
use rand::Rng;
use serde::Serialize;
use sqn_core::nalgebra::DVector;
use sqn_core::ssm::{simulate, to_natural, to_unconstrained, LgssModel, LgssOracle};
use sqn_core::streams::StreamId;

use super::{finish, median, median_all, optimize, replicates, status_label, verdict, Report};
use crate::config::{ExperimentConfig, Problem};
use crate::output::{fmt_f64, write_series, write_trace, Table};

pub const TRUE_OUTPUT_VARIANCE: f64 = 0.1 / 0.19 + 0.5;

#[derive(Debug, Clone, Serialize)]
pub struct LgssStats {
    pub runs: usize,
    pub failures: usize,
    pub median_a_error: f64,
    pub median_var_rel_error: f64,
    pub median_a: f64,
    pub median_var_y: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LgssChecks {
    pub a: bool,
    pub output_variance: bool,
}

struct Outcome {
    status: String,
    theta: Vec<f64>,
    iterations: usize,
    fallbacks: usize,
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let Problem::Lgss(p) = &cfg.problem else {
        bail!("run-lgss needs an lgss problem");
    };
    let model = LgssModel::default();
    let truth = LgssModel::TRUE_PARAMS;
    let names: Vec<String> = ["a", "c", "log_q", "log_r"]
        .iter()
        .map(|s| s.to_string())
        .collect();

    let results = replicates(cfg.seed, cfg.runs, |i, tree| -> Result<Outcome> {
        let y = simulate(
            &model,
            &truth,
            p.series_len,
            &mut tree.stream(StreamId::DATA),
        );
        write_series(&cfg.out.join(format!("data_{i:04}.csv")), &y)?;
        let mut init = tree.stream(StreamId::INIT);
        let mut theta0 = truth.to_vec();
        theta0[0] = init.random_range(-p.init_a_bound..=p.init_a_bound);
        for v in &mut theta0[1..] {
            *v *= init.random_range(0.5..=1.5);
        }
        let x0 = DVector::from_vec(to_unconstrained(&model, &theta0));
        let oracle = LgssOracle::with_noise(model, y, p.cost_noise_std, p.grad_noise_std);
        let rec = optimize(&oracle, &x0, &cfg.optimizer, &tree)?;
        write_trace(&cfg.out.join(format!("trace_{i:04}.csv")), &rec, &names)?;
        Ok(Outcome {
            status: status_label(&rec),
            theta: to_natural(&model, rec.final_x.as_slice()),
            iterations: rec.iterations(),
            fallbacks: rec.fallbacks(),
        })
    });

    let mut table = Table::new(&[
        "run",
        "status",
        "a",
        "c",
        "q",
        "r",
        "var_y",
        "iterations",
        "fallbacks",
    ]);
    let (mut a_err, mut var_err, mut a_hat, mut var_hat) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut failures = 0;
    for (i, res) in results.into_iter().enumerate() {
        let o = res?;
        if o.status != "completed" {
            failures += 1;
        }
        let var_y = if o.theta[0].abs() < 1.0 {
            LgssModel::stationary_output_variance(&o.theta)
        } else {
            f64::INFINITY
        };
        a_hat.push(o.theta[0]);
        var_hat.push(var_y);
        a_err.push((o.theta[0] - truth[0]).abs());
        var_err.push((var_y - TRUE_OUTPUT_VARIANCE).abs() / TRUE_OUTPUT_VARIANCE);
        let mut row = vec![i.to_string(), o.status];
        row.extend(o.theta.iter().map(|&v| fmt_f64(v)));
        row.push(fmt_f64(var_y));
        row.push(o.iterations.to_string());
        row.push(o.fallbacks.to_string());
        table.push(row);
    }
    table.write(&cfg.out.join("summary.csv"))?;

    let stats = LgssStats {
        runs: cfg.runs,
        failures,
        median_a_error: median_all(&a_err),
        median_var_rel_error: median_all(&var_err),
        median_a: median(&a_hat),
        median_var_y: median(&var_hat),
    };
    let checks = LgssChecks {
        a: stats.median_a_error < 0.1,
        output_variance: stats.median_var_rel_error < 0.15,
    };
    let lines = vec![
        format!("{} runs, {} failed", cfg.runs, failures),
        format!(
            "median a = {:.4}, median |a - 0.9| = {:.4} {}",
            stats.median_a,
            stats.median_a_error,
            verdict(checks.a)
        ),
        format!(
            "median var_y = {:.4}, median relative error vs {:.4} = {:.4} {}",
            stats.median_var_y,
            TRUE_OUTPUT_VARIANCE,
            stats.median_var_rel_error,
            verdict(checks.output_variance)
        ),
    ];
    finish(cfg, stats, checks, lines)
}
