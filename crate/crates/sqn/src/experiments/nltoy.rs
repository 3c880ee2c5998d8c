//! Identification of the nonlinear benchmark from particle-filter
//! likelihood and score estimates.
//!
//! Per replicate: `data_NNNN.csv` (`t, y`) and `trace_NNNN.csv` with
//! coordinates `a, b, c, d, log_q, log_r`. `summary.csv` has
//! `run, status, a, b, c, d, q, r, iterations, fallbacks`.

use anyhow::{bail, Result};
use rand::Rng;
use serde::Serialize;
use sqn_core::nalgebra::DVector;
use sqn_core::ssm::{
    simulate, to_natural, to_unconstrained, NlBenchModel, NlBenchOracle, ScalarSsm,
};
use sqn_core::streams::StreamId;

use super::{finish, median, median_all, optimize, replicates, status_label, verdict, Report};
use crate::config::{ExperimentConfig, Problem};
use crate::output::{fmt_f64, write_series, write_trace, Table};

/// Allowed `|median - truth|` for `a, b, c, d`.
pub const BOUNDS: [f64; 4] = [0.02, 1.0, 0.4, 0.004];
const PARAM_NAMES: [&str; 4] = ["a", "b", "c", "d"];
/// Tail length and block size for the trend check on the median trace.
const TAIL: usize = 100;
const BLOCK: usize = 25;

#[derive(Debug, Clone, Serialize)]
pub struct NlStats {
    pub runs: usize,
    pub failures: usize,
    pub median_theta: Vec<f64>,
    pub median_abs_error: Vec<f64>,
    /// Block medians of the across-replicate median `fhat` over the tail.
    pub tail_block_medians: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NlChecks {
    pub a: bool,
    pub b: bool,
    pub c: bool,
    pub d: bool,
    pub tail_nonincreasing: bool,
}

struct Outcome {
    status: String,
    theta: Vec<f64>,
    fhat: Vec<f64>,
    iterations: usize,
    fallbacks: usize,
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let Problem::NlBench(p) = &cfg.problem else {
        bail!("run-nltoy needs an nl-bench problem");
    };
    let model = NlBenchModel::default();
    let truth = NlBenchModel::TRUE_PARAMS;
    let pf = p.pf_config();
    let names: Vec<String> = ["a", "b", "c", "d", "log_q", "log_r"]
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
        let mut centre = truth;
        centre[model.q_index()] = p.init_q;
        let theta0: Vec<f64> = centre
            .iter()
            .map(|&t| t * init.random_range(0.5..=1.5))
            .collect();
        let x0 = DVector::from_vec(to_unconstrained(&model, &theta0));
        let oracle = NlBenchOracle::new(model, y, pf);
        let rec = optimize(&oracle, &x0, &cfg.optimizer, &tree)?;
        write_trace(&cfg.out.join(format!("trace_{i:04}.csv")), &rec, &names)?;
        Ok(Outcome {
            status: status_label(&rec),
            theta: to_natural(&model, rec.final_x.as_slice()),
            fhat: rec.rows.iter().map(|r| r.f_hat).collect(),
            iterations: rec.iterations(),
            fallbacks: rec.fallbacks(),
        })
    });

    let mut table = Table::new(&[
        "run",
        "status",
        "a",
        "b",
        "c",
        "d",
        "q",
        "r",
        "iterations",
        "fallbacks",
    ]);
    let mut estimates: Vec<Vec<f64>> = vec![Vec::new(); 4];
    let mut traces = Vec::new();
    let mut failures = 0;
    for (i, res) in results.into_iter().enumerate() {
        let o = res?;
        if o.status != "completed" {
            failures += 1;
        }
        for (j, e) in estimates.iter_mut().enumerate() {
            e.push(o.theta[j]);
        }
        let mut row = vec![i.to_string(), o.status];
        row.extend(o.theta.iter().map(|&v| fmt_f64(v)));
        row.push(o.iterations.to_string());
        row.push(o.fallbacks.to_string());
        table.push(row);
        traces.push(o.fhat);
    }
    table.write(&cfg.out.join("summary.csv"))?;

    let median_theta: Vec<f64> = estimates.iter().map(|e| median(e)).collect();
    let median_abs_error: Vec<f64> = estimates
        .iter()
        .zip(truth)
        .map(|(e, t)| median_all(&e.iter().map(|v| (v - t).abs()).collect::<Vec<_>>()))
        .collect();

    // median fhat across replicates at each iteration, then block medians over the tail
    let len = traces.iter().map(Vec::len).max().unwrap_or(0);
    let median_trace: Vec<f64> = (0..len)
        .map(|k| {
            let col: Vec<f64> = traces
                .iter()
                .map(|t| t.get(k).copied().unwrap_or(f64::NAN))
                .collect();
            median_all(&col)
        })
        .collect();
    let tail = &median_trace[len.saturating_sub(TAIL)..];
    let tail_block_medians: Vec<f64> = tail.chunks(BLOCK).map(median_all).collect();
    let tail_nonincreasing = !tail_block_medians.is_empty()
        && tail_block_medians.iter().all(|v| v.is_finite())
        && tail_block_medians.windows(2).all(|w| w[1] <= w[0] + 1.0);

    let ok: Vec<bool> = median_abs_error
        .iter()
        .zip(BOUNDS)
        .map(|(e, b)| *e < b)
        .collect();
    let checks = NlChecks {
        a: ok[0],
        b: ok[1],
        c: ok[2],
        d: ok[3],
        tail_nonincreasing,
    };
    let mut lines = vec![format!("{} runs, {} failed", cfg.runs, failures)];
    for j in 0..4 {
        lines.push(format!(
            "median {} = {:.5} (truth {}), |error| {:.5} < {} {}",
            PARAM_NAMES[j],
            median_theta[j],
            truth[j],
            median_abs_error[j],
            BOUNDS[j],
            verdict(ok[j])
        ));
    }
    lines.push(format!(
        "tail block medians of fhat {:?} {}",
        tail_block_medians
            .iter()
            .map(|v| (v * 100.0).round() / 100.0)
            .collect::<Vec<_>>(),
        verdict(tail_nonincreasing)
    ));
    let stats = NlStats {
        runs: cfg.runs,
        failures,
        median_theta,
        median_abs_error,
        tail_block_medians,
    };
    finish(cfg, stats, checks, lines)
}
