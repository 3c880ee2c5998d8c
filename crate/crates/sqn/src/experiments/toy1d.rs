//! The optimiser on the noisy scalar test function.
//!
//! Writes `trace_NNNN.csv` per replicate and `summary.csv`
//! (`run, status, x_final, f_final, iterations, fallbacks`).

use anyhow::{bail, Result};
use serde::Serialize;
use sqn_core::nalgebra::{DMatrix, DVector};
use sqn_core::oracle::{toy1d_f, AnalyticOracle, Toy1d};

use super::{finish, median, optimize, replicates, status_label, Report};
use crate::config::{ExperimentConfig, Problem};
use crate::output::{fmt_f64, write_trace, Table};

#[derive(Debug, Clone, Serialize)]
pub struct Toy1dStats {
    pub runs: usize,
    pub failures: usize,
    pub median_x_final: f64,
    pub median_f_final: f64,
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let Problem::Toy1d(p) = &cfg.problem else {
        bail!("run-1d needs a toy-1d problem");
    };
    let oracle = AnalyticOracle::new(
        Toy1d,
        p.cost_bias,
        p.cost_noise_var,
        DMatrix::from_element(1, 1, p.grad_noise_var),
    )?;
    let names = vec!["x".to_owned()];
    let x0 = DVector::from_element(1, p.x0);

    let results = replicates(
        cfg.seed,
        cfg.runs,
        |i, tree| -> Result<(String, f64, usize, usize)> {
            let rec = optimize(&oracle, &x0, &cfg.optimizer, &tree)?;
            write_trace(&cfg.out.join(format!("trace_{i:04}.csv")), &rec, &names)?;
            Ok((
                status_label(&rec),
                rec.final_x[0],
                rec.iterations(),
                rec.fallbacks(),
            ))
        },
    );

    let mut table = Table::new(&[
        "run",
        "status",
        "x_final",
        "f_final",
        "iterations",
        "fallbacks",
    ]);
    let (mut xs, mut fs) = (Vec::new(), Vec::new());
    let mut failures = 0;
    for (i, res) in results.into_iter().enumerate() {
        let (status, x, iters, fallbacks) = res?;
        if status != "completed" {
            failures += 1;
        }
        xs.push(x);
        fs.push(toy1d_f(x));
        table.push(vec![
            i.to_string(),
            status,
            fmt_f64(x),
            fmt_f64(toy1d_f(x)),
            iters.to_string(),
            fallbacks.to_string(),
        ]);
    }
    table.write(&cfg.out.join("summary.csv"))?;

    let stats = Toy1dStats {
        runs: cfg.runs,
        failures,
        median_x_final: median(&xs),
        median_f_final: median(&fs),
    };
    let lines = vec![format!(
        "{} runs, {} failed; median final x {:.4}, median f(x) {:.4}",
        cfg.runs, failures, stats.median_x_final, stats.median_f_final
    )];
    finish(cfg, stats, serde_json::json!({}), lines)
}
