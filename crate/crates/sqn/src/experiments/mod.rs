//! The desk-scale experiments behind the CLI subcommands.

pub mod armijo;
pub mod gp_demo;
pub mod lgss;
pub mod nltoy;
pub mod toy1d;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;
use sqn_core::nalgebra::{DMatrix, DVector};
use sqn_core::optimizer::{run as run_optimizer, RunRecord, RunStatus};
use sqn_core::oracle::{estimate_gradient_noise, NoisyOracle, Rescaled};
use sqn_core::streams::{SeedTree, StreamId};

use crate::config::{Experiment, ExperimentConfig, NoiseSetting, OptimizerSettings};
use crate::output::write_json;

/// Outcome of an experiment: human-readable lines and the JSON summary
/// that was written to `summary.json`.
#[derive(Debug, Clone)]
pub struct Report {
    pub experiment: Experiment,
    pub lines: Vec<String>,
    pub summary: Value,
}

impl Report {
    pub fn stat(&self, key: &str) -> Option<f64> {
        self.summary.get("stats")?.get(key)?.as_f64()
    }

    pub fn check(&self, key: &str) -> Option<bool> {
        self.summary.get("checks")?.get(key)?.as_bool()
    }
}

/// Runs `cfg.experiment`, writing every output file under `cfg.out`.
pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    match cfg.experiment {
        Experiment::GpDemo => gp_demo::run(cfg),
        Experiment::Run1d => toy1d::run(cfg),
        Experiment::RunLgss => lgss::run(cfg),
        Experiment::RunNltoy => nltoy::run(cfg),
        Experiment::ArmijoCheck => armijo::run(cfg),
    }
}

#[derive(Serialize)]
struct Summary<'a, S: Serialize, C: Serialize> {
    experiment: Experiment,
    config: &'a ExperimentConfig,
    stats: S,
    checks: C,
}

pub(crate) fn finish<S: Serialize, C: Serialize>(
    cfg: &ExperimentConfig,
    stats: S,
    checks: C,
    lines: Vec<String>,
) -> Result<Report> {
    let summary = serde_json::to_value(Summary {
        experiment: cfg.experiment,
        config: cfg,
        stats,
        checks,
    })?;
    write_json(&cfg.out.join("summary.json"), &summary)?;
    Ok(Report {
        experiment: cfg.experiment,
        lines,
        summary,
    })
}

/// Runs `f` once per replicate on the rayon pool. Results come back in
/// replicate order whatever the scheduling.
pub(crate) fn replicates<T, F>(seed: u64, runs: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, SeedTree) -> T + Sync,
{
    let tree = SeedTree::new(seed);
    (0..runs)
        .into_par_iter()
        .map(|i| f(i, tree.child(i as u64)))
        .collect()
}

/// Median of the finite entries; NaN when there are none.
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Median with non-finite entries counted as `+∞`.
pub fn median_all(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values
        .iter()
        .map(|&x| if x.is_nan() { f64::INFINITY } else { x })
        .collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub(crate) fn status_label(rec: &RunRecord) -> String {
    match &rec.status {
        RunStatus::Completed => "completed".to_owned(),
        RunStatus::Failed(e) => format!("failed: {e}"),
    }
}

/// Runs the optimiser from `x0` in the scaled coordinates of `settings`
/// with streams of `tree`. The record is mapped back to the problem's
/// coordinates.
pub(crate) fn optimize<O: NoisyOracle>(
    oracle: O,
    x0: &DVector<f64>,
    settings: &OptimizerSettings,
    tree: &SeedTree,
) -> Result<RunRecord> {
    let n = oracle.dim();
    let scale = match &settings.scaling {
        None => DVector::from_element(n, 1.0),
        Some(s) => {
            anyhow::ensure!(
                s.len() == n,
                "scaling has {} entries, expected {n}",
                s.len()
            );
            DVector::from_column_slice(s)
        }
    };
    let r = noise_covariance(&settings.noise, &oracle, x0, tree)?;
    let inv = scale.map(|s| 1.0 / s);
    let r_z = DMatrix::from_fn(n, n, |i, j| r[(i, j)] * inv[i] * inv[j]);
    let scaled = Rescaled::new(oracle, scale)?;
    let cfg = settings.build(n, r_z, tree.seed())?;
    let mut rec = run_optimizer(&scaled, scaled.from_inner(x0), &cfg)?;
    for row in &mut rec.rows {
        row.x = scaled.to_inner(&row.x);
        row.direction = scaled.to_inner(&row.direction);
    }
    rec.final_x = scaled.to_inner(&rec.final_x);
    Ok(rec)
}

/// Gradient-noise covariance for the GP.
pub(crate) fn noise_covariance<O: NoisyOracle + ?Sized>(
    setting: &NoiseSetting,
    oracle: &O,
    x0: &DVector<f64>,
    tree: &SeedTree,
) -> Result<DMatrix<f64>> {
    let n = oracle.dim();
    match setting {
        NoiseSetting::ScaledIdentity(s) => Ok(DMatrix::identity(n, n) * *s),
        NoiseSetting::Diagonal(d) => {
            anyhow::ensure!(
                d.len() == n,
                "noise diagonal has {} entries, expected {n}",
                d.len()
            );
            Ok(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
        }
        NoiseSetting::Estimate(draws) => {
            let mut rng = tree.stream(StreamId::MONTE_CARLO);
            let cov = estimate_gradient_noise(oracle, x0, *draws, &mut rng)?;
            // keep the diagonal and lift near-zero entries so R stays positive definite
            let d = cov.diagonal();
            let top = d.iter().copied().fold(0.0_f64, f64::max).max(1e-300);
            Ok(DMatrix::from_diagonal(&d.map(|v| v.max(1e-10 * top))))
        }
    }
}

pub(crate) fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_examples() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[f64::NAN, 1.0, f64::INFINITY]), 1.0);
        assert!(median(&[]).is_nan());
        assert_eq!(median_all(&[f64::NAN, 1.0, 2.0]), 2.0);
        assert_eq!(median_all(&[f64::NAN, f64::INFINITY, 1.0]), f64::INFINITY);
    }

    #[test]
    fn replicates_keep_order() {
        let out = replicates(5, 16, |i, tree| (i, tree.seed()));
        for (j, (i, _)) in out.iter().enumerate() {
            assert_eq!(*i, j);
        }
        assert_eq!(out, replicates(5, 16, |i, tree| (i, tree.seed())));
    }
}
