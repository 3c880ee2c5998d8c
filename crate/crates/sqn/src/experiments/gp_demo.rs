//! Hessian posterior for the scalar test function from noisy gradients at
//! equally spaced iterates.
//!
//! Writes `gp_demo.csv` (`x, true_hess, post_mean, post_std, prior_mean`)
//! and `observations.csv` (`k, x, grad`).

use anyhow::{bail, Result};
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use sqn_core::gp::{HessianGp, ObservationPair};
use sqn_core::nalgebra::{DMatrix, DVector};
use sqn_core::oracle::{toy1d_grad, toy1d_hess};
use sqn_core::streams::{SeedTree, StreamId};

use super::{finish, verdict, Report};
use crate::config::{ExperimentConfig, NoiseSetting, Problem};
use crate::output::{fmt_f64, Table};

#[derive(Debug, Clone, Serialize)]
pub struct GpDemoStats {
    pub rmse_posterior: f64,
    pub rmse_prior: f64,
    pub improvement: f64,
    pub far_field_max_dev: f64,
    /// Smallest posterior variance on the grid before clamping.
    pub min_var: f64,
    pub grid_points: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct GpDemoChecks {
    pub observed_region: bool,
    pub far_field: bool,
    pub std_nonnegative: bool,
}

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    (s / a.len() as f64).sqrt()
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let Problem::GpDemo(p) = &cfg.problem else {
        bail!("gp-demo needs a gp-demo problem");
    };
    if p.points < 2 {
        bail!("gp-demo needs at least 2 points");
    }
    let r = match &cfg.optimizer.noise {
        NoiseSetting::ScaledIdentity(s) => *s,
        NoiseSetting::Diagonal(d) if d.len() == 1 => d[0],
        _ => bail!("gp-demo needs a fixed scalar noise setting"),
    };

    let tree = SeedTree::new(cfg.seed);
    let mut rng = tree.stream(StreamId::GRADIENT);
    let noise = Normal::new(0.0, p.grad_noise_var.sqrt())?;
    let step = (p.span[1] - p.span[0]) / (p.points - 1) as f64;
    let xs: Vec<f64> = (0..p.points).map(|i| p.span[0] + step * i as f64).collect();
    let grads: Vec<f64> = xs
        .iter()
        .map(|&x| toy1d_grad(x) + noise.sample(&mut rng))
        .collect();

    let mut obs = Table::new(&["k", "x", "grad"]);
    for (k, (x, g)) in xs.iter().zip(&grads).enumerate() {
        obs.push(vec![k.to_string(), fmt_f64(*x), fmt_f64(*g)]);
    }
    obs.write(&cfg.out.join("observations.csv"))?;

    let prior = cfg.optimizer.prior.build(1)?;
    let memory = cfg.optimizer.memory.max(p.points);
    let mut gp = HessianGp::new(
        prior.clone(),
        DMatrix::from_element(1, 1, r),
        memory,
        cfg.optimizer.mode.into(),
    )?
    .with_quad_nodes(cfg.optimizer.quad_nodes)?;
    for k in 0..p.points - 1 {
        gp.push_observation(ObservationPair::from_gradients(
            k,
            DVector::from_element(1, xs[k]),
            DVector::from_element(1, xs[k + 1]),
            &DVector::from_element(1, grads[k]),
            &DVector::from_element(1, grads[k + 1]),
        )?)?;
    }

    let [start, stop, dx] = p.grid;
    if !(dx > 0.0) || stop < start {
        bail!("gp-demo grid needs start <= stop and a positive step");
    }
    let count = ((stop - start) / dx).round() as usize + 1;
    let mut table = Table::new(&["x", "true_hess", "post_mean", "post_std", "prior_mean"]);
    let (mut obs_true, mut obs_post, mut obs_prior) = (Vec::new(), Vec::new(), Vec::new());
    let mut far_dev = 0.0_f64;
    let mut min_var = f64::INFINITY;
    for i in 0..count {
        let x = start + dx * i as f64;
        let xv = DVector::from_element(1, x);
        let post = gp.posterior(&xv)?;
        let mean = post.phi[0];
        let sd = post.sigma[(0, 0)].max(0.0).sqrt();
        let prior_mean = prior.mean_at(&xv)[0];
        let truth = toy1d_hess(x);
        table.push(vec![
            fmt_f64(x),
            fmt_f64(truth),
            fmt_f64(mean),
            fmt_f64(sd),
            fmt_f64(prior_mean),
        ]);
        min_var = min_var.min(post.sigma[(0, 0)]);
        if x >= p.observed[0] - 1e-9 && x <= p.observed[1] + 1e-9 {
            obs_true.push(truth);
            obs_post.push(mean);
            obs_prior.push(prior_mean);
        }
        if x <= p.far_field + 1e-9 {
            far_dev = far_dev.max((mean - prior_mean).abs());
        }
    }
    table.write(&cfg.out.join("gp_demo.csv"))?;

    let rmse_posterior = rmse(&obs_post, &obs_true);
    let rmse_prior = rmse(&obs_prior, &obs_true);
    let stats = GpDemoStats {
        rmse_posterior,
        rmse_prior,
        improvement: rmse_prior / rmse_posterior,
        far_field_max_dev: far_dev,
        min_var,
        grid_points: count,
    };
    let checks = GpDemoChecks {
        observed_region: stats.improvement >= 5.0,
        far_field: far_dev < 5.0,
        std_nonnegative: min_var >= -1e-9 * cfg.optimizer.prior.m,
    };
    let lines = vec![
        format!(
            "observed-region RMSE: posterior {:.4}, prior {:.4} ({:.1}x) {}",
            rmse_posterior,
            rmse_prior,
            stats.improvement,
            verdict(checks.observed_region)
        ),
        format!(
            "far-field max |mean - prior| for x <= {}: {:.4} {}",
            p.far_field,
            far_dev,
            verdict(checks.far_field)
        ),
        format!(
            "wrote {} grid points to {}",
            count,
            cfg.out.join("gp_demo.csv").display()
        ),
    ];
    finish(cfg, stats, checks, lines)
}
