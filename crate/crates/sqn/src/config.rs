//! Experiment configuration: built-in defaults per experiment, an optional
//! JSON file merged on top, then command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sqn_core::gp::{GpPrior, MeasurementMode};
use sqn_core::linesearch::LineSearchConfig;
use sqn_core::nalgebra::DMatrix;
use sqn_core::optimizer::OptimizerConfig;
use sqn_core::ssm::{ParticleFilterConfig, Resampling, ScoreMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    GpDemo,
    Run1d,
    RunLgss,
    RunNltoy,
    ArmijoCheck,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::GpDemo,
        Experiment::Run1d,
        Experiment::RunLgss,
        Experiment::RunNltoy,
        Experiment::ArmijoCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::GpDemo => "gp-demo",
            Experiment::Run1d => "run-1d",
            Experiment::RunLgss => "run-lgss",
            Experiment::RunNltoy => "run-nltoy",
            Experiment::ArmijoCheck => "armijo-check",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Full,
    Simplified,
}

impl From<Mode> for MeasurementMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Full => MeasurementMode::Full,
            Mode::Simplified => MeasurementMode::Simplified,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Score {
    StateSpace,
    NoiseSpace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResamplingScheme {
    Multinomial,
    Systematic,
}

/// Isotropic GP prior: `M = m I`, `V = v I`, `μ = vech(mu I)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSettings {
    pub m: f64,
    pub v: f64,
    pub mu: f64,
}

impl PriorSettings {
    pub fn isotropic(m: f64, v: f64, mu: f64) -> Self {
        Self { m, v, mu }
    }

    pub fn build(&self, n: usize) -> Result<GpPrior> {
        Ok(GpPrior::isotropic(n, self.m, self.v, self.mu)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSearchSettings {
    pub c: f64,
    pub rho: f64,
    pub xi: f64,
    pub tau: usize,
}

impl From<LineSearchSettings> for LineSearchConfig {
    fn from(s: LineSearchSettings) -> Self {
        LineSearchConfig {
            c: s.c,
            rho: s.rho,
            xi: s.xi,
            tau: s.tau,
        }
    }
}

/// Gradient-noise covariance handed to the GP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSetting {
    /// `R = s I`.
    ScaledIdentity(f64),
    /// `R = diag(d)`.
    Diagonal(Vec<f64>),
    /// Diagonal of the sample covariance of this many gradient draws at the
    /// starting point.
    Estimate(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub iters: usize,
    pub epsilon: f64,
    pub memory: usize,
    pub mode: Mode,
    pub quad_nodes: usize,
    pub prior: PriorSettings,
    pub line_search: LineSearchSettings,
    /// Gradient-noise covariance, in the problem's coordinates.
    pub noise: NoiseSetting,
    /// Coordinate scales `s`: the optimiser works on `z = s ⊙ x`. The prior,
    /// `epsilon` and the step lengths refer to `z`.
    #[serde(default)]
    pub scaling: Option<Vec<f64>>,
}

impl OptimizerSettings {
    pub fn build(&self, n: usize, noise_cov: DMatrix<f64>, seed: u64) -> Result<OptimizerConfig> {
        let cfg = OptimizerConfig {
            k_max: self.iters,
            epsilon: self.epsilon,
            memory_p: self.memory,
            prior: self.prior.build(n)?,
            mode: self.mode.into(),
            quad_nodes: self.quad_nodes,
            noise_cov,
            line_search: self.line_search.into(),
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpDemoProblem {
    /// Number of gradient observations.
    pub points: usize,
    /// Iterates are equally spaced on this interval.
    pub span: [f64; 2],
    /// Posterior grid `[start, stop, step]`.
    pub grid: [f64; 3],
    /// Gradient-noise variance.
    pub grad_noise_var: f64,
    /// RMSE comparison interval.
    pub observed: [f64; 2],
    /// Grid points at or below this value form the far field.
    pub far_field: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Toy1dProblem {
    pub x0: f64,
    pub cost_noise_var: f64,
    pub cost_bias: f64,
    pub grad_noise_var: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LgssProblem {
    pub series_len: usize,
    pub cost_noise_std: f64,
    pub grad_noise_std: f64,
    /// Initial `a` is drawn from `U(-bound, bound)`.
    pub init_a_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlBenchProblem {
    pub series_len: usize,
    pub particles: usize,
    /// Initial `q` is drawn from `U(q/2, 3q/2)` around this value instead
    /// of the true `q = 0`; zero starts at the log-variance floor.
    #[serde(default)]
    pub init_q: f64,
    pub score: Score,
    pub resampling: ResamplingScheme,
}

impl NlBenchProblem {
    pub fn pf_config(&self) -> ParticleFilterConfig {
        ParticleFilterConfig {
            particles: self.particles,
            resampling: match self.resampling {
                ResamplingScheme::Multinomial => Resampling::Multinomial,
                ResamplingScheme::Systematic => Resampling::Systematic,
            },
            score: match self.score {
                Score::StateSpace => ScoreMethod::StateSpace,
                Score::NoiseSpace => ScoreMethod::NoiseSpace,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmijoProblem {
    /// Row-major Hessian of `f(x) = ½ xᵀ A x`.
    pub a: Vec<f64>,
    pub x: Vec<f64>,
    /// Row-major scaling matrix `B`.
    pub b: Vec<f64>,
    /// Row-major gradient-noise covariance `R`.
    pub r: Vec<f64>,
    pub cost_bias: f64,
    pub cost_noise_var: f64,
    pub draws: usize,
    /// Step is `alpha_scale · ‖x‖ / ‖B∇f‖`.
    pub alpha_scale: f64,
    /// Multiples of `c̄` to test.
    pub c_factors: Vec<f64>,
    /// Width of the acceptance band in standard errors.
    pub band: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Problem {
    GpDemo(GpDemoProblem),
    Toy1d(Toy1dProblem),
    Lgss(LgssProblem),
    NlBench(NlBenchProblem),
    Armijo(ArmijoProblem),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub runs: usize,
    pub out: PathBuf,
    pub optimizer: OptimizerSettings,
    pub problem: Problem,
}

/// Command-line overrides; `None` keeps the configured value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub iters: Option<usize>,
    pub particles: Option<usize>,
    pub out: Option<PathBuf>,
    pub mode: Option<Mode>,
}

fn default_line_search() -> LineSearchSettings {
    let d = LineSearchConfig::default();
    LineSearchSettings {
        c: d.c,
        rho: d.rho,
        xi: d.xi,
        tau: d.tau,
    }
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let base_opt = OptimizerSettings {
            iters: 300,
            epsilon: sqn_core::direction::DEFAULT_EPSILON,
            memory: 5,
            mode: Mode::Full,
            quad_nodes: sqn_core::gp::DEFAULT_QUAD_NODES,
            prior: PriorSettings::isotropic(10.0, 1.0, 1.0),
            line_search: default_line_search(),
            noise: NoiseSetting::ScaledIdentity(1.0),
            scaling: None,
        };
        let (runs, optimizer, problem) = match experiment {
            Experiment::GpDemo => (
                1,
                OptimizerSettings {
                    prior: PriorSettings::isotropic(1000.0, 0.2, 100.0),
                    noise: NoiseSetting::ScaledIdentity(100.0),
                    ..base_opt
                },
                Problem::GpDemo(GpDemoProblem {
                    points: 12,
                    span: [-5.0, 7.0],
                    grid: [-15.0, 8.0, 0.1],
                    grad_noise_var: 100.0,
                    observed: [-4.0, 6.0],
                    far_field: -12.0,
                }),
            ),
            Experiment::Run1d => (
                10,
                OptimizerSettings {
                    iters: 100,
                    prior: PriorSettings::isotropic(1000.0, 0.2, 100.0),
                    noise: NoiseSetting::ScaledIdentity(100.0),
                    ..base_opt
                },
                Problem::Toy1d(Toy1dProblem {
                    x0: -4.0,
                    cost_noise_var: 1.0,
                    cost_bias: 0.0,
                    grad_noise_var: 100.0,
                }),
            ),
            Experiment::RunLgss => (
                20,
                OptimizerSettings {
                    prior: PriorSettings::isotropic(100.0, 1.0, 300.0),
                    ..base_opt
                },
                Problem::Lgss(LgssProblem {
                    series_len: 100,
                    cost_noise_std: 1.0,
                    grad_noise_std: 1.0,
                    init_a_bound: 0.95,
                }),
            ),
            Experiment::RunNltoy => (
                10,
                OptimizerSettings {
                    epsilon: 1.0,
                    prior: PriorSettings::isotropic(1.0, 1.0, 10.0),
                    noise: NoiseSetting::Estimate(20),
                    scaling: Some(vec![5500.0, 50.0, 400.0, 4500.0, 1.0, 7.0]),
                    ..base_opt
                },
                Problem::NlBench(NlBenchProblem {
                    series_len: 100,
                    particles: 50,
                    init_q: 0.0,
                    score: Score::NoiseSpace,
                    resampling: ResamplingScheme::Multinomial,
                }),
            ),
            Experiment::ArmijoCheck => (
                1,
                base_opt,
                Problem::Armijo(ArmijoProblem {
                    a: vec![2.0, 0.0, 0.0, 1.0],
                    x: vec![1.0, 1.0],
                    b: vec![0.8, 0.1, 0.1, 0.5],
                    r: vec![1.0, 0.0, 0.0, 1.0],
                    cost_bias: 0.5,
                    cost_noise_var: 1e-6,
                    draws: 100_000,
                    alpha_scale: 1e-3,
                    c_factors: vec![0.9, 2.0],
                    band: 4.0,
                }),
            ),
        };
        Self {
            experiment,
            seed: 1,
            runs,
            out: PathBuf::from("out").join(experiment.name()),
            optimizer,
            problem,
        }
    }

    /// Defaults for `experiment`, with the JSON object `patch` merged on top.
    pub fn from_json(experiment: Experiment, patch: Value) -> Result<Self> {
        let mut base = serde_json::to_value(Self::defaults(experiment))?;
        if let Some(name) = patch.get("experiment") {
            let requested: Experiment =
                serde_json::from_value(name.clone()).context("unknown experiment name")?;
            if requested != experiment {
                bail!("config is for {requested}, not {experiment}");
            }
        }
        merge(&mut base, patch);
        let cfg: Self = serde_json::from_value(base).context("invalid configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(experiment: Experiment, path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let patch: Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Self::from_json(experiment, patch)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(r) = o.runs {
            self.runs = r;
        }
        if let Some(i) = o.iters {
            self.optimizer.iters = i;
        }
        if let Some(m) = o.mode {
            self.optimizer.mode = m;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(p) = o.particles {
            match &mut self.problem {
                Problem::NlBench(nl) => nl.particles = p,
                _ => bail!("--particles only applies to run-nltoy"),
            }
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            bail!("run count must be at least 1");
        }
        let expected = match self.experiment {
            Experiment::GpDemo => matches!(self.problem, Problem::GpDemo(_)),
            Experiment::Run1d => matches!(self.problem, Problem::Toy1d(_)),
            Experiment::RunLgss => matches!(self.problem, Problem::Lgss(_)),
            Experiment::RunNltoy => matches!(self.problem, Problem::NlBench(_)),
            Experiment::ArmijoCheck => matches!(self.problem, Problem::Armijo(_)),
        };
        if !expected {
            bail!("problem kind does not match experiment {}", self.experiment);
        }
        if let Problem::NlBench(nl) = &self.problem {
            if nl.particles < 2 {
                bail!("particle filter needs at least 2 particles");
            }
        }
        Ok(())
    }
}

/// Recursive JSON merge; objects merge key by key, everything else is replaced.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
