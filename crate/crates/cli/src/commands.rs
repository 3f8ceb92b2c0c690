//! Subcommand configs and handlers.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Result};
use serde::{Deserialize, Serialize};
use slopebound_core::bounds::{lasso_bound_rhs, slope_bound_rhs, BoundParams, Estimator, ReLabel};
use slopebound_core::harness::{monte_carlo, rate_sweep, sweep_csv, trials_csv, SweepConfig, TrialConfig};
use slopebound_core::norms::{NormOrder, WeightSchedule};
use slopebound_core::re::{
    estimate_re, max_sparse_eigenvalue, ConeSpec, SearchConfig,
};
use slopebound_core::solver::{lasso_fit, slope_fit, ProblemInstance, SolverConfig};
use slopebound_core::weights::{slope_weights, LassoTuning, SlopeWeightConfig, DEFAULT_SLOPE_A};

use crate::io::{fmt_f64, json_text, read_matrix, read_vector, vector_text, Outputs};
use crate::Failure;

/// Flags shared by every subcommand.
pub struct Common {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub strict: bool,
    pub randomized: bool,
}

fn require_config(common: &Common) -> Result<&Path, Failure> {
    common
        .config
        .as_deref()
        .ok_or_else(|| Failure::Validation(anyhow!("--config is required")))
}

fn load<T: serde::de::DeserializeOwned>(common: &Common) -> Result<T, Failure> {
    crate::io::read_json(require_config(common)?).map_err(Failure::Validation)
}

pub fn weights(common: &Common, flags: Option<SlopeWeightConfig>) -> Result<Outputs, Failure> {
    let cfg: SlopeWeightConfig = match (&common.config, flags) {
        (Some(_), _) => load(common)?,
        (None, Some(cfg)) => cfg,
        (None, None) => return Err(Failure::Validation(anyhow!("give --config or --p, --n and --sigma"))),
    };
    let w = slope_weights(&cfg)?;
    let mut csv = String::from("j,lambda\n");
    for (j, v) in w.as_slice().iter().enumerate() {
        let _ = writeln!(csv, "{},{}", j + 1, fmt_f64(*v));
    }
    let mut out = Outputs::default();
    out.add("weights.csv", csv);
    Ok(out)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct Tuning {
    sigma: f64,
    #[serde(default = "half")]
    gamma: f64,
    /// Needed for the Lasso threshold.
    #[serde(default)]
    s: Option<usize>,
    #[serde(default = "default_a", rename = "A")]
    a: f64,
}

fn half() -> f64 {
    0.5
}

fn default_a() -> f64 {
    DEFAULT_SLOPE_A
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolveConfig {
    estimator: Estimator,
    /// Matrix CSV, resolved against the config's directory.
    design: PathBuf,
    /// Vector file.
    response: PathBuf,
    #[serde(default)]
    lambda: Option<f64>,
    #[serde(default)]
    weights: Option<WeightSchedule>,
    #[serde(default)]
    tuning: Option<Tuning>,
    #[serde(default)]
    solver: SolverConfig,
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    estimator: Estimator,
    lambda: Option<f64>,
    objective: f64,
    iterations: usize,
    converged: bool,
    stationarity_residual: f64,
    #[serde(skip_serializing_if = "<[f64]>::is_empty")]
    objective_trace: &'a [f64],
}

fn resolve(config: &Path, file: &Path) -> PathBuf {
    match config.parent() {
        Some(dir) if file.is_relative() => dir.join(file),
        _ => file.to_path_buf(),
    }
}

pub fn solve(common: &Common) -> Result<Outputs, Failure> {
    let cfg: SolveConfig = load(common)?;
    let path = require_config(common)?;
    let x = read_matrix(&resolve(path, &cfg.design)).map_err(Failure::Validation)?;
    let y = read_vector(&resolve(path, &cfg.response)).map_err(Failure::Validation)?;
    let (n, p) = x.dim();
    let sigma = cfg.tuning.as_ref().map_or(1.0, |t| t.sigma);
    let inst = ProblemInstance::new(x, y.into(), sigma)?;
    if common.strict {
        inst.require_normalized()?;
    }
    let (fit, lambda) = match cfg.estimator {
        Estimator::Lasso => {
            let lambda = match (cfg.lambda, &cfg.tuning) {
                (Some(l), _) => l,
                (None, Some(t)) => {
                    let s = t.s.ok_or_else(|| Failure::Validation(anyhow!("tuning.s is required for the Lasso")))?;
                    LassoTuning::at_threshold(t.gamma, t.sigma, n, p, s)?.lambda
                }
                (None, None) => return Err(Failure::Validation(anyhow!("give lambda or tuning"))),
            };
            (lasso_fit(&inst, lambda, &cfg.solver)?, Some(lambda))
        }
        Estimator::Slope => {
            let w = match (cfg.weights, &cfg.tuning) {
                (Some(w), _) => w,
                (None, Some(t)) => slope_weights(&SlopeWeightConfig::new(p, n, t.sigma).with_a(t.a))?,
                (None, None) => return Err(Failure::Validation(anyhow!("give weights or tuning"))),
            };
            (slope_fit(&inst, &w, &cfg.solver)?, None)
        }
    };
    if common.strict && !fit.converged {
        return Err(Failure::Numerical(anyhow!(
            "solver did not converge in {} iterations (residual {})",
            fit.iterations,
            fit.stationarity_residual
        )));
    }
    let summary = SolveSummary {
        estimator: cfg.estimator,
        lambda,
        objective: fit.objective,
        iterations: fit.iterations,
        converged: fit.converged,
        stationarity_residual: fit.stationarity_residual,
        objective_trace: &fit.objective_trace,
    };
    let mut out = Outputs::default();
    out.add("beta_hat.txt", vector_text(&fit.beta_hat));
    out.add("solve.json", json_text(&summary).map_err(Failure::Validation)?);
    Ok(out)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundsConfig {
    estimator: Estimator,
    q: NormOrder,
    s: usize,
    gamma: f64,
    tau: f64,
    delta0: f64,
    re_constant: f64,
    #[serde(default)]
    re_constant_tau0: Option<f64>,
    #[serde(default = "estimated")]
    re_label: ReLabel,
    n: usize,
    p: usize,
    #[serde(default = "one")]
    sigma: f64,
    /// Lasso tuning parameter; defaults to the admissible minimum.
    #[serde(default)]
    lambda: Option<f64>,
    #[serde(default = "default_a", rename = "A")]
    a: f64,
    /// Best s-term approximation error of the target vector.
    #[serde(default)]
    sigma_s: f64,
}

fn estimated() -> ReLabel {
    ReLabel::Estimated
}

fn one() -> f64 {
    1.0
}

pub fn bounds(common: &Common) -> Result<Outputs, Failure> {
    let cfg: BoundsConfig = load(common)?;
    let params = BoundParams {
        re_constant_tau0: cfg.re_constant_tau0,
        re_label: cfg.re_label,
        ..BoundParams::new(cfg.q, cfg.s, cfg.gamma, cfg.tau, cfg.delta0, cfg.re_constant)
    };
    let report = match cfg.estimator {
        Estimator::Lasso => {
            let tuning = match cfg.lambda {
                Some(l) => LassoTuning::from_lambda(l, cfg.gamma, cfg.sigma, cfg.n)?,
                None => LassoTuning::at_threshold(cfg.gamma, cfg.sigma, cfg.n, cfg.p, cfg.s)?,
            };
            lasso_bound_rhs(&params, &tuning, cfg.p, cfg.sigma_s)?
        }
        Estimator::Slope => {
            let w = slope_weights(&SlopeWeightConfig::new(cfg.p, cfg.n, cfg.sigma).with_a(cfg.a))?;
            slope_bound_rhs(&params, &w, cfg.sigma_s)?
        }
    };
    let mut out = Outputs::default();
    out.add("bounds.json", json_text(&report).map_err(Failure::Validation)?);
    Ok(out)
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
enum ReQuantity {
    Theta,
    Nu,
    MaxSparseEigenvalue,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReConfig {
    quantity: ReQuantity,
    design: PathBuf,
    s: usize,
    #[serde(default = "two")]
    q: NormOrder,
    #[serde(default)]
    c0: Option<f64>,
    /// Cone weights for `nu`; default to the Slope schedule at `sigma`.
    #[serde(default)]
    weights: Option<WeightSchedule>,
    #[serde(default = "one")]
    sigma: f64,
    #[serde(default = "default_a", rename = "A")]
    a: f64,
    #[serde(default)]
    search: SearchConfig,
}

fn two() -> NormOrder {
    NormOrder::TWO
}

pub fn re(common: &Common) -> Result<Outputs, Failure> {
    let cfg: ReConfig = load(common)?;
    let x = read_matrix(&resolve(require_config(common)?, &cfg.design)).map_err(Failure::Validation)?;
    let (n, p) = x.dim();
    let mut search = cfg.search.clone();
    search.strict |= common.strict;
    if let Some(seed) = common.seed {
        search.seed = seed;
    }
    if common.randomized {
        search.exhaustive_budget = 0.0;
    }
    let c0 = || cfg.c0.ok_or_else(|| Failure::Validation(anyhow!("c0 is required")));
    let text = match cfg.quantity {
        ReQuantity::Theta => json_text(&estimate_re(&x, &ConeSpec::sre(cfg.q, cfg.s, c0()?)?, &search)?),
        ReQuantity::Nu => {
            let w = match cfg.weights {
                Some(w) => w,
                None => slope_weights(&SlopeWeightConfig::new(p, n, cfg.sigma).with_a(cfg.a))?,
            };
            json_text(&estimate_re(&x, &ConeSpec::wre(cfg.q, cfg.s, c0()?, w)?, &search)?)
        }
        ReQuantity::MaxSparseEigenvalue => json_text(&max_sparse_eigenvalue(
            &x,
            cfg.s,
            common.randomized,
            cfg.search.exhaustive_budget,
            search.seed,
        )?),
    }
    .map_err(Failure::Validation)?;
    let mut out = Outputs::default();
    out.add("re.json", text);
    Ok(out)
}

pub fn simulate(common: &Common) -> Result<Outputs, Failure> {
    let mut cfg: TrialConfig = load(common)?;
    cfg.search.strict |= common.strict;
    let trials = common.trials.unwrap_or(200);
    let seed = common.seed.unwrap_or(0);
    let report = monte_carlo(&cfg, trials, seed)?;
    if common.strict && report.non_converged > 0 {
        return Err(Failure::Numerical(anyhow!(
            "{} of {trials} trials had a solver that did not converge",
            report.non_converged
        )));
    }
    let mut out = Outputs::default();
    out.add("trials.csv", trials_csv(&report));
    out.add("summary.json", json_text(&report).map_err(Failure::Validation)?);
    Ok(out)
}

pub fn sweep(common: &Common) -> Result<Outputs, Failure> {
    let mut cfg: SweepConfig = load(common)?;
    if let Some(t) = common.trials {
        cfg.trials_per_point = t;
    }
    let table = rate_sweep(&cfg, common.seed.unwrap_or(0))?;
    if common.strict {
        let bad: usize = table.points.iter().map(|p| p.non_converged).sum();
        if bad > 0 {
            return Err(Failure::Numerical(anyhow!("{bad} fits did not converge")));
        }
    }
    let mut out = Outputs::default();
    out.add("sweep.csv", sweep_csv(&table));
    out.add("sweep.json", json_text(&table).map_err(Failure::Validation)?);
    Ok(out)
}
