//! One simulated regression problem: draw, fit, and check every bound.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::design::{sample_design, DesignKind, DesignSpec, DESIGN_STREAM};
use super::signal::{sample_signal, SignalSpec};
use crate::bounds::{
    c0_of, event_functionals, lasso_bound_rhs, slope_bound_rhs, BoundParams, BoundReport, Estimator,
    EventFunctionals, ReLabel,
};
use crate::error::{check_range, Error, Result};
use crate::norms::{
    best_s_term_error_l1, best_s_term_error_star, lq_norm, sorted_l1_norm, NormOrder, WeightSchedule,
};
use crate::re::{certified_re_lower_bound, estimate_re_path, stream_rng, ConeSpec, EstimateMethod, SearchConfig};
use crate::solver::{lasso_fit, max_column_scale, slope_fit, FitResult, ProblemInstance, SolverConfig, NORMALIZATION_SLACK};
use crate::weights::{slope_weights, LassoTuning, SlopeWeightConfig, DEFAULT_SLOPE_A};

/// Relative slack granted to `lhs ≤ rhs` for solver inaccuracy.
pub const VERDICT_SLACK: f64 = 1e-8;

/// Factor applied to the RE plug-in when probing whether a verdict depends on it.
pub const RE_TIGHTENING: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialConfig {
    pub design: DesignSpec,
    pub signal: SignalSpec,
    pub sigma: f64,
    /// Sparsity level used for tuning and bounds; defaults to the signal's.
    #[serde(default)]
    pub s: Option<usize>,
    #[serde(default = "default_q")]
    pub q: NormOrder,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_delta0")]
    pub delta0: f64,
    /// Slope weight constant.
    #[serde(default = "default_a", rename = "A")]
    pub slope_a: f64,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<Estimator>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub search: SearchConfig,
}

fn default_q() -> NormOrder {
    NormOrder::TWO
}
fn default_gamma() -> f64 {
    0.5
}
fn default_tau() -> f64 {
    0.25
}
fn default_delta0() -> f64 {
    0.1
}
fn default_a() -> f64 {
    DEFAULT_SLOPE_A
}
fn default_estimators() -> Vec<Estimator> {
    vec![Estimator::Lasso, Estimator::Slope]
}

impl TrialConfig {
    pub fn new(design: DesignSpec, signal: SignalSpec, sigma: f64) -> Self {
        TrialConfig {
            design,
            signal,
            sigma,
            s: None,
            q: default_q(),
            gamma: default_gamma(),
            tau: default_tau(),
            delta0: default_delta0(),
            slope_a: default_a(),
            estimators: default_estimators(),
            solver: SolverConfig::default(),
            search: SearchConfig::default(),
        }
    }

    /// Sparsity level for tuning and bounds.
    pub fn sparsity(&self) -> Result<usize> {
        let s = match (self.s, self.signal.sparsity()) {
            (Some(s), _) => s,
            (None, Some(s)) => s.max(1),
            (None, None) => return Err(Error::Missing("s (required for l_r ball signals)")),
        };
        check_range("s", s as f64, s >= 1 && s <= self.design.p, "[1, p]")?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.design.validate()?;
        self.signal.validate()?;
        if self.signal.p != self.design.p {
            return Err(Error::Dimension(format!(
                "signal has p = {} but design has p = {}",
                self.signal.p, self.design.p
            )));
        }
        check_range("sigma", self.sigma, self.sigma.is_finite() && self.sigma >= 0.0, ">= 0")?;
        self.sparsity()?;
        BoundParams::new(self.q, 1, self.gamma, self.tau, self.delta0, 1.0).validate()?;
        if self.estimators.is_empty() {
            return Err(Error::InvalidInput("no estimators selected".into()));
        }
        Ok(())
    }

    fn fits(&self, e: Estimator) -> bool {
        self.estimators.contains(&e)
    }
}

/// RE plug-ins shared by every trial on one design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReConstants {
    pub label: ReLabel,
    /// `θ_q(s, c₀(γ,τ))` and `θ_q(s, c₀(γ,0))`.
    pub theta: f64,
    pub theta_tau0: f64,
    /// `ν_q(s, c₀(γ,τ))` and `ν_q(s, c₀(γ,0))`.
    pub nu: f64,
    pub nu_tau0: f64,
    pub certified_lower: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub methods: Vec<EstimateMethod>,
}

/// Everything fixed across the trials of one batch.
#[derive(Debug, Clone)]
pub struct TrialContext {
    pub cfg: TrialConfig,
    pub s: usize,
    pub x: Array2<f64>,
    pub tuning: LassoTuning,
    pub weights: WeightSchedule,
    pub re: Option<ReConstants>,
}

impl TrialContext {
    /// Draws the design from `seed`; estimates RE constants when `with_bounds`.
    pub fn build(cfg: &TrialConfig, seed: u64, with_bounds: bool) -> Result<Self> {
        cfg.validate()?;
        let s = cfg.sparsity()?;
        let (n, p) = (cfg.design.n, cfg.design.p);
        let x = sample_design(&cfg.design, &mut stream_rng(seed, DESIGN_STREAM))?;
        let scale = max_column_scale(&x);
        if scale > 1.0 + NORMALIZATION_SLACK {
            return Err(Error::NotNormalized(scale));
        }
        let tuning = LassoTuning::at_threshold(cfg.gamma, cfg.sigma, n, p, s)?;
        let wcfg = SlopeWeightConfig::new(p, n, cfg.sigma).with_a(cfg.slope_a);
        wcfg.validate_for_gamma(cfg.gamma)?;
        let weights = slope_weights(&wcfg)?;
        let re = if with_bounds {
            Some(re_constants(cfg, &x, &weights, s)?)
        } else {
            None
        };
        Ok(TrialContext {
            cfg: cfg.clone(),
            s,
            x,
            tuning,
            weights,
            re,
        })
    }

    /// Runs trial `index`; its randomness comes from `(seed, index)` only.
    pub fn run(&self, seed: u64, index: u64) -> Result<TrialReport> {
        let cfg = &self.cfg;
        let mut rng = stream_rng(seed, index);
        let beta_star = sample_signal(&cfg.signal, &mut rng)?;
        let n = cfg.design.n;
        let noise: Array1<f64> =
            Array1::from_shape_simple_fn(n, || cfg.sigma * rng.sample::<f64, _>(StandardNormal));
        let f = self.x.dot(&beta_star);
        let inst = ProblemInstance::new(self.x.clone(), &f + &noise, cfg.sigma)?
            .with_beta_star(beta_star.clone())?;

        let b = beta_star.as_slice().expect("contiguous");
        let sigma_s_l1 = best_s_term_error_l1(b, self.s)?;
        let sigma_s_star = best_s_term_error_star(b, &self.weights, self.s)?;

        let lasso = if cfg.fits(Estimator::Lasso) {
            let fit = lasso_fit(&inst, self.tuning.lambda, &cfg.solver)?;
            Some(self.outcome(Estimator::Lasso, &inst, fit, sigma_s_l1)?)
        } else {
            None
        };
        let slope = if cfg.fits(Estimator::Slope) {
            let fit = slope_fit(&inst, &self.weights, &cfg.solver)?;
            Some(self.outcome(Estimator::Slope, &inst, fit, sigma_s_star)?)
        } else {
            None
        };
        Ok(TrialReport {
            index,
            seed,
            sigma_s_l1,
            sigma_s_star,
            lasso,
            slope,
        })
    }

    fn params(&self, re: &ReConstants, estimator: Estimator, factor: f64) -> BoundParams {
        let (main, tau0) = match estimator {
            Estimator::Lasso => (re.theta, re.theta_tau0),
            Estimator::Slope => (re.nu, re.nu_tau0),
        };
        BoundParams {
            re_constant_tau0: Some(tau0 * factor),
            re_label: re.label,
            ..BoundParams::new(self.cfg.q, self.s, self.cfg.gamma, self.cfg.tau, self.cfg.delta0, main * factor)
        }
    }

    fn bound(&self, re: &ReConstants, estimator: Estimator, approx: f64, factor: f64) -> Result<BoundReport> {
        let params = self.params(re, estimator, factor);
        match estimator {
            Estimator::Lasso => lasso_bound_rhs(&params, &self.tuning, self.cfg.design.p, approx),
            Estimator::Slope => slope_bound_rhs(&params, &self.weights, approx),
        }
    }

    fn outcome(
        &self,
        estimator: Estimator,
        inst: &ProblemInstance,
        fit: FitResult,
        approx: f64,
    ) -> Result<EstimatorOutcome> {
        let cfg = &self.cfg;
        let beta_star = inst.beta_star().expect("set by run");
        let u: Vec<f64> = fit.beta_hat.iter().zip(beta_star).map(|(a, b)| a - b).collect();
        let xu = inst.x().dot(&Array1::from(u.clone()));
        let penalty = match estimator {
            Estimator::Lasso => self.tuning.lambda * lq_norm(&u, NormOrder::ONE),
            Estimator::Slope => sorted_l1_norm(&u, &self.weights)?,
        };
        let errors = ErrorNorms {
            l1: lq_norm(&u, NormOrder::ONE),
            l2: lq_norm(&u, NormOrder::TWO),
            lq: lq_norm(&u, cfg.q),
            linf: lq_norm(&u, NormOrder::Infinity),
            penalty,
            prediction: xu.dot(&xu) / inst.n() as f64,
        };

        let event = if u.iter().all(|&v| v == 0.0) {
            None
        } else {
            Some(event_functionals(
                &u,
                inst,
                self.s,
                cfg.q,
                self.tuning.lambda,
                cfg.gamma,
                cfg.delta0,
            )?)
        };
        let event_holds = event.is_none_or(|e| e.event_holds());

        let (bounds, checks) = match &self.re {
            None => (None, Vec::new()),
            Some(re) => {
                let report = self.bound(re, estimator, approx, 1.0)?;
                let tight = self.bound(re, estimator, approx, RE_TIGHTENING)?;
                let checks = checks_for(estimator, &errors, cfg.tau, approx, &report, &tight);
                (Some(report), checks)
            }
        };

        Ok(EstimatorOutcome {
            estimator,
            errors,
            event,
            event_holds,
            bounds,
            checks,
            solver: SolverDiagnostics {
                converged: fit.converged,
                iterations: fit.iterations,
                stationarity_residual: fit.stationarity_residual,
                objective: fit.objective,
            },
            beta_hat: fit.beta_hat,
        })
    }
}

fn re_constants(cfg: &TrialConfig, x: &Array2<f64>, w: &WeightSchedule, s: usize) -> Result<ReConstants> {
    let certified_lower = certified_re_lower_bound(x);
    if matches!(cfg.design.kind, DesignKind::ScaledIdentity) {
        // ‖Xδ‖₂/√n = ‖δ‖₂ ≥ ‖δ‖_q for q ≥ 2, with equality on 1-sparse δ
        return Ok(ReConstants {
            label: ReLabel::Exact,
            theta: 1.0,
            theta_tau0: 1.0,
            nu: 1.0,
            nu_tau0: 1.0,
            certified_lower,
            methods: Vec::new(),
        });
    }
    let c0s = [c0_of(cfg.gamma, 0.0), c0_of(cfg.gamma, cfg.tau)];
    let q = cfg.q;
    let theta = estimate_re_path(x, |c0| ConeSpec::sre(q, s, c0), &c0s, &cfg.search)?;
    let nu = estimate_re_path(x, |c0| ConeSpec::wre(q, s, c0, w.clone()), &c0s, &cfg.search)?;
    Ok(ReConstants {
        label: ReLabel::Estimated,
        theta: theta[1].value,
        theta_tau0: theta[0].value,
        nu: nu[1].value,
        nu_tau0: nu[0].value,
        certified_lower,
        methods: theta.iter().chain(&nu).map(|e| e.method).collect(),
    })
}

fn holds(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + VERDICT_SLACK * (1.0 + rhs.abs())
}

fn checks_for(
    estimator: Estimator,
    e: &ErrorNorms,
    tau: f64,
    approx: f64,
    report: &BoundReport,
    tight: &BoundReport,
) -> Vec<CheckOutcome> {
    let names = match estimator {
        Estimator::Lasso => ["lasso_prediction", "lasso_l1", "lasso_lq_sparse", "lasso_lq_compressible"],
        Estimator::Slope => ["slope_prediction", "slope_sorted", "slope_lq_sparse", "slope_lq_compressible"],
    };
    let penalty_norm = match estimator {
        Estimator::Lasso => e.l1,
        Estimator::Slope => e.penalty,
    };
    let sparse = approx == 0.0;
    let rows = [
        (2.0 * tau * e.penalty + e.prediction, Some(report.rhs_prediction), Some(tight.rhs_prediction)),
        (penalty_norm, report.rhs_l1, tight.rhs_l1),
        (
            e.lq,
            sparse.then_some(report.rhs_lq_sparse),
            sparse.then_some(tight.rhs_lq_sparse),
        ),
        (e.lq, report.rhs_lq_compressible, tight.rhs_lq_compressible),
    ];
    names
        .iter()
        .zip(rows)
        .map(|(name, (lhs, rhs, rhs_tight))| {
            let verdict = rhs.map(|r| holds(lhs, r));
            let tightened = rhs_tight.map(|r| holds(lhs, r));
            CheckOutcome {
                name: name.to_string(),
                lhs,
                rhs,
                applicable: rhs.is_some(),
                holds: verdict.unwrap_or(true),
                re_sensitive: report.re_label == ReLabel::Estimated && verdict != tightened,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorNorms {
    pub l1: f64,
    pub l2: f64,
    /// At the configured `q`.
    pub lq: f64,
    pub linf: f64,
    /// `λ‖u‖₁` (Lasso) or `‖u‖_*` (Slope).
    pub penalty: f64,
    /// `(1/n)‖Xu‖₂²`.
    pub prediction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub converged: bool,
    pub iterations: usize,
    pub stationarity_residual: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub lhs: f64,
    pub rhs: Option<f64>,
    pub applicable: bool,
    /// `lhs ≤ rhs` up to [`VERDICT_SLACK`]; true when not applicable.
    pub holds: bool,
    /// The verdict changes when the RE estimate shrinks by [`RE_TIGHTENING`].
    pub re_sensitive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOutcome {
    pub estimator: Estimator,
    pub errors: ErrorNorms,
    /// Noise-event functionals at `u = β̂ − β*`; `None` when `u = 0`.
    pub event: Option<EventFunctionals>,
    pub event_holds: bool,
    pub bounds: Option<BoundReport>,
    pub checks: Vec<CheckOutcome>,
    pub solver: SolverDiagnostics,
    pub beta_hat: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub index: u64,
    pub seed: u64,
    pub sigma_s_l1: f64,
    pub sigma_s_star: f64,
    pub lasso: Option<EstimatorOutcome>,
    pub slope: Option<EstimatorOutcome>,
}

impl TrialReport {
    pub fn outcomes(&self) -> impl Iterator<Item = &EstimatorOutcome> {
        self.lasso.iter().chain(self.slope.iter())
    }

    pub fn checks(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.outcomes().flat_map(|o| o.checks.iter())
    }

    pub fn converged(&self) -> bool {
        self.outcomes().all(|o| o.solver.converged)
    }
}

/// Builds the design from `seed` and runs trial 0 with bounds.
pub fn run_trial(cfg: &TrialConfig, seed: u64) -> Result<TrialReport> {
    TrialContext::build(cfg, seed, true)?.run(seed, 0)
}
