//! Repeated trials on one design, aggregated into coverage and event rates.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::trial::{ReConstants, TrialConfig, TrialContext, TrialReport};
use crate::bounds::Estimator;
use crate::error::{check_range, Result};

/// Two-sided 95% normal quantile.
pub const WILSON_Z: f64 = 1.959_963_984_540_054;

pub const EVENT_NOTE: &str = "the event is checked only at the realized error vectors, \
so its frequency overstates the probability of the event over all directions";

/// Wilson score interval for `k` successes out of `n` at 95%.
pub fn wilson_interval(k: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let (k, n) = (k as f64, n as f64);
    let z2 = WILSON_Z * WILSON_Z;
    let phat = k / n;
    let centre = (phat + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = WILSON_Z / (1.0 + z2 / n) * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if k == 0.0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if k == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub name: String,
    /// Trials in which the bound applies.
    pub applicable: usize,
    pub holds: usize,
    pub fraction: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    /// Trials whose verdict flips when the RE estimate is tightened.
    pub re_sensitive: usize,
    /// Failures among trials where the noise event held.
    pub failures_on_event: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSummary {
    pub estimator: Estimator,
    pub holds: usize,
    pub trials: usize,
    pub frequency: f64,
    /// `1 − δ₀/2`.
    pub target: f64,
    /// Binomial standard error at the target.
    pub standard_error: f64,
    /// `frequency ≥ target − 3·standard_error`.
    pub meets_target: bool,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub seed: u64,
    pub trials: usize,
    pub lambda: f64,
    pub re: Option<ReConstants>,
    pub coverage: Vec<Coverage>,
    pub events: Vec<EventSummary>,
    pub non_converged: usize,
    #[serde(skip)]
    pub reports: Vec<TrialReport>,
}

/// Runs `n_trials` trials on a design drawn from `seed`, in parallel, and folds
/// the results in trial order.
pub fn monte_carlo(cfg: &TrialConfig, n_trials: usize, seed: u64) -> Result<SimulationReport> {
    check_range("trials", n_trials as f64, n_trials >= 1, ">= 1")?;
    let ctx = TrialContext::build(cfg, seed, true)?;
    let reports = (0..n_trials as u64)
        .into_par_iter()
        .map(|i| ctx.run(seed, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(&ctx, seed, reports))
}

pub fn aggregate(ctx: &TrialContext, seed: u64, reports: Vec<TrialReport>) -> SimulationReport {
    let mut coverage: Vec<Coverage> = Vec::new();
    for r in &reports {
        for o in r.outcomes() {
            for c in &o.checks {
                let entry = match coverage.iter_mut().find(|e| e.name == c.name) {
                    Some(e) => e,
                    None => {
                        coverage.push(Coverage {
                            name: c.name.clone(),
                            applicable: 0,
                            holds: 0,
                            fraction: f64::NAN,
                            wilson_low: 0.0,
                            wilson_high: 1.0,
                            re_sensitive: 0,
                            failures_on_event: 0,
                        });
                        coverage.last_mut().expect("pushed")
                    }
                };
                if c.applicable {
                    entry.applicable += 1;
                    entry.holds += usize::from(c.holds);
                    entry.re_sensitive += usize::from(c.re_sensitive);
                    entry.failures_on_event += usize::from(!c.holds && o.event_holds);
                }
            }
        }
    }
    for c in &mut coverage {
        if c.applicable > 0 {
            c.fraction = c.holds as f64 / c.applicable as f64;
        }
        (c.wilson_low, c.wilson_high) = wilson_interval(c.holds, c.applicable);
    }
    // serde_json cannot write NaN
    coverage.retain(|c| c.applicable > 0);

    let trials = reports.len();
    let target = 1.0 - ctx.cfg.delta0 / 2.0;
    let standard_error = (target * (1.0 - target) / trials as f64).sqrt();
    let events = [Estimator::Lasso, Estimator::Slope]
        .into_iter()
        .filter(|e| ctx.cfg.estimators.contains(e))
        .map(|estimator| {
            let holds = reports
                .iter()
                .flat_map(|r| r.outcomes())
                .filter(|o| o.estimator == estimator && o.event_holds)
                .count();
            let frequency = holds as f64 / trials as f64;
            EventSummary {
                estimator,
                holds,
                trials,
                frequency,
                target,
                standard_error,
                meets_target: frequency >= target - 3.0 * standard_error,
                note: EVENT_NOTE.to_string(),
            }
        })
        .collect();

    SimulationReport {
        seed,
        trials,
        lambda: ctx.tuning.lambda,
        re: ctx.re.clone(),
        coverage,
        events,
        non_converged: reports.iter().filter(|r| !r.converged()).count(),
        reports,
    }
}

fn cell(out: &mut String, v: f64) {
    let _ = write!(out, ",{v:.16e}");
}

fn opt_cell(out: &mut String, v: Option<f64>) {
    match v {
        Some(v) => cell(out, v),
        None => out.push(','),
    }
}

/// One row per trial and estimator, floats at 17 significant digits.
pub fn trials_csv(report: &SimulationReport) -> String {
    let check_names: Vec<&str> = report
        .reports
        .first()
        .map(|r| r.checks().map(|c| c.name.as_str()).collect())
        .unwrap_or_default();
    let mut out = String::from(
        "trial,estimator,converged,iterations,err_l1,err_l2,err_lq,err_linf,prediction,event_holds",
    );
    for name in &check_names {
        let _ = write!(out, ",{name}_lhs,{name}_rhs,{name}_holds");
    }
    out.push('\n');
    for r in &report.reports {
        for o in r.outcomes() {
            let label = match o.estimator {
                Estimator::Lasso => "lasso",
                Estimator::Slope => "slope",
            };
            let _ = write!(out, "{},{label},{},{}", r.index, o.solver.converged, o.solver.iterations);
            let e = &o.errors;
            for v in [e.l1, e.l2, e.lq, e.linf, e.prediction] {
                cell(&mut out, v);
            }
            let _ = write!(out, ",{}", o.event_holds);
            for name in &check_names {
                match o.checks.iter().find(|c| c.name == *name) {
                    Some(c) => {
                        cell(&mut out, c.lhs);
                        opt_cell(&mut out, c.rhs);
                        let _ = write!(out, ",{}", if c.applicable { c.holds.to_string() } else { String::new() });
                    }
                    None => out.push_str(",,,"),
                }
            }
            out.push('\n');
        }
    }
    out
}
