//! Error-rate sweeps along one problem dimension.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::design::DesignKind;
use super::signal::SignalKind;
use super::trial::{TrialConfig, TrialContext};
use crate::bounds::{minimax_rate, Estimator};
use crate::error::{check_range, Error, Result};
use crate::norms::NormOrder;

/// Median errors below this are treated as solver noise.
pub const ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    S,
    P,
    N,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub grid: Vec<usize>,
    pub base: TrialConfig,
    #[serde(default = "default_trials")]
    pub trials_per_point: usize,
    #[serde(default = "default_estimator")]
    pub estimator: Estimator,
}

fn default_trials() -> usize {
    50
}

fn default_estimator() -> Estimator {
    Estimator::Slope
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: usize,
    pub n: usize,
    pub p: usize,
    pub s: usize,
    /// `σ sqrt(s log(ep/s)/n)`.
    pub predictor: f64,
    pub median_l2_error: f64,
    pub trials: usize,
    pub non_converged: usize,
    /// Fits that returned the zero vector.
    pub zero_fits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub estimator: Estimator,
    pub points: Vec<SweepPoint>,
    /// Least-squares slope of log median error against log predictor.
    pub slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// Slope of the least-squares line through `(x, y)`; `None` without spread in `x`.
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn point_config(cfg: &SweepConfig, value: usize) -> Result<TrialConfig> {
    let mut t = cfg.base.clone();
    t.estimators = vec![cfg.estimator];
    match cfg.axis {
        SweepAxis::S => {
            match &mut t.signal.kind {
                SignalKind::ExactSparse { s, .. } => *s = value,
                SignalKind::LrBall { .. } => {}
            }
            t.s = Some(value);
        }
        SweepAxis::P | SweepAxis::N => {
            if matches!(t.design.kind, DesignKind::Anisotropic { .. }) {
                return Err(Error::InvalidInput(
                    "a fixed covariance cannot follow a p or n sweep".into(),
                ));
            }
            if cfg.axis == SweepAxis::P {
                t.design.p = value;
                t.signal.p = value;
            } else {
                t.design.n = value;
            }
            if matches!(t.design.kind, DesignKind::ScaledIdentity) {
                t.design.n = value;
                t.design.p = value;
                t.signal.p = value;
            }
        }
    }
    t.validate()?;
    Ok(t)
}

/// Median ℓ2 error per grid point and the fitted log-log slope against `ψ_{n,2}`.
pub fn rate_sweep(cfg: &SweepConfig, seed: u64) -> Result<SweepTable> {
    if cfg.grid.is_empty() {
        return Err(Error::InvalidInput("empty grid".into()));
    }
    if cfg.grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("grid must be strictly ascending".into()));
    }
    check_range("trials_per_point", cfg.trials_per_point as f64, cfg.trials_per_point >= 1, ">= 1")?;

    let mut points = Vec::with_capacity(cfg.grid.len());
    for (k, &value) in cfg.grid.iter().enumerate() {
        let t = point_config(cfg, value)?;
        let point_seed = seed.wrapping_add((k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let ctx = TrialContext::build(&t, point_seed, false)?;
        let outcomes = (0..cfg.trials_per_point as u64)
            .into_par_iter()
            .map(|i| ctx.run(point_seed, i))
            .collect::<Result<Vec<_>>>()?;
        let mut errors = Vec::with_capacity(outcomes.len());
        let mut non_converged = 0;
        let mut zero_fits = 0;
        for r in &outcomes {
            for o in r.outcomes() {
                errors.push(o.errors.l2);
                non_converged += usize::from(!o.solver.converged);
                zero_fits += usize::from(o.beta_hat.iter().all(|&b| b == 0.0));
            }
        }
        let (n, p, s) = (t.design.n, t.design.p, ctx.s);
        points.push(SweepPoint {
            value,
            n,
            p,
            s,
            predictor: minimax_rate(n, p, s, NormOrder::TWO, t.sigma)?,
            median_l2_error: median(&mut errors),
            trials: cfg.trials_per_point,
            non_converged,
            zero_fits,
        });
    }

    let mut flags = Vec::new();
    let at_floor = points.iter().any(|pt| pt.median_l2_error < ERROR_FLOOR || pt.predictor <= 0.0);
    if at_floor {
        flags.push("errors_at_solver_floor".into());
    }
    if points.iter().any(|pt| 2 * pt.zero_fits > pt.trials) {
        // the error is then just the signal norm
        flags.push("mostly_zero_estimates".into());
    }
    if points.len() < 2 {
        flags.push("single_point_grid".into());
    }
    let slope = if at_floor {
        None
    } else {
        let lx: Vec<f64> = points.iter().map(|pt| pt.predictor.ln()).collect();
        let ly: Vec<f64> = points.iter().map(|pt| pt.median_l2_error.ln()).collect();
        least_squares_slope(&lx, &ly)
    };
    Ok(SweepTable {
        axis: cfg.axis,
        estimator: cfg.estimator,
        points,
        slope,
        flags,
    })
}

/// One row per grid point, floats at 17 significant digits.
pub fn sweep_csv(table: &SweepTable) -> String {
    let mut out = String::from("value,n,p,s,predictor,median_l2_error,trials,non_converged,zero_fits\n");
    for pt in &table.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.16e},{:.16e},{},{},{}",
            pt.value,
            pt.n,
            pt.p,
            pt.s,
            pt.predictor,
            pt.median_l2_error,
            pt.trials,
            pt.non_converged,
            pt.zero_fits
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::design::DesignSpec;
    use crate::harness::signal::SignalSpec;
    use approx::assert_relative_eq;

    fn base(sigma: f64) -> TrialConfig {
        TrialConfig::new(
            DesignSpec::new(DesignKind::IidGaussian, 60, 30),
            SignalSpec::exact_sparse(30, 2, 3.0),
            sigma,
        )
    }

    fn sweep(sigma: f64, grid: Vec<usize>) -> SweepConfig {
        SweepConfig {
            axis: SweepAxis::S,
            grid,
            base: base(sigma),
            trials_per_point: 4,
            estimator: Estimator::Slope,
        }
    }

    #[test]
    fn helpers() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_relative_eq!(least_squares_slope(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap(), 2.0);
        assert!(least_squares_slope(&[1.0], &[1.0]).is_none());
        assert!(least_squares_slope(&[1.0, 1.0], &[1.0, 2.0]).is_none());
    }

    #[test]
    fn single_point_has_no_slope() {
        let t = rate_sweep(&sweep(1.0, vec![3]), 1).unwrap();
        assert_eq!(t.points.len(), 1);
        assert!(t.slope.is_none());
    }

    #[test]
    fn noiseless_is_flagged() {
        let t = rate_sweep(&sweep(0.0, vec![2, 4]), 1).unwrap();
        assert!(t.slope.is_none());
        assert!(t.flags.iter().any(|f| f == "errors_at_solver_floor"));
    }

    #[test]
    fn same_seed_same_table() {
        let cfg = sweep(1.0, vec![2, 3]);
        assert_eq!(rate_sweep(&cfg, 7).unwrap(), rate_sweep(&cfg, 7).unwrap());
        assert!(rate_sweep(&sweep(1.0, vec![3, 2]), 7).is_err());
    }
}
