//! Lasso and Slope estimators by (accelerated) proximal gradient descent.
//!
//! Both minimize `(1/n)‖y − Xβ‖² + pen(β)` with `pen = 2λ‖β‖₁` (Lasso) or
//! `pen = 2‖β‖_*` (Slope). The smooth part has gradient `(2/n)Xᵀ(Xβ − y)` and
//! Lipschitz constant `L = 2‖X‖²_op / n`.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::norms::{lq_norm, sorted_l1_norm, NormOrder, WeightSchedule};
use crate::prox::{prox_sorted_l1, soft_threshold};

/// Slack on the column-normalization check, to absorb rounding after rescaling.
pub const NORMALIZATION_SLACK: f64 = 1e-12;

/// A regression problem `y = f + ξ`, usually with `f = Xβ*`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    x: Array2<f64>,
    y: Array1<f64>,
    f: Option<Array1<f64>>,
    beta_star: Option<Array1<f64>>,
    sigma: f64,
    max_column_scale: f64,
}

impl ProblemInstance {
    pub fn new(x: Array2<f64>, y: Array1<f64>, sigma: f64) -> Result<Self> {
        let (n, p) = x.dim();
        if n == 0 || p == 0 {
            return Err(Error::Dimension(format!("design is {n}x{p}")));
        }
        if y.len() != n {
            return Err(Error::Dimension(format!(
                "response has length {} but design has {n} rows",
                y.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design matrix"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("response"));
        }
        check_range("sigma", sigma, sigma >= 0.0 && sigma.is_finite(), ">= 0")?;
        let max_column_scale = max_column_scale(&x);
        Ok(ProblemInstance {
            x,
            y,
            f: None,
            beta_star: None,
            sigma,
            max_column_scale,
        })
    }

    /// Attaches the true signal; the mean defaults to `Xβ*` unless set already.
    pub fn with_beta_star(mut self, beta_star: Array1<f64>) -> Result<Self> {
        if beta_star.len() != self.p() {
            return Err(Error::Dimension(format!(
                "signal has length {} but design has {} columns",
                beta_star.len(),
                self.p()
            )));
        }
        if self.f.is_none() {
            self.f = Some(self.x.dot(&beta_star));
        }
        self.beta_star = Some(beta_star);
        Ok(self)
    }

    pub fn with_mean(mut self, f: Array1<f64>) -> Result<Self> {
        if f.len() != self.n() {
            return Err(Error::Dimension("mean vector length differs from n".into()));
        }
        self.f = Some(f);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn y(&self) -> &Array1<f64> {
        &self.y
    }

    pub fn mean(&self) -> Option<&Array1<f64>> {
        self.f.as_ref()
    }

    pub fn beta_star(&self) -> Option<&Array1<f64>> {
        self.beta_star.as_ref()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `max_j ‖Xe_j‖₂ / √n`.
    pub fn max_column_scale(&self) -> f64 {
        self.max_column_scale
    }

    pub fn is_column_normalized(&self) -> bool {
        self.max_column_scale <= 1.0 + NORMALIZATION_SLACK
    }

    pub fn require_normalized(&self) -> Result<()> {
        if self.is_column_normalized() {
            Ok(())
        } else {
            Err(Error::NotNormalized(self.max_column_scale))
        }
    }

    /// Noise vector `ξ = y − f`.
    pub fn noise(&self) -> Result<Array1<f64>> {
        let f = self.f.as_ref().ok_or(Error::Missing("mean vector f"))?;
        Ok(&self.y - f)
    }
}

/// `max_j ‖Xe_j‖₂ / √n`.
pub fn max_column_scale(x: &Array2<f64>) -> f64 {
    let n = x.nrows() as f64;
    x.columns()
        .into_iter()
        .map(|c| c.dot(&c).sqrt() / n.sqrt())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub max_iter: usize,
    pub tol: f64,
    pub step: Option<f64>,
    pub acceleration: bool,
    /// Keep the objective value of every accepted iterate.
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iter: 50_000,
            tol: 1e-9,
            step: None,
            acceleration: true,
            record_trace: false,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        check_range("max_iter", self.max_iter as f64, self.max_iter >= 1, ">= 1")?;
        check_range("tol", self.tol, self.tol > 0.0, "> 0")?;
        if let Some(step) = self.step {
            check_range("step", step, step > 0.0 && step.is_finite(), "> 0")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub beta_hat: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Lasso: sup-norm violation of the KKT conditions. Slope: norm of the
    /// gradient mapping `‖β − prox(β − t∇)‖₂ / t`.
    pub stationarity_residual: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub objective_trace: Vec<f64>,
}

/// Penalty `2λ‖β‖₁` or `2‖β‖_*`.
#[derive(Debug, Clone)]
enum Penalty<'a> {
    L1(f64),
    Sorted(&'a WeightSchedule),
}

impl Penalty<'_> {
    fn value(&self, beta: &[f64]) -> f64 {
        match self {
            Penalty::L1(lambda) => 2.0 * lambda * lq_norm(beta, NormOrder::ONE),
            Penalty::Sorted(w) => 2.0 * sorted_l1_norm(beta, w).expect("dimension checked"),
        }
    }

    /// Prox of `step · pen`.
    fn prox(&self, v: &[f64], step: f64) -> Vec<f64> {
        match self {
            Penalty::L1(lambda) => soft_threshold(v, 2.0 * step * lambda),
            Penalty::Sorted(w) => prox_sorted_l1(v, &w.scaled(2.0 * step)).expect("dimension checked"),
        }
    }
}

/// Largest eigenvalue of `XᵀX` by power iteration.
pub fn gram_spectral_norm(x: &Array2<f64>, max_iter: usize, tol: f64) -> f64 {
    let p = x.ncols();
    // deterministic start with no special alignment to the coordinate axes
    let mut v = Array1::from_iter((0..p).map(|j| 1.0 + 0.01 * ((j * 7919) % 101) as f64));
    let norm = v.dot(&v).sqrt();
    v /= norm;
    let mut estimate = 0.0;
    for _ in 0..max_iter {
        let w = x.t().dot(&x.dot(&v));
        let next = v.dot(&w);
        let wn = w.dot(&w).sqrt();
        if wn == 0.0 {
            return 0.0;
        }
        v = w / wn;
        let done = (next - estimate).abs() <= tol * next.abs();
        estimate = next;
        if done {
            break;
        }
    }
    estimate
}

fn objective(inst: &ProblemInstance, penalty: &Penalty<'_>, beta: ArrayView1<f64>) -> f64 {
    let r = inst.y() - &inst.x().dot(&beta);
    r.dot(&r) / inst.n() as f64 + penalty.value(beta.as_slice().expect("contiguous"))
}

fn gradient(inst: &ProblemInstance, beta: ArrayView1<f64>) -> Array1<f64> {
    let r = inst.x().dot(&beta) - inst.y();
    inst.x().t().dot(&r) * (2.0 / inst.n() as f64)
}

fn prox_step(inst: &ProblemInstance, penalty: &Penalty<'_>, z: &Array1<f64>, step: f64) -> Array1<f64> {
    let g = gradient(inst, z.view());
    let v = z - &(g * step);
    Array1::from(penalty.prox(v.as_slice().expect("contiguous"), step))
}

fn fixed_point_residual(inst: &ProblemInstance, penalty: &Penalty<'_>, beta: &Array1<f64>, step: f64) -> f64 {
    let d = beta - &prox_step(inst, penalty, beta, step);
    d.dot(&d).sqrt()
}

fn minimize(inst: &ProblemInstance, penalty: Penalty<'_>, cfg: &SolverConfig) -> Result<FitResult> {
    cfg.validate()?;
    let n = inst.n() as f64;
    let mut step = match cfg.step {
        Some(step) => step,
        None => {
            let lip = 2.0 * gram_spectral_norm(inst.x(), 100, 1e-10) / n;
            if lip > 0.0 {
                1.0 / lip
            } else {
                1.0
            }
        }
    };

    let p = inst.p();
    let mut beta = Array1::<f64>::zeros(p);
    let mut z = beta.clone();
    let mut momentum = 1.0f64;
    let mut obj = objective(inst, &penalty, beta.view());
    let mut trace = Vec::new();
    if cfg.record_trace {
        trace.push(obj);
    }
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        iterations += 1;
        let plain_step = z == beta;
        let candidate = prox_step(inst, &penalty, &z, step);
        let cand_obj = objective(inst, &penalty, candidate.view());
        if !cand_obj.is_finite() {
            return Err(Error::Numerical("objective diverged".into()));
        }

        if cand_obj > obj {
            if plain_step {
                // a plain proximal step at 1/L cannot increase the objective,
                // so the Lipschitz estimate was too small
                step *= 0.5;
            } else {
                // function-value restart of the momentum
                z.assign(&beta);
                momentum = 1.0;
            }
            continue;
        }

        let change = obj - cand_obj;
        if cfg.acceleration {
            let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
            z = &candidate + &((&candidate - &beta) * ((momentum - 1.0) / next));
            momentum = next;
        } else {
            z.assign(&candidate);
        }
        beta = candidate;
        obj = cand_obj;
        if cfg.record_trace {
            trace.push(obj);
        }

        if change <= cfg.tol * obj.abs() && fixed_point_residual(inst, &penalty, &beta, step) <= cfg.tol {
            converged = true;
            break;
        }
    }

    let objective = objective(inst, &penalty, beta.view());
    let stationarity_residual = match penalty {
        Penalty::L1(lambda) => lasso_kkt_violation(inst, &beta, lambda),
        Penalty::Sorted(_) => fixed_point_residual(inst, &penalty, &beta, step) / step,
    };
    if !converged {
        log::warn!("solver stopped after {iterations} iterations without meeting tol {}", cfg.tol);
    }
    Ok(FitResult {
        beta_hat: beta.to_vec(),
        objective,
        iterations,
        converged,
        stationarity_residual,
        objective_trace: trace,
    })
}

/// Largest violation of the Lasso optimality conditions
/// `(1/n)X_jᵀ(y − Xβ) = λ·sign(β_j)` on the support and `|·| ≤ λ` off it.
pub fn lasso_kkt_violation(inst: &ProblemInstance, beta: &Array1<f64>, lambda: f64) -> f64 {
    let r = inst.y() - &inst.x().dot(beta);
    let corr = inst.x().t().dot(&r) / inst.n() as f64;
    corr.iter()
        .zip(beta.iter())
        .map(|(&c, &b)| {
            if b != 0.0 {
                (c - lambda * b.signum()).abs()
            } else {
                (c.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Lasso: `argmin (1/n)‖y − Xβ‖² + 2λ‖β‖₁`.
pub fn lasso_fit(inst: &ProblemInstance, lambda: f64, cfg: &SolverConfig) -> Result<FitResult> {
    check_range("lambda", lambda, lambda >= 0.0 && lambda.is_finite(), ">= 0")?;
    minimize(inst, Penalty::L1(lambda), cfg)
}

/// Slope: `argmin (1/n)‖y − Xβ‖² + 2‖β‖_*`.
pub fn slope_fit(inst: &ProblemInstance, w: &WeightSchedule, cfg: &SolverConfig) -> Result<FitResult> {
    if w.len() != inst.p() {
        return Err(Error::Dimension(format!(
            "weights have length {} but design has {} columns",
            w.len(),
            inst.p()
        )));
    }
    minimize(inst, Penalty::Sorted(w), cfg)
}

/// `(1/n)‖y − Xβ‖² + 2λ‖β‖₁`, evaluated from scratch.
pub fn lasso_objective(inst: &ProblemInstance, beta: &[f64], lambda: f64) -> f64 {
    objective(inst, &Penalty::L1(lambda), ArrayView1::from(beta))
}

/// `(1/n)‖y − Xβ‖² + 2‖β‖_*`, evaluated from scratch.
pub fn slope_objective(inst: &ProblemInstance, beta: &[f64], w: &WeightSchedule) -> f64 {
    objective(inst, &Penalty::Sorted(w), ArrayView1::from(beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    #[test]
    fn zero_response_gives_zero() {
        let x = array![[1.0, 2.0], [0.5, -1.0], [2.0, 0.0]];
        let inst = ProblemInstance::new(x, Array1::zeros(3), 1.0).unwrap();
        let fit = lasso_fit(&inst, 0.3, &SolverConfig::default()).unwrap();
        assert!(fit.converged);
        assert_eq!(fit.beta_hat, vec![0.0, 0.0]);
        let w = WeightSchedule::new(vec![0.4, 0.2]).unwrap();
        assert_eq!(slope_fit(&inst, &w, &SolverConfig::default()).unwrap().beta_hat, vec![0.0, 0.0]);
    }

    #[test]
    fn scalar_soft_threshold() {
        let inst = ProblemInstance::new(array![[1.0]], array![3.0], 1.0).unwrap();
        let fit = lasso_fit(&inst, 1.0, &SolverConfig::default()).unwrap();
        assert_relative_eq!(fit.beta_hat[0], 2.0, epsilon = 1e-9);
        assert_relative_eq!(fit.objective, 1.0 + 4.0, epsilon = 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ProblemInstance::new(Array2::zeros((0, 2)), Array1::zeros(0), 1.0).is_err());
        assert!(ProblemInstance::new(array![[f64::NAN]], array![1.0], 1.0).is_err());
        assert!(ProblemInstance::new(array![[1.0]], array![f64::INFINITY], 1.0).is_err());
        assert!(ProblemInstance::new(array![[1.0]], array![1.0, 2.0], 1.0).is_err());
        let inst = ProblemInstance::new(array![[1.0]], array![1.0], 1.0).unwrap();
        let bad = SolverConfig { tol: 0.0, ..SolverConfig::default() };
        assert!(lasso_fit(&inst, 1.0, &bad).is_err());
        assert!(inst.noise().is_err());
    }

    #[test]
    fn normalization_flag() {
        let inst = ProblemInstance::new(array![[1.0, 0.0], [0.0, 1.0]], array![0.0, 0.0], 1.0).unwrap();
        assert!(inst.is_column_normalized());
        let inst = ProblemInstance::new(array![[2.0, 0.0], [0.0, 1.0]], array![0.0, 0.0], 1.0).unwrap();
        assert!(!inst.is_column_normalized());
        assert!(matches!(inst.require_normalized(), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn power_iteration_matches_known_norm() {
        let x = array![[3.0, 0.0], [0.0, 1.0]];
        assert_relative_eq!(gram_spectral_norm(&x, 100, 1e-14), 9.0, epsilon = 1e-9);
    }

    #[test]
    fn non_convergence_is_flagged() {
        let x = array![[1.0, 0.9], [0.9, 1.0], [0.3, -0.2]];
        let inst = ProblemInstance::new(x, array![1.0, 2.0, 0.5], 1.0).unwrap();
        let cfg = SolverConfig { max_iter: 2, ..SolverConfig::default() };
        let fit = lasso_fit(&inst, 0.01, &cfg).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 2);
    }
}
