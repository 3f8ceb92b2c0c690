//! Oracle-inequality constants and right-hand sides for Lasso and Slope, the
//! noise-event functionals `H`, `G`, `H̃`, `F`, and the minimax rate.
//!
//! The RE constant is a plug-in. When it comes from a search (an upper bound
//! on the true minimum), the resulting right-hand sides are lower bounds on the
//! certified ones, and reports are labelled accordingly.

use std::f64::consts::E;

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::norms::{lq_norm, rearrange_desc, NormOrder, WeightSchedule};
use crate::solver::ProblemInstance;
use crate::weights::{capital_lambda_q, LassoTuning, NOISE_CONSTANT};

/// Where the RE constant plugged into a bound came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReLabel {
    /// Search result: an upper bound on the true minimum.
    Estimated,
    /// Known in closed form (e.g. the scaled identity design).
    Exact,
    /// A certified lower bound on the true minimum.
    CertifiedLower,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundParams {
    pub q: NormOrder,
    pub s: usize,
    pub gamma: f64,
    pub tau: f64,
    pub delta0: f64,
    /// `θ_q(s, c₀(γ,τ))` for Lasso or `ν_q(s, c₀(γ,τ))` for Slope.
    pub re_constant: f64,
    /// The same constant at `c₀(γ,0)`; defaults to `re_constant`, which is
    /// never larger because the `τ = 0` cone is smaller.
    #[serde(default)]
    pub re_constant_tau0: Option<f64>,
    #[serde(default = "default_label")]
    pub re_label: ReLabel,
}

fn default_label() -> ReLabel {
    ReLabel::Estimated
}

/// `c₀(γ,τ) = (1+γ+τ)/(1−γ−τ)`.
pub fn c0_of(gamma: f64, tau: f64) -> f64 {
    (1.0 + gamma + tau) / (1.0 - gamma - tau)
}

impl BoundParams {
    pub fn new(q: NormOrder, s: usize, gamma: f64, tau: f64, delta0: f64, re_constant: f64) -> Self {
        BoundParams {
            q,
            s,
            gamma,
            tau,
            delta0,
            re_constant,
            re_constant_tau0: None,
            re_label: ReLabel::Estimated,
        }
    }

    pub fn c0(&self) -> f64 {
        c0_of(self.gamma, self.tau)
    }

    pub fn validate(&self) -> Result<()> {
        self.q.require_at_least_two()?;
        check_range("s", self.s as f64, self.s >= 1, ">= 1")?;
        check_range("gamma", self.gamma, self.gamma > 0.0 && self.gamma < 1.0, "(0, 1)")?;
        check_range("tau", self.tau, self.tau >= 0.0 && self.tau < 1.0 - self.gamma, "[0, 1-gamma)")?;
        check_range("delta0", self.delta0, self.delta0 > 0.0 && self.delta0 < 1.0, "(0, 1)")?;
        check_range("re_constant", self.re_constant, self.re_constant > 0.0, "> 0")?;
        if let Some(re0) = self.re_constant_tau0 {
            check_range("re_constant_tau0", re0, re0 > 0.0, "> 0")?;
        }
        Ok(())
    }

    fn re_tau0(&self) -> f64 {
        self.re_constant_tau0.unwrap_or(self.re_constant)
    }

    /// Same parameters with `τ = 0`.
    pub fn at_tau_zero(&self) -> BoundParams {
        BoundParams {
            tau: 0.0,
            re_constant: self.re_tau0(),
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Lasso,
    Slope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub estimator: Estimator,
    pub q: NormOrder,
    /// `C_{γ,τ}` (Lasso) or `C′_{γ,τ}` (Slope).
    pub constant: f64,
    /// The `τ = 0` constant used by the sparse ℓq bound.
    pub constant_tau0: f64,
    /// Bound on `‖β̂ − β*‖₁` (Lasso) or `‖β̂ − β*‖_*` (Slope); needs `τ > 0`.
    pub rhs_l1: Option<f64>,
    /// Bound on `‖β̂ − β*‖_q` when `β*` is s-sparse.
    pub rhs_lq_sparse: f64,
    /// Bound on `‖β̂ − β*‖_q` for arbitrary `β*`; needs `τ > 0`.
    pub rhs_lq_compressible: Option<f64>,
    /// Bound on `2τ·pen(β̂ − β*) + (1/n)‖X(β̂ − β*)‖²` with `f = Xβ*`.
    pub rhs_prediction: f64,
    pub re_label: ReLabel,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

/// `(1+γ+τ)² · max(first, second)`.
fn prefactor_max(gamma: f64, tau: f64, first: f64, second: f64) -> f64 {
    (1.0 + gamma + tau).powi(2) * first.max(second)
}

/// `C_{γ,τ}(q,s,λ,δ₀) = (1+γ+τ)² (log(1/δ₀)/(s log(1/δ(λ))) ∨ s^{1−2/q}/θ²)`.
///
/// A λ below the admissible threshold only logs a warning.
pub fn c_gamma_tau(params: &BoundParams, tuning: &LassoTuning, p: usize) -> Result<f64> {
    params.validate()?;
    if !tuning.meets_threshold(p, params.s) {
        log::warn!(
            "lambda = {} is below the admissible threshold for s = {}, p = {p}",
            tuning.lambda,
            params.s
        );
    }
    let s = params.s as f64;
    let first = (1.0 / params.delta0).ln() / (s * (1.0 / tuning.delta_lambda).ln());
    let second = s.powf(1.0 - 2.0 * params.q.reciprocal()) / params.re_constant.powi(2);
    Ok(prefactor_max(params.gamma, params.tau, first, second))
}

/// `C′_{γ,τ}(q,s,δ₀) = (1+γ+τ)² (log(1/δ₀)/(s log(2p/s)) ∨ 1/ν²)`.
pub fn c_prime_gamma_tau(params: &BoundParams, p: usize) -> Result<f64> {
    params.validate()?;
    check_range("s", params.s as f64, params.s <= p, "[1, p]")?;
    let s = params.s as f64;
    let first = (1.0 / params.delta0).ln() / (s * (2.0 * p as f64 / s).ln());
    let second = 1.0 / params.re_constant.powi(2);
    Ok(prefactor_max(params.gamma, params.tau, first, second))
}

fn require_tau(params: &BoundParams, approx_error: f64, flags: &mut Vec<String>) -> bool {
    if params.tau > 0.0 {
        return true;
    }
    flags.push("tau_zero_sparse_only".into());
    if approx_error > 0.0 {
        flags.push("signal_not_sparse".into());
    }
    false
}

/// Max of the two ℓq prefactors in the compressible bound.
fn compressible_factors(gamma: f64, tau: f64) -> (f64, f64) {
    let rest = 1.0 - gamma - tau;
    (
        (2.0 / (1.0 + gamma)).max(rest / (4.0 * tau)),
        (1.0 / (1.0 + gamma)).max(rest / tau),
    )
}

/// All Lasso right-hand sides at `β = β*`, `f = Xβ*`.
pub fn lasso_bound_rhs(
    params: &BoundParams,
    tuning: &LassoTuning,
    p: usize,
    sigma_s_l1: f64,
) -> Result<BoundReport> {
    check_range("sigma_s", sigma_s_l1, sigma_s_l1 >= 0.0, ">= 0")?;
    let constant = c_gamma_tau(params, tuning, p)?;
    let constant_tau0 = c_gamma_tau(&params.at_tau_zero(), tuning, p)?;
    let (lambda, gamma, tau) = (tuning.lambda, params.gamma, params.tau);
    let s = params.s as f64;
    let inv_q = params.q.reciprocal();

    let mut flags = Vec::new();
    let (rhs_l1, rhs_lq_compressible) = if require_tau(params, sigma_s_l1, &mut flags) {
        let (a, b) = compressible_factors(gamma, tau);
        (
            Some(constant / (2.0 * tau) * lambda * s + 2.0 / tau * sigma_s_l1),
            Some(a * constant * lambda * s.powf(inv_q) + b * s.powf(inv_q - 1.0) * sigma_s_l1),
        )
    } else {
        (None, None)
    };
    if !tuning.meets_threshold(p, params.s) {
        flags.push("lambda_below_threshold".into());
    }
    Ok(BoundReport {
        estimator: Estimator::Lasso,
        q: params.q,
        constant,
        constant_tau0,
        rhs_l1,
        rhs_lq_sparse: constant_tau0 / (1.0 + gamma) * lambda * s.powf(inv_q),
        rhs_lq_compressible,
        rhs_prediction: constant * lambda * lambda * s + 4.0 * lambda * sigma_s_l1,
        re_label: params.re_label,
        flags,
    })
}

/// All Slope right-hand sides at `β = β*`, `f = Xβ*`.
pub fn slope_bound_rhs(
    params: &BoundParams,
    w: &WeightSchedule,
    sigma_s_star: f64,
) -> Result<BoundReport> {
    check_range("sigma_s", sigma_s_star, sigma_s_star >= 0.0, ">= 0")?;
    let p = w.len();
    let constant = c_prime_gamma_tau(params, p)?;
    let constant_tau0 = c_prime_gamma_tau(&params.at_tau_zero(), p)?;
    let cap = capital_lambda_q(w, params.s, params.q)?;
    let (gamma, tau) = (params.gamma, params.tau);

    let mut flags = Vec::new();
    let (rhs_l1, rhs_lq_compressible) = if require_tau(params, sigma_s_star, &mut flags) {
        let (a, b) = compressible_factors(gamma, tau);
        // the approximation term is Λ_q(s)^{-1}·σ_s, read as 0 when σ_s = 0
        let tail = if sigma_s_star == 0.0 { 0.0 } else { b * sigma_s_star / cap };
        (
            Some(constant / (2.0 * tau) * cap * cap + 2.0 / tau * sigma_s_star),
            Some(a * constant * cap + tail),
        )
    } else {
        (None, None)
    };
    Ok(BoundReport {
        estimator: Estimator::Slope,
        q: params.q,
        constant,
        constant_tau0,
        rhs_l1,
        rhs_lq_sparse: constant_tau0 / (1.0 + gamma) * cap,
        rhs_lq_compressible,
        rhs_prediction: constant * cap * cap + 4.0 * sigma_s_star,
        re_label: params.re_label,
        flags,
    })
}

/// `rhs_l1^{2/q−1} · rhs_l2^{2−2/q}` for `1 ≤ q ≤ 2`.
pub fn interpolated_lq_bound(rhs_l1: f64, rhs_l2: f64, q: f64) -> Result<f64> {
    check_range("q", q, (1.0..=2.0).contains(&q), "[1, 2]")?;
    check_range("rhs_l1", rhs_l1, rhs_l1 >= 0.0, ">= 0")?;
    check_range("rhs_l2", rhs_l2, rhs_l2 >= 0.0, ">= 0")?;
    Ok(rhs_l1.powf(2.0 / q - 1.0) * rhs_l2.powf(2.0 - 2.0 / q))
}

/// Lasso ℓq bound for an s-sparse `β*` and any `q ∈ [1, ∞]`.
///
/// `params` must be set up at `q = 2` when `q < 2`: that range interpolates
/// between the ℓ1 and ℓ2 bounds, while `q ≥ 2` uses the direct sparse bound
/// with `params.q` replaced by `q`.
pub fn lasso_sparse_lq_bound(
    params: &BoundParams,
    tuning: &LassoTuning,
    p: usize,
    q: NormOrder,
) -> Result<f64> {
    if q.value() >= 2.0 {
        let direct = BoundParams { q, ..*params };
        return Ok(lasso_bound_rhs(&direct, tuning, p, 0.0)?.rhs_lq_sparse);
    }
    if params.q != NormOrder::TWO {
        return Err(Error::InvalidInput(
            "interpolated bounds need the parameters at q = 2".into(),
        ));
    }
    let report = lasso_bound_rhs(params, tuning, p, 0.0)?;
    let l1 = report
        .rhs_l1
        .ok_or_else(|| Error::InvalidInput("interpolation needs tau > 0".into()))?;
    interpolated_lq_bound(l1, report.rhs_lq_sparse, q.value())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventFunctionals {
    pub h: f64,
    pub g: f64,
    pub h_tilde: f64,
    pub f: f64,
    /// `(1/n) ξᵀXu`.
    pub lhs: f64,
}

impl EventFunctionals {
    /// Whether `(1/n) ξᵀXu ≤ max(H(u), G(u))` at this `u`.
    pub fn event_holds(&self) -> bool {
        self.lhs <= self.h.max(self.g)
    }
}

/// Evaluates `H`, `G`, `H̃`, `F` and `(1/n)ξᵀXu` at a nonzero `u`.
pub fn event_functionals(
    u: &[f64],
    inst: &ProblemInstance,
    s: usize,
    q: NormOrder,
    lambda: f64,
    gamma: f64,
    delta0: f64,
) -> Result<EventFunctionals> {
    let (n, p) = (inst.n(), inst.p());
    if u.len() != p {
        return Err(Error::Dimension(format!("u has length {} but p = {p}", u.len())));
    }
    if u.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroVector);
    }
    q.require_at_least_two()?;
    check_range("s", s as f64, s >= 1 && s <= p, "[1, p]")?;
    check_range("delta0", delta0, delta0 > 0.0 && delta0 < 1.0, "(0, 1)")?;
    let xi = inst.noise()?;
    let xu = inst.x().dot(&ArrayView1::from(u));
    let n_f = n as f64;
    let scale = NOISE_CONSTANT * inst.sigma() / n_f.sqrt();

    let sorted = rearrange_desc(u)?;
    let roots: Vec<f64> = (1..=p).map(|j| (2.0 * p as f64 / j as f64).ln().sqrt()).collect();
    let h = scale * sorted.iter().zip(&roots).map(|(a, b)| a * b).sum::<f64>();
    let g = NOISE_CONSTANT * inst.sigma() * ((1.0 / delta0).ln() / n_f).sqrt() * xu.dot(&xu).sqrt() / n_f.sqrt();

    let lq = lq_norm(u, q);
    let conj = q.conjugate();
    let head = roots[..s].iter().map(|r| r.powf(conj)).sum::<f64>().powf(1.0 / conj);
    let tail_weighted: f64 = sorted[s..].iter().zip(&roots[s..]).map(|(a, b)| a * b).sum();
    let h_tilde = scale * (lq * head + tail_weighted);
    let tail: f64 = sorted[s..].iter().sum();
    let f = lambda * gamma * ((s as f64).powf(1.0 - q.reciprocal()) * lq + tail);

    Ok(EventFunctionals {
        h,
        g,
        h_tilde,
        f,
        lhs: xi.dot(&xu) / n_f,
    })
}

/// Minimax rate `ψ_{n,q} = σ s^{1/q} sqrt(log(ep/s)/n)`.
pub fn minimax_rate(n: usize, p: usize, s: usize, q: NormOrder, sigma: f64) -> Result<f64> {
    check_range("s", s as f64, s >= 1 && s <= p, "[1, p]")?;
    check_range("n", n as f64, n >= 1, ">= 1")?;
    if 2 * s > p {
        log::warn!("s = {s} exceeds p/2 = {}; the minimax lower bound does not cover it", p / 2);
    }
    let s_f = s as f64;
    Ok(sigma * s_f.powf(q.reciprocal()) * ((E * p as f64 / s_f).ln() / n as f64).sqrt())
}
