//! Slope weight schedule, Lasso tuning parameter and the `Λ_q(s)` aggregate.

use std::f64::consts::{E, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::norms::{NormOrder, WeightSchedule};

/// `4 + √2`, the constant in front of every noise-level term.
pub const NOISE_CONSTANT: f64 = 4.0 + SQRT_2;

/// Default Slope constant: `2(4+√2)` plus a small margin so the strict
/// inequality `A > 2(4+√2)` holds.
pub const DEFAULT_SLOPE_A: f64 = 2.0 * NOISE_CONSTANT + 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlopeWeightConfig {
    pub p: usize,
    pub n: usize,
    pub sigma: f64,
    #[serde(rename = "A", default = "default_a")]
    pub a: f64,
}

fn default_a() -> f64 {
    DEFAULT_SLOPE_A
}

impl SlopeWeightConfig {
    pub fn new(p: usize, n: usize, sigma: f64) -> Self {
        SlopeWeightConfig {
            p,
            n,
            sigma,
            a: DEFAULT_SLOPE_A,
        }
    }

    pub fn with_a(mut self, a: f64) -> Self {
        self.a = a;
        self
    }

    fn validate(&self) -> Result<()> {
        check_range("p", self.p as f64, self.p >= 1, ">= 1")?;
        check_range("n", self.n as f64, self.n >= 1, ">= 1")?;
        check_range("sigma", self.sigma, self.sigma >= 0.0 && self.sigma.is_finite(), ">= 0")?;
        check_range("A", self.a, self.a > 0.0 && self.a.is_finite(), "> 0")
    }

    /// The Slope guarantees need `A > (4+√2)/γ`.
    pub fn validate_for_gamma(&self, gamma: f64) -> Result<()> {
        check_range("gamma", gamma, gamma > 0.0 && gamma < 1.0, "(0, 1)")?;
        check_range("A", self.a, self.a > NOISE_CONSTANT / gamma, "> (4+sqrt2)/gamma")
    }
}

/// `λ_j = Aσ·sqrt(log(2p/j)/n)` for `j = 1..=p`.
///
/// A zero `sigma` yields the all-zero schedule (the noiseless limit).
pub fn slope_weights(cfg: &SlopeWeightConfig) -> Result<WeightSchedule> {
    cfg.validate()?;
    let p = cfg.p as f64;
    let n = cfg.n as f64;
    let weights = (1..=cfg.p)
        .map(|j| cfg.a * cfg.sigma * ((2.0 * p / j as f64).ln() / n).sqrt())
        .collect();
    WeightSchedule::new(weights)
}

fn check_gamma(gamma: f64) -> Result<()> {
    check_range("gamma", gamma, gamma > 0.0 && gamma < 1.0, "(0, 1)")
}

/// Smallest admissible Lasso parameter `(4+√2)σ/γ · sqrt(log(2ep/s)/n)`.
pub fn lasso_lambda_min(gamma: f64, sigma: f64, n: usize, p: usize, s: usize) -> Result<f64> {
    check_gamma(gamma)?;
    check_range("s", s as f64, s >= 1 && s <= p, "[1, p]")?;
    check_range("n", n as f64, n >= 1, ">= 1")?;
    check_range("sigma", sigma, sigma >= 0.0 && sigma.is_finite(), ">= 0")?;
    let ratio = 2.0 * E * p as f64 / s as f64;
    Ok(NOISE_CONSTANT * sigma / gamma * (ratio.ln() / n as f64).sqrt())
}

/// `δ(λ) = exp(−(γλ√n / ((4+√2)σ))²)`.
pub fn delta_of_lambda(lambda: f64, gamma: f64, sigma: f64, n: usize) -> Result<f64> {
    check_range("lambda", lambda, lambda > 0.0 && lambda.is_finite(), "> 0")?;
    check_gamma(gamma)?;
    check_range("sigma", sigma, sigma > 0.0 && sigma.is_finite(), "> 0")?;
    let t = gamma * lambda * (n as f64).sqrt() / (NOISE_CONSTANT * sigma);
    Ok((-t * t).exp())
}

/// Inverse of [`delta_of_lambda`]: `λ = (4+√2)σ/γ · sqrt(log(1/δ)/n)`.
pub fn lambda_of_delta(delta: f64, gamma: f64, sigma: f64, n: usize) -> Result<f64> {
    check_range("delta", delta, delta > 0.0 && delta < 1.0, "(0, 1)")?;
    check_gamma(gamma)?;
    check_range("sigma", sigma, sigma > 0.0 && sigma.is_finite(), "> 0")?;
    Ok(NOISE_CONSTANT * sigma / gamma * ((1.0 / delta).ln() / n as f64).sqrt())
}

/// A Lasso tuning parameter together with the `δ(λ)` it corresponds to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoTuning {
    pub lambda: f64,
    pub gamma: f64,
    pub delta_lambda: f64,
}

impl LassoTuning {
    pub fn from_lambda(lambda: f64, gamma: f64, sigma: f64, n: usize) -> Result<Self> {
        Ok(LassoTuning {
            lambda,
            gamma,
            delta_lambda: delta_of_lambda(lambda, gamma, sigma, n)?,
        })
    }

    /// The minimal admissible λ, for which `δ(λ) = s/(2ep)` exactly.
    ///
    /// `δ(λ)` is taken from the closed form, so this is also defined for the
    /// noiseless case `σ = 0` (where `λ = 0`).
    pub fn at_threshold(gamma: f64, sigma: f64, n: usize, p: usize, s: usize) -> Result<Self> {
        Ok(LassoTuning {
            lambda: lasso_lambda_min(gamma, sigma, n, p, s)?,
            gamma,
            delta_lambda: s as f64 / (2.0 * E * p as f64),
        })
    }

    /// Whether `δ(λ) ≤ s/(2ep)` (up to rounding).
    pub fn meets_threshold(&self, p: usize, s: usize) -> bool {
        self.delta_lambda <= s as f64 / (2.0 * E * p as f64) * (1.0 + 1e-12)
    }
}

/// `Λ_q(s) = (Σ_{j≤s} λ_j^{q/(q−1)})^{1−1/q}` for `q ∈ [2, ∞]`.
pub fn capital_lambda_q(w: &WeightSchedule, s: usize, q: NormOrder) -> Result<f64> {
    q.require_at_least_two()?;
    check_range("s", s as f64, s >= 1 && s <= w.len(), "[1, p]")?;
    let head = &w.as_slice()[..s];
    Ok(match q {
        NormOrder::Infinity => head.iter().sum(),
        NormOrder::Finite(_) => {
            let c = q.conjugate();
            let m = head[0];
            if m == 0.0 {
                0.0
            } else {
                m * head.iter().map(|l| (l / m).powf(c)).sum::<f64>().powf(1.0 / c)
            }
        }
    })
}

/// `Aσ s^{1−1/q} sqrt(log(2ep/s)/n)`, the closed-form upper bound on `Λ_q(s)`
/// for a Slope schedule.
pub fn capital_lambda_q_upper(cfg: &SlopeWeightConfig, s: usize, q: NormOrder) -> Result<f64> {
    q.require_at_least_two()?;
    if s == 0 || s > cfg.p {
        return Err(Error::OutOfRange {
            name: "s",
            value: s as f64,
            expected: "[1, p]",
        });
    }
    let s_f = s as f64;
    Ok(cfg.a
        * cfg.sigma
        * s_f.powf(1.0 - q.reciprocal())
        * ((2.0 * E * cfg.p as f64 / s_f).ln() / cfg.n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn slope_weights_closed_form() {
        let w = slope_weights(&SlopeWeightConfig::new(2, 1, 1.0).with_a(1.0)).unwrap();
        assert_relative_eq!(w.as_slice()[0], 1.177_410_022_515_474_7, epsilon = 1e-14);
        assert_relative_eq!(w.as_slice()[1], 0.832_554_611_157_697_8, epsilon = 1e-14);
    }

    #[test]
    fn slope_weights_monotone_and_last_entry() {
        let cfg = SlopeWeightConfig::new(100, 50, 1.0).with_a(6.0);
        let w = slope_weights(&cfg).unwrap();
        assert!(w.as_slice().windows(2).all(|p| p[1] < p[0]));
        for p in [1, 7, 100] {
            let cfg = SlopeWeightConfig::new(p, 50, 1.3).with_a(6.0);
            let w = slope_weights(&cfg).unwrap();
            assert_relative_eq!(
                *w.as_slice().last().unwrap(),
                6.0 * 1.3 * (2f64.ln() / 50.0).sqrt(),
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn gamma_requirement_on_a() {
        let cfg = SlopeWeightConfig::new(10, 10, 1.0);
        assert!(cfg.validate_for_gamma(0.5).is_ok());
        assert!(cfg.with_a(10.0).validate_for_gamma(0.5).is_err());
    }

    #[test]
    fn lambda_min_examples() {
        // reference value computed with 30-digit arithmetic
        let l = lasso_lambda_min(0.5, 1.0, 100, 1000, 10).unwrap();
        assert_relative_eq!(l, 2.717_550_656_875_286, epsilon = 1e-12);
        let l2 = lasso_lambda_min(0.5, 2.0, 100, 1000, 10).unwrap();
        assert_relative_eq!(l2, 2.0 * l, epsilon = 1e-14);
        let full = lasso_lambda_min(0.999_999, 1.0, 40, 7, 7).unwrap();
        assert_relative_eq!(full, NOISE_CONSTANT * ((2.0 * E).ln() / 40.0).sqrt(), epsilon = 1e-5);
        assert!(lasso_lambda_min(0.5, 1.0, 10, 5, 6).is_err());
    }

    #[test]
    fn delta_at_threshold() {
        let (gamma, sigma, n, p, s) = (0.5, 1.3, 120, 300, 4);
        let l = lasso_lambda_min(gamma, sigma, n, p, s).unwrap();
        let d = delta_of_lambda(l, gamma, sigma, n).unwrap();
        assert_relative_eq!(d, s as f64 / (2.0 * E * p as f64), max_relative = 1e-12);
        let t = LassoTuning::at_threshold(gamma, sigma, n, p, s).unwrap();
        assert_relative_eq!(t.delta_lambda, d, max_relative = 1e-12);
        assert!(t.meets_threshold(p, s));
        assert!(!LassoTuning::from_lambda(0.9 * l, gamma, sigma, n).unwrap().meets_threshold(p, s));
    }

    #[test]
    fn delta_lambda_inverses() {
        assert_relative_eq!(lambda_of_delta(1.0 / E, 0.999_999_999_999, 1.0, 1).unwrap(), NOISE_CONSTANT, max_relative = 1e-11);
        let mut prev = 0.0;
        for k in 1..50 {
            let lambda = 10f64.powf(-3.0 + 6.0 * k as f64 / 50.0);
            let d = delta_of_lambda(lambda, 0.3, 0.8, 75).unwrap();
            if d > 0.0 && d < 0.999 {
                let back = lambda_of_delta(d, 0.3, 0.8, 75).unwrap();
                assert_relative_eq!(back, lambda, max_relative = 1e-12);
            }
            let l = lambda_of_delta(k as f64 / 50.0, 0.3, 0.8, 75).unwrap();
            if k > 1 {
                assert!(l < prev);
            }
            prev = l;
        }
        let big = delta_of_lambda(50.0, 0.5, 1.0, 10).unwrap();
        let bigger = delta_of_lambda(60.0, 0.5, 1.0, 10).unwrap();
        assert!(bigger <= big && big < 1e-90);
    }

    #[test]
    fn capital_lambda_examples() {
        let w = WeightSchedule::new(vec![4.0, 3.0]).unwrap();
        assert_relative_eq!(capital_lambda_q(&w, 2, NormOrder::TWO).unwrap(), 5.0);
        assert_relative_eq!(capital_lambda_q(&w, 2, NormOrder::Infinity).unwrap(), 7.0);
        assert!(capital_lambda_q(&w, 3, NormOrder::TWO).is_err());
        assert!(capital_lambda_q(&w, 1, NormOrder::Finite(1.5)).is_err());

        let cfg = SlopeWeightConfig::new(100, 50, 1.0).with_a(6.0);
        let w = slope_weights(&cfg).unwrap();
        let value = capital_lambda_q(&w, 5, NormOrder::TWO).unwrap();
        let bound = 6.0 * (5.0 * (40.0 * E).ln() / 50.0).sqrt();
        assert!(value <= bound);
        assert_relative_eq!(capital_lambda_q_upper(&cfg, 5, NormOrder::TWO).unwrap(), bound, epsilon = 1e-12);
    }
}
