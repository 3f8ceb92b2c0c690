//! Rearrangements, the sorted-ℓ1 norm and sparsity measures.
//!
//! Everything here works on dense `f64` slices and is free of shared state.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_range, Error, Result};

/// Order `q` of an ℓq norm, with `q = ∞` as its own case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormOrder {
    Finite(f64),
    Infinity,
}

impl NormOrder {
    pub const ONE: NormOrder = NormOrder::Finite(1.0);
    pub const TWO: NormOrder = NormOrder::Finite(2.0);

    /// `1/q`, zero at infinity.
    pub fn reciprocal(self) -> f64 {
        match self {
            NormOrder::Finite(q) => 1.0 / q,
            NormOrder::Infinity => 0.0,
        }
    }

    /// Hölder conjugate `q/(q-1)`; equals 1 at infinity.
    pub fn conjugate(self) -> f64 {
        match self {
            NormOrder::Finite(q) => q / (q - 1.0),
            NormOrder::Infinity => 1.0,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, NormOrder::Infinity)
    }

    /// Numeric value, `f64::INFINITY` for the infinite case.
    pub fn value(self) -> f64 {
        match self {
            NormOrder::Finite(q) => q,
            NormOrder::Infinity => f64::INFINITY,
        }
    }

    /// Builds an order from a float, mapping `+inf` to [`NormOrder::Infinity`].
    pub fn from_f64(q: f64) -> Result<Self> {
        if q == f64::INFINITY {
            Ok(NormOrder::Infinity)
        } else if q.is_finite() && q >= 1.0 {
            Ok(NormOrder::Finite(q))
        } else {
            Err(Error::OutOfRange {
                name: "q",
                value: q,
                expected: "[1, inf]",
            })
        }
    }

    pub(crate) fn require_at_least_two(self) -> Result<()> {
        check_range("q", self.value(), self.value() >= 2.0, "[2, inf]")
    }
}

impl fmt::Display for NormOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormOrder::Finite(q) => write!(f, "{q}"),
            NormOrder::Infinity => f.write_str("inf"),
        }
    }
}

impl Serialize for NormOrder {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            NormOrder::Finite(q) => serializer.serialize_f64(*q),
            NormOrder::Infinity => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for NormOrder {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(q) => NormOrder::from_f64(q).map_err(serde::de::Error::custom),
            Raw::Text(t) => match t.to_ascii_lowercase().as_str() {
                "inf" | "infinity" => Ok(NormOrder::Infinity),
                other => other
                    .parse::<f64>()
                    .map_err(serde::de::Error::custom)
                    .and_then(|q| NormOrder::from_f64(q).map_err(serde::de::Error::custom)),
            },
        }
    }
}

/// Non-increasing, nonnegative penalty weights `λ_1 ≥ … ≥ λ_p ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct WeightSchedule(Vec<f64>);

impl WeightSchedule {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Dimension("weight schedule is empty".into()));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("weights"));
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidInput("weights must be nonnegative".into()));
        }
        if weights.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidInput("weights must be non-increasing".into()));
        }
        Ok(WeightSchedule(weights))
    }

    /// All `p` weights equal to `lambda`, which turns `‖·‖_*` into `lambda·‖·‖₁`.
    pub fn constant(p: usize, lambda: f64) -> Result<Self> {
        WeightSchedule::new(vec![lambda; p])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Multiplies every weight by `factor ≥ 0`.
    pub fn scaled(&self, factor: f64) -> WeightSchedule {
        WeightSchedule(self.0.iter().map(|w| w * factor).collect())
    }

    /// If the schedule has the form `λ_j = c·sqrt(log(2p/j))`, returns `c`.
    pub fn slope_scale(&self) -> Option<f64> {
        let p = self.0.len() as f64;
        let c = self.0[self.0.len() - 1] / (2f64).ln().sqrt();
        if !(c > 0.0) {
            return None;
        }
        let matches = self.0.iter().enumerate().all(|(i, &w)| {
            let expected = c * (2.0 * p / (i as f64 + 1.0)).ln().sqrt();
            (w - expected).abs() <= 1e-9 * expected.max(1e-300)
        });
        matches.then_some(c)
    }
}

impl<'de> Deserialize<'de> for WeightSchedule {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<f64>::deserialize(deserializer)?;
        WeightSchedule::new(raw).map_err(serde::de::Error::custom)
    }
}

fn desc_abs(a: &f64, b: &f64) -> Ordering {
    b.abs().total_cmp(&a.abs())
}

/// Absolute values of `v` sorted non-increasingly (`v♯`).
pub fn rearrange_desc(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::Dimension("empty vector".into()));
    }
    let mut out: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    out.sort_by(|a, b| b.total_cmp(a));
    Ok(out)
}

/// Indices of the `s` largest entries in magnitude, ties going to the lower index.
pub fn top_s_support(v: &[f64], s: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    // stable sort keeps lower indices first among equal magnitudes
    idx.sort_by(|&i, &j| desc_abs(&v[i], &v[j]));
    idx.truncate(s.min(v.len()));
    idx
}

/// `Σ_j w_j · v♯_j` for an already rearranged `v♯`.
pub(crate) fn dot_sorted(sorted: &[f64], w: &[f64]) -> f64 {
    sorted.iter().zip(w).map(|(a, b)| a * b).sum()
}

/// Sorted-ℓ1 norm `‖v‖_* = Σ_j λ_j v♯_j`.
pub fn sorted_l1_norm(v: &[f64], w: &WeightSchedule) -> Result<f64> {
    if v.len() != w.len() {
        return Err(Error::Dimension(format!(
            "vector has length {} but weights have length {}",
            v.len(),
            w.len()
        )));
    }
    Ok(dot_sorted(&rearrange_desc(v)?, w.as_slice()))
}

fn check_budget(s: usize, p: usize) -> Result<()> {
    check_range("s", s as f64, s <= p, "[0, p]")
}

/// Best s-term approximation error `σ_s(β)_* = min_{‖z‖₀ ≤ s} ‖β − z‖_*`.
///
/// The minimum is attained by keeping the `s` largest entries, so the value is
/// `‖β_{S^c}‖_*`, whose rearrangement is `(β♯_{s+1}, …, β♯_p, 0, …)`.
pub fn best_s_term_error_star(beta: &[f64], w: &WeightSchedule, s: usize) -> Result<f64> {
    if beta.len() != w.len() {
        return Err(Error::Dimension(format!(
            "vector has length {} but weights have length {}",
            beta.len(),
            w.len()
        )));
    }
    check_budget(s, beta.len())?;
    let sorted = rearrange_desc(beta)?;
    Ok(dot_sorted(&sorted[s..], w.as_slice()))
}

/// `σ_s(β)₁ = Σ_{j>s} β♯_j`.
pub fn best_s_term_error_l1(beta: &[f64], s: usize) -> Result<f64> {
    check_budget(s, beta.len())?;
    let sorted = rearrange_desc(beta)?;
    Ok(sorted[s..].iter().sum())
}

/// ℓq norm for `q ≥ 1` (and `q = ∞`).
pub fn lq_norm(v: &[f64], q: NormOrder) -> f64 {
    match q {
        NormOrder::Infinity => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        NormOrder::Finite(q) if q == 1.0 => v.iter().map(|x| x.abs()).sum(),
        NormOrder::Finite(q) if q == 2.0 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
        NormOrder::Finite(q) => {
            // scale by the max entry so large q does not overflow
            let m = lq_norm(v, NormOrder::Infinity);
            if m == 0.0 {
                return 0.0;
            }
            m * v.iter().map(|x| (x.abs() / m).powf(q)).sum::<f64>().powf(1.0 / q)
        }
    }
}

/// Quasi-norm `‖β‖_r = (Σ |β_j|^r)^{1/r}` for `0 < r < 1`.
pub fn lr_quasi_norm(v: &[f64], r: f64) -> f64 {
    v.iter().map(|x| x.abs().powf(r)).sum::<f64>().powf(1.0 / r)
}

/// q-ratio sparsity `s_q(δ) = (‖δ‖₁/‖δ‖_q)^{q/(q−1)}`.
pub fn q_ratio_sparsity(delta: &[f64], q: NormOrder) -> Result<f64> {
    check_range("q", q.value(), q.value() > 1.0, "(1, inf]")?;
    let l1 = lq_norm(delta, NormOrder::ONE);
    if l1 == 0.0 {
        return Err(Error::ZeroVector);
    }
    let lq = lq_norm(delta, q);
    Ok((l1 / lq).powf(q.conjugate()))
}

/// Both sides of the ℓr compressibility bound `σ_s(β)_* ≤ λ_s · s^{r/(1−r)} · ‖β‖_r`.
pub fn lr_compressibility_bound(
    beta: &[f64],
    w: &WeightSchedule,
    s: usize,
    r: f64,
) -> Result<(f64, f64)> {
    check_range("r", r, r > 0.0 && r < 1.0, "(0, 1)")?;
    check_range("s", s as f64, s >= 1 && s <= beta.len(), "[1, p]")?;
    let lhs = best_s_term_error_star(beta, w, s)?;
    let rhs = w.as_slice()[s - 1] * (s as f64).powf(r / (1.0 - r)) * lr_quasi_norm(beta, r);
    Ok((lhs, rhs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityReport {
    pub s: usize,
    pub sigma_s_star: f64,
    pub sigma_s_l1: f64,
    pub q_ratio: f64,
}

/// Collects the approximation errors and q-ratio sparsity of a nonzero vector.
pub fn sparsity_report(
    beta: &[f64],
    w: &WeightSchedule,
    s: usize,
    q: NormOrder,
) -> Result<SparsityReport> {
    Ok(SparsityReport {
        s,
        sigma_s_star: best_s_term_error_star(beta, w, s)?,
        sigma_s_l1: best_s_term_error_l1(beta, s)?,
        q_ratio: q_ratio_sparsity(beta, q)?,
    })
}
