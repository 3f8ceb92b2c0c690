//! Restricted eigenvalue quantities of a design matrix.
//!
//! `θ_q(s, c₀)` and `ν_q(s, c₀)` are minima of the nonconvex ratio
//! `‖Xδ‖₂ / (√n‖δ‖_q)` over a cone. They cannot be certified in general, so the
//! estimators here return the smallest ratio found together with the vector
//! attaining it. The value is therefore an upper bound on the true minimum.

use std::f64::consts::E;

use itertools::Itertools;
use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView1};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::norms::{
    dot_sorted, lq_norm, rearrange_desc, top_s_support, NormOrder, WeightSchedule,
};
use crate::solver::{max_column_scale, NORMALIZATION_SLACK};
use crate::weights::capital_lambda_q;

/// Relative slack used by every cone-membership comparison.
pub const CONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeKind {
    Sre,
    Wre,
}

/// `C_SRE(q,s,c₀) = {‖δ‖₁ ≤ (1+c₀) s^{1−1/q} ‖δ‖_q}` or
/// `C_WRE(q,s,c₀) = {‖δ‖_* ≤ (1+c₀) Λ_q(s) ‖δ‖_q}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeSpec {
    kind: ConeKind,
    q: NormOrder,
    s: usize,
    c0: f64,
    weights: Option<WeightSchedule>,
    // (1+c₀)·s^{1−1/q} or (1+c₀)·Λ_q(s)
    radius: f64,
}

impl ConeSpec {
    pub fn sre(q: NormOrder, s: usize, c0: f64) -> Result<Self> {
        q.require_at_least_two()?;
        check_range("s", s as f64, s >= 1, ">= 1")?;
        check_range("c0", c0, c0 > 0.0 && c0.is_finite(), "> 0")?;
        Ok(ConeSpec {
            kind: ConeKind::Sre,
            q,
            s,
            c0,
            weights: None,
            radius: (1.0 + c0) * (s as f64).powf(1.0 - q.reciprocal()),
        })
    }

    pub fn wre(q: NormOrder, s: usize, c0: f64, weights: WeightSchedule) -> Result<Self> {
        q.require_at_least_two()?;
        check_range("s", s as f64, s >= 1 && s <= weights.len(), "[1, p]")?;
        check_range("c0", c0, c0 > 0.0 && c0.is_finite(), "> 0")?;
        let radius = (1.0 + c0) * capital_lambda_q(&weights, s, q)?;
        Ok(ConeSpec {
            kind: ConeKind::Wre,
            q,
            s,
            c0,
            weights: Some(weights),
            radius,
        })
    }

    pub fn kind(&self) -> ConeKind {
        self.kind
    }

    pub fn q(&self) -> NormOrder {
        self.q
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn weights(&self) -> Option<&WeightSchedule> {
        self.weights.as_ref()
    }

    fn check_dim(&self, p: usize) -> Result<()> {
        if let Some(w) = &self.weights {
            if w.len() != p {
                return Err(Error::Dimension(format!(
                    "cone weights have length {} but vectors have length {p}",
                    w.len()
                )));
            }
        }
        if self.s > p {
            return Err(Error::OutOfRange {
                name: "s",
                value: self.s as f64,
                expected: "[1, p]",
            });
        }
        Ok(())
    }

    /// `(lhs, rhs)` of the cone inequality.
    fn sides(&self, delta: &[f64]) -> (f64, f64) {
        let lhs = match &self.weights {
            None => lq_norm(delta, NormOrder::ONE),
            Some(w) => dot_sorted(&rearrange_desc(delta).expect("nonempty"), w.as_slice()),
        };
        (lhs, self.radius * lq_norm(delta, self.q))
    }

    fn contains(&self, delta: &[f64]) -> bool {
        let (lhs, rhs) = self.sides(delta);
        lhs <= rhs * (1.0 + CONE_SLACK)
    }
}

/// Whether a nonzero `δ` lies in the cone.
pub fn cone_member(delta: &[f64], spec: &ConeSpec) -> Result<bool> {
    spec.check_dim(delta.len())?;
    if delta.iter().all(|&d| d == 0.0) {
        return Err(Error::ZeroVector);
    }
    Ok(spec.contains(delta))
}

/// SRE inequality with a real-valued sparsity level, which may exceed `p`.
fn sre_inequality(delta: &[f64], q: NormOrder, s: f64, c0: f64) -> bool {
    let lhs = lq_norm(delta, NormOrder::ONE);
    let rhs = (1.0 + c0) * s.powf(1.0 - q.reciprocal()) * lq_norm(delta, q);
    lhs <= rhs * (1.0 + CONE_SLACK)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateMethod {
    RandomizedSearch,
    ExactEnumeration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateDirection {
    UpperBoundOnMinimum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct REEstimate {
    pub value: f64,
    pub method: EstimateMethod,
    pub direction: EstimateDirection,
    pub restarts: usize,
    pub witness: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    pub restarts: usize,
    pub steps: usize,
    pub step: f64,
    pub seed: u64,
    /// Largest number of candidates enumerated exhaustively.
    pub exhaustive_budget: f64,
    /// Refuse designs that are not column-normalized.
    pub strict: bool,
    /// Extra starting points for the search, e.g. witnesses from a smaller cone.
    #[serde(skip)]
    pub warm_starts: Vec<Vec<f64>>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            restarts: 200,
            steps: 500,
            step: 1e-2,
            seed: 0,
            exhaustive_budget: 1e6,
            strict: false,
            warm_starts: Vec::new(),
        }
    }
}

/// `ln C(p, s)` computed by summing logs, exact enough for budget checks.
fn ln_binomial(p: usize, s: usize) -> f64 {
    let s = s.min(p - s.min(p));
    (0..s).map(|i| ((p - i) as f64 / (i + 1) as f64).ln()).sum()
}

/// `C(p, s)` as a float (may be infinite for huge arguments).
pub fn binomial(p: usize, s: usize) -> f64 {
    if s > p {
        0.0
    } else {
        ln_binomial(p, s).exp().round()
    }
}

/// Per-restart RNG derived from the master seed and the restart index.
pub(crate) fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

struct Ratio<'a> {
    x: &'a Array2<f64>,
    sqrt_n: f64,
    q: NormOrder,
}

impl Ratio<'_> {
    fn value(&self, delta: &[f64]) -> f64 {
        let xd = self.x.dot(&ArrayView1::from(delta));
        xd.dot(&xd).sqrt() / (self.sqrt_n * lq_norm(delta, self.q))
    }

    /// Gradient of `log ‖Xδ‖₂ − log ‖δ‖_q`, and the ratio itself.
    fn log_gradient(&self, delta: &[f64]) -> (Vec<f64>, f64) {
        let d = ArrayView1::from(delta);
        let xd = self.x.dot(&d);
        let xnorm2 = xd.dot(&xd);
        let lq = lq_norm(delta, self.q);
        let ratio = xnorm2.sqrt() / (self.sqrt_n * lq);
        if xnorm2 == 0.0 {
            return (vec![0.0; delta.len()], 0.0);
        }
        let mut grad: Array1<f64> = self.x.t().dot(&xd) / xnorm2;
        match self.q {
            NormOrder::Infinity => {
                // first maximal index picks the subgradient at ties
                let (i, _) = delta
                    .iter()
                    .enumerate()
                    .fold((0, -1.0), |(bi, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) });
                grad[i] -= delta[i].signum() / lq;
            }
            NormOrder::Finite(q) => {
                for (g, &v) in grad.iter_mut().zip(delta) {
                    *g -= v.signum() * (v.abs() / lq).powf(q - 1.0) / lq;
                }
            }
        }
        (grad.to_vec(), ratio)
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Radially shrinks the entries outside the top-`s` until `δ` is in the cone.
fn project(delta: &[f64], spec: &ConeSpec) -> Vec<f64> {
    if spec.contains(delta) {
        return delta.to_vec();
    }
    let head = top_s_support(delta, spec.s);
    let mut is_head = vec![false; delta.len()];
    head.iter().for_each(|&i| is_head[i] = true);
    let shrink = |t: f64| -> Vec<f64> {
        delta
            .iter()
            .zip(&is_head)
            .map(|(&d, &h)| if h { d } else { d * t })
            .collect()
    };
    // the gap is concave in t and nonpositive at t = 0
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if spec.contains(&shrink(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    shrink(lo)
}

fn descend(ratio: &Ratio<'_>, spec: &ConeSpec, start: Vec<f64>, cfg: &SearchConfig) -> (f64, Vec<f64>) {
    let mut delta = project(&start, spec);
    normalize(&mut delta);
    let (mut grad, mut value) = ratio.log_gradient(&delta);
    let mut step = cfg.step;
    for _ in 0..cfg.steps {
        if value == 0.0 || step < 1e-14 {
            break;
        }
        let trial: Vec<f64> = delta.iter().zip(&grad).map(|(d, g)| d - step * g).collect();
        let mut cand = project(&trial, spec);
        normalize(&mut cand);
        let cand_value = ratio.value(&cand);
        if cand_value < value && cand.iter().any(|&c| c != 0.0) {
            delta = cand;
            let (g, v) = ratio.log_gradient(&delta);
            grad = g;
            value = v;
            step *= 1.5;
        } else {
            step *= 0.5;
        }
    }
    (value, delta)
}

fn require_normalization(x: &Array2<f64>, strict: bool) -> Result<()> {
    let scale = max_column_scale(x);
    if scale > 1.0 + NORMALIZATION_SLACK {
        if strict {
            return Err(Error::NotNormalized(scale));
        }
        log::warn!("design is not column-normalized (max scale {scale}); estimate is still computed");
    }
    Ok(())
}

/// Minimizes the RE ratio over a cone. See the module docs for semantics.
pub fn estimate_re(x: &Array2<f64>, spec: &ConeSpec, cfg: &SearchConfig) -> Result<REEstimate> {
    let (n, p) = x.dim();
    if n == 0 || p == 0 {
        return Err(Error::Dimension(format!("design is {n}x{p}")));
    }
    spec.check_dim(p)?;
    require_normalization(x, cfg.strict)?;
    let ratio = Ratio {
        x,
        sqrt_n: (n as f64).sqrt(),
        q: spec.q,
    };
    let s = spec.s;

    let mut best: Option<(f64, Vec<f64>)> = None;
    let consider = |value: f64, delta: Vec<f64>, best: &mut Option<(f64, Vec<f64>)>| {
        if best.as_ref().map_or(true, |(b, _)| value < *b) {
            *best = Some((value, delta));
        }
    };

    // s-sparse sign vectors lie in both cones; the overall sign does not
    // change the ratio, so the first sign is fixed to +1.
    let candidates = binomial(p, s) * 2f64.powi(s as i32);
    let exhaustive = candidates <= cfg.exhaustive_budget;
    if exhaustive {
        let found = (0..p)
            .combinations(s)
            .par_bridge()
            .map(|support| {
                let mut local: Option<(f64, Vec<usize>, u64)> = None;
                for mask in 0..(1u64 << (s - 1)) {
                    let mut xd = Array1::<f64>::zeros(n);
                    for (k, &j) in support.iter().enumerate() {
                        let sign = if k > 0 && mask >> (k - 1) & 1 == 1 { -1.0 } else { 1.0 };
                        xd.scaled_add(sign, &x.column(j));
                    }
                    let value = xd.dot(&xd).sqrt() / (ratio.sqrt_n * (s as f64).powf(spec.q.reciprocal()));
                    if local.as_ref().map_or(true, |(b, _, _)| value < *b) {
                        local = Some((value, support.clone(), mask));
                    }
                }
                local.expect("s >= 1")
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        if let Some((_, support, mask)) = found {
            let mut delta = vec![0.0; p];
            for (k, &j) in support.iter().enumerate() {
                delta[j] = if k > 0 && mask >> (k - 1) & 1 == 1 { -1.0 } else { 1.0 };
            }
            // recompute so the stored value is exactly the witness ratio
            consider(ratio.value(&delta), delta, &mut best);
        }
    }

    let mut starts: Vec<Vec<f64>> = cfg.warm_starts.iter().filter(|w| w.len() == p).cloned().collect();
    if let Some((_, delta)) = &best {
        starts.push(delta.clone());
    }
    let warm: Vec<(f64, Vec<f64>)> = starts
        .into_par_iter()
        .map(|start| descend(&ratio, spec, start, cfg))
        .collect();

    let searched: Vec<(f64, Vec<f64>)> = (0..cfg.restarts as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(cfg.seed, i);
            let start: Vec<f64> = if exhaustive || i % 2 == 0 {
                (0..p).map(|_| rng.sample(StandardNormal)).collect()
            } else {
                // random sparse sign vector, used when enumeration is too large
                let mut d = vec![0.0; p];
                for j in sample(&mut rng, p, s) {
                    d[j] = if rng.random::<bool>() { 1.0 } else { -1.0 };
                }
                d
            };
            descend(&ratio, spec, start, cfg)
        })
        .collect();

    let mut method = if exhaustive {
        EstimateMethod::ExactEnumeration
    } else {
        EstimateMethod::RandomizedSearch
    };
    let enumerated = best.as_ref().map(|(v, _)| *v);
    for (value, delta) in warm.into_iter().chain(searched) {
        if delta.iter().all(|&d| d == 0.0) || !spec.contains(&delta) {
            continue;
        }
        consider(value, delta, &mut best);
    }
    let (_, witness) = best.ok_or_else(|| Error::Numerical("search found no cone point".into()))?;
    let value = ratio.value(&witness);
    if enumerated.map_or(true, |e| value < e) {
        method = EstimateMethod::RandomizedSearch;
    }
    Ok(REEstimate {
        value,
        method,
        direction: EstimateDirection::UpperBoundOnMinimum,
        restarts: cfg.restarts,
        witness,
    })
}

/// Estimate of `θ_q(s, c₀)` over the SRE cone.
pub fn estimate_theta_q(
    x: &Array2<f64>,
    q: NormOrder,
    s: usize,
    c0: f64,
    cfg: &SearchConfig,
) -> Result<REEstimate> {
    estimate_re(x, &ConeSpec::sre(q, s, c0)?, cfg)
}

/// Estimate of `ν_q(s, c₀)` over the WRE cone.
pub fn estimate_nu_q(
    x: &Array2<f64>,
    w: &WeightSchedule,
    q: NormOrder,
    s: usize,
    c0: f64,
    cfg: &SearchConfig,
) -> Result<REEstimate> {
    estimate_re(x, &ConeSpec::wre(q, s, c0, w.clone())?, cfg)
}

/// Estimates over a family of nested cones, smallest `c₀` first, seeding each
/// search with the previous witnesses so the values are non-increasing in `c₀`.
/// Results come back in the order of `c0s`.
pub fn estimate_re_path(
    x: &Array2<f64>,
    make_spec: impl Fn(f64) -> Result<ConeSpec>,
    c0s: &[f64],
    cfg: &SearchConfig,
) -> Result<Vec<REEstimate>> {
    let mut order: Vec<usize> = (0..c0s.len()).collect();
    order.sort_by(|&a, &b| c0s[a].total_cmp(&c0s[b]));
    let mut out: Vec<Option<REEstimate>> = vec![None; c0s.len()];
    let mut cfg = cfg.clone();
    for i in order {
        let est = estimate_re(x, &make_spec(c0s[i])?, &cfg)?;
        cfg.warm_starts.push(est.witness.clone());
        out[i] = Some(est);
    }
    Ok(out.into_iter().map(|e| e.expect("filled")).collect())
}

/// Ratio `‖Xδ‖₂ / (√n ‖δ‖_q)` of a single vector.
pub fn re_ratio(x: &Array2<f64>, delta: &[f64], q: NormOrder) -> f64 {
    Ratio {
        x,
        sqrt_n: (x.nrows() as f64).sqrt(),
        q,
    }
    .value(delta)
}

/// `sqrt(λ_min(XᵀX)/n)`, which lower-bounds every `θ_q` and `ν_q` with `q ≥ 2`
/// (zero when `n < p`).
pub fn certified_re_lower_bound(x: &Array2<f64>) -> f64 {
    let (n, p) = x.dim();
    if n < p {
        return 0.0;
    }
    let gram = gram_matrix(x);
    let eig = SymmetricEigen::new(gram);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    (min.max(0.0) / n as f64).sqrt()
}

fn gram_matrix(x: &Array2<f64>) -> DMatrix<f64> {
    let g = x.t().dot(x);
    let p = g.nrows();
    DMatrix::from_fn(p, p, |i, j| g[(i, j)])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseEigenvalue {
    pub value: f64,
    pub method: EstimateMethod,
    pub support: Vec<usize>,
    pub supports_examined: usize,
}

/// Number of random supports examined in randomized mode.
pub const RANDOM_SUPPORTS: usize = 20_000;

/// Maximal s-sparse eigenvalue `max_{|S|=s} sqrt(λ_max(X_SᵀX_S)/n)`.
///
/// Exhaustive when `C(p,s)` fits the budget; otherwise `randomized` must be
/// set and the result is the best over random supports (a lower bound).
pub fn max_sparse_eigenvalue(
    x: &Array2<f64>,
    s: usize,
    randomized: bool,
    budget: f64,
    seed: u64,
) -> Result<SparseEigenvalue> {
    let (n, p) = x.dim();
    check_range("s", s as f64, s >= 1 && s <= p, "[1, p]")?;
    let gram = x.t().dot(x);
    let eval = |support: &[usize]| -> f64 {
        let sub = DMatrix::from_fn(s, s, |a, b| gram[(support[a], support[b])]);
        let top = SymmetricEigen::new(sub)
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        (top.max(0.0) / n as f64).sqrt()
    };
    let pick = |a: (f64, Vec<usize>), b: (f64, Vec<usize>)| {
        if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
            b
        } else {
            a
        }
    };

    let count = binomial(p, s);
    if count <= budget {
        let (value, support) = (0..p)
            .combinations(s)
            .par_bridge()
            .map(|support| (eval(&support), support))
            .reduce(|| (f64::NEG_INFINITY, Vec::new()), pick);
        return Ok(SparseEigenvalue {
            value,
            method: EstimateMethod::ExactEnumeration,
            support,
            supports_examined: count as usize,
        });
    }
    if !randomized {
        return Err(Error::BudgetExceeded { count, budget });
    }
    let (value, support) = (0..RANDOM_SUPPORTS as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i);
            let mut support = sample(&mut rng, p, s).into_vec();
            support.sort_unstable();
            (eval(&support), support)
        })
        .reduce(|| (f64::NEG_INFINITY, Vec::new()), pick);
    Ok(SparseEigenvalue {
        value,
        method: EstimateMethod::RandomizedSearch,
        support,
        supports_examined: RANDOM_SUPPORTS,
    })
}

/// `s_q = ⌈s · (sqrt(log(2ep/s)/log 2))^{q/(q−1)}⌉`.
pub fn s_q_threshold(s: usize, p: usize, q: NormOrder) -> Result<usize> {
    q.require_at_least_two()?;
    check_range("s", s as f64, s >= 1 && s <= p, "[1, p]")?;
    let base = ((2.0 * E * p as f64 / s as f64).ln() / 2f64.ln()).sqrt();
    Ok((s as f64 * base.powf(q.conjugate())).ceil() as usize)
}

fn nonzero(delta: &[f64]) -> Result<()> {
    if delta.is_empty() || delta.iter().all(|&d| d == 0.0) {
        Err(Error::ZeroVector)
    } else {
        Ok(())
    }
}

/// `δ ∈ C_SRE(q,s,c₀) ⟹ δ ∈ C_SRE(2, s^{2−2/q}, c₀)`.
pub fn check_prop2_containment(delta: &[f64], q: NormOrder, s: usize, c0: f64) -> Result<bool> {
    nonzero(delta)?;
    let spec = ConeSpec::sre(q, s, c0)?;
    if !spec.contains(delta) {
        return Ok(true);
    }
    let s2 = (s as f64).powf(2.0 - 2.0 * q.reciprocal());
    Ok(sre_inequality(delta, NormOrder::TWO, s2, c0))
}

/// `δ ∈ C_WRE(q,s,c₀) ⟹ δ ∈ C_SRE(q, s_q, c₀)` for a Slope schedule `w`.
pub fn check_prop3_containment(
    delta: &[f64],
    w: &WeightSchedule,
    q: NormOrder,
    s: usize,
    c0: f64,
) -> Result<bool> {
    nonzero(delta)?;
    if w.slope_scale().is_none() {
        return Err(Error::NotSlopeSchedule);
    }
    let spec = ConeSpec::wre(q, s, c0, w.clone())?;
    spec.check_dim(delta.len())?;
    if !spec.contains(delta) {
        return Ok(true);
    }
    let sq = s_q_threshold(s, w.len(), q)?;
    Ok(sre_inequality(delta, q, sq as f64, c0))
}

/// `δ ∈ C_SRE(q,s,c₀) ⟹ δ ∈ C_WRE(q,s,1+c₀)`.
pub fn check_sre_in_wre(
    delta: &[f64],
    w: &WeightSchedule,
    q: NormOrder,
    s: usize,
    c0: f64,
) -> Result<bool> {
    nonzero(delta)?;
    let sre = ConeSpec::sre(q, s, c0)?;
    let wre = ConeSpec::wre(q, s, 1.0 + c0, w.clone())?;
    wre.check_dim(delta.len())?;
    Ok(!sre.contains(delta) || wre.contains(delta))
}
