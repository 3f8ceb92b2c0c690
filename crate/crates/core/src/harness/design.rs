//! Random design matrices.

use nalgebra::{Cholesky, DMatrix};
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::re::stream_rng;

/// Stream reserved for the design so it never overlaps trial streams.
pub(crate) const DESIGN_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    /// Rows i.i.d. `N(0, I)`.
    IidGaussian,
    /// Rows i.i.d. `N(0, Σ)`; `covariance` is `p × p`, row-major.
    Anisotropic { covariance: Vec<Vec<f64>> },
    /// `√n · I`, requires `p = n`.
    ScaledIdentity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    pub kind: DesignKind,
    pub n: usize,
    pub p: usize,
    /// Rescale every column to Euclidean norm `√n`.
    #[serde(default = "yes")]
    pub normalize: bool,
}

fn yes() -> bool {
    true
}

impl DesignSpec {
    pub fn new(kind: DesignKind, n: usize, p: usize) -> Self {
        DesignSpec { kind, n, p, normalize: true }
    }

    pub fn validate(&self) -> Result<()> {
        check_range("n", self.n as f64, self.n >= 1, ">= 1")?;
        check_range("p", self.p as f64, self.p >= 1, ">= 1")?;
        match &self.kind {
            DesignKind::ScaledIdentity if self.n != self.p => Err(Error::Dimension(format!(
                "scaled identity needs p = n, got n = {}, p = {}",
                self.n, self.p
            ))),
            DesignKind::Anisotropic { covariance } => covariance_factor(covariance, self.p).map(|_| ()),
            _ => Ok(()),
        }
    }
}

/// Lower Cholesky factor of a symmetric positive definite `p × p` matrix.
fn covariance_factor(cov: &[Vec<f64>], p: usize) -> Result<DMatrix<f64>> {
    if cov.len() != p || cov.iter().any(|row| row.len() != p) {
        return Err(Error::Dimension(format!("covariance must be {p} x {p}")));
    }
    let m = DMatrix::from_fn(p, p, |i, j| cov[i][j]);
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("covariance"));
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    for i in 0..p {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::InvalidInput("covariance is not symmetric".into()));
            }
        }
    }
    Cholesky::new(m)
        .map(|c| c.l())
        .ok_or_else(|| Error::InvalidInput("covariance is not positive definite".into()))
}

/// Scales every column to norm `√n`.
pub fn normalize_columns(x: &mut Array2<f64>) -> Result<()> {
    let target = (x.nrows() as f64).sqrt();
    for mut col in x.columns_mut() {
        let norm = col.dot(&col).sqrt();
        if norm == 0.0 {
            return Err(Error::Numerical("cannot normalize a zero column".into()));
        }
        col *= target / norm;
    }
    Ok(())
}

pub(crate) fn sample_design(spec: &DesignSpec, rng: &mut ChaCha8Rng) -> Result<Array2<f64>> {
    spec.validate()?;
    let (n, p) = (spec.n, spec.p);
    let mut x = match &spec.kind {
        DesignKind::ScaledIdentity => return Ok(Array2::eye(n) * (n as f64).sqrt()),
        DesignKind::IidGaussian => Array2::from_shape_simple_fn((n, p), || rng.sample(StandardNormal)),
        DesignKind::Anisotropic { covariance } => {
            let l = covariance_factor(covariance, p)?;
            let z: Array2<f64> = Array2::from_shape_simple_fn((n, p), || rng.sample(StandardNormal));
            let lt = Array2::from_shape_fn((p, p), |(i, j)| l[(j, i)]);
            z.dot(&lt)
        }
    };
    if spec.normalize {
        normalize_columns(&mut x)?;
    }
    Ok(x)
}

/// Draws a design matrix; the same seed gives the same matrix bit for bit.
pub fn gen_design(spec: &DesignSpec, seed: u64) -> Result<Array2<f64>> {
    sample_design(spec, &mut stream_rng(seed, DESIGN_STREAM))
}
