//! Random true coefficient vectors: exactly sparse or inside an ℓr ball.

use ndarray::Array1;
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::re::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeLaw {
    /// `±magnitude` with fair signs.
    #[default]
    Rademacher,
    /// `magnitude · N(0, 1)`.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    ExactSparse {
        s: usize,
        #[serde(default = "unit")]
        magnitude: f64,
        #[serde(default)]
        law: AmplitudeLaw,
    },
    /// `Σ|β_j|^r = radius` with power-law decaying magnitudes in random order.
    LrBall { r: f64, radius: f64 },
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalSpec {
    pub kind: SignalKind,
    pub p: usize,
}

impl SignalSpec {
    pub fn exact_sparse(p: usize, s: usize, magnitude: f64) -> Self {
        SignalSpec {
            kind: SignalKind::ExactSparse {
                s,
                magnitude,
                law: AmplitudeLaw::Rademacher,
            },
            p,
        }
    }

    pub fn lr_ball(p: usize, r: f64, radius: f64) -> Self {
        SignalSpec {
            kind: SignalKind::LrBall { r, radius },
            p,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_range("p", self.p as f64, self.p >= 1, ">= 1")?;
        match self.kind {
            SignalKind::ExactSparse { s, magnitude, .. } => {
                if s > self.p {
                    return Err(Error::OutOfRange {
                        name: "s",
                        value: s as f64,
                        expected: "[0, p]",
                    });
                }
                check_range("magnitude", magnitude, magnitude.is_finite() && magnitude >= 0.0, ">= 0")
            }
            SignalKind::LrBall { r, radius } => {
                check_range("r", r, r > 0.0 && r < 1.0, "(0, 1)")?;
                check_range("radius", radius, radius.is_finite() && radius > 0.0, "> 0")
            }
        }
    }

    /// Number of nonzeros for exact-sparse signals.
    pub fn sparsity(&self) -> Option<usize> {
        match self.kind {
            SignalKind::ExactSparse { s, .. } => Some(s),
            SignalKind::LrBall { .. } => None,
        }
    }
}

pub(crate) fn sample_signal(spec: &SignalSpec, rng: &mut ChaCha8Rng) -> Result<Array1<f64>> {
    spec.validate()?;
    let p = spec.p;
    let mut beta = Array1::zeros(p);
    match spec.kind {
        SignalKind::ExactSparse { s, magnitude, law } => {
            for j in index::sample(rng, p, s).into_vec() {
                beta[j] = match law {
                    AmplitudeLaw::Rademacher => {
                        if rng.random::<bool>() {
                            magnitude
                        } else {
                            -magnitude
                        }
                    }
                    AmplitudeLaw::Gaussian => magnitude * rng.sample::<f64, _>(StandardNormal),
                };
            }
        }
        SignalKind::LrBall { r, radius } => {
            let mut ranks: Vec<usize> = (1..=p).collect();
            ranks.shuffle(rng);
            for (j, &k) in ranks.iter().enumerate() {
                let g: f64 = rng.sample(StandardNormal);
                beta[j] = g * (k as f64).powf(-2.0 / r);
            }
            let mass = lr_mass(beta.as_slice().expect("contiguous"), r);
            if mass == 0.0 {
                return Err(Error::Numerical("drew an all-zero signal".into()));
            }
            beta *= (radius / mass).powf(1.0 / r);
        }
    }
    Ok(beta)
}

/// `Σ |β_j|^r`.
pub fn lr_mass(v: &[f64], r: f64) -> f64 {
    v.iter().map(|x| x.abs().powf(r)).sum()
}

/// Draws a signal from its own seed.
pub fn gen_signal(spec: &SignalSpec, seed: u64) -> Result<Array1<f64>> {
    sample_signal(spec, &mut stream_rng(seed, 0))
}
