//! Slope and Lasso estimators with oracle-inequality constants, restricted
//! eigenvalue estimation and a Monte Carlo harness that checks the bounds.

pub mod bounds;
pub mod error;
pub mod harness;
pub mod norms;
pub mod prox;
pub mod re;
pub mod solver;
pub mod weights;

pub use bounds::{BoundParams, BoundReport, Estimator};
pub use error::{Error, Result};
pub use norms::{NormOrder, WeightSchedule};
pub use solver::{lasso_fit, slope_fit, FitResult, ProblemInstance, SolverConfig};
pub use weights::{slope_weights, LassoTuning, SlopeWeightConfig};
