//! Simulation harness: random instances, Monte Carlo coverage and rate sweeps.

pub mod design;
pub mod monte_carlo;
pub mod signal;
pub mod sweep;
pub mod trial;

pub use design::{gen_design, DesignKind, DesignSpec};
pub use monte_carlo::{monte_carlo, trials_csv, wilson_interval, SimulationReport};
pub use signal::{gen_signal, AmplitudeLaw, SignalKind, SignalSpec};
pub use sweep::{rate_sweep, sweep_csv, SweepAxis, SweepConfig, SweepTable};
pub use trial::{run_trial, TrialConfig, TrialContext, TrialReport};
