use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{name} = {value} is out of range: {expected}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("undefined for the zero vector")]
    ZeroVector,

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("design matrix is not column-normalized (max column norm / sqrt(n) = {0})")]
    NotNormalized(f64),

    #[error("combinatorial budget exceeded: {count} supports > {budget}; use randomized mode")]
    BudgetExceeded { count: f64, budget: f64 },

    #[error("weights do not follow the Slope schedule form")]
    NotSlopeSchedule,

    #[error("missing {0}")]
    Missing(&'static str),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad inputs).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_range(
    name: &'static str,
    value: f64,
    ok: bool,
    expected: &'static str,
) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            expected,
        })
    }
}
