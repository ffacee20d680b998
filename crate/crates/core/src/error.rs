use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index {index} out of range for {len} links")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid probability {0}; expected a value in [0, 1]")]
    InvalidProbability(f64),

    #[error("instance too large: size {size} exceeds limit {limit}")]
    InstanceTooLarge { size: usize, limit: usize },

    #[error("geometric program subproblem is infeasible: {0}")]
    InfeasibleSubproblem(String),

    #[error("no convergence after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("quality exponent {exponent:.3e} outside the representable range; rescale the features")]
    FeatureScaling { exponent: f64 },

    #[error("kernel is not positive semidefinite: eigenvalue {eigenvalue:.3e} (largest {largest:.3e})")]
    PsdViolation { eigenvalue: f64, largest: f64 },

    #[error("label {index} has zero probability under the model")]
    DegenerateLabel { index: usize },

    #[error("training set is empty")]
    EmptyTrainingSet,
}

pub type Result<T> = std::result::Result<T, Error>;
