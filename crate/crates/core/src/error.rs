use thiserror::Error;

pub type Result<T, E = DcsError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DcsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid identity submatrix: {0}")]
    InvalidSubmatrix(String),

    #[error("invalid location matrix: {0}")]
    InvalidLocation(String),

    #[error("invalid signal ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("sensor index {index} out of range for J = {sensors}")]
    InvalidSensor { index: usize, sensors: usize },

    #[error("no feasible location matrix within the model caps")]
    InfeasibleModel,

    #[error("subset enumeration guard exceeded: J = {sensors} > {limit}")]
    GuardExceeded { sensors: usize, limit: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("sensor {sensor} has no measurements; the cross-validation split needs M_j >= 1")]
    EmptySensor { sensor: usize },
}
