use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("quadrature did not converge: achieved {achieved:e}, wanted {wanted:e}")]
    QuadratureNonConvergence { achieved: f64, wanted: f64 },

    #[error("capacity exceeded: {what} = {value} (limit {limit})")]
    Capacity {
        what: &'static str,
        value: usize,
        limit: usize,
    },

    #[error("sampling requires cell averages in [0, 1], found {value} at ({row}, {col})")]
    NotAProbability { row: usize, col: usize, value: f64 },

    #[error("non-finite state at step {step}")]
    NonFinite { step: usize },

    #[error("measure not normalized: total mass {0}")]
    NotNormalized(f64),

    #[error("time grids differ")]
    GridMismatch,

    #[error("CFL condition violated: dt * max|V| / du = {0} > 0.9")]
    Cfl(f64),

    #[error("index {index} out of range for {len} cells")]
    OutOfRange { index: usize, len: usize },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
