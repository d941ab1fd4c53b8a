use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite evaluation at x = {x:?}")]
    NonFinite { x: Vec<f64> },

    #[error("non-finite drift at t = {t}, x = {x:?}")]
    NonFiniteDrift { t: f64, x: Vec<f64> },

    #[error("unknown potential `{0}`")]
    UnknownPotential(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("nodes {a} and {b} are not connected")]
    Disconnected { a: usize, b: usize },

    #[error("empty grid")]
    EmptyGrid,

    #[error("{0}")]
    Domain(String),

    #[error("time step {dt} exceeds the stability bound {bound}")]
    Unstable { dt: f64, bound: f64 },

    #[error("negative density {value} in cell {cell} beyond clip threshold")]
    NegativeMass { cell: usize, value: f64 },

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("spectral gap {gap:e} at beta = {beta} is below the resolution floor")]
    GapFloor { beta: f64, gap: f64 },
}

impl Error {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}
