use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("flux {p}/{q} is not reduced")]
    NotReduced { p: i64, q: i64 },

    #[error("flux {p}/{q} is out of range (need q >= 2 and 1 <= p < q)")]
    OutOfRange { p: i64, q: i64 },

    #[error("vertex degree {0} is below 3")]
    DegreeTooSmall(usize),

    #[error("quasimomentum component {0} is outside [-pi, pi)")]
    QuasimomentumOutOfRange(f64),

    #[error("spectral parameter must be finite and positive, got {0}")]
    InvalidSpectralParameter(f64),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("singular ring at z = {z}: both extremal determinants are proportional; z lies in an exclusion window")]
    SingularRing { z: f64 },

    #[error("non-collapse at z = {z}: imaginary residual {residual:e} exceeds tolerance {tolerance:e}")]
    NonCollapse { z: f64, residual: f64, tolerance: f64 },

    #[error("invalid bracket [{lo}, {hi}]: no sign change of |theta*| - 2")]
    InvalidBracket { lo: f64, hi: f64 },

    #[error("grid step {step:e} is too coarse to separate singular points {spacing:e} apart")]
    GridTooCoarse { step: f64, spacing: f64 },

    #[error("no narrow bands found near k = {n} pi")]
    NoNarrowBands { n: u32 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
