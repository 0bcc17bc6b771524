use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("boundary matrix rows are linearly dependent (max |A_jk| = {max_minor:e})")]
    RankDeficient { max_minor: f64 },

    #[error("quadrature did not converge: {0}")]
    QuadratureNotConverged(String),

    #[error("|Im lambda| = {im} exceeds the series cap {cap}")]
    SeriesDivergenceGuard { im: f64, cap: f64 },

    #[error("step size underflow at x = {x}")]
    StepSizeUnderflow { x: f64 },

    #[error("zero of the determinant on or near the contour after {attempts} dilations")]
    BoundaryZero { attempts: usize },

    #[error("phase tracking failed: {0}")]
    PhaseTrackingFailed(String),

    #[error("found {found} zeros, more than the allowed {max}")]
    MaxCountExceeded { found: usize, max: usize },

    #[error("determinant vanishes on {fraction:.0}% of contour samples; identically zero suspected")]
    DegenerateDeterminantSuspected { fraction: f64 },

    #[error("boundary operator has no null space at lambda = {0}")]
    NullSpaceEmpty(String),

    #[error("associated function chain could not be built: {0}")]
    ChainConstructionFailed(String),

    #[error("lambda = {lambda} lies in the wrong half-plane for this kernel")]
    WrongHalfPlane { lambda: String },

    #[error("no power law at {which}: fit quality {quality:.4}")]
    NoPowerLaw { which: String, quality: f64 },

    #[error("cumulative integral at {which} vanishes")]
    ZeroMass { which: String },

    #[error("missing endpoint data: {0}")]
    MissingEndpointData(String),

    #[error("Gram matrix at R = {radius} has condition number {condition:e}")]
    IllConditionedGram { radius: f64, condition: f64 },

    #[error("spectrum unavailable: {0}")]
    SpectrumUnavailable(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("expression error at offset {offset}: {message}")]
    Expression { offset: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
