//! Spectral toolkit for the one-dimensional Dirac system
//!
//! ```text
//! B y' + V y = lambda y,   B = diag(-i, i),   V = [[0, P], [Q, 0]]
//! ```
//!
//! on `[0, pi]` with two linear two-point boundary forms. The crate computes the
//! fundamental matrix `E(x, lambda)` through its iterated-integral series, the
//! characteristic determinant, eigenvalues with multiplicities and root functions,
//! and checks sufficient conditions for completeness of the root function system
//! when the boundary conditions are not regular.

pub mod asymptotics;
pub mod bc;
pub mod chardet;
pub mod cli;
pub mod completeness;
pub mod error;
pub mod expr;
pub mod potential;
pub mod problem;
pub mod quad;
pub mod spectrum;
pub mod transfer;

pub use bc::{classify_bc, compute_minors, BcClass, BoundaryMatrix, Minors};
pub use error::{Error, Result};
pub use potential::{EndpointData, EndpointRecord, Potential};
pub use problem::{ProblemSpec, Tolerances};

/// Complex scalar used for the spectral parameter and all matrix entries.
pub type C64 = num_complex::Complex64;

pub(crate) const I: C64 = C64::new(0.0, 1.0);

pub(crate) fn ensure_finite(z: C64, what: &str) -> Result<C64> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}
