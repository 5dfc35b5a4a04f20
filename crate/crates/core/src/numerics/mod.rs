//! Shared numerical kernels: error-function family, digamma/trigamma,
//! truncated-Gaussian moments, gamma maximum likelihood and a nonlinear
//! conjugate-gradient minimizer.

mod cg;
mod gamma_fit;
#[cfg(test)]
pub(crate) mod quadrature_oracle;
pub mod special;
mod truncnorm;

pub use cg::{cg_minimize, gradient_rel_err, CgOutcome, CgStop};
pub use gamma_fit::{fit_gamma_ml, GammaFit};
pub use truncnorm::{truncated_normal_moments, TruncatedNormalMoments};

use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("variance must be positive, got {0}")]
    InvalidVariance(f64),
    #[error("interval [{0}, {1}) is empty")]
    InvalidInterval(f64, f64),
    #[error("interval mass underflowed below the representable range")]
    DegenerateMass,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("objective is not finite at the starting point")]
    InvalidStart,
}
