//! Maximum-likelihood gamma fit from expected sufficient statistics.

use super::special::{digamma, trigamma};
use super::NumericsError;
use crate::Real;

/// Result of a gamma maximum-likelihood fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaFit<T> {
    pub shape: T,
    pub rate: T,
    /// Set when the Jensen gap was (near) zero and the shape was capped at 1e6.
    pub capped: bool,
}

/// Shape cap for degenerate (zero Jensen gap) statistics.
pub const SHAPE_CAP: f64 = 1e6;

/// Fits `Gamma(shape, rate)` to expected sufficient statistics by maximum
/// likelihood: `sample_mean` is the mean of E[tau] and `sample_log_mean` the
/// mean of E[ln tau]. Solves `ln a - psi(a) = ln(mean) - log_mean` by Newton
/// iteration from the standard closed-form initial guess, then sets
/// `rate = shape / mean` (so the fitted mean matches exactly).
pub fn fit_gamma_ml<T: Real>(sample_mean: T, sample_log_mean: T) -> Result<GammaFit<T>, NumericsError> {
    if !(sample_mean > T::zero()) || !sample_mean.is_finite() || !sample_log_mean.is_finite() {
        return Err(NumericsError::InvalidInput(format!(
            "gamma statistics must be finite with positive mean, got mean={sample_mean} log_mean={sample_log_mean}"
        )));
    }
    let gap = sample_mean.ln() - sample_log_mean;
    if gap < -T::of(1e-6) {
        return Err(NumericsError::InvalidInput(format!(
            "log mean exceeds log of mean by {gap} (Jensen violation)"
        )));
    }
    let cap = T::of(SHAPE_CAP);
    if gap <= T::of(1e-12) {
        return Ok(GammaFit {
            shape: cap,
            rate: cap / sample_mean,
            capped: true,
        });
    }

    // initial guess: a0 = (3 - g + sqrt((g-3)^2 + 24 g)) / (12 g)
    let three = T::of(3.0);
    let mut shape = (three - gap + ((gap - three) * (gap - three) + T::of(24.0) * gap).sqrt())
        / (T::of(12.0) * gap);
    shape = shape.max(T::of(1e-8)).min(cap);
    for _ in 0..60 {
        let f = shape.ln() - digamma(shape) - gap;
        let df = T::one() / shape - trigamma(shape);
        let mut step = f / df;
        // keep the iterate positive
        if step.abs() > shape * T::of(0.9) {
            step = step.signum() * shape * T::of(0.9);
        }
        shape -= step;
        if shape >= cap {
            return Ok(GammaFit {
                shape: cap,
                rate: cap / sample_mean,
                capped: true,
            });
        }
        if step.abs() <= shape * T::of(1e-13) {
            break;
        }
    }
    Ok(GammaFit {
        shape,
        rate: shape / sample_mean,
        capped: false,
    })
}
