//! First and second moments (and log mass) of a Gaussian truncated to an interval.

use serde::Serialize;

use super::special::{erf, erfcx, normal_pdf};
use super::NumericsError;
use crate::Real;

/// Moments of `N(mu, var)` restricted to `[l, u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncatedNormalMoments<T> {
    /// E[x] under the truncated density.
    pub mean: T,
    /// E[x^2] under the truncated density.
    pub second_moment: T,
    /// Log of the Gaussian probability mass on the interval.
    pub log_mass: T,
}

/// Standardized moments for `0 <= a < b` (interval entirely in the right tail).
///
/// Works through `erfcx` so the common `exp(-a^2/2)` factor cancels out of the
/// moment ratios; only `log_mass` carries it, in log space.
fn tail_moments<T: Real>(a: T, b: T) -> Option<(T, T, T)> {
    let sqrt2 = T::of(std::f64::consts::SQRT_2);
    let half = T::of(0.5);
    let u1 = erfcx(a / sqrt2);
    let u2 = erfcx(b / sqrt2);
    // d = (b^2 - a^2)/2, kept in product form to avoid cancellation
    let d = (b - a) * (b + a) * half;
    let scale = (-d).exp();
    let denom = u1 - scale * u2;
    if !(denom > T::zero()) || !denom.is_finite() {
        return None;
    }
    let sqrt_2_over_pi = T::of(0.7978845608028654);
    let m1 = sqrt_2_over_pi * (T::one() - scale) / denom;
    let m2 = T::one() + sqrt_2_over_pi * (a - b * scale) / denom;
    let log_mass = -a * a * half + (denom * half).ln();
    Some((m1, m2, log_mass))
}

/// Standardized moments for `a < 0 < b` (interval straddles the mean).
fn central_moments<T: Real>(a: T, b: T) -> Option<(T, T, T)> {
    let sqrt2 = T::of(std::f64::consts::SQRT_2);
    let half = T::of(0.5);
    // both erf terms are nonnegative here, so the sum has no cancellation
    let mass = half * (erf(b / sqrt2) + erf(-a / sqrt2));
    if !(mass > T::zero()) || !mass.is_finite() {
        return None;
    }
    let pa = normal_pdf(a);
    let pb = normal_pdf(b);
    let m1 = (pa - pb) / mass;
    let m2 = T::one() + (a * pa - b * pb) / mass;
    let log_mass = if mass < T::of(0.9) {
        mass.ln()
    } else {
        // wide interval: ln(1 - both tails) via ln_1p for accuracy near zero
        let tails = half * (erfcx(-a / sqrt2) * (-a * a * half).exp() + erfcx(b / sqrt2) * (-b * b * half).exp());
        (-tails).ln_1p()
    };
    Some((m1, m2, log_mass))
}

/// Moments of the Gaussian `N(mu, var)` truncated to `[l, u)`.
///
/// Stable for intervals arbitrarily far into the tails: both moment ratios are
/// formed from scaled complementary error functions, and the mass is reported
/// in log space, so the result stays meaningful long after the raw interval
/// probability underflows.
pub fn truncated_normal_moments<T: Real>(
    mu: T,
    var: T,
    l: T,
    u: T,
) -> Result<TruncatedNormalMoments<T>, NumericsError> {
    if !(var > T::zero()) || !var.is_finite() {
        return Err(NumericsError::InvalidVariance(var.as_f64()));
    }
    if !(l < u) {
        return Err(NumericsError::InvalidInterval(l.as_f64(), u.as_f64()));
    }
    let sigma = var.sqrt();
    let a = (l - mu) / sigma;
    let b = (u - mu) / sigma;

    let (m1, m2, log_mass) = if a >= T::zero() {
        tail_moments(a, b)
    } else if b <= T::zero() {
        // reflect into the right tail
        tail_moments(-b, -a).map(|(m1, m2, lm)| (-m1, m2, lm))
    } else {
        central_moments(a, b)
    }
    .ok_or(NumericsError::DegenerateMass)?;

    let mut mean = mu + sigma * m1;
    let mut second = mu * mu + T::of(2.0) * mu * sigma * m1 + var * m2;
    if !mean.is_finite() || !second.is_finite() || !log_mass.is_finite() {
        return Err(NumericsError::DegenerateMass);
    }
    // roundoff guards: mean inside the interval, variance nonnegative
    mean = mean.max(l).min(u);
    if second < mean * mean {
        second = mean * mean;
    }
    Ok(TruncatedNormalMoments {
        mean,
        second_moment: second,
        log_mass: log_mass.min(T::zero()),
    })
}
