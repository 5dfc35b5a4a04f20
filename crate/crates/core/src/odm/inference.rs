//! Coordinate-ascent updates and the evidence lower bound.
//!
//! One `e_step` sweep updates, in order: the truth posteriors `q(z_m)`, the
//! expertise posteriors `q(tau_n)`, the inverse difficulty posteriors
//! `q(delta_c)`, and finally the per-rating joint `q(x, y)` (truncated
//! moments, then branch responsibilities). Every phase uses the freshest
//! values from the phases before it, which makes each update exact coordinate
//! ascent on the bound given the rest. Running `q(z)` before `q(y)` matters
//! at the start: with `q(z)` still at the diffuse prior, the responsibility
//! formula sees an inflated `E[(x - z)^2]` and would write off every rating
//! as spam on the first sweep.

use rand::prelude::*;
use rand_distr::StandardNormal;

use super::{OdmError, OdmHyperParams, OdmVariationalState, EPSILON_CLAMP};
use crate::dataset::{CategoryMap, RatingsTable};
use crate::numerics::special::{digamma, ln_gamma};
use crate::numerics::{fit_gamma_ml, truncated_normal_moments, NumericsError};
use crate::Real;

const LN_2PI: f64 = 1.8378770664093453;

/// Initializes the variational state: truth means at the per-instance rating
/// averages plus Gaussian jitter (std 0.25), every other posterior at its
/// prior, responsibilities at the prior non-spam probabilities, and one
/// moment pass over the ratings.
pub fn init_state<T: Real>(
    table: &RatingsTable,
    cats: &CategoryMap,
    hypers: &OdmHyperParams<T>,
    rng: &mut StdRng,
) -> Result<OdmVariationalState<T>, OdmError> {
    if table.is_empty() {
        return Err(OdmError::EmptyTable);
    }
    let m_count = table.num_instances();
    let n_count = table.num_annotators();
    let c_count = cats.num_categories();
    let scale = &hypers.scale;

    let mu_m: Vec<T> = (0..m_count)
        .map(|m| match table.instance_mean(m, scale) {
            Some(mean) => mean + T::of(0.25 * rng.sample::<f64, _>(StandardNormal)),
            None => hypers.mu,
        })
        .collect();
    let omega = table
        .entries()
        .iter()
        .map(|e| {
            if hypers.use_spam_mixture {
                hypers.epsilon[e.annotator]
            } else {
                T::one()
            }
        })
        .collect();

    let len = table.len();
    let mut state = OdmVariationalState {
        mu_m,
        lambda_m: vec![hypers.lambda; m_count],
        alpha_n: vec![hypers.alpha; n_count],
        beta_n: vec![hypers.beta; n_count],
        phi_c: vec![hypers.phi; c_count],
        eta_c: vec![hypers.eta; c_count],
        omega,
        nu: vec![T::zero(); len],
        rho: vec![T::one(); len],
        xbar: vec![T::zero(); len],
        x2bar: vec![T::zero(); len],
        log_mass: vec![T::zero(); len],
    };
    refresh_rating_moments(&mut state, table, cats, hypers)?;
    Ok(state)
}

/// Recomputes `nu`, `rho` and the truncated-Gaussian moments of every rating
/// from the current `q(z)`, `q(tau)`, `q(delta)`.
pub(crate) fn refresh_rating_moments<T: Real>(
    state: &mut OdmVariationalState<T>,
    table: &RatingsTable,
    cats: &CategoryMap,
    hypers: &OdmHyperParams<T>,
) -> Result<(), OdmError> {
    let scale = &hypers.scale;
    let half = T::of(0.5);
    for (i, e) in table.entries().iter().enumerate() {
        let c = cats.of_instance(e.instance);
        let nu = state.mu_m[e.instance];
        let rho = (state.alpha_n[e.annotator] / state.beta_n[e.annotator])
            * (state.phi_c[c] / state.eta_c[c]);
        if !rho.is_finite() || !(rho > T::zero()) {
            return Err(OdmError::NumericalFailure {
                annotator: e.annotator,
                instance: e.instance,
            });
        }
        state.nu[i] = nu;
        state.rho[i] = rho;
        if hypers.use_ordinal_link {
            let (lo, hi) = scale.bin(e.level);
            match truncated_normal_moments(nu, T::one() / rho, lo, hi) {
                Ok(m) => {
                    state.xbar[i] = m.mean;
                    state.x2bar[i] = m.second_moment;
                    state.log_mass[i] = m.log_mass;
                }
                Err(NumericsError::DegenerateMass) => {
                    // bin so far out that the mass collapses: fall back to a
                    // uniform-on-bin moment surrogate (transient early-sweep case)
                    let mid = (lo + hi) * half;
                    let width = hi - lo;
                    state.xbar[i] = mid;
                    state.x2bar[i] = mid * mid + width * width / T::of(12.0);
                    state.log_mass[i] =
                        width.ln() + half * (rho.ln() - T::of(LN_2PI)) - rho * (mid - nu) * (mid - nu) * half;
                }
                Err(_) => {
                    return Err(OdmError::NumericalFailure {
                        annotator: e.annotator,
                        instance: e.instance,
                    })
                }
            }
        } else {
            // ordinal link ablated: the rating is the real observation itself
            let v = scale.value(e.level);
            state.xbar[i] = v;
            state.x2bar[i] = v * v;
            state.log_mass[i] = T::zero();
        }
    }
    Ok(())
}

/// Branch responsibility from the two unnormalized log masses. Equals
/// `epsilon` when both branch densities agree; clamps to {0, 1} when
/// `epsilon` sits exactly on the boundary.
pub fn responsibility<T: Real>(epsilon: T, log_truth_density: T, log_spam_density: T) -> T {
    if epsilon >= T::one() {
        return T::one();
    }
    if epsilon <= T::zero() {
        return T::zero();
    }
    let gap = (epsilon.ln() + log_truth_density) - ((T::one() - epsilon).ln() + log_spam_density);
    if gap >= T::zero() {
        T::one() / (T::one() + (-gap).exp())
    } else {
        let e = gap.exp();
        e / (T::one() + e)
    }
}

/// `E_q[(x_nm - z_m)^2]` from the cached moments and the current `q(z_m)`.
fn expected_sq_dev<T: Real>(state: &OdmVariationalState<T>, i: usize, m: usize) -> T {
    let mu = state.mu_m[m];
    let z2 = mu * mu + T::one() / state.lambda_m[m];
    state.x2bar[i] - T::of(2.0) * state.xbar[i] * mu + z2
}

fn update_responsibilities<T: Real>(
    state: &mut OdmVariationalState<T>,
    table: &RatingsTable,
    cats: &CategoryMap,
    hypers: &OdmHyperParams<T>,
) {
    if !hypers.use_spam_mixture {
        for w in state.omega.iter_mut() {
            *w = T::one();
        }
        return;
    }
    let half = T::of(0.5);
    for (i, e) in table.entries().iter().enumerate() {
        let rho = state.rho[i];
        let log_truth = if hypers.bin_mass_responsibility && hypers.use_ordinal_link {
            // exact coordinate-ascent variant: expected log-densities plus the
            // truncated-bin mass
            let c = cats.of_instance(e.instance);
            let psi_tau = digamma(state.alpha_n[e.annotator]) - state.beta_n[e.annotator].ln();
            let psi_delta = digamma(state.phi_c[c]) - state.eta_c[c].ln();
            half * (psi_tau + psi_delta - rho.ln()) - rho / (T::of(2.0) * state.lambda_m[e.instance])
                + state.log_mass[i]
        } else {
            // the default: Gaussian kernel evaluated at the expected squared deviation
            half * (rho.ln() - T::of(LN_2PI)) - half * rho * expected_sq_dev(state, i, e.instance)
        };
        let log_spam = hypers.pi[e.level - 1].ln();
        state.omega[i] = responsibility(hypers.epsilon[e.annotator], log_truth, log_spam);
    }
}

/// One full coordinate-ascent sweep: `q(z)`, `q(tau)`, `q(delta)`, then the
/// per-rating joint `q(x, y)`.
pub fn e_step<T: Real>(
    state: &mut OdmVariationalState<T>,
    table: &RatingsTable,
    cats: &CategoryMap,
    hypers: &OdmHyperParams<T>,
) -> Result<(), OdmError> {
    let half = T::of(0.5);

    // phase 1: q(z_m), from the current moments and responsibilities
    for m in 0..table.num_instances() {
        let c = cats.of_instance(m);
        let delta_bar = state.phi_c[c] / state.eta_c[c];
        let mut weight = T::zero();
        let mut weighted_x = T::zero();
        for &i in table.instance_entries(m) {
            let e = &table.entries()[i];
            let tau_bar = state.alpha_n[e.annotator] / state.beta_n[e.annotator];
            weight += state.omega[i] * tau_bar;
            weighted_x += state.omega[i] * tau_bar * state.xbar[i];
        }
        state.lambda_m[m] = hypers.lambda + delta_bar * weight;
        state.mu_m[m] =
            (hypers.mu * hypers.lambda + delta_bar * weighted_x) / state.lambda_m[m];
        if !state.mu_m[m].is_finite() || !(state.lambda_m[m] > T::zero()) {
            return Err(OdmError::NumericalFailure { annotator: 0, instance: m });
        }
    }

    // phase 2: q(tau_n), using the updated q(z)
    for n in 0..table.num_annotators() {
        let mut count = T::zero();
        let mut dev = T::zero();
        for &i in table.annotator_entries(n) {
            let e = &table.entries()[i];
            let c = cats.of_instance(e.instance);
            let delta_bar = state.phi_c[c] / state.eta_c[c];
            count += state.omega[i];
            dev += delta_bar * state.omega[i] * expected_sq_dev(state, i, e.instance);
        }
        state.alpha_n[n] = hypers.alpha + half * count;
        state.beta_n[n] = hypers.beta + half * dev;
        if !(state.beta_n[n] > T::zero()) || !state.beta_n[n].is_finite() {
            return Err(OdmError::NumericalFailure { annotator: n, instance: 0 });
        }
    }

    // phase 3: q(delta_c), using the updated q(z) and q(tau)
    for c in 0..cats.num_categories() {
        let mut count = T::zero();
        let mut dev = T::zero();
        for &i in cats.category_entries(c) {
            let e = &table.entries()[i];
            let tau_bar = state.alpha_n[e.annotator] / state.beta_n[e.annotator];
            count += state.omega[i];
            dev += tau_bar * state.omega[i] * expected_sq_dev(state, i, e.instance);
        }
        state.phi_c[c] = hypers.phi + half * count;
        state.eta_c[c] = hypers.eta + half * dev;
        if !(state.eta_c[c] > T::zero()) || !state.eta_c[c].is_finite() {
            return Err(OdmError::NumericalFailure { annotator: 0, instance: 0 });
        }
    }

    // phase 4: per-rating joint q(x, y)
    refresh_rating_moments(state, table, cats, hypers)?;
    update_responsibilities(state, table, cats, hypers);
    Ok(())
}

/// Type-II maximum-likelihood hyperparameter updates: `epsilon_n` is the mean
/// responsibility over the annotator's ratings (clamped away from {0, 1});
/// `(alpha, beta)` refit the gamma expertise prior to the posterior-expected
/// sufficient statistics. `mu`, `lambda`, `phi`, `eta` and `pi` are fixed.
pub fn m_step<T: Real>(
    state: &OdmVariationalState<T>,
    table: &RatingsTable,
    hypers: &OdmHyperParams<T>,
) -> OdmHyperParams<T> {
    let mut out = hypers.clone();
    if hypers.use_spam_mixture {
        let lo = T::of(EPSILON_CLAMP);
        let hi = T::one() - lo;
        for n in 0..table.num_annotators() {
            let idxs = table.annotator_entries(n);
            if idxs.is_empty() {
                continue;
            }
            let mean: T = idxs.iter().map(|&i| state.omega[i]).sum::<T>() / T::of_usize(idxs.len());
            out.epsilon[n] = mean.max(lo).min(hi);
        }
    }

    let n_count = table.num_annotators();
    if n_count > 0 {
        let count = T::of_usize(n_count);
        let mean: T = state
            .alpha_n
            .iter()
            .zip(&state.beta_n)
            .map(|(&a, &b)| a / b)
            .sum::<T>()
            / count;
        let log_mean: T = state
            .alpha_n
            .iter()
            .zip(&state.beta_n)
            .map(|(&a, &b)| digamma(a) - b.ln())
            .sum::<T>()
            / count;
        if let Ok(fit) = fit_gamma_ml(mean, log_mean) {
            out.alpha = fit.shape;
            out.beta = fit.rate;
        }
    }
    out
}

/// The additive pieces of the bound, split for diagnostics and testing.
#[derive(Debug, Clone, Copy)]
pub struct OdmElboParts<T> {
    /// Expected rating log-likelihood terms plus the `(x, y)` entropy — the
    /// data-dependent part.
    pub rating: T,
    /// Gaussian truth prior cross-entropy plus `q(z)` entropy.
    pub z: T,
    /// Gamma expertise prior cross-entropy plus `q(tau)` entropy.
    pub tau: T,
    /// Gamma difficulty prior cross-entropy plus `q(delta)` entropy.
    pub delta: T,
}

impl<T: Real> OdmElboParts<T> {
    pub fn total(&self) -> T {
        self.rating + self.z + self.tau + self.delta
    }
}

/// The evidence lower bound `E_q[ln p] + H[q]` for the current state and
/// hyperparameters.
pub fn elbo<T: Real>(
    state: &OdmVariationalState<T>,
    table: &RatingsTable,
    cats: &CategoryMap,
    hypers: &OdmHyperParams<T>,
) -> T {
    elbo_parts(state, table, cats, hypers).total()
}

/// `E_q[ln Gamma(x | shape0, rate0)] + H[Gamma(shape, rate)]`.
fn gamma_term<T: Real>(shape0: T, rate0: T, shape: T, rate: T) -> T {
    let mean = shape / rate;
    let mean_log = digamma(shape) - rate.ln();
    let cross = shape0 * rate0.ln() - ln_gamma(shape0) + (shape0 - T::one()) * mean_log - rate0 * mean;
    let entropy = shape - rate.ln() + ln_gamma(shape) + (T::one() - shape) * digamma(shape);
    cross + entropy
}

/// Bound components; `rating` carries every term that depends on the data.
pub fn elbo_parts<T: Real>(
    state: &OdmVariationalState<T>,
    table: &RatingsTable,
    cats: &CategoryMap,
    hypers: &OdmHyperParams<T>,
) -> OdmElboParts<T> {
    let half = T::of(0.5);
    let one = T::one();
    let ln_2pi = T::of(LN_2PI);

    let mut rating = T::zero();
    for (i, e) in table.entries().iter().enumerate() {
        let w = state.omega[i];
        let c = cats.of_instance(e.instance);
        if w > T::zero() {
            let psi_tau = digamma(state.alpha_n[e.annotator]) - state.beta_n[e.annotator].ln();
            let psi_delta = digamma(state.phi_c[c]) - state.eta_c[c].ln();
            let tau_delta = (state.alpha_n[e.annotator] / state.beta_n[e.annotator])
                * (state.phi_c[c] / state.eta_c[c]);
            let ln_eps = if hypers.use_spam_mixture {
                hypers.epsilon[e.annotator].ln()
            } else {
                T::zero()
            };
            // E_q[ln N(x | z, (tau delta)^-1)] under all four factors
            let mut branch = ln_eps + half * (psi_tau + psi_delta - ln_2pi)
                - half * tau_delta * expected_sq_dev(state, i, e.instance);
            if hypers.use_ordinal_link {
                // entropy of the truncated Gaussian q(x | y = 1)
                let rho = state.rho[i];
                let around_nu =
                    state.x2bar[i] - T::of(2.0) * state.xbar[i] * state.nu[i] + state.nu[i] * state.nu[i];
                branch += half * (ln_2pi - rho.ln()) + half * rho * around_nu + state.log_mass[i];
            }
            rating += w * branch;
        }
        if hypers.use_spam_mixture {
            if w < one {
                let spam = (one - hypers.epsilon[e.annotator]).ln() + hypers.pi[e.level - 1].ln();
                rating += (one - w) * spam;
            }
            // Bernoulli entropy with 0 ln 0 = 0
            let mut entropy = T::zero();
            if w > T::zero() {
                entropy -= w * w.ln();
            }
            if w < one {
                entropy -= (one - w) * (one - w).ln();
            }
            rating += entropy;
        }
    }

    let mut z = T::zero();
    for m in 0..table.num_instances() {
        let d = state.mu_m[m] - hypers.mu;
        z += half
            * (hypers.lambda.ln() - state.lambda_m[m].ln() + one
                - hypers.lambda * (d * d + one / state.lambda_m[m]));
    }

    let mut tau = T::zero();
    for n in 0..table.num_annotators() {
        tau += gamma_term(hypers.alpha, hypers.beta, state.alpha_n[n], state.beta_n[n]);
    }
    let mut delta = T::zero();
    for c in 0..cats.num_categories() {
        delta += gamma_term(hypers.phi, hypers.eta, state.phi_c[c], state.eta_c[c]);
    }

    OdmElboParts { rating, z, tau, delta }
}
