//! Variational-Bayes mixture model for ordinal ratings.
//!
//! Each observed rating either reflects the instance's real-valued ground
//! truth — a latent Gaussian draw around it, thresholded into an ordinal bin —
//! or comes from a shared "spam" distribution independent of the truth. Every
//! annotator has a non-spam probability `epsilon_n` and a gamma-distributed
//! expertise `tau_n`; every category of instances has a gamma-distributed
//! inverse difficulty `delta_c`. Inference is coordinate-ascent variational
//! Bayes with type-II maximum likelihood updates for `epsilon` and the
//! expertise prior `(alpha, beta)`.

mod inference;

pub use inference::{e_step, elbo, elbo_parts, init_state, m_step, responsibility, OdmElboParts};

use rand::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dataset::{CategoryMap, OrdinalScale, RatingsTable};
use crate::fit::{converged, restart_seed, FitConfig};
use crate::Real;

/// Lower clamp for learned `epsilon` (and `1 - epsilon`), keeping both
/// mixture branches alive; the responsibility formula degenerates at the
/// boundary.
pub const EPSILON_CLAMP: f64 = 1e-4;

#[derive(Debug, Clone, Error)]
pub enum OdmError {
    #[error("non-finite update for rating by annotator {annotator} on instance {instance}")]
    NumericalFailure { annotator: usize, instance: usize },
    #[error("table has no ratings")]
    EmptyTable,
    #[error("invalid hyperparameters: {0}")]
    InvalidHypers(String),
    #[error("all restarts failed: {0:?}")]
    FitFailed(Vec<String>),
}

/// Model hyperparameters and variant switches.
///
/// `alpha/beta` and `epsilon` are learned during fitting; `mu`, `lambda`,
/// `phi`, `eta` and `pi` stay fixed (`phi`/`eta` pin the scale of the
/// expertise-difficulty product, which is otherwise only identified up to a
/// multiplicative constant).
#[derive(Debug, Clone, Serialize)]
pub struct OdmHyperParams<T> {
    /// Gamma prior (shape, rate) on annotator expertise.
    pub alpha: T,
    pub beta: T,
    /// Gamma prior (shape, rate) on category inverse difficulty.
    pub phi: T,
    pub eta: T,
    /// Gaussian prior (mean, precision) on ground truth.
    pub mu: T,
    pub lambda: T,
    /// Spam-component rating distribution.
    pub pi: Vec<T>,
    /// Per-annotator non-spam probability.
    pub epsilon: Vec<T>,
    pub scale: OrdinalScale<T>,
    /// When false, ratings are treated as directly observed real values
    /// `v_r` instead of thresholded latent Gaussians.
    pub use_ordinal_link: bool,
    /// When false, the spam component is removed (`y = 1` everywhere).
    pub use_spam_mixture: bool,
    /// Non-default responsibility variant: weigh the truth branch by the
    /// truncated-bin mass instead of the Gaussian kernel at the expected
    /// squared deviation.
    pub bin_mass_responsibility: bool,
}

impl<T: Real> OdmHyperParams<T> {
    /// Standard starting hyperparameters for a dataset with `num_annotators`
    /// annotators: uniform spam distribution, weak truth prior centered on
    /// the scale, mild initial belief (0.9) that annotators are not spammy.
    pub fn defaults(scale: OrdinalScale<T>, num_annotators: usize) -> Self {
        let k = scale.num_levels();
        Self {
            alpha: T::of(2.0),
            beta: T::of(2.0),
            phi: T::of(10.0),
            eta: T::of(5.0),
            mu: scale.mean_value(),
            lambda: T::of(0.1),
            pi: vec![T::one() / T::of_usize(k); k],
            epsilon: vec![T::of(0.9); num_annotators],
            scale,
            use_ordinal_link: true,
            use_spam_mixture: true,
            bin_mass_responsibility: false,
        }
    }

    pub fn validate(&self) -> Result<(), OdmError> {
        let pos = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("phi", self.phi),
            ("eta", self.eta),
            ("lambda", self.lambda),
        ];
        for (name, v) in pos {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(OdmError::InvalidHypers(format!("{name} must be positive, got {v}")));
            }
        }
        let pi_sum: T = self.pi.iter().copied().sum();
        if self.pi.len() != self.scale.num_levels()
            || self.pi.iter().any(|&p| !(p > T::zero()))
            || (pi_sum - T::one()).abs() > T::of(1e-9)
        {
            return Err(OdmError::InvalidHypers("pi must be a positive K-simplex".into()));
        }
        if self.epsilon.iter().any(|&e| !(T::zero()..=T::one()).contains(&e)) {
            return Err(OdmError::InvalidHypers("epsilon entries must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// All variational parameters: Gaussian `q(z_m)`, gamma `q(tau_n)` and
/// `q(delta_c)`, Bernoulli `q(y_nm)` and the truncated-Gaussian `q(x_nm | y=1)`
/// location/precision with cached moments.
#[derive(Debug, Clone, Serialize)]
pub struct OdmVariationalState<T> {
    pub mu_m: Vec<T>,
    pub lambda_m: Vec<T>,
    pub alpha_n: Vec<T>,
    pub beta_n: Vec<T>,
    pub phi_c: Vec<T>,
    pub eta_c: Vec<T>,
    /// Per-rating posterior probability of the truth branch.
    pub omega: Vec<T>,
    /// Per-rating truncated-Gaussian location (the current truth mean).
    pub nu: Vec<T>,
    /// Per-rating truncated-Gaussian precision (expertise times inverse difficulty).
    pub rho: Vec<T>,
    /// Cached first and second truncated moments and the bin log-mass.
    pub xbar: Vec<T>,
    pub x2bar: Vec<T>,
    pub log_mass: Vec<T>,
}

impl<T: Real> OdmVariationalState<T> {
    /// Posterior mean expertise per annotator.
    pub fn expertise(&self) -> Vec<T> {
        self.alpha_n.iter().zip(&self.beta_n).map(|(&a, &b)| a / b).collect()
    }

    /// Posterior mean inverse difficulty per category.
    pub fn inv_difficulty(&self) -> Vec<T> {
        self.phi_c.iter().zip(&self.eta_c).map(|(&p, &e)| p / e).collect()
    }
}

/// Result of fitting the model.
#[derive(Debug, Clone, Serialize)]
pub struct OdmFitResult<T> {
    pub z_hat: Vec<T>,
    pub state: OdmVariationalState<T>,
    pub hypers: OdmHyperParams<T>,
    pub elbo: T,
    pub elbo_trace: Vec<T>,
    pub iterations: usize,
    pub restarts_run: usize,
    /// `1 - epsilon_n`: the learned probability that an annotator is spamming.
    pub spamminess: Vec<T>,
    /// Posterior mean expertise per annotator.
    pub expertise: Vec<T>,
    /// Posterior mean inverse difficulty per category.
    pub inv_difficulty: Vec<T>,
}

/// Ground-truth estimates: the variational posterior means, unclamped.
pub fn predict<T: Real>(state: &OdmVariationalState<T>) -> Vec<T> {
    state.mu_m.clone()
}

/// Runs one specific restart of the fit. Restart `i` of [`fit`] is exactly
/// `fit_restart(..., i)`; restarts are independent, so callers may run them
/// concurrently and keep the highest final bound themselves.
pub fn fit_restart<T: Real>(
    table: &RatingsTable,
    cats: &CategoryMap,
    hypers: &OdmHyperParams<T>,
    config: &FitConfig<T>,
    restart: usize,
) -> Result<OdmFitResult<T>, OdmError> {
    if table.is_empty() {
        return Err(OdmError::EmptyTable);
    }
    hypers.validate()?;
    let mut rng = StdRng::seed_from_u64(restart_seed(config.seed, restart));
    run_restart(table, cats, hypers, config, &mut rng)
}

/// Fits the model with the standard restart protocol: independent seeded
/// initializations, alternating `e_step`/`m_step` sweeps tracked by the
/// evidence lower bound, stopping when the bound moves less than `config.tol`,
/// returning the restart with the highest final bound.
pub fn fit<T: Real>(
    table: &RatingsTable,
    cats: &CategoryMap,
    hypers: &OdmHyperParams<T>,
    config: &FitConfig<T>,
) -> Result<OdmFitResult<T>, OdmError> {
    if table.is_empty() {
        return Err(OdmError::EmptyTable);
    }
    hypers.validate()?;

    let mut best: Option<OdmFitResult<T>> = None;
    let mut failures = Vec::new();
    for restart in 0..config.restarts {
        let mut rng = StdRng::seed_from_u64(restart_seed(config.seed, restart));
        match run_restart(table, cats, hypers, config, &mut rng) {
            Ok(result) => {
                if best.as_ref().map_or(true, |b| result.elbo > b.elbo) {
                    best = Some(result);
                }
            }
            Err(err) => failures.push(format!("restart {restart}: {err}")),
        }
    }
    match best {
        Some(mut result) => {
            result.restarts_run = config.restarts;
            Ok(result)
        }
        None => Err(OdmError::FitFailed(failures)),
    }
}

fn run_restart<T: Real>(
    table: &RatingsTable,
    cats: &CategoryMap,
    hypers: &OdmHyperParams<T>,
    config: &FitConfig<T>,
    rng: &mut StdRng,
) -> Result<OdmFitResult<T>, OdmError> {
    let mut hypers = hypers.clone();
    let mut state = init_state(table, cats, &hypers, rng)?;
    let mut trace = Vec::new();
    let mut prev = T::neg_infinity();
    let mut iterations = 0;
    for _ in 0..config.max_iters {
        iterations += 1;
        e_step(&mut state, table, cats, &hypers)?;
        hypers = m_step(&state, table, &hypers);
        let bound = elbo(&state, table, cats, &hypers);
        if !bound.is_finite() {
            return Err(OdmError::NumericalFailure { annotator: 0, instance: 0 });
        }
        trace.push(bound);
        if converged(prev, bound, config.tol) {
            break;
        }
        prev = bound;
    }
    let bound = *trace.last().unwrap();
    let spamminess = hypers
        .epsilon
        .iter()
        .map(|&e| if hypers.use_spam_mixture { T::one() - e } else { T::zero() })
        .collect();
    Ok(OdmFitResult {
        z_hat: predict(&state),
        elbo: bound,
        elbo_trace: trace,
        iterations,
        restarts_run: 1,
        spamminess,
        expertise: state.expertise(),
        inv_difficulty: state.inv_difficulty(),
        state,
        hypers,
    })
}
