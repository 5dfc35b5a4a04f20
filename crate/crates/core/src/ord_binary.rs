//! Ordinal labels reduced to K-1 stacked binary indicators `1[level > k]`,
//! with per-annotator, per-threshold sensitivity and specificity and EM over
//! the K valid ordinal truths.

use rand::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dataset::{OrdinalScale, RatingsTable};
use crate::fit::{converged, posterior_mean_prediction, restart_seed, FitConfig, ModelFit};
use crate::Real;

#[derive(Debug, Clone, Error)]
pub enum ObError {
    #[error("code {0:?} is not monotone")]
    InvalidCode(Vec<bool>),
    #[error("posterior row for instance {0} vanished")]
    NumericalFailure(usize),
}

/// The K-1 binary indicators of an ordinal level: bit `k` is `1[level > k+1]`
/// in 0-based form. Valid codes are monotone nonincreasing (a block of ones
/// followed by zeros).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrankHallCode {
    pub bits: Vec<bool>,
}

/// Encodes a 1-based level on a K-level scale; the code has `level - 1` ones.
pub fn encode(level: usize, num_levels: usize) -> FrankHallCode {
    assert!(level >= 1 && level <= num_levels);
    FrankHallCode {
        bits: (1..num_levels).map(|k| level > k).collect(),
    }
}

/// Decodes a monotone code back to its level; non-monotone codes are invalid.
pub fn decode(code: &FrankHallCode) -> Result<usize, ObError> {
    let ones = code.bits.iter().take_while(|&&b| b).count();
    if code.bits[ones..].iter().any(|&b| b) {
        return Err(ObError::InvalidCode(code.bits.clone()));
    }
    Ok(ones + 1)
}

/// Class prior over the K ordinal truths plus sensitivity/specificity per
/// annotator and threshold: `sens[n][k] = p(r_bit_k = 1 | z_bit_k = 1)`,
/// `spec[n][k] = p(r_bit_k = 0 | z_bit_k = 0)`.
#[derive(Debug, Clone, Serialize)]
pub struct ObParams<T> {
    pub pi: Vec<T>,
    pub sens: Vec<Vec<T>>,
    pub spec: Vec<Vec<T>>,
}

/// Parameters plus the final posterior.
#[derive(Debug, Clone, Serialize)]
pub struct ObFitted<T> {
    pub params: ObParams<T>,
    pub posterior: Vec<Vec<T>>,
}

/// Likelihood of an arbitrary observed code (valid or not) under a true level.
pub fn code_likelihood<T: Real>(
    observed: &FrankHallCode,
    true_level: usize,
    params: &ObParams<T>,
    annotator: usize,
) -> T {
    let truth = encode(true_level, observed.bits.len() + 1);
    let mut p = T::one();
    for (k, (&r, &z)) in observed.bits.iter().zip(&truth.bits).enumerate() {
        let sens = params.sens[annotator][k];
        let spec = params.spec[annotator][k];
        p *= match (z, r) {
            (true, true) => sens,
            (true, false) => T::one() - sens,
            (false, false) => spec,
            (false, true) => T::one() - spec,
        };
    }
    p
}

/// Likelihood of an observed level under a true level (both 1-based).
pub fn rating_likelihood<T: Real>(
    observed_level: usize,
    true_level: usize,
    params: &ObParams<T>,
    annotator: usize,
) -> T {
    let k = params.sens[annotator].len() + 1;
    code_likelihood(&encode(observed_level, k), true_level, params, annotator)
}

/// E-step: posterior over the K valid ordinal truths (invalid binary
/// combinations carry zero prior mass), in log space.
pub fn e_step<T: Real>(
    params: &ObParams<T>,
    table: &RatingsTable,
) -> Result<Vec<Vec<T>>, ObError> {
    let k_count = params.pi.len();
    (0..table.num_instances())
        .map(|m| {
            let row: Vec<T> = (1..=k_count)
                .map(|k| {
                    let mut acc = params.pi[k - 1].ln();
                    for &i in table.instance_entries(m) {
                        let e = &table.entries()[i];
                        acc += rating_likelihood(e.level, k, params, e.annotator).ln();
                    }
                    acc
                })
                .collect();
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            if !max.is_finite() {
                return Err(ObError::NumericalFailure(m));
            }
            let sum: T = row.iter().map(|&v| (v - max).exp()).sum();
            let norm = max + sum.ln();
            Ok(row.into_iter().map(|v| (v - norm).exp()).collect())
        })
        .collect()
}

/// Marginal posterior of each truth bit: `gamma[m][k] = sum_j lambda[m][j] z_bit_k(j)`.
pub fn bit_marginals<T: Real>(posterior: &[Vec<T>]) -> Vec<Vec<T>> {
    let k_count = posterior.first().map_or(0, Vec::len);
    posterior
        .iter()
        .map(|row| {
            (1..k_count)
                .map(|k| row.iter().skip(k).copied().sum())
                .collect()
        })
        .collect()
}

/// M-step: prior by averaging; sensitivity/specificity by expected-count
/// ratios with add-one smoothing on numerator and denominator, which keeps
/// both rates inside (0, 1) even when a bit marginal vanishes.
pub fn m_step<T: Real>(posterior: &[Vec<T>], table: &RatingsTable) -> ObParams<T> {
    let k_count = table.num_levels();
    let m_count = table.num_instances();
    let n_count = table.num_annotators();
    let gamma = bit_marginals(posterior);

    let mut pi = vec![T::zero(); k_count];
    for row in posterior {
        for (k, &l) in row.iter().enumerate() {
            pi[k] += l;
        }
    }
    for p in &mut pi {
        *p /= T::of_usize(m_count.max(1));
    }

    let one = T::one();
    let two = T::of(2.0);
    let mut sens = vec![vec![T::of(0.5); k_count - 1]; n_count];
    let mut spec = vec![vec![T::of(0.5); k_count - 1]; n_count];
    for n in 0..n_count {
        for k in 0..k_count - 1 {
            let mut sens_num = T::zero();
            let mut sens_den = T::zero();
            let mut spec_num = T::zero();
            let mut spec_den = T::zero();
            for &i in table.annotator_entries(n) {
                let e = &table.entries()[i];
                let r_bit = e.level > k + 1;
                let g = gamma[e.instance][k];
                sens_den += g;
                spec_den += one - g;
                if r_bit {
                    sens_num += g;
                } else {
                    spec_num += one - g;
                }
            }
            sens[n][k] = (sens_num + one) / (sens_den + two);
            spec[n][k] = (spec_num + one) / (spec_den + two);
        }
    }
    ObParams { pi, sens, spec }
}

/// The objective the smoothed EM ascends: observed log likelihood plus the
/// log Beta kernel matched to the add-one rate updates. Traces, convergence
/// and restart selection run on this.
pub fn penalized_log_likelihood<T: Real>(params: &ObParams<T>, table: &RatingsTable) -> T {
    let mut prior = T::zero();
    for (sens_row, spec_row) in params.sens.iter().zip(&params.spec) {
        for (&s, &p) in sens_row.iter().zip(spec_row) {
            prior += s.ln() + (T::one() - s).ln() + p.ln() + (T::one() - p).ln();
        }
    }
    log_likelihood(params, table) + prior
}

/// Observed-data log likelihood over the K valid truths.
pub fn log_likelihood<T: Real>(params: &ObParams<T>, table: &RatingsTable) -> T {
    let k_count = params.pi.len();
    (0..table.num_instances())
        .map(|m| {
            let row: Vec<T> = (1..=k_count)
                .map(|k| {
                    let mut acc = params.pi[k - 1].ln();
                    for &i in table.instance_entries(m) {
                        let e = &table.entries()[i];
                        acc += rating_likelihood(e.level, k, params, e.annotator).ln();
                    }
                    acc
                })
                .collect();
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let sum: T = row.iter().map(|&v| (v - max).exp()).sum();
            max + sum.ln()
        })
        .sum()
}

/// Posterior-mean prediction on the label-value scale.
pub fn predict<T: Real>(posterior: &[Vec<T>], scale: &OrdinalScale<T>) -> Vec<T> {
    posterior_mean_prediction(posterior, scale)
}

/// EM with the standard restart protocol; sensitivities and specificities
/// initialize at 0.7 plus jitter. Traces, convergence and restart selection
/// run on the penalized (MAP) objective matching the smoothed updates.
pub fn fit<T: Real>(
    table: &RatingsTable,
    scale: &OrdinalScale<T>,
    config: &FitConfig<T>,
) -> Result<ModelFit<T, ObFitted<T>>, ObError> {
    let k_count = table.num_levels();
    let n_count = table.num_annotators();
    let mut best: Option<ModelFit<T, ObFitted<T>>> = None;
    for restart in 0..config.restarts {
        let mut rng = StdRng::seed_from_u64(restart_seed(config.seed, restart));
        let draw = |rng: &mut StdRng| T::of(0.7 + rng.gen_range(-0.15..0.15));
        let mut params = ObParams {
            pi: vec![T::one() / T::of_usize(k_count); k_count],
            sens: (0..n_count)
                .map(|_| (0..k_count - 1).map(|_| draw(&mut rng)).collect())
                .collect(),
            spec: (0..n_count)
                .map(|_| (0..k_count - 1).map(|_| draw(&mut rng)).collect())
                .collect(),
        };
        let mut posterior = e_step(&params, table)?;
        let mut trace = Vec::new();
        let mut prev = T::neg_infinity();
        let mut iterations = 0;
        for _ in 0..config.max_iters {
            iterations += 1;
            params = m_step(&posterior, table);
            posterior = e_step(&params, table)?;
            let ll = penalized_log_likelihood(&params, table);
            trace.push(ll);
            if converged(prev, ll, config.tol) {
                break;
            }
            prev = ll;
        }
        let objective = *trace.last().unwrap();
        if best.as_ref().map_or(true, |b| objective > b.objective) {
            best = Some(ModelFit {
                z_hat: predict(&posterior, scale),
                objective,
                trace,
                iterations,
                restarts_run: config.restarts,
                params: ObFitted { params, posterior },
            });
        }
    }
    Ok(best.expect("at least one restart"))
}
