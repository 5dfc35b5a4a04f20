//! Multi-class confusion-matrix EM: each annotator has a full K-by-K row
//! confusion matrix, the class prior is shared, and inference marginalizes
//! the discrete ground truth.

use rand::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dataset::{OrdinalScale, RatingsTable};
use crate::fit::{converged, posterior_mean_prediction, restart_seed, FitConfig, ModelFit};
use crate::Real;

#[derive(Debug, Clone, Error)]
pub enum DsError {
    #[error("posterior row for instance {0} vanished")]
    NumericalFailure(usize),
}

/// Class prior and per-annotator confusion tensor:
/// `phi[n][k][j] = p(rating = j+1 | truth = k+1)`.
#[derive(Debug, Clone, Serialize)]
pub struct DsParams<T> {
    pub pi: Vec<T>,
    pub phi: Vec<Vec<Vec<T>>>,
}

/// Per-instance class posterior `lambda[m][k] = q(z_m = k+1)`.
#[derive(Debug, Clone, Serialize)]
pub struct DsPosterior<T> {
    pub lambda: Vec<Vec<T>>,
}

/// Parameters plus the final posterior of a fitted model.
#[derive(Debug, Clone, Serialize)]
pub struct DsFitted<T> {
    pub params: DsParams<T>,
    pub posterior: DsPosterior<T>,
}

fn log_sum_exp<T: Real>(row: &[T]) -> T {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    if !max.is_finite() {
        return max;
    }
    let sum: T = row.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Per-instance unnormalized log posterior over the K classes.
fn log_posterior_rows<T: Real>(params: &DsParams<T>, table: &RatingsTable) -> Vec<Vec<T>> {
    let k_count = params.pi.len();
    (0..table.num_instances())
        .map(|m| {
            (0..k_count)
                .map(|k| {
                    let mut acc = params.pi[k].ln();
                    for &i in table.instance_entries(m) {
                        let e = &table.entries()[i];
                        acc += params.phi[e.annotator][k][e.level - 1].ln();
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

/// E-step: posterior over the true class per instance, computed in log space.
pub fn e_step<T: Real>(params: &DsParams<T>, table: &RatingsTable) -> Result<DsPosterior<T>, DsError> {
    let rows = log_posterior_rows(params, table);
    let lambda = rows
        .into_iter()
        .enumerate()
        .map(|(m, row)| {
            let norm = log_sum_exp(&row);
            if !norm.is_finite() {
                return Err(DsError::NumericalFailure(m));
            }
            Ok(row.into_iter().map(|v| (v - norm).exp()).collect())
        })
        .collect::<Result<_, _>>()?;
    Ok(DsPosterior { lambda })
}

/// M-step: prior by averaging the posterior; confusion rows by expected counts
/// with add-one smoothing (the posterior mean under a unit-concentration
/// symmetric Dirichlet), which keeps every row strictly positive.
pub fn m_step<T: Real>(posterior: &DsPosterior<T>, table: &RatingsTable) -> DsParams<T> {
    let k_count = table.num_levels();
    let m_count = table.num_instances();
    let n_count = table.num_annotators();

    let mut pi = vec![T::zero(); k_count];
    for row in &posterior.lambda {
        for (k, &l) in row.iter().enumerate() {
            pi[k] += l;
        }
    }
    let total = T::of_usize(m_count.max(1));
    for p in &mut pi {
        *p /= total;
    }

    let mut phi = vec![vec![vec![T::one(); k_count]; k_count]; n_count];
    for n in 0..n_count {
        for &i in table.annotator_entries(n) {
            let e = &table.entries()[i];
            for k in 0..k_count {
                phi[n][k][e.level - 1] += posterior.lambda[e.instance][k];
            }
        }
        for k in 0..k_count {
            let row_sum: T = phi[n][k].iter().copied().sum();
            for v in &mut phi[n][k] {
                *v /= row_sum;
            }
        }
    }
    DsParams { pi, phi }
}

/// Observed-data log likelihood with the true class marginalized out.
pub fn log_likelihood<T: Real>(params: &DsParams<T>, table: &RatingsTable) -> T {
    log_posterior_rows(params, table)
        .iter()
        .map(|row| log_sum_exp(row))
        .sum()
}

/// The objective the smoothed EM actually ascends: observed log likelihood
/// plus the log Dirichlet kernel matched to the add-one M-step. The raw
/// observed likelihood can dip when smoothing flattens a confusion row, so
/// traces, convergence and restart selection run on this.
pub fn penalized_log_likelihood<T: Real>(params: &DsParams<T>, table: &RatingsTable) -> T {
    let mut prior = T::zero();
    for per_annotator in &params.phi {
        for row in per_annotator {
            for &p in row {
                prior += p.ln();
            }
        }
    }
    log_likelihood(params, table) + prior
}

/// Posterior-mean prediction on the label-value scale.
pub fn predict<T: Real>(posterior: &DsPosterior<T>, scale: &OrdinalScale<T>) -> Vec<T> {
    posterior_mean_prediction(&posterior.lambda, scale)
}

/// Initial posterior: normalized empirical vote shares per instance, jittered.
fn init_posterior<T: Real>(table: &RatingsTable, rng: &mut StdRng) -> DsPosterior<T> {
    let k_count = table.num_levels();
    let lambda = (0..table.num_instances())
        .map(|m| {
            let idxs = table.instance_entries(m);
            let mut row: Vec<T> = vec![T::of(0.1); k_count];
            for &i in idxs {
                row[table.entries()[i].level - 1] += T::one();
            }
            for v in row.iter_mut() {
                *v += T::of(rng.gen_range(0.0..0.25));
            }
            let sum: T = row.iter().copied().sum();
            row.into_iter().map(|v| v / sum).collect()
        })
        .collect();
    DsPosterior { lambda }
}

/// EM with the standard restart protocol; traces, convergence and restart
/// selection run on the penalized (MAP) objective.
pub fn fit<T: Real>(
    table: &RatingsTable,
    scale: &OrdinalScale<T>,
    config: &FitConfig<T>,
) -> Result<ModelFit<T, DsFitted<T>>, DsError> {
    let mut best: Option<ModelFit<T, DsFitted<T>>> = None;
    for restart in 0..config.restarts {
        let mut rng = StdRng::seed_from_u64(restart_seed(config.seed, restart));
        let mut posterior = init_posterior(table, &mut rng);
        let mut params = m_step(&posterior, table);
        let mut trace = Vec::new();
        let mut prev = T::neg_infinity();
        let mut iterations = 0;
        for _ in 0..config.max_iters {
            iterations += 1;
            posterior = e_step(&params, table)?;
            params = m_step(&posterior, table);
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
                params: DsFitted { params, posterior },
            });
        }
    }
    Ok(best.expect("at least one restart"))
}
