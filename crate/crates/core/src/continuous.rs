//! Real-valued Gaussian noise model `r_nm ~ N(z_m, 1/tau_n)` fit by
//! alternating maximum likelihood over `z` and `tau`.
//!
//! Pure ML lets `tau_n` diverge whenever an annotator has zero residual, so
//! the precisions are capped and the residual sums ridged; the cap never binds
//! on well-posed data.

use serde::Serialize;
use thiserror::Error;

use crate::dataset::{OrdinalScale, RatingsTable};
use crate::fit::{converged, FitConfig, ModelFit};
use crate::Real;

/// Precision cap.
pub const TAU_CAP: f64 = 1e6;
/// Ridge added to residual sums before inverting.
pub const RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, Error)]
pub enum ContinuousError {
    #[error("instance {0:?} has no ratings")]
    NoRatings(String),
}

/// Fitted parameters: estimates, per-annotator precisions and the cap bookkeeping.
#[derive(Debug, Clone, Serialize)]
pub struct ContParams<T> {
    pub z: Vec<T>,
    pub tau: Vec<T>,
    pub tau_cap: T,
    /// Annotators whose precision hit the cap (degenerate zero-residual ML).
    pub capped: Vec<bool>,
}

/// The default configuration for this model runs a single start: the
/// initialization is deterministic (per-instance means), so extra restarts
/// reproduce the same fixed point.
pub fn default_config<T: Real>() -> FitConfig<T> {
    FitConfig {
        restarts: 1,
        ..FitConfig::default()
    }
}

fn log_likelihood<T: Real>(
    table: &RatingsTable,
    values: &[T],
    z: &[T],
    tau: &[T],
) -> T {
    let half = T::of(0.5);
    let ln_2pi = T::of((2.0 * std::f64::consts::PI).ln());
    let mut ll = T::zero();
    for n in 0..table.num_annotators() {
        let idxs = table.annotator_entries(n);
        if idxs.is_empty() {
            continue;
        }
        let mut ssr = T::of(RIDGE);
        for &i in idxs {
            let e = &table.entries()[i];
            let d = values[i] - z[e.instance];
            ssr += d * d;
        }
        ll += half * T::of_usize(idxs.len()) * (tau[n].ln() - ln_2pi) - half * tau[n] * ssr;
    }
    ll
}

/// Alternating maximum likelihood: weighted-mean updates for `z`, inverse
/// mean-squared-residual updates for `tau` (capped + ridged), until the
/// log-likelihood change falls below `config.tol`.
pub fn fit<T: Real>(
    table: &RatingsTable,
    scale: &OrdinalScale<T>,
    config: &FitConfig<T>,
) -> Result<ModelFit<T, ContParams<T>>, ContinuousError> {
    let m_count = table.num_instances();
    let n_count = table.num_annotators();
    let values: Vec<T> = table
        .entries()
        .iter()
        .map(|e| scale.value(e.level))
        .collect();

    // init: per-instance means; every instance must be rated
    let mut z: Vec<T> = (0..m_count)
        .map(|m| {
            table
                .instance_mean(m, scale)
                .ok_or_else(|| ContinuousError::NoRatings(table.instance_id(m).to_string()))
        })
        .collect::<Result<_, _>>()?;
    let mut tau: Vec<T> = vec![T::one(); n_count];
    let cap = T::of(TAU_CAP);

    let mut trace = Vec::new();
    let mut prev = T::neg_infinity();
    let mut iterations = 0;
    for _ in 0..config.max_iters {
        iterations += 1;
        // z step: precision-weighted means
        for m in 0..m_count {
            let mut num = T::zero();
            let mut den = T::zero();
            for &i in table.instance_entries(m) {
                let e = &table.entries()[i];
                num += tau[e.annotator] * values[i];
                den += tau[e.annotator];
            }
            z[m] = num / den;
        }
        // tau step: inverse ridged mean squared residual, capped
        for n in 0..n_count {
            let idxs = table.annotator_entries(n);
            if idxs.is_empty() {
                continue;
            }
            let mut ssr = T::of(RIDGE);
            for &i in idxs {
                let e = &table.entries()[i];
                let d = values[i] - z[e.instance];
                ssr += d * d;
            }
            tau[n] = (T::of_usize(idxs.len()) / ssr).min(cap);
        }
        let ll = log_likelihood(table, &values, &z, &tau);
        trace.push(ll);
        if converged(prev, ll, config.tol) {
            break;
        }
        prev = ll;
    }

    let capped: Vec<bool> = tau.iter().map(|&t| t >= cap).collect();
    let objective = *trace.last().unwrap();
    Ok(ModelFit {
        z_hat: z.clone(),
        objective,
        trace,
        iterations,
        restarts_run: 1,
        params: ContParams { z, tau, tau_cap: cap, capped },
    })
}

/// The ground-truth estimates of a fitted parameter set.
pub fn predict<T: Real>(params: &ContParams<T>) -> Vec<T> {
    params.z.clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::RatingEntry;
    use rand::prelude::*;

    fn table_of(ratings: &[&[(usize, usize)]]) -> RatingsTable {
        // per instance: list of (annotator, level)
        let mut entries = Vec::new();
        let mut max_ann = 0;
        for (m, list) in ratings.iter().enumerate() {
            for &(n, level) in *list {
                entries.push(RatingEntry { instance: m, annotator: n, level });
                max_ann = max_ann.max(n + 1);
            }
        }
        RatingsTable::from_dense_entries(ratings.len(), max_ann, 5, entries).unwrap()
    }

    #[test]
    fn first_z_update_is_instance_mean_under_equal_tau() {
        let scale: OrdinalScale<f64> = OrdinalScale::uniform(5);
        let t = table_of(&[&[(0, 1), (1, 2), (2, 3)], &[(0, 4), (1, 5)]]);
        let config = FitConfig { max_iters: 1, ..default_config() };
        let fit = fit(&t, &scale, &config).unwrap();
        assert!((fit.z_hat[0] - 2.0).abs() < 1e-12);
        assert!((fit.z_hat[1] - 4.5).abs() < 1e-12);
    }

    #[test]
    fn zero_residual_annotator_hits_cap() {
        let scale: OrdinalScale<f64> = OrdinalScale::uniform(5);
        // single annotator, single rating per instance: z = value exactly
        let t = table_of(&[&[(0, 2)], &[(0, 4)]]);
        let fit = fit(&t, &scale, &default_config()).unwrap();
        assert_eq!(fit.z_hat, vec![2.0, 4.0]);
        assert_eq!(fit.params.tau[0], TAU_CAP);
        assert!(fit.params.capped[0]);
    }

    #[test]
    fn log_likelihood_is_nondecreasing() {
        let scale: OrdinalScale<f64> = OrdinalScale::uniform(5);
        let mut rng = StdRng::seed_from_u64(3);
        let mut entries = Vec::new();
        for m in 0..40 {
            for n in 0..6 {
                if rng.gen::<f64>() < 0.8 {
                    entries.push(RatingEntry {
                        instance: m,
                        annotator: n,
                        level: rng.gen_range(1..=5),
                    });
                }
            }
        }
        // make sure no instance is empty
        for m in 0..40 {
            if !entries.iter().any(|e| e.instance == m) {
                entries.push(RatingEntry { instance: m, annotator: 0, level: 3 });
            }
        }
        let t = RatingsTable::from_dense_entries(40, 6, 5, entries).unwrap();
        let config = FitConfig { tol: 1e-12, max_iters: 200, ..default_config() };
        let fit = fit(&t, &scale, &config).unwrap();
        for w in fit.trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * (1.0 + w[0].abs()), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn recovers_annotator_precision_ordering() {
        let scale: OrdinalScale<f64> = OrdinalScale::uniform(5);
        let mut rng = StdRng::seed_from_u64(11);
        let n_ann = 10;
        let m_inst = 100;
        let true_tau: Vec<f64> = (0..n_ann).map(|i| 0.25 * 1.6_f64.powi(i as i32)).collect();
        let mut entries = Vec::new();
        for m in 0..m_inst {
            let z = rng.gen_range(1.0..5.0);
            for (n, &tau) in true_tau.iter().enumerate() {
                let x: f64 = z + rng.sample::<f64, _>(rand_distr::StandardNormal) / tau.sqrt();
                let level = scale.level_of_clamped(x);
                entries.push(RatingEntry { instance: m, annotator: n, level });
            }
        }
        let t = RatingsTable::from_dense_entries(m_inst, n_ann, 5, entries).unwrap();
        let config = FitConfig { tol: 1e-9, max_iters: 500, ..default_config() };
        let got = fit(&t, &scale, &config).unwrap();

        // Spearman rank correlation between estimated and true precisions
        let rank = |v: &[f64]| -> Vec<f64> {
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
            let mut r = vec![0.0; v.len()];
            for (rank, &i) in idx.iter().enumerate() {
                r[i] = rank as f64;
            }
            r
        };
        let ra = rank(&true_tau);
        let rb = rank(&got.params.tau);
        let n = ra.len() as f64;
        let mean = (n - 1.0) / 2.0;
        let cov: f64 = ra.iter().zip(&rb).map(|(a, b)| (a - mean) * (b - mean)).sum();
        let var: f64 = ra.iter().map(|a| (a - mean) * (a - mean)).sum();
        let spearman = cov / var;
        assert!(spearman >= 0.8, "spearman {spearman}");
    }

    #[test]
    fn empty_instance_is_an_error() {
        let scale: OrdinalScale<f64> = OrdinalScale::uniform(5);
        let entries = vec![RatingEntry { instance: 0, annotator: 0, level: 2 }];
        let t = RatingsTable::from_dense_entries(2, 1, 5, entries).unwrap();
        assert!(matches!(
            fit(&t, &scale, &default_config()),
            Err(ContinuousError::NoRatings(_))
        ));
    }

    #[test]
    fn deterministic_and_predict_is_identity() {
        let scale: OrdinalScale<f64> = OrdinalScale::uniform(5);
        let t = table_of(&[&[(0, 1), (1, 3)], &[(0, 5), (1, 4)]]);
        let a = fit(&t, &scale, &default_config()).unwrap();
        let b = fit(&t, &scale, &default_config()).unwrap();
        assert_eq!(a.z_hat, b.z_hat);
        assert_eq!(a.trace, b.trace);
        assert_eq!(predict(&a.params), a.z_hat);
    }
}
