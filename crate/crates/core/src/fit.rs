//! The shared restart/convergence protocol and the common fit result type.

use serde::Serialize;

use crate::Real;

/// Restart and convergence settings shared by all iterative models.
///
/// The defaults are the evaluation protocol used throughout: 10 restarts with
/// different initializations, at most 1000 iterations each, stopping when the
/// absolute objective change drops below 0.1, and keeping the restart with the
/// highest final objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitConfig<T> {
    pub restarts: usize,
    pub max_iters: usize,
    pub tol: T,
    pub seed: u64,
}

impl<T: Real> Default for FitConfig<T> {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iters: 1000,
            tol: T::of(0.1),
            seed: 0,
        }
    }
}

impl<T: Real> FitConfig<T> {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }
}

/// Deterministic per-restart RNG seed (splitmix64 over the base seed).
pub fn restart_seed(seed: u64, restart: usize) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15_u64.wrapping_mul(restart as u64 + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Result of fitting one model: ground-truth estimates, the tracked objective
/// (log likelihood or evidence bound), its per-iteration trace for the
/// selected restart, and the model-specific parameters.
#[derive(Debug, Clone, Serialize)]
pub struct ModelFit<T, P> {
    pub z_hat: Vec<T>,
    pub objective: T,
    pub trace: Vec<T>,
    pub iterations: usize,
    pub restarts_run: usize,
    pub params: P,
}

/// True when the objective improved by less than `tol` in absolute value.
pub(crate) fn converged<T: Real>(prev: T, current: T, tol: T) -> bool {
    (current - prev).abs() < tol
}

/// Posterior-mean prediction from a row-stochastic class posterior.
pub(crate) fn posterior_mean_prediction<T: Real>(
    posterior: &[Vec<T>],
    scale: &crate::dataset::OrdinalScale<T>,
) -> Vec<T> {
    posterior
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .map(|(k, &p)| p * scale.value(k + 1))
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_protocol() {
        let c: FitConfig<f64> = FitConfig::default();
        assert_eq!(c.restarts, 10);
        assert_eq!(c.max_iters, 1000);
        assert_eq!(c.tol, 0.1);
    }

    #[test]
    fn restart_seeds_are_distinct_and_deterministic() {
        let seeds: Vec<u64> = (0..10).map(|i| restart_seed(42, i)).collect();
        let again: Vec<u64> = (0..10).map(|i| restart_seed(42, i)).collect();
        assert_eq!(seeds, again);
        let mut dedup = seeds.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(dedup.len(), seeds.len());
    }
}
