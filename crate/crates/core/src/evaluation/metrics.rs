//! MSE, Pearson correlation and NDCG over the covered instances.

use std::collections::BTreeMap;

use super::EvalError;
use crate::dataset::{CategoryMap, GroundTruth};
use crate::Real;

fn covered_pairs<T: Real>(
    truth: &GroundTruth<T>,
    z_hat: &[T],
) -> Result<Vec<(usize, T, T)>, EvalError> {
    if z_hat.len() != truth.num_instances() {
        return Err(EvalError::LengthMismatch {
            expected: truth.num_instances(),
            got: z_hat.len(),
        });
    }
    Ok(truth.covered().map(|(m, z)| (m, z, z_hat[m])).collect())
}

/// Mean squared error over covered instances.
pub fn mse<T: Real>(truth: &GroundTruth<T>, z_hat: &[T]) -> Result<T, EvalError> {
    let pairs = covered_pairs(truth, z_hat)?;
    if pairs.is_empty() {
        return Err(EvalError::TooFewCovered { needed: 1, got: 0 });
    }
    let sum: T = pairs.iter().map(|&(_, z, zh)| (z - zh) * (z - zh)).sum();
    Ok(sum / T::of_usize(pairs.len()))
}

/// Pearson correlation coefficient over covered instances.
pub fn pearson<T: Real>(truth: &GroundTruth<T>, z_hat: &[T]) -> Result<T, EvalError> {
    let pairs = covered_pairs(truth, z_hat)?;
    let n = pairs.len();
    if n < 2 {
        return Err(EvalError::TooFewCovered { needed: 2, got: n });
    }
    let count = T::of_usize(n);
    let mean_z = pairs.iter().map(|&(_, z, _)| z).sum::<T>() / count;
    let mean_h = pairs.iter().map(|&(_, _, h)| h).sum::<T>() / count;
    let mut cov = T::zero();
    let mut var_z = T::zero();
    let mut var_h = T::zero();
    for &(_, z, h) in &pairs {
        cov += (z - mean_z) * (h - mean_h);
        var_z += (z - mean_z) * (z - mean_z);
        var_h += (h - mean_h) * (h - mean_h);
    }
    if var_z <= T::zero() {
        return Err(EvalError::UndefinedCorrelation("ground truth"));
    }
    if var_h <= T::zero() {
        return Err(EvalError::UndefinedCorrelation("estimates"));
    }
    Ok(cov / (var_z * var_h).sqrt())
}

/// Mean NDCG and the per-query values.
#[derive(Debug, Clone)]
pub struct NdcgReport<T> {
    pub mean: T,
    pub per_query: BTreeMap<usize, T>,
}

/// Full-depth NDCG with exponential gain `2^rel - 1` and `log2(i + 1)`
/// position discount. Instances are ranked per query by estimate, descending,
/// ties broken by instance index; queries with fewer than two covered
/// instances are skipped. A query whose ideal DCG is zero scores 1.
pub fn ndcg<T: Real>(
    truth: &GroundTruth<T>,
    z_hat: &[T],
    queries: &CategoryMap,
) -> Result<NdcgReport<T>, EvalError> {
    if z_hat.len() != truth.num_instances() {
        return Err(EvalError::LengthMismatch {
            expected: truth.num_instances(),
            got: z_hat.len(),
        });
    }
    let gain = |rel: T| T::of(2.0).powf(rel) - T::one();
    let discount = |i: usize| T::of((i as f64 + 1.0).log2());

    let mut per_query = BTreeMap::new();
    for (q, instances) in queries.instances_by_category().iter().enumerate() {
        let mut covered: Vec<usize> = instances
            .iter()
            .copied()
            .filter(|&m| truth.value(m).is_some())
            .collect();
        if covered.len() < 2 {
            continue;
        }
        // predicted order: estimate descending, instance index ascending on ties
        covered.sort_by(|&a, &b| {
            z_hat[b]
                .partial_cmp(&z_hat[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let dcg: T = covered
            .iter()
            .enumerate()
            .map(|(i, &m)| gain(truth.value(m).unwrap()) / discount(i + 1))
            .sum();
        let mut rels: Vec<T> = covered.iter().map(|&m| truth.value(m).unwrap()).collect();
        rels.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        let idcg: T = rels
            .iter()
            .enumerate()
            .map(|(i, &rel)| gain(rel) / discount(i + 1))
            .sum();
        let value = if idcg == T::zero() { T::one() } else { dcg / idcg };
        per_query.insert(q, value);
    }
    if per_query.is_empty() {
        return Err(EvalError::TooFewCovered { needed: 2, got: 0 });
    }
    let mean = per_query.values().copied().sum::<T>() / T::of_usize(per_query.len());
    Ok(NdcgReport { mean, per_query })
}
