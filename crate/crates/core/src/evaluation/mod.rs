//! Evaluation metrics (MSE, Pearson correlation, NDCG), the spam-injection
//! harness and the synthetic-data generator.

mod metrics;
mod spam;
mod synth;

pub use metrics::{mse, ndcg, pearson, NdcgReport};
pub use spam::{inject_spam, SpamConfig};
pub use synth::{synth_generate, EpsilonPrior, SynthConfig, SynthOutput, SynthParams};

use serde::Serialize;
use thiserror::Error;

use crate::dataset::{CategoryMap, GroundTruth};
use crate::Real;

#[derive(Debug, Clone, Error)]
pub enum EvalError {
    #[error("need at least {needed} covered instances, got {got}")]
    TooFewCovered { needed: usize, got: usize },
    #[error("correlation is undefined: {0} has zero variance")]
    UndefinedCorrelation(&'static str),
    #[error("estimate vector has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

/// The three headline metrics for one method on one dataset.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport<T> {
    pub mse: T,
    pub correlation: T,
    pub ndcg: T,
    pub per_query_ndcg: std::collections::BTreeMap<usize, T>,
    /// Number of instances the metrics were computed over.
    pub covered: usize,
}

/// Computes all three metrics over the covered instances.
pub fn evaluate_all<T: Real>(
    truth: &GroundTruth<T>,
    z_hat: &[T],
    queries: &CategoryMap,
) -> Result<EvalReport<T>, EvalError> {
    let mse = mse(truth, z_hat)?;
    let correlation = pearson(truth, z_hat)?;
    let ndcg_report = ndcg(truth, z_hat, queries)?;
    Ok(EvalReport {
        mse,
        correlation,
        ndcg: ndcg_report.mean,
        per_query_ndcg: ndcg_report.per_query,
        covered: truth.coverage(),
    })
}
