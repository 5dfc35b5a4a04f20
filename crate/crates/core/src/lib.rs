//! Ground-truth inference from sparse, noisy, multi-annotator ordinal ratings.
//!
//! The crate bundles several probabilistic aggregation models behind a common
//! fitting protocol:
//!
//! * [`odm`] — a variational-Bayes mixture model with an ordinal link, per-annotator
//!   expertise and spam probabilities, and per-category difficulty.
//! * [`dawid_skene`] — multi-class confusion-matrix EM.
//! * [`glad`] — multi-class expertise/difficulty EM with conjugate-gradient M-steps.
//! * [`ord_binary`] — ordinal labels reduced to stacked binary sensitivity/specificity
//!   models.
//! * [`continuous`] — real-valued Gaussian noise model fit by alternating maximum
//!   likelihood.
//! * [`baselines`] — mean, median and majority vote.
//!
//! [`evaluation`] provides MSE / Pearson / NDCG metrics, a spam-injection harness and
//! a synthetic-data generator; [`dataset`] handles sparse rating tables, ordinal
//! scales, category maps and ground truth files.
//!
//! All numerical code is generic over the scalar type through the [`Real`] trait;
//! concrete `f64` aliases are exported at the crate root.

use std::fmt;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

pub mod baselines;
pub mod continuous;
pub mod dataset;
pub mod dawid_skene;
pub mod evaluation;
pub mod fit;
pub mod glad;
pub mod numerics;
pub mod odm;
pub mod ord_binary;

/// Scalar type for all model arithmetic.
///
/// Implemented by `f32` and `f64`. The tolerance-sensitive fits (variational
/// bounds to 1e-8 and tighter) assume `f64`; `f32` is supported for
/// memory-bound experimentation.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    /// Converts an `f64` constant into the scalar type.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("constant must be representable")
    }

    /// Converts a count into the scalar type.
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count must be representable")
    }

    /// Widens to `f64` (lossless for the supported scalar types).
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar must convert to f64")
    }
}

impl<T> Real for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + NumAssign
        + Sum
        + fmt::Debug
        + fmt::Display
        + Send
        + Sync
        + 'static
{
}

pub use dataset::{CategoryMap, Granularity, GroundTruth, OrdinalScale, RatingsTable};
pub use fit::{FitConfig, ModelFit};

/// `f64` aliases for the main entry-point types.
pub type OrdinalScale64 = dataset::OrdinalScale<f64>;
pub type GroundTruth64 = dataset::GroundTruth<f64>;
pub type FitConfig64 = fit::FitConfig<f64>;
pub type OdmHyperParams64 = odm::OdmHyperParams<f64>;
pub type OdmFitResult64 = odm::OdmFitResult<f64>;
pub type SynthConfig64 = evaluation::SynthConfig<f64>;
pub type EvalReport64 = evaluation::EvalReport<f64>;
