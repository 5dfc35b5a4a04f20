//! The ordinal value scale and its bin thresholds.

use serde::Serialize;

use super::DatasetError;
use crate::Real;

/// An ordinal scale: `K` ascending label values `v_1 < ... < v_K` and `K + 1`
/// bin thresholds `b_0 < ... < b_K` with `b_{k-1} < v_k < b_k`.
///
/// A latent real in `[b_{k-1}, b_k)` is reported as level `k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrdinalScale<T> {
    values: Vec<T>,
    thresholds: Vec<T>,
}

impl<T: Real> OrdinalScale<T> {
    /// Builds a scale from explicit values and thresholds.
    pub fn new(values: Vec<T>, thresholds: Vec<T>) -> Result<Self, DatasetError> {
        if values.len() < 2 {
            return Err(DatasetError::InvalidScale(format!(
                "need at least 2 levels, got {}",
                values.len()
            )));
        }
        if thresholds.len() != values.len() + 1 {
            return Err(DatasetError::InvalidScale(format!(
                "expected {} thresholds for {} values, got {}",
                values.len() + 1,
                values.len(),
                thresholds.len()
            )));
        }
        if values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(DatasetError::InvalidScale("values must be strictly increasing".into()));
        }
        if thresholds.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(DatasetError::InvalidScale(
                "thresholds must be strictly increasing".into(),
            ));
        }
        for (k, &v) in values.iter().enumerate() {
            if !(thresholds[k] < v && v < thresholds[k + 1]) {
                return Err(DatasetError::InvalidScale(format!(
                    "value {v} of level {} must lie inside its bin",
                    k + 1
                )));
            }
        }
        Ok(Self { values, thresholds })
    }

    /// The standard `K`-level scale: `v_k = k`, thresholds `k + 1/2` starting at `1/2`.
    pub fn uniform(num_levels: usize) -> Self {
        assert!(num_levels >= 2, "need at least 2 levels");
        let values = (1..=num_levels).map(T::of_usize).collect();
        let thresholds = (0..=num_levels)
            .map(|k| T::of_usize(k) + T::of(0.5))
            .collect();
        Self { values, thresholds }
    }

    /// Number of levels `K`.
    pub fn num_levels(&self) -> usize {
        self.values.len()
    }

    /// Label value of a 1-based level.
    pub fn value(&self, level: usize) -> T {
        self.values[level - 1]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn thresholds(&self) -> &[T] {
        &self.thresholds
    }

    /// Bin `[b_{k-1}, b_k)` of a 1-based level.
    pub fn bin(&self, level: usize) -> (T, T) {
        (self.thresholds[level - 1], self.thresholds[level])
    }

    /// Mean of the label values (the default prior mean).
    pub fn mean_value(&self) -> T {
        self.values.iter().copied().sum::<T>() / T::of_usize(self.values.len())
    }

    /// Level whose bin contains `x`, with values outside `[b_0, b_K)` clamped
    /// to the extreme levels.
    pub fn level_of_clamped(&self, x: T) -> usize {
        let k = self.num_levels();
        for level in 1..k {
            if x < self.thresholds[level] {
                return level;
            }
        }
        k
    }
}
