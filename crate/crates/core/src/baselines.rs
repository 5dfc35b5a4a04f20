//! Mean, median and majority-vote aggregation.

use thiserror::Error;

use crate::dataset::{OrdinalScale, RatingsTable};
use crate::Real;

#[derive(Debug, Clone, Error)]
pub enum BaselineError {
    #[error("instance {0:?} has no ratings")]
    NoRatings(String),
}

fn instance_values<T: Real>(
    table: &RatingsTable,
    scale: &OrdinalScale<T>,
    m: usize,
) -> Result<Vec<T>, BaselineError> {
    let idxs = table.instance_entries(m);
    if idxs.is_empty() {
        return Err(BaselineError::NoRatings(table.instance_id(m).to_string()));
    }
    Ok(idxs.iter().map(|&i| scale.value(table.entries()[i].level)).collect())
}

/// Per-instance arithmetic mean of the observed label values.
pub fn mean_agg<T: Real>(
    table: &RatingsTable,
    scale: &OrdinalScale<T>,
) -> Result<Vec<T>, BaselineError> {
    (0..table.num_instances())
        .map(|m| {
            let vals = instance_values(table, scale, m)?;
            Ok(vals.iter().copied().sum::<T>() / T::of_usize(vals.len()))
        })
        .collect()
}

/// Per-instance median; even counts average the two middle values.
pub fn median_agg<T: Real>(
    table: &RatingsTable,
    scale: &OrdinalScale<T>,
) -> Result<Vec<T>, BaselineError> {
    (0..table.num_instances())
        .map(|m| {
            let mut vals = instance_values(table, scale, m)?;
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = vals.len();
            Ok(if n % 2 == 1 {
                vals[n / 2]
            } else {
                (vals[n / 2 - 1] + vals[n / 2]) / T::of(2.0)
            })
        })
        .collect()
}

/// Per-instance modal value; ties are broken by averaging all tied modes.
pub fn majority_vote<T: Real>(
    table: &RatingsTable,
    scale: &OrdinalScale<T>,
) -> Result<Vec<T>, BaselineError> {
    let k = table.num_levels();
    (0..table.num_instances())
        .map(|m| {
            let idxs = table.instance_entries(m);
            if idxs.is_empty() {
                return Err(BaselineError::NoRatings(table.instance_id(m).to_string()));
            }
            let mut counts = vec![0usize; k + 1];
            for &i in idxs {
                counts[table.entries()[i].level] += 1;
            }
            let top = *counts.iter().max().unwrap();
            let tied: Vec<T> = (1..=k)
                .filter(|&lvl| counts[lvl] == top)
                .map(|lvl| scale.value(lvl))
                .collect();
            Ok(tied.iter().copied().sum::<T>() / T::of_usize(tied.len()))
        })
        .collect()
}
