//! Optional ground-truth labels, possibly covering only part of the instances.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::{DatasetError, RatingsTable};
use crate::Real;

/// Real-valued ground truth for a (subset of a) table's instances.
#[derive(Debug, Clone)]
pub struct GroundTruth<T> {
    values: Vec<Option<T>>,
}

impl<T: Real> GroundTruth<T> {
    /// Full-coverage truth from a dense value vector.
    pub fn full(values: Vec<T>) -> Self {
        Self {
            values: values.into_iter().map(Some).collect(),
        }
    }

    /// Partial truth over `num_instances` instances.
    pub fn partial(num_instances: usize, covered: impl IntoIterator<Item = (usize, T)>) -> Self {
        let mut values = vec![None; num_instances];
        for (m, v) in covered {
            values[m] = Some(v);
        }
        Self { values }
    }

    pub fn num_instances(&self) -> usize {
        self.values.len()
    }

    /// Number of covered instances.
    pub fn coverage(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    pub fn value(&self, m: usize) -> Option<T> {
        self.values[m]
    }

    /// Iterates `(instance, value)` over covered instances.
    pub fn covered(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(m, v)| v.map(|v| (m, v)))
    }
}

/// Loads ground truth from a TSV file `instance<TAB>value`. Coverage may be
/// partial; every listed instance must exist in the table.
pub fn load_truth<T: Real>(
    path: impl AsRef<Path>,
    table: &RatingsTable,
) -> Result<GroundTruth<T>, DatasetError> {
    let reader = BufReader::new(File::open(path.as_ref())?);
    let mut values = vec![None; table.num_instances()];
    let mut header_seen = false;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').map(str::trim).collect();
        if !header_seen && fields == ["instance", "value"] {
            header_seen = true;
            continue;
        }
        if fields.len() != 2 {
            return Err(DatasetError::ParseError {
                line: lineno,
                msg: format!("expected 2 tab-separated fields, got {}", fields.len()),
            });
        }
        let m = table
            .instance_index(fields[0])
            .ok_or_else(|| DatasetError::UnknownInstance(fields[0].to_string()))?;
        let v: f64 = fields[1].parse().map_err(|_| DatasetError::ParseError {
            line: lineno,
            msg: format!("value {:?} is not numeric", fields[1]),
        })?;
        values[m] = Some(T::of(v));
    }
    Ok(GroundTruth { values })
}
