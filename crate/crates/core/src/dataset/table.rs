//! The sparse ratings table and its TSV form.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{DatasetError, OrdinalScale};
use crate::Real;

/// One observed rating: annotator `annotator` gave instance `instance` the
/// ordinal level `level` (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RatingEntry {
    pub instance: usize,
    pub annotator: usize,
    pub level: usize,
}

/// A validated sparse rating matrix over dense instance/annotator indices,
/// with per-instance and per-annotator index sets.
///
/// Immutable after construction; fitting runs share it read-only.
#[derive(Debug, Clone)]
pub struct RatingsTable {
    entries: Vec<RatingEntry>,
    num_levels: usize,
    instance_ids: Vec<String>,
    annotator_ids: Vec<String>,
    by_instance: Vec<Vec<usize>>,
    by_annotator: Vec<Vec<usize>>,
}

impl RatingsTable {
    /// Builds a table from dense entries, generating synthetic string ids.
    pub fn from_dense_entries(
        num_instances: usize,
        num_annotators: usize,
        num_levels: usize,
        entries: Vec<RatingEntry>,
    ) -> Result<Self, DatasetError> {
        let instance_ids = (0..num_instances).map(|m| format!("i{m}")).collect();
        let annotator_ids = (0..num_annotators).map(|n| format!("a{n}")).collect();
        Self::from_parts(instance_ids, annotator_ids, num_levels, entries)
    }

    /// Builds a table from dense entries and explicit id dictionaries.
    pub fn from_parts(
        instance_ids: Vec<String>,
        annotator_ids: Vec<String>,
        num_levels: usize,
        entries: Vec<RatingEntry>,
    ) -> Result<Self, DatasetError> {
        let mut seen = HashMap::with_capacity(entries.len());
        let mut by_instance = vec![Vec::new(); instance_ids.len()];
        let mut by_annotator = vec![Vec::new(); annotator_ids.len()];
        for (idx, e) in entries.iter().enumerate() {
            assert!(e.instance < instance_ids.len(), "instance index out of range");
            assert!(e.annotator < annotator_ids.len(), "annotator index out of range");
            if e.level < 1 || e.level > num_levels {
                return Err(DatasetError::InvalidLevel {
                    line: idx + 1,
                    level: e.level as i64,
                    num_levels,
                });
            }
            if seen.insert((e.annotator, e.instance), idx).is_some() {
                return Err(DatasetError::DuplicateRating {
                    annotator: annotator_ids[e.annotator].clone(),
                    instance: instance_ids[e.instance].clone(),
                });
            }
            by_instance[e.instance].push(idx);
            by_annotator[e.annotator].push(idx);
        }
        Ok(Self {
            entries,
            num_levels,
            instance_ids,
            annotator_ids,
            by_instance,
            by_annotator,
        })
    }

    /// Instance count `M`.
    pub fn num_instances(&self) -> usize {
        self.instance_ids.len()
    }

    /// Annotator count `N`.
    pub fn num_annotators(&self) -> usize {
        self.annotator_ids.len()
    }

    /// Number of observed ratings `|L|`.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_levels(&self) -> usize {
        self.num_levels
    }

    pub fn entries(&self) -> &[RatingEntry] {
        &self.entries
    }

    /// Entry indices of the ratings on instance `m`.
    pub fn instance_entries(&self, m: usize) -> &[usize] {
        &self.by_instance[m]
    }

    /// Entry indices of the ratings by annotator `n`.
    pub fn annotator_entries(&self, n: usize) -> &[usize] {
        &self.by_annotator[n]
    }

    pub fn instance_id(&self, m: usize) -> &str {
        &self.instance_ids[m]
    }

    pub fn annotator_id(&self, n: usize) -> &str {
        &self.annotator_ids[n]
    }

    pub fn instance_ids(&self) -> &[String] {
        &self.instance_ids
    }

    pub fn annotator_ids(&self) -> &[String] {
        &self.annotator_ids
    }

    pub fn instance_index(&self, id: &str) -> Option<usize> {
        self.instance_ids.iter().position(|s| s == id)
    }

    /// Mean of the observed label values on instance `m`, if any.
    pub fn instance_mean<T: Real>(&self, m: usize, scale: &OrdinalScale<T>) -> Option<T> {
        let idxs = self.instance_entries(m);
        if idxs.is_empty() {
            return None;
        }
        let sum: T = idxs.iter().map(|&i| scale.value(self.entries[i].level)).sum();
        Some(sum / T::of_usize(idxs.len()))
    }
}

fn split_row(line: &str) -> Vec<&str> {
    line.split('\t').map(str::trim).collect()
}

/// Loads a ratings table from a TSV file with header
/// `instance<TAB>annotator<TAB>rating`. Lines starting with `#` are skipped.
/// String ids are mapped to dense 0-based indices in order of first
/// appearance; the dictionaries are retained on the table.
pub fn load_ratings<T: Real>(
    path: impl AsRef<Path>,
    scale: &OrdinalScale<T>,
) -> Result<RatingsTable, DatasetError> {
    let file = File::open(path.as_ref())?;
    let reader = BufReader::new(file);
    let num_levels = scale.num_levels();

    let mut instance_ids: Vec<String> = Vec::new();
    let mut annotator_ids: Vec<String> = Vec::new();
    let mut instance_index: HashMap<String, usize> = HashMap::new();
    let mut annotator_index: HashMap<String, usize> = HashMap::new();
    let mut entries: Vec<RatingEntry> = Vec::new();
    let mut header_seen = false;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields = split_row(trimmed);
        if !header_seen {
            if fields != ["instance", "annotator", "rating"] {
                return Err(DatasetError::ParseError {
                    line: lineno,
                    msg: format!("expected header 'instance\\tannotator\\trating', got {trimmed:?}"),
                });
            }
            header_seen = true;
            continue;
        }
        if fields.len() != 3 {
            return Err(DatasetError::ParseError {
                line: lineno,
                msg: format!("expected 3 tab-separated fields, got {}", fields.len()),
            });
        }
        let level: i64 = fields[2].parse().map_err(|_| DatasetError::ParseError {
            line: lineno,
            msg: format!("rating {:?} is not an integer", fields[2]),
        })?;
        if level < 1 || level as usize > num_levels {
            return Err(DatasetError::InvalidLevel {
                line: lineno,
                level,
                num_levels,
            });
        }
        let m = *instance_index.entry(fields[0].to_string()).or_insert_with(|| {
            instance_ids.push(fields[0].to_string());
            instance_ids.len() - 1
        });
        let n = *annotator_index.entry(fields[1].to_string()).or_insert_with(|| {
            annotator_ids.push(fields[1].to_string());
            annotator_ids.len() - 1
        });
        entries.push(RatingEntry {
            instance: m,
            annotator: n,
            level: level as usize,
        });
    }
    if !header_seen {
        return Err(DatasetError::ParseError {
            line: 0,
            msg: "missing header".into(),
        });
    }
    RatingsTable::from_parts(instance_ids, annotator_ids, num_levels, entries)
}

/// Writes a table back to the TSV form accepted by [`load_ratings`].
pub fn write_ratings(table: &RatingsTable, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    writeln!(w, "instance\tannotator\trating")?;
    for e in table.entries() {
        writeln!(
            w,
            "{}\t{}\t{}",
            table.instance_id(e.instance),
            table.annotator_id(e.annotator),
            e.level
        )?;
    }
    w.flush()?;
    Ok(())
}
