//! Grouping of instances into difficulty categories (queries, single pool,
//! or one category per instance).

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use super::{DatasetError, RatingsTable};

/// Category granularity choices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Granularity {
    /// One shared category: `c(m) = 1`.
    Single,
    /// Every instance is its own category: `c(m) = m`.
    PerInstance,
    /// Categories read from a TSV file `instance<TAB>category`.
    FromFile(PathBuf),
}

/// Assignment of every instance to exactly one category, with the rating
/// entries of each category precomputed.
#[derive(Debug, Clone)]
pub struct CategoryMap {
    assignment: Vec<usize>,
    category_ids: Vec<String>,
    by_category: Vec<Vec<usize>>,
}

impl CategoryMap {
    /// Builds from a dense per-instance assignment against a table.
    pub fn from_assignment(
        table: &RatingsTable,
        assignment: Vec<usize>,
        category_ids: Vec<String>,
    ) -> Self {
        assert_eq!(assignment.len(), table.num_instances());
        let mut by_category = vec![Vec::new(); category_ids.len()];
        for (idx, e) in table.entries().iter().enumerate() {
            by_category[assignment[e.instance]].push(idx);
        }
        Self {
            assignment,
            category_ids,
            by_category,
        }
    }

    /// A bare instance partition with no rating index: enough for query-level
    /// metrics. Not suitable for model fitting (no per-category rating sets).
    pub fn from_instance_assignment(assignment: Vec<usize>, category_ids: Vec<String>) -> Self {
        let by_category = vec![Vec::new(); category_ids.len()];
        Self {
            assignment,
            category_ids,
            by_category,
        }
    }

    /// Number of categories `C`.
    pub fn num_categories(&self) -> usize {
        self.category_ids.len()
    }

    /// Dense category index of instance `m`.
    pub fn of_instance(&self, m: usize) -> usize {
        self.assignment[m]
    }

    /// Entry indices of the ratings whose instance belongs to category `c`.
    pub fn category_entries(&self, c: usize) -> &[usize] {
        &self.by_category[c]
    }

    pub fn category_id(&self, c: usize) -> &str {
        &self.category_ids[c]
    }

    /// Dense instance indices per category.
    pub fn instances_by_category(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_categories()];
        for (m, &c) in self.assignment.iter().enumerate() {
            out[c].push(m);
        }
        out
    }
}

/// Builds the category map for a table at the requested granularity.
pub fn build_category_map(
    table: &RatingsTable,
    granularity: &Granularity,
) -> Result<CategoryMap, DatasetError> {
    match granularity {
        Granularity::Single => Ok(CategoryMap::from_assignment(
            table,
            vec![0; table.num_instances()],
            vec!["all".to_string()],
        )),
        Granularity::PerInstance => Ok(CategoryMap::from_assignment(
            table,
            (0..table.num_instances()).collect(),
            table.instance_ids().to_vec(),
        )),
        Granularity::FromFile(path) => from_file(table, path),
    }
}

fn from_file(table: &RatingsTable, path: &Path) -> Result<CategoryMap, DatasetError> {
    let reader = BufReader::new(File::open(path)?);
    let mut raw: HashMap<String, String> = HashMap::new();
    let mut header_seen = false;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').map(str::trim).collect();
        if !header_seen && fields == ["instance", "category"] {
            header_seen = true;
            continue;
        }
        if fields.len() != 2 {
            return Err(DatasetError::ParseError {
                line: lineno + 1,
                msg: format!("expected 2 tab-separated fields, got {}", fields.len()),
            });
        }
        raw.insert(fields[0].to_string(), fields[1].to_string());
    }

    let mut category_ids: Vec<String> = Vec::new();
    let mut category_index: HashMap<String, usize> = HashMap::new();
    let mut assignment = Vec::with_capacity(table.num_instances());
    for m in 0..table.num_instances() {
        let id = table.instance_id(m);
        let cat = raw
            .get(id)
            .ok_or_else(|| DatasetError::IncompleteCategoryMap(id.to_string()))?;
        let c = *category_index.entry(cat.clone()).or_insert_with(|| {
            category_ids.push(cat.clone());
            category_ids.len() - 1
        });
        assignment.push(c);
    }
    Ok(CategoryMap::from_assignment(table, assignment, category_ids))
}
