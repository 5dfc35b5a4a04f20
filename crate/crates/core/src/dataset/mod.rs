//! Sparse multi-annotator rating data: ordinal scales, rating tables with
//! precomputed index sets, category maps and ground truth.

mod category;
mod scale;
mod table;
mod truth;

pub use category::{build_category_map, CategoryMap, Granularity};
pub use scale::OrdinalScale;
pub use table::{load_ratings, write_ratings, RatingEntry, RatingsTable};
pub use truth::{load_truth, GroundTruth};

use thiserror::Error;

/// Errors raised while loading or validating rating data.
#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {msg}")]
    ParseError { line: usize, msg: String },
    #[error("line {line}: rating {level} outside 1..={num_levels}")]
    InvalidLevel {
        line: usize,
        level: i64,
        num_levels: usize,
    },
    #[error("duplicate rating by annotator {annotator:?} on instance {instance:?}")]
    DuplicateRating { annotator: String, instance: String },
    #[error("category map is missing instance {0:?}")]
    IncompleteCategoryMap(String),
    #[error("unknown instance {0:?}")]
    UnknownInstance(String),
    #[error("invalid ordinal scale: {0}")]
    InvalidScale(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
