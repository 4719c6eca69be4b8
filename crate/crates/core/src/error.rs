//! Crate-wide error type.

use crate::geometry::PointId;

/// Errors surfaced by the assignment engine and its supporting modules.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A box with non-positive width or height (or non-finite coordinates).
    #[error("degenerate box ({x_min}, {y_min}, {x_max}, {y_max}): needs x_min < x_max and y_min < y_max")]
    DegenerateBox {
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
    },

    /// Pyramid construction failed (bad strides, indices, or image coverage).
    #[error("invalid pyramid grid: {0}")]
    InvalidGrid(String),

    /// A level index that does not exist in the grid.
    #[error("no level with index {0} in the grid")]
    UnknownLevel(usize),

    /// A point whose cell coordinates fall outside its level's grid.
    #[error("point {point:?} out of range for its level")]
    PointOutOfRange { point: PointId },

    /// An argument outside its mathematical domain (probabilities, loss params).
    #[error("domain error: {0}")]
    Domain(String),

    /// A scenario configuration that violates the documented schema rules.
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    /// Too few samples for a two-component mixture fit.
    #[error("insufficient data: mixture fit needs at least 2 samples, got {0}")]
    InsufficientData(usize),

    /// All samples identical; a two-component mixture is unidentifiable.
    #[error("degenerate data: all samples identical, cannot fit two components")]
    DegenerateData,

    /// No level has any candidate point for the instance at hand.
    #[error("all levels empty: no candidate points on any scale level")]
    AllLevelsEmpty,

    /// An instance with no in-box points anywhere in the pyramid.
    #[error("instance {0} has no candidate points on any level")]
    NoCandidates(u32),

    /// A metric requested over an empty positive set.
    #[error("metric undefined over an empty positive set")]
    EmptyPositives,

    /// A caller-side contract violation (length mismatch, empty input, ...).
    #[error("contract violation: {0}")]
    Contract(String),
}

pub type Result<T> = std::result::Result<T, Error>;
