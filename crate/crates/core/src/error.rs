use thiserror::Error;

use crate::point::Point;

/// Errors produced by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate edge: vertices {index} and {next} coincide")]
    DegenerateEdge { index: usize, next: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported dimension {0} (supported: 2, 3)")]
    UnsupportedDimension(usize),

    #[error("numeric domain error: {0}")]
    Domain(String),

    #[error("current has nonzero boundary ({} atoms, first at {:?})", .atoms.len(), .atoms.first().map(|a| a.0))]
    NonzeroBoundary { atoms: Vec<(Point, f64)> },

    #[error("segment weights are not integer multiples of a common quantum (weight {weight}, quantum {quantum})")]
    NonCommensurable { weight: f64, quantum: f64 },

    #[error("curve self-intersects: edges {first} and {second} are {distance:e} apart")]
    SelfIntersection { first: usize, second: usize, distance: f64 },

    #[error("global flux imbalance: {plus} positive vs {minus} negative atoms")]
    FluxImbalance { plus: usize, minus: usize },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Whether the failure is a numeric domain problem rather than bad input.
    pub fn is_domain(&self) -> bool {
        matches!(self, Error::Domain(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
