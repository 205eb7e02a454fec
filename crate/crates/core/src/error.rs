//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("contour has too few points: {got} after cleanup, need at least {min}")]
    TooFewPoints { got: usize, min: usize },

    #[error("degenerate contour: {0}")]
    DegenerateContour(String),

    #[error("angle perturbation is not tangent to the unit directions (max |<theta,dtheta>| = {max_dot:.3e})")]
    NonTangentPerturbation { max_dot: f64 },

    #[error("closure projection failed to converge after {iterations} iterations (residual {residual:.3e})")]
    ProjectionDiverged { iterations: usize, residual: f64 },

    #[error("endpoints are antipodal (inner product {inner:.6}); inverse exponential undefined")]
    AntipodalPair { inner: f64 },

    #[error("geodesic did not converge after {iterations} iterations (last relative decrease {last_decrease:.3e})")]
    GeodesicNotConverged { iterations: usize, last_decrease: f64 },

    #[error("invalid warp: {0}")]
    InvalidWarp(String),

    #[error("sample counts differ: {left} vs {right}")]
    SampleCountMismatch { left: usize, right: usize },

    #[error("invalid distance matrix: {0}")]
    InvalidDistanceMatrix(String),

    #[error("group too small: need at least {min} shapes per group, got {n1} and {n2}")]
    GroupTooSmall { n1: usize, n2: usize, min: usize },

    #[error("invalid counts: {0}")]
    InvalidCounts(String),

    #[error("covariate '{name}' is not binary-codable: {reason}")]
    NonBinaryCovariate { name: String, reason: String },

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("shape '{id}' failed: {source}")]
    Shape {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Attach a shape id to an error coming out of a per-shape computation.
    pub fn for_shape(self, id: &str) -> Error {
        Error::Shape {
            id: id.to_string(),
            source: Box::new(self),
        }
    }

    /// True for errors caused by bad input rather than numerical failure.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::ProjectionDiverged { .. }
                | Error::GeodesicNotConverged { .. }
                | Error::AntipodalPair { .. }
        )
    }
}
