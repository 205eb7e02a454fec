//! Elastic shape analysis of closed planar curves.
//!
//! This crate implements the square-root velocity (SRVF) framework for
//! comparing, averaging and modelling ensembles of closed contours:
//!
//! * [`contour`] — ingestion, validation and resampling of closed polylines,
//!   and conversion to/from the SRVF representation.
//! * [`preshape`] — geometry of the pre-shape space of unit-length closed
//!   SRVFs: closure projection, exponential maps and path-straightening
//!   geodesics.
//! * [`registration`] — removal of nuisance variability (rotation, seed
//!   placement, reparameterization) and the elastic shape distance.
//! * [`shapestats`] — Karcher means, tangent-space PCA, random shape
//!   simulation and leave-one-out reconstruction.
//! * [`inference`] — clustering, multidimensional scaling, permutation
//!   two-sample tests and Bayesian cluster enrichment.
//! * [`io`] / [`svg`] — file formats (contour CSV, manifest JSON, tables)
//!   and SVG figure rendering.
//!
//! All types are immutable values and all operations are pure functions, so
//! everything here can be called concurrently; pairwise computations are
//! internally parallelized with rayon.

pub mod config;
pub mod contour;
pub mod ensemble;
pub mod error;
pub mod inference;
pub mod io;
pub mod preshape;
pub mod registration;
pub mod shapestats;
pub mod srvf;
pub mod svg;
pub mod synthetic;

pub use config::AnalysisConfig;
pub use contour::{Contour, CurveSpeedAngle};
pub use ensemble::{Covariate, ShapeEnsemble};
pub use error::{Error, Result};
pub use preshape::{GeodesicPath, TangentVector};
pub use registration::Registration;
pub use shapestats::{ReconstructionReport, SpcaModel};
pub use srvf::Srvf;
