//! Geometry-aware local linear regression with directional Gaussian weights,
//! a one-shot effective-sample-size safeguard and numerical diagnostics.
//!
//! Every location runs the same deterministic map: K-nearest neighborhood,
//! orientation estimates, safeguarded weights, then a closed-form solve.

pub mod dataset;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod geo;
pub mod linalg;
pub mod neighborhood;
pub mod orientation;
pub mod report;
pub mod simgen;
pub mod solver;
pub mod summary;
pub mod variants;
pub mod weights;

pub use dataset::Dataset;
pub use engine::{fit_all, fit_location, predict_all, predict_at, BranchCode, GimbalConfig, LocationRecord};
pub use error::{GimbalError, Result};
pub use geo::GeoPoint;
pub use experiments::ExperimentRegistry;
pub use variants::VariantRegistry;
