//! Clustering-based asymmetric metric learning for unlabelled cross-view matching.
//!
//! Each camera view gets its own linear projection. Training alternates
//! k-means in the shared projected space with a generalized eigen-solve for
//! the stacked projections, under a cross-view consistency penalty and a
//! covariance-normalizing constraint. The [`eval`] module ranks galleries with
//! the learned asymmetric distance and reports CMC and mAP.

pub mod block;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod features;
pub mod indicator;
pub mod kmeans;
pub mod linalg;
pub mod model;
pub mod objective;
pub mod solver;

pub use config::{CamelConfig, Ridge};
pub use error::{CamelError, Result};
pub use features::{FeatureSet, IdentityId, Sample};
pub use indicator::IndicatorMatrix;
pub use model::{ProjectionModel, TrainingInfo, Variant};
pub use solver::{camel_fit, camel_fit_supervised, cmel_fit, SolverState};
