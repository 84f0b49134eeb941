//! Tabular analytics toolkit.
//!
//! Two pipelines share this crate:
//!
//! - **segmentation**: standardize → [`pca`] → [`cluster`] (k-means with
//!   silhouette-based choice of k);
//! - **prediction**: [`preprocess`] → five classifiers in [`classify`] →
//!   [`modelsel`] (stratified k-fold grid search and metrics) → [`explain`]
//!   (Shapley attribution).
//!
//! [`synth`] generates seeded tables with the published marginals of the
//! two source datasets so every stage can run without them.

pub mod classify;
pub mod cluster;
pub mod error;
pub mod explain;
pub mod linalg;
pub mod modelsel;
pub mod pca;
pub mod preprocess;
pub mod rng;
pub mod stats;
pub mod synth;
pub mod tabular;

pub use error::{Error, ErrorClass, Result};
pub use linalg::Matrix;
pub use rng::SplitMix64;
pub use tabular::{Column, ColumnData, ColumnKind, Table};

/// Version string stamped into reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
