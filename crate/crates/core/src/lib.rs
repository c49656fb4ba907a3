//! Video geolocation from per-keyframe global image descriptors.
//!
//! A video is located by querying each of its keyframes against a database
//! of geotagged reference images and aggregating the retrieved locations
//! into a single prediction. The crate provides:
//!
//! | Module | Purpose |
//! |--------|---------|
//! | [`geo`] | Haversine distance and local planar projection |
//! | [`descriptor`] | Descriptor vectors, store files, occlusion heatmaps |
//! | [`keyframes`] | Color-histogram keyframe selection |
//! | [`index`] | Exact and partitioned approximate KNN with persistence |
//! | [`clustering`] | DBSCAN over projected candidate locations |
//! | [`voting`] | Simple, weighted-rank, blended and density voting |
//! | [`eval`] | Precision-within-distance, random baseline, oracle |
//! | [`synth`] | Synthetic street-view world, videos and invariance sweeps |
//! | [`cli`] | The `vidgeo` command-line surface |
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod cli;
pub mod clustering;
pub mod descriptor;
pub mod error;
pub mod eval;
pub mod geo;
pub mod image;
pub mod index;
pub mod keyframes;
pub mod output;
pub mod rng;
pub mod synth;
pub mod voting;

pub use error::{Error, Result};
pub use geo::{GeoPoint, PlanarPoint};

/// Default number of neighbors retrieved per keyframe.
pub const DEFAULT_K: usize = 5;
