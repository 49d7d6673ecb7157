//! Mapper graphs over interchangeable filter functions.
//!
//! The crate covers the whole pipeline used to compare filter functions by
//! how well the resulting Mapper graph keeps distinct manifolds apart:
//!
//! - [`dataset`]: nested-hypersphere point clouds, stratified split and z-scoring
//! - [`numerics`]: distance matrices, Jacobi eigen/SVD, minimum spanning trees
//! - [`filters`]: PCA, SVD, eccentricity, kernel density, exact t-SNE and the
//!   topological autoencoder behind one fit/transform contract
//! - [`tae`]: the topological autoencoder itself (MLP, 0-dim persistence loss, Adam)
//! - [`mapper`]: interval covers, DBSCAN and the nerve graph, with DOT/JSON export
//! - [`bench`]: the separation metric, grid search and summaries
//! - [`config`] and [`cli`]: reproducible runs driven by a JSON config
//!
//! See `examples/` for one runnable program per capability.

pub mod bench;
pub mod cli;
pub mod config;
pub mod dataset;
mod error;
pub mod filters;
pub mod io;
pub mod mapper;
pub mod numerics;
pub mod tae;

pub use error::{Error, Result};

/// Dense row-major matrix used throughout the crate.
pub type Matrix = ndarray::Array2<f64>;
