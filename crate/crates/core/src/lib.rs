//! Dynamics of discrete probability measures on R^d under optimal-transport metrics.
//!
//! The crate provides the building blocks for simulating deterministic maps and
//! Markov noise kernels acting on finitely supported probability measures:
//!
//! - [`measure`]: weighted point clouds with validation, moments, mixing,
//!   support compression, and tail mass.
//! - [`transport`]: exact Wasserstein distances and optimal plans (network
//!   simplex, 1-D quantile coupling, Kantorovich-Rubinstein dual, brute-force
//!   assignment oracle).
//! - [`dynamics`]: self-maps of R^d (builtins, affine, parsed expressions),
//!   their push-forward action on measures, and growth/contraction scans.
//! - [`noise`]: Markov kernels (deterministic, Gaussian quantile, bounded
//!   uniform, collapse, mixtures), operator application with certified
//!   compression, and noise-level estimation.
//! - [`invariant`]: stationary-measure search via Cesaro averaging, orbit
//!   records, positive-invariance probes, and tail-decay profiles.
//! - [`expr`]: a small arithmetic expression language for user-defined maps.
//!
//! All operations are pure functions over immutable values; every random
//! choice is driven by an explicit seed, so results are reproducible bit for
//! bit.

pub mod dynamics;
pub mod expr;
pub mod invariant;
pub mod measure;
pub mod noise;
pub mod transport;

mod error;

pub use error::{Error, Result};
