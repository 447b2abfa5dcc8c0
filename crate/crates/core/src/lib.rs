//! Multidimensional random walk with full memory and a random tendency.
//!
//! At each step the walker either (probability `theta`) copies a uniformly
//! chosen past step, keeping it with probability `p` and otherwise taking one
//! of the other `K - 1` directions uniformly, or (probability `1 - theta`)
//! steps towards `e1` with probability `p` and elsewhere uniformly. `K` is
//! `2d`, or `2d + 1` when the walker may stay put.
//!
//! The crate is organised around one process seen from several sides:
//!
//! * [`model`]: parameters, state and the exact two-stage sampler.
//! * [`urn`]: the equivalent generalized Pólya urn and its replacement laws.
//! * [`theory`]: thresholds, limits, covariances, martingale weights and exact
//!   moment propagation.
//! * [`oracle`]: brute-force path enumeration for tiny instances.
//! * [`montecarlo`]: reproducible ensembles, estimators and verification.

pub mod error;
pub mod model;
pub mod montecarlo;
pub mod oracle;
pub mod special;
pub mod theory;
pub mod urn;

pub use error::{Error, Result};
pub use model::{Direction, InitialSpec, ModelParams, WalkState};
pub use theory::Regime;
