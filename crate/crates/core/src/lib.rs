//! Research engine for a graph-clustered statistical arbitrage strategy.
//!
//! The pipeline: daily price panels become rolling correlation graphs, the
//! signed graphs are clustered, per-cluster mean-reversion signals are filtered
//! by an ensemble of probability classifiers, and surviving signals are traded
//! by a Kelly-sized long/short engine with time-decaying stops. `analytics`
//! scores the resulting equity curves.

pub mod analytics;
pub mod classify;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod portfolio;
pub mod seed;
pub mod signal;
pub mod sponge;
pub mod synthetic;

pub use error::{Error, Result};
