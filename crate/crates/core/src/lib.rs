//! Community detection on noisy graphs with self-paced, pixel-weighted
//! nonnegative matrix factorization.
//!
//! The crate is organised bottom-up:
//!
//! - [`graph`]: dense adjacency graphs, partitions, edge-list and label I/O,
//!   synthetic generators and bundled datasets.
//! - [`noise`]: random flips, modularity attacks and mixed noise.
//! - [`selfpace`]: the soft pixel-weight rule and age schedule.
//! - [`factorization`]: shallow and deep multiplicative-update solvers.
//! - [`metrics`]: NMI, ARI, pairwise F1 and modularity.
//! - [`harness`]: config-driven repeated experiments.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod factorization;
pub mod graph;
pub mod harness;
pub mod metrics;
pub mod noise;
pub mod selfpace;

pub use error::{Error, Result};
pub use graph::{Graph, LayerConfig, Partition};
