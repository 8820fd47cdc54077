//! Hybrid quantum-classical regression workbench.
//!
//! Exact simulation of 4-qubit variational circuits (statevector and
//! density-matrix with depolarizing noise), a 19-template ansatz inventory,
//! parameter-shift gradients, compact dense-network machinery, two hybrid
//! model backbones, a synthetic device dataset, and the metrics/ablation
//! tooling to evaluate all of it reproducibly.

pub mod analysis;
pub mod ansatz;
pub mod data;
pub mod error;
pub mod grad;
pub mod model;
pub mod nn;
pub mod noise;
pub mod oracle;
pub mod seed;
pub mod sim;

pub use error::{Error, Result};
