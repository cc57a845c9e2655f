//! Distributed compressive sensing of sparse signal ensembles.
//!
//! A signal ensemble of `J` length-`N` signals is factored as `X = P Θ`, where the
//! location matrix `P` stacks a common identity submatrix `P_C` over every sensor and
//! places a per-sensor innovation submatrix `P_j` on the block diagonal. The crate
//! provides:
//!
//! - [`ensemble`]: location matrices, value vectors, ensemble sparsity models and
//!   their exhaustive enumeration.
//! - [`measurement`]: seeded per-sensor Gaussian measurement matrices and the
//!   composed system `Υ = Φ P`.
//! - [`bounds`]: per-subset measurement conditions for known-`P`, converse and
//!   unknown-`P` recovery, plus Pareto-minimal allocations.
//! - [`matching`]: the value/measurement bipartite graph, saturating matchings with
//!   Hall-violator certificates, and the partially zeroed matrix `Υ₀`.
//! - [`recovery`]: known-`P` linear recovery, converse witnesses and enumerative
//!   unknown-`P` recovery with a cross-validation measurement.
//!
//! Sensor and signal indices are 0-based throughout the API and JSON formats.

pub mod bounds;
pub mod ensemble;
mod error;
pub mod linalg;
pub mod matching;
pub mod measurement;
pub mod recovery;

pub use error::{DcsError, Result};
