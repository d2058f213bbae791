//! Alternating-minimization solvers for low-rank matrix sensing and matrix
//! completion, with spectral initialization, a stagewise variant, noisy
//! measurement support, and convergence diagnostics.
//!
//! Module map:
//! - [`matrix`]: dense row-major matrix and its text format
//! - [`linalg`]: QR, truncated SVD, least squares, subspace distance
//! - [`operators`]: sensing ensembles, entrywise sampling, RIP probing
//! - [`sensing`]: AltMinSense and Stage-AltMin solvers
//! - [`completion`]: AltMinComplete with clipped-SVD init and decoupled solves
//! - [`harness`]: problem generation, experiment runners, CSV/JSON reporting

pub mod completion;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod matrix;
pub mod operators;
pub mod rng;
pub mod sensing;

pub use error::{Error, Result};
pub use linalg::SvdResult;
pub use matrix::Matrix;
pub use operators::{ObservationSet, PartitionedObservations, SensingOperator};
pub use sensing::{ConvergenceTrace, FactorPair, Mode, SolverConfig};
