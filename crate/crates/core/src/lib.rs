//! Steering state conversion around exceptional points of a two-parameter
//! non-Hermitian Hamiltonian family.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod evolution;
pub mod hamiltonian;
pub mod metrics;
pub mod optimizer;
pub mod path;
pub mod scheduler;

pub use error::{Error, Result};
