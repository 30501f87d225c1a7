//! Row-normalized momentum preconditioning (RMNP) and its baselines.
//!
//! RMNP replaces Muon's Newton-Schulz orthogonalization of the momentum with
//! a row-wise ℓ2 normalization, dropping the per-step cost of the
//! preconditioner from O(mn·min(m, n)) to O(mn). This crate provides:
//!
//! * [`matrix`]: a dense row-major matrix with the Frobenius, (1,2) and (∞,2)
//!   norms and a Jacobi SVD oracle;
//! * [`precond`]: row normalization, Newton-Schulz and exact polar factors;
//! * [`optim`]: RMNP, Muon, momentum SGD and AdamW with schedules and the
//!   mixed matrix/non-matrix strategy;
//! * [`dominance`]: diagonal-dominance ratios of the momentum Gram matrix;
//! * [`problems`]: small objectives with analytic gradients and a noise model;
//! * [`harness`]: benchmarks, training runs, rate checks and CSV output;
//! * [`verify`]: the invariant suites behind `rmnp verify`.

pub mod cli;
pub mod dominance;
pub mod error;
pub mod harness;
pub mod matrix;
pub mod optim;
pub mod precond;
pub mod problems;
pub mod verify;

pub use error::{Error, Result};
pub use matrix::{Matrix, NormKind};
