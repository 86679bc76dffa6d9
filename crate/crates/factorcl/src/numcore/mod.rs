//! Minimal dense numerical core: row-major matrices, fully-connected nets
//! with rectified-linear hidden layers and exact reverse-mode gradients,
//! the Adam optimizer, and a finite-difference gradient checker.
//!
//! Everything is double precision and deterministic under a seeded RNG.
//! Nets are owned by one training loop at a time; read-only forward passes
//! on a frozen net are safe from any thread.

mod adam;
mod gradcheck;
mod linalg;
mod matrix;
mod mlp;

pub use adam::AdamHyper;
pub use gradcheck::finite_diff_check;
pub use linalg::{cholesky_logdet, matrix_rank, solve_least_squares};
pub use matrix::Matrix;
pub use mlp::{ForwardCache, MlpNet};
