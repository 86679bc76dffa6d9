//! Factorized contrastive learning laboratory.
//!
//! A desk-scale numerical workbench for multimodal representation learning
//! with explicit shared/unique information accounting:
//!
//! - [`numcore`]: dense matrices, fully-connected nets with exact reverse-mode
//!   gradients, and Adam — deterministic under a seeded RNG.
//! - [`exactinfo`]: brute-force information theory on small discrete joints,
//!   the ground truth every estimator is checked against.
//! - [`synthgen`]: synthetic multimodal data with controllable shared/unique
//!   ratios, correlated Gaussian pairs with analytic MI, and a linear-Gaussian
//!   triple with analytic conditional MI.
//! - [`estimators`]: InfoNCE lower bound, NCE-CLUB upper bound, and their
//!   conditional variants via conditioning-by-concatenation over concat critics.
//! - [`objectives`]: the factorized training objectives (FactorCL and the
//!   standard contrastive baselines) with the two-timescale θ/φ loop.
//! - [`eval`]: linear probes, Gaussian log-det MI probes, probe matrices over
//!   generative latents, and information-gap reports.
//! - [`cli`]: reproducible experiment runners behind the `factorcl` binary.

pub mod cli;
pub mod config;
pub mod error;
pub mod estimators;
pub mod eval;
pub mod exactinfo;
pub mod numcore;
pub mod objectives;
pub mod report;
pub mod rng;
pub mod synthgen;

pub use error::{Error, Result};
pub use numcore::{AdamHyper, Matrix, MlpNet};
