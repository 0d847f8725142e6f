//! Randomized Kaczmarz phase retrieval for complex-valued signals.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`]: complex vectors, the `a^* b` inner product, phase-aligned distance.
//! - [`sensing`]: uniform-sphere and block-unitary sensing ensembles, magnitude measurements.
//! - [`solver`]: the magnitude projection and the randomized Kaczmarz iteration.
//! - [`init`]: truncated spectral initialization.
//! - [`regularity`]: the amplitude objective, its directional derivatives, wedge sets,
//!   the regularity-constant estimator and Monte-Carlo lemma validators.
//! - [`harness`]: seeded experiment batches, rate fitting, CSV/JSON output and the CLI.
//!
//! Data-parallel loops (trials, Monte-Carlo chunks, direction search) run on rayon when
//! the `parallel` feature is enabled, and sequentially otherwise. Results are identical
//! either way.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod init;
pub mod linalg;
pub mod par;
pub mod regularity;
pub mod rng;
pub mod sensing;
pub mod solver;

pub use error::{Error, Result};
pub use linalg::{dist_phase_aligned, inner, ComplexVector, PhaseAlignedDistance};
pub use num_complex::Complex64;
