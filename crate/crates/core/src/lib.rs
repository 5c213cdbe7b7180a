//! Synchronizing feedback gains for networks of identical neutrally stable
//! linear systems coupled over a fixed directed graph.
//!
//! The crate is organized bottom-up:
//!
//! * [`linalg`]: dense kernels (matrix exponential, spectra, PBH tests,
//!   modal split, Sylvester/Lyapunov solvers).
//! * [`network`]: coupling matrices, connectivity, the left stationary
//!   vector and a Lyapunov certificate for `Γ − 𝟙rᵀ`.
//! * [`synthesis`]: the time-averaged Gram matrix and the output- and
//!   state-feedback gain constructions.
//! * [`simulator`]: stacked closed loop `I⊗A + Γ⊗M`, integration, the
//!   reference trajectory and error metrics.

pub mod error;
pub mod linalg;
pub mod network;
pub mod random;
pub mod simulator;
pub mod synthesis;

pub use error::{Assumption, Error, Result};
pub use linalg::RealMatrix;

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
struct ReadmeDoctests;
