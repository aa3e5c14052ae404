//! Simulation and analysis toolkit for cavity-enhanced Raman emission from a
//! single Λ-system emitter coupled to an optical cavity and a phonon bath.
//!
//! Conventions used throughout the crate:
//!
//! * Every frequency crossing a public boundary is an ordinary frequency in
//!   GHz (an angular frequency divided by 2π).
//! * Dynamics run in angular units: rad/ns for rates and Hamiltonians, ns for
//!   time. The factor 2π is applied explicitly wherever the two meet.
//! * The truncated basis is `[|g1,0>, |g2,0>, |g2,1>, |e,0>]` (indices 0..3).
//! * Density matrices are vectorized by column stacking.

// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod fit;
pub mod linalg;
pub mod liouvillian;
pub mod model;
pub mod ode;
pub mod oracle;
pub mod rates;
pub mod spectrum;

pub use error::{Error, Result};
pub use liouvillian::{DensityMatrix, Superoperator};
pub use model::{DressedStates, ModelParams};
pub use spectrum::Spectrum;

/// 2π, the conversion factor from GHz to rad/ns.
pub const TWO_PI: f64 = std::f64::consts::TAU;
