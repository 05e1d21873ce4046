//! Numerical laboratory for digital adiabatic state preparation.
//!
//! The crate implements, at desk scale, the full algorithmic stack behind
//! adiabatic eigenstate preparation driven by a discretised continuation
//! generator:
//!
//! - dense complex Hermitian linear-algebra oracles ([`linalg`]),
//! - the linear interpolation `H(s) = (1-s) H0 + s H1` and its block-encoding
//!   combinators ([`family`]),
//! - the Gaussian-integral filter, the exact and discretised continuation
//!   operators, their residual and discretisation bounds, and sufficient
//!   parameter selection ([`qac`]),
//! - truncated-Dyson propagation and the segmented evolution pipeline
//!   ([`dyson`]),
//! - fixed-point special-function kernels with arithmetic-cost accounting
//!   ([`fixed_point`]),
//! - amplitude encoding of the filter weights by conditional-rotation
//!   cascades ([`state_prep`]),
//! - gap-adaptive scheduling ([`schedule`]),
//! - ground-state preparation by constant-error adiabatic evolution, energy
//!   bisection and eigenstate filtering ([`ground_state`]),
//! - query/gate/qubit cost estimation ([`estimate`]), and
//! - seeded model generators for experiments ([`models`]).
//!
//! All operations are pure functions of immutable inputs and safe to share
//! across threads.

pub mod dyson;
pub mod error;
pub mod estimate;
pub mod family;
pub mod fixed_point;
pub mod ground_state;
pub mod linalg;
pub mod models;
pub mod qac;
pub mod schedule;
pub mod state_prep;

pub use error::{QacError, Result};
pub use family::{BlockEncodingDescriptor, InterpolationFamily};
pub use linalg::{HermitianOperator, SpectralDecomposition, StateVector};
pub use qac::{QacParams, WeightTable};
