//! Learning physically consistent Lindblad generators for the reduced
//! dynamics of a two-spin subsystem embedded in an interacting spin chain.
//!
//! The crate is organised bottom-up:
//!
//! * [`spin_algebra`] builds the Hermitian operator basis and converts between
//!   density matrices and real coherence vectors.
//! * [`many_body`] simulates the full chain exactly and produces reduced
//!   trajectories ([`trajectory::Trajectory`]).
//! * [`generator`] maps the variational parameters `(omega, X, Y)` onto a real
//!   generator matrix acting on coherence vectors, and analyses it.
//! * [`trainer`] fits those parameters to trajectory data with Adam.
//! * [`metrics`] quantifies how well learned dynamics track exact dynamics.
//! * [`pipeline`] wires the pieces into the generate/train/evaluate workflow.

// `!(x > 0.0)` style guards reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod generator;
pub mod many_body;
pub mod metrics;
pub mod parallel;
pub mod pipeline;
pub mod spin_algebra;
pub mod trainer;
pub mod trajectory;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense real matrix.
pub type RMatrix = nalgebra::DMatrix<f64>;
/// Dense real vector.
pub type RVector = nalgebra::DVector<f64>;
