//! Numerical laboratory for the BGK relaxation model of isentropic gas dynamics
//!
//! The kinetic equation
//!
//! ```text
//! ∂t F + v·∇x F = (M[F] − F) / ε
//! ```
//!
//! is posed on the periodic torus with a compactly supported power-law
//! equilibrium `M[F]`. The crate provides
//!
//! - [`equilibrium`]: model constants, the Maxwellian, velocity quadrature,
//!   moments and kinetic entropy
//! - [`discretization`]: periodic spatial grid, phase-space fields, central
//!   difference stencils and the binary snapshot format
//! - [`perturbation`]: the weighted perturbation `F = M0 + M0^w f`, the
//!   orthonormal basis of the hydrodynamic subspace, the projection `P`, the
//!   linear operator `L = P − I` and the nonlinear remainder `Γ`
//! - [`solver`]: transport/relaxation splitting with an exactly conservative
//!   exponential relaxation step
//! - [`diagnostics`]: energy functional, coercivity, macro-micro report,
//!   decay-rate fit and conservation ledgers
//! - [`euler_ref`]: finite-volume solver for the limiting isentropic Euler system
//! - [`config`] and [`experiments`]: the run configuration and the drivers
//!   behind the `isobgk` command-line tool

// `!(x > 0.0)` is used on purpose so that NaN is rejected along with
// non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod diagnostics;
pub mod discretization;
pub mod equilibrium;
mod error;
pub mod euler_ref;
pub mod experiments;
pub mod numeric;
pub mod output;
pub mod perturbation;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};

/// Largest supported physical dimension.
pub const MAX_DIM: usize = 3;

/// Fixed-size velocity or position vector; components beyond the model
/// dimension are zero.
pub type Vector = [f64; MAX_DIM];
