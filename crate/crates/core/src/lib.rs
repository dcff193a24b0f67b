//! Simulation and verification toolkit for reaction-diffusion-mutation
//! equations on the `(space, trait)` plane, where the trait sets the spatial
//! diffusivity: `u_t = θ u_xx + u_θθ + f(u)`.
//!
//! The crate covers the Cauchy problem (local and nonlocal reactions), front
//! tracking and spreading-exponent fits, the steady disc/annulus problems in
//! the moving frame, and the moving-bump sub-solution with its two checks
//! (normal-derivative ordering and domination by the solution).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evolve;
pub mod frame;
pub mod fronts;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod model;
pub mod operators;
pub mod steady;
pub mod subsolution;
pub mod trajectory;

pub use error::{Error, Result};
pub use grid::{Field, GridSpec};
pub use model::{ModelParams, ModifiedBistable, Reaction};
