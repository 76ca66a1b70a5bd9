//! Numerical core for graphical Lagrangian mean curvature flow over flat-torus
//! and round-sphere bases.
//!
//! The evolving object is a scalar potential `u` on the base; its covariant
//! Hessian paired with the base metric defines a phase angle, and the flow
//! moves `u` by that angle. This crate provides the base geometries, finite
//! difference covariant calculus, the angle and its monitor quantities, the
//! time stepper, and independent oracles used to cross-check all of it.

pub mod atlas;
pub mod error;
pub mod flow;
pub mod grid;
pub mod initial;
pub mod jet;
pub mod lagrangian;
pub mod linalg;
pub mod oracles;
pub mod stencil;

pub use error::{Error, Result};
