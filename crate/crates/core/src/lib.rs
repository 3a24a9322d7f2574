//! Numerical toolkit for the one-dimensional diffusive logistic equation with
//! a Stefan-type free boundary and a sign-changing growth rate `m(x)`.
//!
//! - [`model`]: growth profiles, boundary operator, problem specification.
//! - [`eigen`]: principal eigenvalue, critical length and critical diffusion.
//! - [`frontfix`]: time integration in front-fixed coordinates `y = x / h(t)`.
//! - [`stationary`]: positive equilibria on intervals and on the half line.
//! - [`semiwave`]: semi-wave profiles and the asymptotic front speed.
//! - [`dichotomy`]: spreading/vanishing classification and threshold searches.

pub mod eigen;
pub mod dichotomy;
pub mod error;
pub mod frontfix;
pub mod model;
pub mod numerics;
pub mod semiwave;
pub mod stationary;

pub use error::{Error, Result};
