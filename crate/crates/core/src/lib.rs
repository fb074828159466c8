//! Conforming mixed finite-element approximations of reaction-convection-diffusion
//! problems, together with functional error equalities and two-sided bounds that hold
//! for any conforming approximation pair.
//!
//! The crate is organised bottom-up: [`mesh`] and [`fem`] provide the discrete spaces
//! and quadrature, [`coefficients`] the problem data and regime checks, [`solver`] the
//! Galerkin solve and flux reconstructions, [`functionals`] the error measures and
//! majorants, and [`oracle`] manufactured solutions with an independent reference
//! evaluator.

pub mod coefficients;
pub mod error;
pub mod expr;
pub mod fem;
pub mod functionals;
pub mod mesh;
pub mod oracle;
pub mod solver;

pub use error::{Error, Result};
