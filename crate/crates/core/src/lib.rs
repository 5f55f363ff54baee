//! Numerical toolkit for reduced bienergy functionals of equivariant maps.
//!
//! A reduced problem is a one-dimensional functional `E(alpha) = ∫ L(t, alpha,
//! alpha', alpha'') dt`. Its critical points satisfy the fourth-order equation
//! `L_x - (L_p)' + (L_q)'' = 0`. The crate provides:
//!
//! - [`lagrangian`]: the catalog of reduced Lagrangians with exact partials,
//! - [`euler_lagrange`]: residuals along curves and the discretized functional,
//! - [`solver`]: damped Newton search for discrete critical points,
//! - [`stability`]: spectral classification of critical points,
//! - [`closed_form`]: exponential-polynomial solution families.

pub mod banded;
pub mod cli;
pub mod closed_form;
pub mod config;
pub mod error;
pub mod euler_lagrange;
pub mod lagrangian;
pub mod solver;
pub mod spline;
pub mod stability;
pub mod verify;

pub use error::{BiharmError, Result};
