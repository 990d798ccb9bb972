//! Preintegration of Gaussian integrals with discontinuous integrands.
//!
//! The integrals have the form `∫_{ℝ^d} ind(φ(y) − t) ρ_d(y) dy` with `ρ_d`
//! the standard normal product density. Integrating out one coordinate
//! `y_j` first (see [`preintegrate`]) leaves a `(d−1)`-dimensional integrand
//! that is smooth when `φ` is monotone in `y_j`, and has square-root type
//! singularities when it is not (see [`singularity`]). The [`asian`] module
//! builds the digital Asian option used to compare both choices under
//! randomly shifted lattice rules ([`qmc`]). [`experiments`] holds the
//! batch runs and CSV writers used by the command-line tool.
//!
//! Axis indices are zero based throughout the library.

// `!(x > 0.0)` is used deliberately to reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod asian;
pub mod error;
pub mod experiments;
pub mod integrand;
pub mod normal;
pub mod preintegrate;
pub mod qmc;
pub mod quadrature;
pub mod roots;
pub mod singularity;

pub use error::{Error, Result};
