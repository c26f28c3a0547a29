//! Asymptotic invariants of asymptotically flat and asymptotically
//! hyperbolic Riemannian metrics.
//!
//! The crate computes the classical flux definitions of the mass and center
//! of mass, the general charge `𝕌(V, g, b)` against a background `b`, and the
//! Einstein-tensor fluxes paired with conformal Killing fields, then
//! extrapolates them to infinite radius. The [`verify`] module checks the
//! integrated Bianchi (Pohozaev-type) identity, the conformal-Killing kernel
//! identity on Einstein metrics, and the agreement of both families of
//! invariants.

pub mod catalog;
pub mod charges;
pub mod chart;
pub mod config;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod limits;
pub mod quadrature;
pub mod run;
pub mod verify;

pub use error::{Error, Result};

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 6;

pub type Arr1 = [f64; MAX_DIM];
pub type Arr2 = [[f64; MAX_DIM]; MAX_DIM];
pub type Arr3 = [[[f64; MAX_DIM]; MAX_DIM]; MAX_DIM];
pub type Arr4 = [[[[f64; MAX_DIM]; MAX_DIM]; MAX_DIM]; MAX_DIM];
