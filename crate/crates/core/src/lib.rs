//! Monte Carlo laboratory for sticky-point diffusions.
//!
//! Two independent constructions of the same process are provided: an exact
//! time change of a lattice random walk ([`time_change`]) and an Euler–Maruyama
//! discretization of a diffusion with a narrow low-volatility band
//! ([`regularized_sde`]). [`speed_measure`] supplies the closed-form Green-kernel
//! values they are checked against, and [`coupling`] runs the coupled-pair
//! experiments that exhibit the failure of pathwise uniqueness.

pub mod config;
pub mod coupling;
pub mod error;
pub mod kv;
pub mod regularized_sde;
pub mod lattice_walk;
mod quadrature;
pub mod rng;
pub mod speed_measure;
pub mod stats;
pub mod time_change;
pub mod verify;

pub use error::{Error, Result};
