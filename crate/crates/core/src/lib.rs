//! Kuramoto-type oscillators on graphs generated from graphons, and the
//! mean-field transport equation they converge to.
//!
//! - [`graphon`]: kernels on the unit square, cell averaging, kernel distances.
//! - [`graph`]: deterministic weighted graphs and W-random graphs.
//! - [`dynamics`]: the finite oscillator systems, RK4 integration, diagnostics.
//! - [`measure`]: probability measures on the circle and the distances between them.
//! - [`meanfield`]: particle, Picard and finite-volume solvers for the mean-field equation.

pub mod dynamics;
pub mod error;
pub mod graph;
pub mod graphon;
pub mod io;
pub mod meanfield;
pub mod measure;

pub use error::{Error, Result};

/// `2π`.
pub const TAU: f64 = std::f64::consts::TAU;
