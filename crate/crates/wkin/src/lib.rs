//! Numerical and combinatorial laboratory for the discrete nonlinear
//! Schrödinger lattice with Gibbs-distributed initial data.
//!
//! The crate is organised bottom-up: [`lattice`] provides the periodic
//! lattice and its Fourier transforms, [`dispersion`] the dispersion relation
//! and free propagator, [`gibbs`] the equilibrium sampler, [`dynamics`] the
//! split-step integrator, [`kinetics`] the predicted decay rate and collision
//! operator, [`graphs`] the Duhamel-graph combinatorics and [`harness`] the
//! experiment orchestration used by the command-line front end.

pub mod dynamics;
pub mod error;
pub mod dispersion;
pub mod lattice;
pub mod gibbs;
pub mod graphs;
pub mod harness;
pub mod kinetics;
pub mod numerics;
pub mod stats;

pub use error::{Error, Result};
