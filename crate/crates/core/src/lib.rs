//! Simulation and numerical-verification toolkit for the simple random walk
//! on the two-dimensional comb lattice.
//!
//! The crate is split along the lines of the computation:
//!
//! * [`rng`] – seed-stable, splittable random streams.
//! * [`walk`] – comb geometry and the direct sampler.
//! * [`localtime`] – local times, return times and excursion signing for
//!   one-dimensional simple walks.
//! * [`coupling`] – the comb walk assembled from two simple walks and a
//!   geometric sequence.
//! * [`quadrature`] / [`densities`] – limiting densities evaluated by
//!   adaptive Gauss–Kronrod quadrature.
//! * [`limitset`] – the joint limit-point domain and energy functionals.
//! * [`experiments`] – Monte Carlo checks producing JSON test reports.

pub mod coupling;
pub mod densities;
pub mod error;
pub mod experiments;
pub mod format;
pub mod limitset;
pub mod localtime;
pub mod quadrature;
pub mod rng;
pub mod walk;

pub use error::{Error, Result};
pub use rng::RngStream;
pub use walk::{CombPath, SimpleWalkPath, Site};
