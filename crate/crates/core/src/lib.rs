//! Classical hydrogen-like atom driven by a synthesized zero-point field.
//!
//! The electron obeys the order-reduced Abraham-Lorentz equation with an
//! optional stochastic electromagnetic field built as a finite sum of
//! Gaussian-amplitude modes whose spectrum follows `ρ(ω) = ħω³/2π²c³`.
//! Everything here is pure computation in atomic units (`ħ = m = e = 1`,
//! `c = 1/α`) and only needs `alloc`; file formats, the command line and
//! parallel ensembles live in the `sed-sim` crate.
//!
//! Module map:
//!
//! - [`units`]: constants, SI conversion and Z-scaled Bohr reporting.
//! - [`config`]: the simulation configuration and its validation.
//! - [`rng`]: counter-based Gaussian streams keyed on `(seed, stream)`.
//! - [`field`]: mode synthesis, evaluation, the interpolating cache and
//!   the spectral oracles.
//! - [`dynamics`]: forces and the fixed/adaptive RK4 integrators.
//! - [`orbit`]: osculating Kepler elements and the analytic propagator.
//! - [`quantum`]: the ground-state reference distribution and levels.
//! - [`diagnostics`]: traces, time-weighted histograms, detectors, KS.
//! - [`runner`]: trajectories, checkpointable run state and ensembles.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod config;
pub mod diagnostics;
pub mod dynamics;
pub mod field;
pub mod orbit;
pub mod quad;
pub mod quantum;
pub mod rng;
pub mod runner;
pub mod units;

pub use glam::DVec3;
