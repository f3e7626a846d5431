//! Gaussian simulation of atomic spin ensembles probed by off-resonant light.
//!
//! Two oppositely polarized vapour cells are entangled by a QND light pulse
//! and the entanglement is verified with a second pulse. The crate provides
//! an exact Gaussian-state engine, a physical calibration layer, a
//! time-domain stochastic integrator used as an independent oracle, a
//! Monte Carlo driver for measurement cycles, and teleportation, swapping
//! and memory protocols built on the same interaction.
//!
//! All quadratures use canonical units with vacuum variance 1/2.

pub mod error;
pub mod experiment;
pub mod gaussian;
pub mod physics;
pub mod protocols;
pub mod rng;
pub mod stats;
pub mod time_domain;

pub use error::{Error, Result};
pub use gaussian::{vacuum_state, GaussianState, MeasurementOutcome, ModeRef, Quadrature};
pub use physics::{Calibration, PhysicalParams};
