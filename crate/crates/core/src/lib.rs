//! Bounds, relaxations and exact checks for the maximal correlated decay rate of
//! dipole-coupled two-level emitters.
//!
//! Lengths are in units of the resonant wavelength and rates in units of the
//! single-emitter decay rate, unless a module states otherwise.

pub mod analyze;
pub mod bounds;
pub mod error;
pub mod exact;
pub mod green;
pub mod kspace;
pub mod lattice;
pub mod rydberg;
pub mod scaling;
pub mod sdp;
pub mod spectral;

pub use error::{Error, Result};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
