//! Locating complex partition-function zeroes of classical Ising models
//! through return probabilities of quantum circuits.
//!
//! The crate compiles an [`IsingModel`] with complex couplings into one of two
//! measurement protocols (a general ancilla-gadget scheme and a kicked
//! transverse-field scheme for cylinders), simulates the circuits, and relates
//! the measured return probability to `|Z|²`. Exact oracles, zero finders,
//! projection-noise simulation and correlation estimators are built on top.

pub mod circuit;
pub mod correlation;
pub mod error;
pub mod logc;
pub mod model;
pub mod noise;
pub mod oracle;
pub mod statevector;
pub mod zeros;

pub use error::{Error, Result};
pub use logc::LogComplex;
pub use model::{build_chain, build_cylinder, build_cylinder_merged, IsingModel};
