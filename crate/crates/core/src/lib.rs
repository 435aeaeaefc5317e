//! Simulation and success-probability analysis of heralded entanglement
//! between two quantum-dot spin qubits driven by EPR light.
//!
//! The physical pipeline is [`gaussian`] (source) → [`dynamics`] (dot
//! scattering) → [`optics`] (beam splitter and counting) → [`entanglement`]
//! (post-selected qubit state). [`analysis`] holds the closed-form and
//! series results for outcome and success probabilities that the pipeline is
//! checked against.

pub mod analysis;
pub mod cli;
pub mod dynamics;
pub mod entanglement;
pub mod error;
pub mod fock;
pub mod gaussian;
pub mod optics;

pub use error::{Error, Result};
