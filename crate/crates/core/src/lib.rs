//! Estimation of phase-randomized displacement and squeezing strengths with
//! Fock-state probes and photon-number-resolving detection.

pub mod channels;
pub mod cli;
pub mod error;
pub mod fisher;
pub mod gaussian;
pub mod hilbert;
pub mod mle;

pub use error::{Error, Result};
