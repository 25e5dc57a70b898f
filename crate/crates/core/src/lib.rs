//! Statevector simulation of monitored random circuits with weak measurements,
//! plus the analysis needed to locate and characterize the
//! measurement-induced entanglement transition.

pub mod circuit;
pub mod cli;
pub mod error;
pub mod gates;
pub mod lyapunov;
pub mod observables;
pub mod qstate;
pub mod scaling;
pub mod stats;
pub mod weakmeas;

pub use error::{Error, Result};
