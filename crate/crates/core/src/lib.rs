//! Design and simulation models for spin-ensemble microwave quantum memories
//! and pulsed-ESR sensitivity.
//!
//! Internal rates and frequencies are angular (rad/s); the public API takes
//! and returns Hz where the names say so (`*_hz`, `frequency`, `dfdb`).

pub mod constants;
pub mod ensemble;
pub mod error;
pub mod linalg;
pub mod memory;
pub mod resonator;
pub mod sensitivity;
pub mod spinsys;

pub use error::{Error, Result};
