//! Link-level simulator and analytic rate bounds for the secrecy performance
//! of a massive MIMO downlink whose base station and terminals suffer from
//! Wiener (random-walk) oscillator phase noise.
//!
//! The base station acquires CSI from uplink pilots, precodes data with a
//! matched filter and fills the remaining spatial dimensions with artificial
//! noise projected onto the null space of the estimated user channels. A
//! passive multi-antenna eavesdropper with ideal hardware tries to decode one
//! terminal's stream. The crate provides two independent evaluation routes
//! for the resulting ergodic secrecy rate:
//!
//! * [`bounds`] — closed-form lower bounds on the per-terminal rate, a
//!   closed-form upper bound on the eavesdropper capacity, and a grid
//!   optimizer for the data/noise power split;
//! * [`montecarlo`] — direct simulation of training, estimation, precoding
//!   and transmission, estimating every expectation that appears in the
//!   analytic SINR, with standard errors.
//!
//! Cross-validating the two routes is the point: `montecarlo` is the oracle
//! for `bounds`, and the `validate` flow of the companion CLI reports the
//! agreement gap.

pub mod bounds;
pub mod config;
pub mod linalg;
pub mod montecarlo;
pub mod precoding;
pub mod stochastic;
pub mod training;

mod error;

pub use config::{auto_t_grid, PilotDesign, SystemConfig, ValidatedConfig};
pub use error::{ConfigError, Error};
pub use montecarlo::{McRun, MomentEstimates, SecrecyReport};
pub use training::PilotSet;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
