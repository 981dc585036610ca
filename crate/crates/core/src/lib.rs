//! Power allocation for OFDM rate-splitting full-duplex relaying under
//! hardware distortion, imperfect channel knowledge and residual
//! self-interference.
//!
//! The pipeline is `channel` (realizations and MRT precoders) into
//! `distortion` (per-subcarrier rate coefficients) into `rates` (exact rates
//! and their concave lower bounds) into `solver` (successive inner
//! approximation). `benchmarks` holds the comparison schemes, `oracle` reference
//! optima for checking the solver and `harness` the Monte Carlo sweeps and CLI.

pub mod benchmarks;
pub mod channel;
pub mod distortion;
pub mod error;
pub mod harness;
pub mod oracle;
pub mod rates;
pub mod solver;

pub use error::{Error, Result};
