//! Hybrid beamforming with movable sub-connected antenna arrays.
//!
//! The solver alternates between slack variables, the digital precoder, the
//! analog phase shifters and the sub-array positions. Fixed-array and
//! fully-connected baselines plus a grid-search bound live in [`baselines`];
//! Monte-Carlo sweeps live in [`harness`].

pub mod baselines;
pub mod channel;
pub mod error;
pub mod fp;
pub mod harness;
pub mod linalg;
pub mod orchestrator;
pub mod positioning;
pub mod units;

pub use error::{Error, Result};
pub use orchestrator::{solve, RunResult, SolverConfig};
