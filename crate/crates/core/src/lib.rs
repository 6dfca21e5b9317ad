//! Simulation and calibration toolkit for coupled human-capability / AI-delegation
//! dynamics.
//!
//! The crate is organised bottom-up:
//!
//! - [`ode`]: mean-field dynamics, fixed points, nullclines, basins, recovery times
//!   and the two-skill extension.
//! - [`abm`]: the stochastic agent-based model with crisis, mandatory-practice and
//!   turnover mechanics.
//! - [`sweep`]: parallel, reproducible Monte Carlo sweeps (K* detection, heatmaps,
//!   antifragility and policy curves, sensitivity suites, parameter-space grids).
//! - [`estimation`]: decay-rate calibration, PISA single/panel fits, profile
//!   likelihood, alternative models and information-criterion comparison.
//!
//! Every stochastic entry point is driven by [`rng::SimRng`] and a 64-bit seed, so
//! results are bit-reproducible independent of the number of worker threads.

pub mod abm;
pub mod error;
pub mod estimation;
pub mod ode;
pub mod rng;
pub mod stats;
pub mod sweep;

pub use error::{Error, Result};
pub use ode::{ModelParams, ScopeMode, SystemState};
