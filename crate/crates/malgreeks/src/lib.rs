//! Monte Carlo pricing and Greeks for two-factor stochastic volatility
//! models, with sensitivities computed by integration-by-parts weights
//! assembled from per-path first-variation processes.
//!
//! The crate is organized along the pipeline:
//!
//! - [`model`]: coefficient functions of the two-factor dynamics, built-in
//!   instances (`bs_constant`, `scott_exp`), validation.
//! - [`path`] / [`rng`]: time grids, counter-based per-path random streams
//!   and Euler / log-Euler trajectories.
//! - [`malliavin`]: per-path derivative objects (first variation, kernel
//!   G(t, T) and its shock-derivatives, Skorohod integral) via two
//!   backends: discretized closed forms or exact scheme tangents.
//! - [`greeks`]: weight assemblies for Delta/Gamma/Rho/Vega, Monte Carlo
//!   estimators, finite-difference and closed-form oracles.
//! - [`report`]: CSV/JSON rows and cross-method comparison tables.

#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod greeks;
pub mod malliavin;
pub mod model;
pub mod path;
pub mod report;
pub mod rng;

pub use error::{EngineError, Result};
pub use greeks::{
    bs_closed_form, estimate, EstimatorConfig, FdConfig, Greek, GreekEstimate, Method, Payoff,
    WeightMode,
};
pub use malliavin::{Backend, MalliavinCache, MalliavinOptions, Region, WeightKernel};
pub use model::{Convention, ModelConfig, ModelSpec, Surface, TimeFn};
pub use path::{PathBundle, TimeGrid};
pub use rng::RngStream;
