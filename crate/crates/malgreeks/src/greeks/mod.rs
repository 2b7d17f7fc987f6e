//! Greek estimation: payoffs, weight assemblies, Monte Carlo drivers and
//! the closed-form oracle.

pub mod closed_form;
pub mod estimator;
pub mod payoff;
pub mod weights;

pub use closed_form::bs_closed_form;
pub use estimator::{estimate, EstimatorConfig, FdConfig, Greek, GreekEstimate, Method};
pub use payoff::Payoff;
pub use weights::{delta_weight, gamma_weight, generic_ibp_weight, rho_vega_weight, WeightMode};
