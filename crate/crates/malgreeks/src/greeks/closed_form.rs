//! Lognormal closed forms for the constant-volatility reduction, used as
//! verification oracles.

use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{EngineError, Result};
use crate::greeks::payoff::Payoff;
use crate::greeks::Greek;

fn norm() -> Normal {
    Normal::new(0.0, 1.0).unwrap()
}

/// Discounted closed-form value of the requested greek under
/// dS/S = r dt + sigma dW. Vega is the standard ∂/∂σ.
pub fn bs_closed_form(
    x0: f64,
    r: f64,
    sigma: f64,
    maturity: f64,
    greek: Greek,
    payoff: Payoff,
) -> Result<f64> {
    if sigma <= 0.0 || maturity <= 0.0 || x0 <= 0.0 {
        return Err(EngineError::UnsupportedCombination(format!(
            "closed form needs x0, sigma, T > 0 (got {x0}, {sigma}, {maturity})"
        )));
    }
    let n = norm();
    let df = (-r * maturity).exp();
    let sqrt_t = maturity.sqrt();

    let strike = match payoff {
        Payoff::Identity => {
            // discounted E[S_T] = x0
            return Ok(match greek {
                Greek::Price => x0,
                Greek::Delta => 1.0,
                Greek::Gamma | Greek::Rho | Greek::Vega => 0.0,
            });
        }
        Payoff::ConstantOne => {
            return Ok(match greek {
                Greek::Price => df,
                Greek::Rho => -maturity * df,
                _ => 0.0,
            });
        }
        other => other.strike().unwrap(),
    };
    if strike <= 0.0 {
        return Err(EngineError::UnsupportedCombination(
            "closed form needs a positive strike".into(),
        ));
    }

    let d1 = ((x0 / strike).ln() + (r + 0.5 * sigma * sigma) * maturity) / (sigma * sqrt_t);
    let d2 = d1 - sigma * sqrt_t;
    let nd1 = n.cdf(d1);
    let nd2 = n.cdf(d2);
    let pd1 = n.pdf(d1);
    let pd2 = n.pdf(d2);

    let value = match (payoff, greek) {
        (Payoff::Call { .. }, Greek::Price) => x0 * nd1 - strike * df * nd2,
        (Payoff::Call { .. }, Greek::Delta) => nd1,
        (Payoff::Call { .. }, Greek::Rho) => strike * maturity * df * nd2,
        (Payoff::Put { .. }, Greek::Price) => strike * df * n.cdf(-d2) - x0 * n.cdf(-d1),
        (Payoff::Put { .. }, Greek::Delta) => nd1 - 1.0,
        (Payoff::Put { .. }, Greek::Rho) => -strike * maturity * df * n.cdf(-d2),
        (Payoff::Call { .. } | Payoff::Put { .. }, Greek::Gamma) => pd1 / (x0 * sigma * sqrt_t),
        (Payoff::Call { .. } | Payoff::Put { .. }, Greek::Vega) => x0 * pd1 * sqrt_t,
        (Payoff::DigitalCall { .. }, Greek::Price) => df * nd2,
        (Payoff::DigitalCall { .. }, Greek::Delta) => df * pd2 / (x0 * sigma * sqrt_t),
        (Payoff::DigitalCall { .. }, Greek::Gamma) => {
            -df * pd2 * d1 / (x0 * x0 * sigma * sigma * maturity)
        }
        (Payoff::DigitalCall { .. }, Greek::Vega) => -df * pd2 * d1 / sigma,
        (Payoff::DigitalCall { .. }, Greek::Rho) => {
            -maturity * df * nd2 + df * pd2 * sqrt_t / sigma
        }
        _ => unreachable!(),
    };
    Ok(value)
}
