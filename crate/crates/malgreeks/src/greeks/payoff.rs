//! European payoff functions f(S_T).

use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Payoff {
    Call { strike: f64 },
    Put { strike: f64 },
    DigitalCall { strike: f64 },
    Identity,
    ConstantOne,
}

impl Payoff {
    pub fn parse(kind: &str, strike: f64) -> Result<Self> {
        match kind {
            "call" => Ok(Payoff::Call { strike }),
            "put" => Ok(Payoff::Put { strike }),
            "digital-call" => Ok(Payoff::DigitalCall { strike }),
            "identity" => Ok(Payoff::Identity),
            "constant-one" => Ok(Payoff::ConstantOne),
            other => Err(EngineError::config(
                "payoff",
                format!("unknown payoff kind `{other}` (call, put, digital-call, identity, constant-one)"),
            )),
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            Payoff::Call { strike } => (s - strike).max(0.0),
            Payoff::Put { strike } => (strike - s).max(0.0),
            Payoff::DigitalCall { strike } => {
                if s >= strike {
                    1.0
                } else {
                    0.0
                }
            }
            Payoff::Identity => s,
            Payoff::ConstantOne => 1.0,
        }
    }

    /// Almost-everywhere derivative, for pathwise estimators. `None` when
    /// the payoff has no Lipschitz version (the digital).
    pub fn derivative(&self, s: f64) -> Option<f64> {
        match *self {
            Payoff::Call { strike } => Some(if s >= strike { 1.0 } else { 0.0 }),
            Payoff::Put { strike } => Some(if s <= strike { -1.0 } else { 0.0 }),
            Payoff::DigitalCall { .. } => None,
            Payoff::Identity => Some(1.0),
            Payoff::ConstantOne => Some(0.0),
        }
    }

    pub fn strike(&self) -> Option<f64> {
        match *self {
            Payoff::Call { strike }
            | Payoff::Put { strike }
            | Payoff::DigitalCall { strike } => Some(strike),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Payoff::Call { .. } => "call",
            Payoff::Put { .. } => "put",
            Payoff::DigitalCall { .. } => "digital-call",
            Payoff::Identity => "identity",
            Payoff::ConstantOne => "constant-one",
        }
    }
}
