//! Two-factor model coefficients and built-in model instances.
//!
//! The risky asset follows, under the pricing measure,
//!
//! ```text
//! dS_t/S_t = r_t dt + sigma(t, Y_t) dW_t
//! dY_t     = a(t, Y_t) dt + rho * sigY_t dW_t + sigY_t dW'_t
//! a(t, y)  = muY_t + sigY_t * (r_t - mu_t) / sigma(t, y) + beta(t, y) * sigY_t
//! ```
//!
//! with deterministic `r`, `mu`, `muY`, `sigY` and a volatility surface
//! `sigma(t, y)` supplied together with its y-partials up to order 3.
//! `beta(t, y)` is the market price of volatility risk, a free input of the
//! incomplete market.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};

/// Volatility floor below which (r−μ)/σ is treated as a hard error.
pub const DEFAULT_VOL_FLOOR: f64 = 1e-12;

/// Deterministic function of time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum TimeFn {
    Constant(f64),
    /// Right-open steps: value `values[k]` on `[times[k], times[k+1])`,
    /// `values[0]` before `times[0]`, last value afterwards.
    Piecewise { times: Vec<f64>, values: Vec<f64> },
}

impl TimeFn {
    pub fn constant(v: f64) -> Self {
        TimeFn::Constant(v)
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeFn::Constant(v) => *v,
            TimeFn::Piecewise { times, values } => {
                let mut idx = 0;
                while idx < times.len() && t >= times[idx] {
                    idx += 1;
                }
                values[idx.min(values.len() - 1)]
            }
        }
    }
}

/// A surface `(t, y) -> f(t, y)` carrying its own y-partials up to order 3.
#[derive(Clone)]
pub enum Surface {
    /// f = c; all y-partials vanish.
    Constant(f64),
    /// f = level * e^y; every y-partial equals the surface itself.
    ExpLevel { level: f64 },
    /// f = intercept + slope * y.
    LinearY { intercept: f64, slope: f64 },
    /// Arbitrary evaluator of (t, y, order).
    Custom(Arc<dyn Fn(f64, f64, u8) -> f64 + Send + Sync>),
}

impl Surface {
    /// Evaluate the order-`k` y-partial (k = 0 is the surface itself).
    pub fn eval(&self, t: f64, y: f64, order: u8) -> f64 {
        debug_assert!(order <= 3);
        match self {
            Surface::Constant(c) => {
                if order == 0 {
                    *c
                } else {
                    0.0
                }
            }
            Surface::ExpLevel { level } => level * y.exp(),
            Surface::LinearY { intercept, slope } => match order {
                0 => intercept + slope * y,
                1 => *slope,
                _ => 0.0,
            },
            Surface::Custom(f) => f(t, y, order),
        }
    }
}

impl fmt::Debug for Surface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Surface::Constant(c) => write!(f, "Constant({c})"),
            Surface::ExpLevel { level } => write!(f, "ExpLevel({level})"),
            Surface::LinearY { intercept, slope } => {
                write!(f, "LinearY({intercept} + {slope}*y)")
            }
            Surface::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Which form of the y-derivatives of the Q-drift of Y to use.
///
/// `ChainRule` differentiates (r−μ)/σ(t,y) honestly. `PaperLiteral`
/// reproduces the printed first-variation exponent, which drops the
/// ∂σ/∂y factor (and its higher-order analogues: the k-th derivative of
/// 1/σ^m is taken as if ∂σ/∂y were 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    #[default]
    ChainRule,
    PaperLiteral,
}

/// Full coefficient set of the two-factor model.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    /// Initial asset price S_0 > 0.
    pub x0: f64,
    /// Initial volatility-factor value Y_0.
    pub y0: f64,
    /// Horizon T > 0 in years.
    pub maturity: f64,
    /// Deterministic interest rate r_t.
    pub rate: TimeFn,
    /// Real-world asset drift mu_t (enters the Q-dynamics of Y only).
    pub drift: TimeFn,
    /// Deterministic drift muY_t of Y.
    pub y_drift: TimeFn,
    /// Deterministic diffusion sigY_t of Y.
    pub y_vol: TimeFn,
    /// Correlation loading of Y on W.
    pub rho: f64,
    /// Volatility surface sigma(t, y) with y-partials to order 3.
    pub sigma: Surface,
    /// Market price of volatility risk beta(t, y) with y-partials to order 3.
    pub beta: Surface,
    /// Hard floor on |sigma|.
    pub vol_floor: f64,
}

impl ModelSpec {
    /// Deterministic-volatility reduction: sigma ≡ sigma0, sigY ≡ 0.
    pub fn bs_constant(x0: f64, sigma0: f64, r: f64) -> Self {
        ModelSpec {
            x0,
            y0: 0.0,
            maturity: 1.0,
            rate: TimeFn::constant(r),
            drift: TimeFn::constant(r),
            y_drift: TimeFn::constant(0.0),
            y_vol: TimeFn::constant(0.0),
            rho: 0.0,
            sigma: Surface::Constant(sigma0),
            beta: Surface::Constant(0.0),
            vol_floor: DEFAULT_VOL_FLOOR,
        }
    }

    /// Exponential-factor model: sigma(t,y) = sigma_bar * e^y,
    /// muY ≡ 0, sigY ≡ nu, beta(t,y) = b0 + b1*y.
    #[allow(clippy::too_many_arguments)]
    pub fn scott_exp(
        x0: f64,
        y0: f64,
        sigma_bar: f64,
        nu: f64,
        rho: f64,
        r: f64,
        mu: f64,
        b0: f64,
        b1: f64,
    ) -> Self {
        ModelSpec {
            x0,
            y0,
            maturity: 1.0,
            rate: TimeFn::constant(r),
            drift: TimeFn::constant(mu),
            y_drift: TimeFn::constant(0.0),
            y_vol: TimeFn::constant(nu),
            rho,
            sigma: Surface::ExpLevel { level: sigma_bar },
            beta: Surface::LinearY {
                intercept: b0,
                slope: b1,
            },
            vol_floor: DEFAULT_VOL_FLOOR,
        }
    }

    pub fn with_maturity(mut self, maturity: f64) -> Self {
        self.maturity = maturity;
        self
    }

    /// `(sigma0, r)` when this is a constant-volatility reduction
    /// (constant sigma, constant rate, sigY ≡ 0), else `None`.
    pub fn as_bs_constant(&self) -> Option<(f64, f64)> {
        match (&self.sigma, &self.y_vol, &self.rate) {
            (Surface::Constant(s), TimeFn::Constant(nu), TimeFn::Constant(r)) if *nu == 0.0 => {
                Some((*s, *r))
            }
            _ => None,
        }
    }

    /// sigma(t, y) with the degeneracy floor applied.
    pub fn sigma_checked(&self, t: f64, y: f64) -> Result<f64> {
        let s = self.sigma.eval(t, y, 0);
        if s.abs() < self.vol_floor {
            return Err(EngineError::DegenerateVolatility {
                t,
                y,
                value: s,
                floor: self.vol_floor,
            });
        }
        Ok(s)
    }

    /// Drift of Y under the pricing measure:
    /// muY + sigY * (r−μ)/σ + β * sigY.
    pub fn q_drift_y(&self, t: f64, y: f64) -> Result<f64> {
        let nu = self.y_vol.eval(t);
        if nu == 0.0 {
            return Ok(self.y_drift.eval(t));
        }
        let s = self.sigma_checked(t, y)?;
        let rm = self.rate.eval(t) - self.drift.eval(t);
        Ok(self.y_drift.eval(t) + nu * (rm / s + self.beta.eval(t, y, 0)))
    }

    /// Order-k y-partial of [`Self::q_drift_y`], k in 1..=3, under the
    /// selected convention.
    pub fn q_drift_y_partial(&self, t: f64, y: f64, order: u8, conv: Convention) -> Result<f64> {
        if order == 0 {
            return self.q_drift_y(t, y);
        }
        if order > 3 {
            return Err(EngineError::UnsupportedOrder { order });
        }
        let nu = self.y_vol.eval(t);
        if nu == 0.0 {
            return Ok(0.0);
        }
        let s = self.sigma_checked(t, y)?;
        let rm = self.rate.eval(t) - self.drift.eval(t);
        let psi = match conv {
            Convention::ChainRule => {
                let s1 = self.sigma.eval(t, y, 1);
                match order {
                    1 => -rm * s1 / (s * s),
                    2 => {
                        let s2 = self.sigma.eval(t, y, 2);
                        rm * (2.0 * s1 * s1 - s * s2) / (s * s * s)
                    }
                    _ => {
                        let s2 = self.sigma.eval(t, y, 2);
                        let s3 = self.sigma.eval(t, y, 3);
                        rm * (6.0 * s * s1 * s2 - 6.0 * s1 * s1 * s1 - s * s * s3) / (s * s * s * s)
                    }
                }
            }
            // (-1)^k k! (r-mu)/sigma^{k+1}, the printed form.
            Convention::PaperLiteral => match order {
                1 => -rm / (s * s),
                2 => 2.0 * rm / (s * s * s),
                _ => -6.0 * rm / (s * s * s * s),
            },
        };
        Ok(nu * (psi + self.beta.eval(t, y, order)))
    }
}

/// Sampling rectangle for [`validate_model`].
#[derive(Debug, Clone)]
pub struct ValidationBox {
    pub t_range: (f64, f64),
    pub y_range: (f64, f64),
    pub n_t: usize,
    pub n_y: usize,
}

impl ValidationBox {
    pub fn new(t_range: (f64, f64), y_range: (f64, f64)) -> Self {
        ValidationBox {
            t_range,
            y_range,
            n_t: 7,
            n_y: 21,
        }
    }

    fn points(&self) -> Vec<(f64, f64)> {
        let mut pts = Vec::with_capacity(self.n_t * self.n_y);
        for it in 0..self.n_t {
            let t = if self.n_t == 1 {
                self.t_range.0
            } else {
                self.t_range.0
                    + (self.t_range.1 - self.t_range.0) * it as f64 / (self.n_t - 1) as f64
            };
            for iy in 0..self.n_y {
                let y = if self.n_y == 1 {
                    self.y_range.0
                } else {
                    self.y_range.0
                        + (self.y_range.1 - self.y_range.0) * iy as f64 / (self.n_y - 1) as f64
                };
                pts.push((t, y));
            }
        }
        pts
    }
}

/// Outcome of smoothness/non-degeneracy validation over a sampling box.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub min_abs_sigma: f64,
    /// Worst relative mismatch of the supplied sigma partial of order k
    /// against a central difference of the order k−1 partial, k = 1..=3.
    pub max_sigma_partial_err: [f64; 3],
    pub max_beta_partial_err: [f64; 3],
    /// Worst mismatch of the order-1 drift partial (chain-rule convention)
    /// against a central difference of the drift itself.
    pub max_drift_partial_err: f64,
    pub degenerate: bool,
    pub partials_consistent: bool,
    pub pass: bool,
}

const PARTIAL_TOL: f64 = 1e-5;

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

/// Check |sigma| against the floor and cross-check all supplied partials by
/// central finite differences over the box. Failures are reported, not raised.
pub fn validate_model(model: &ModelSpec, sample_box: &ValidationBox) -> ValidationReport {
    let mut min_abs_sigma = f64::INFINITY;
    let mut max_sig = [0.0f64; 3];
    let mut max_beta = [0.0f64; 3];
    let mut max_drift = 0.0f64;

    for (t, y) in sample_box.points() {
        let h = 1e-5 * (1.0 + y.abs());
        min_abs_sigma = min_abs_sigma.min(model.sigma.eval(t, y, 0).abs());
        for k in 1..=3u8 {
            let fd_sig = (model.sigma.eval(t, y + h, k - 1) - model.sigma.eval(t, y - h, k - 1))
                / (2.0 * h);
            max_sig[k as usize - 1] =
                max_sig[k as usize - 1].max(rel_err(model.sigma.eval(t, y, k), fd_sig));
            let fd_beta = (model.beta.eval(t, y + h, k - 1) - model.beta.eval(t, y - h, k - 1))
                / (2.0 * h);
            max_beta[k as usize - 1] =
                max_beta[k as usize - 1].max(rel_err(model.beta.eval(t, y, k), fd_beta));
        }
        if model.sigma.eval(t, y + h, 0).abs() >= model.vol_floor
            && model.sigma.eval(t, y - h, 0).abs() >= model.vol_floor
        {
            if let (Ok(up), Ok(dn), Ok(an)) = (
                model.q_drift_y(t, y + h),
                model.q_drift_y(t, y - h),
                model.q_drift_y_partial(t, y, 1, Convention::ChainRule),
            ) {
                max_drift = max_drift.max(rel_err(an, (up - dn) / (2.0 * h)));
            }
        }
    }

    let degenerate = min_abs_sigma < model.vol_floor;
    let partials_consistent = max_sig.iter().all(|&e| e <= PARTIAL_TOL)
        && max_beta.iter().all(|&e| e <= PARTIAL_TOL)
        && max_drift <= PARTIAL_TOL;
    ValidationReport {
        min_abs_sigma,
        max_sigma_partial_err: max_sig,
        max_beta_partial_err: max_beta,
        max_drift_partial_err: max_drift,
        degenerate,
        partials_consistent,
        pass: !degenerate && partials_consistent && model.maturity > 0.0 && model.x0 > 0.0,
    }
}

/// JSON-loadable model definition.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    BsConstant {
        x0: f64,
        sigma0: f64,
        r: f64,
    },
    ScottExp {
        x0: f64,
        y0: f64,
        sigma_bar: f64,
        nu: f64,
        rho: f64,
        r: f64,
        mu: f64,
        b0: f64,
        b1: f64,
    },
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| EngineError::Config {
            field: "kind".to_string(),
            message: format!("unrecognized model document: {e}"),
        })
    }

    pub fn build(&self) -> ModelSpec {
        match *self {
            ModelConfig::BsConstant { x0, sigma0, r } => ModelSpec::bs_constant(x0, sigma0, r),
            ModelConfig::ScottExp {
                x0,
                y0,
                sigma_bar,
                nu,
                rho,
                r,
                mu,
                b0,
                b1,
            } => ModelSpec::scott_exp(x0, y0, sigma_bar, nu, rho, r, mu, b0, b1),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelConfig::BsConstant { .. } => "bs_constant",
            ModelConfig::ScottExp { .. } => "scott_exp",
        }
    }
}
