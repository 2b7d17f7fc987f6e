//! Monte Carlo estimation driver.
//!
//! Paths are partitioned into fixed blocks by path index; each block is
//! accumulated sequentially and block results are combined by a fixed
//! pairwise reduction tree, so the reported value is bit-identical for
//! any worker count (workers only decide who computes which block).

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::greeks::closed_form::bs_closed_form;
use crate::greeks::payoff::Payoff;
use crate::greeks::weights::{delta_weight, gamma_weight, rho_vega_weight, WeightMode};
use crate::malliavin::discrete::{theta_tangent, Perturbation};
use crate::malliavin::{
    compute_cache, Backend, CacheRequest, MalliavinOptions, Region, WeightKernel,
};
use crate::model::{Convention, ModelSpec, Surface, TimeFn};
use crate::path::{build_path_into, PathBundle, TimeGrid};
use crate::rng::{draw_increments_into, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Greek {
    Price,
    Delta,
    Gamma,
    Rho,
    Vega,
}

impl Greek {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "price" => Ok(Greek::Price),
            "delta" => Ok(Greek::Delta),
            "gamma" => Ok(Greek::Gamma),
            "rho" => Ok(Greek::Rho),
            "vega" => Ok(Greek::Vega),
            other => Err(EngineError::config(
                "greek",
                format!("unknown greek `{other}` (price, delta, gamma, rho, vega)"),
            )),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Greek::Price => "price",
            Greek::Delta => "delta",
            Greek::Gamma => "gamma",
            Greek::Rho => "rho",
            Greek::Vega => "vega",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Malliavin,
    MalliavinPaperLiteral,
    FiniteDifference,
    ClosedForm,
    PathwiseTangent,
}

impl Method {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "malliavin" => Ok(Method::Malliavin),
            "malliavin-paper-literal" => Ok(Method::MalliavinPaperLiteral),
            "finite-difference" => Ok(Method::FiniteDifference),
            "closed-form" => Ok(Method::ClosedForm),
            "pathwise-tangent" => Ok(Method::PathwiseTangent),
            other => Err(EngineError::config(
                "method",
                format!(
                    "unknown method `{other}` (malliavin, malliavin-paper-literal, \
                     finite-difference, closed-form, pathwise-tangent)"
                ),
            )),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::Malliavin => "malliavin",
            Method::MalliavinPaperLiteral => "malliavin-paper-literal",
            Method::FiniteDifference => "finite-difference",
            Method::ClosedForm => "closed-form",
            Method::PathwiseTangent => "pathwise-tangent",
        }
    }
}

/// Bump sizes for the common-random-numbers finite-difference oracle.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct FdConfig {
    /// Relative bump of x0 for Delta (central difference).
    pub delta_bump_rel: f64,
    /// Relative bump of x0 for Gamma (second central difference; larger to
    /// control cancellation).
    pub gamma_bump_rel: f64,
    /// Absolute bump of the rate shift.
    pub rate_bump: f64,
    /// Absolute bump of the multiplicative vol scale.
    pub vol_bump: f64,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig {
            delta_bump_rel: 1e-3,
            gamma_bump_rel: 1e-2,
            rate_bump: 1e-4,
            vol_bump: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub n_paths: u64,
    pub n_steps: usize,
    pub seed: u64,
    pub discount: bool,
    pub antithetic: bool,
    pub backend: Backend,
    pub region: Region,
    pub convention: Convention,
    pub fd: FdConfig,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            n_paths: 100_000,
            n_steps: 64,
            seed: 1,
            discount: true,
            antithetic: false,
            backend: Backend::default(),
            region: Region::default(),
            convention: Convention::default(),
            fd: FdConfig::default(),
        }
    }
}

/// Ratio of excluded paths above which an estimate is flagged unreliable.
pub const MAX_EXCLUSION_RATIO: f64 = 1e-3;

/// Grid-size cap; the second-order assemblies are not meant for finer grids.
pub const MAX_N_STEPS: usize = 4096;

/// Estimator output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GreekEstimate {
    pub greek: Greek,
    pub method: Method,
    pub value: f64,
    pub stderr: f64,
    pub n_paths: u64,
    pub n_excluded: u64,
    pub n_steps: usize,
    pub seed: u64,
    pub runtime_ms: u64,
    pub discounted: bool,
    /// false when exclusions exceed [`MAX_EXCLUSION_RATIO`].
    pub reliable: bool,
}

impl GreekEstimate {
    pub fn z_score_against(&self, target: f64) -> f64 {
        (self.value - target) / self.stderr
    }
}

#[derive(Debug, Clone, Copy)]
enum SampleKind {
    PlainPrice,
    MalliavinDelta(WeightMode),
    MalliavinGamma(WeightMode),
    MalliavinRho,
    MalliavinVega,
    FdDelta,
    FdGamma,
    FdRho,
    FdVega,
    PathwiseDelta,
    PathwiseRho,
    PathwiseVega,
}

impl SampleKind {
    fn resolve(greek: Greek, method: Method, payoff: Payoff) -> Result<Self> {
        use SampleKind::*;
        let unsupported = |why: &str| {
            Err(EngineError::UnsupportedCombination(format!(
                "{} via {}: {why}",
                greek.name(),
                method.name()
            )))
        };
        match (greek, method) {
            (Greek::Price, _) => Ok(PlainPrice),
            (Greek::Delta, Method::Malliavin) => Ok(MalliavinDelta(WeightMode::Corrected)),
            (Greek::Delta, Method::MalliavinPaperLiteral) => {
                Ok(MalliavinDelta(WeightMode::PaperLiteral))
            }
            (Greek::Gamma, Method::Malliavin) => Ok(MalliavinGamma(WeightMode::Corrected)),
            (Greek::Gamma, Method::MalliavinPaperLiteral) => {
                Ok(MalliavinGamma(WeightMode::PaperLiteral))
            }
            (Greek::Rho, Method::Malliavin) => Ok(MalliavinRho),
            (Greek::Vega, Method::Malliavin) => Ok(MalliavinVega),
            (Greek::Rho | Greek::Vega, Method::MalliavinPaperLiteral) => {
                unsupported("no printed formula exists; use `malliavin`")
            }
            (Greek::Delta, Method::FiniteDifference) => Ok(FdDelta),
            (Greek::Gamma, Method::FiniteDifference) => Ok(FdGamma),
            (Greek::Rho, Method::FiniteDifference) => Ok(FdRho),
            (Greek::Vega, Method::FiniteDifference) => Ok(FdVega),
            (Greek::Delta, Method::PathwiseTangent) => {
                if matches!(payoff, Payoff::DigitalCall { .. }) {
                    unsupported("pathwise needs a Lipschitz payoff")
                } else {
                    Ok(PathwiseDelta)
                }
            }
            (Greek::Rho, Method::PathwiseTangent) => {
                if matches!(payoff, Payoff::DigitalCall { .. }) {
                    unsupported("pathwise needs a Lipschitz payoff")
                } else {
                    Ok(PathwiseRho)
                }
            }
            (Greek::Vega, Method::PathwiseTangent) => {
                if matches!(payoff, Payoff::DigitalCall { .. }) {
                    unsupported("pathwise needs a Lipschitz payoff")
                } else {
                    Ok(PathwiseVega)
                }
            }
            (Greek::Gamma, Method::PathwiseTangent) => {
                unsupported("the payoff derivative is not differentiable again")
            }
            (_, Method::ClosedForm) => unreachable!("closed form handled before sampling"),
        }
    }

    fn cache_request(&self) -> Option<CacheRequest> {
        match self {
            SampleKind::MalliavinDelta(_) => Some(CacheRequest::default()),
            SampleKind::MalliavinGamma(_) => Some(CacheRequest {
                second_order: true,
                ..CacheRequest::default()
            }),
            SampleKind::MalliavinRho => Some(CacheRequest {
                theta_rate: true,
                ..CacheRequest::default()
            }),
            SampleKind::MalliavinVega => Some(CacheRequest {
                theta_vol: true,
                ..CacheRequest::default()
            }),
            _ => None,
        }
    }
}

/// Per-worker scratch: increment buffers and reusable path bundles.
struct Workspace {
    dw: Vec<f64>,
    dwp: Vec<f64>,
    neg_dw: Vec<f64>,
    neg_dwp: Vec<f64>,
    base: PathBundle,
    up: PathBundle,
    down: PathBundle,
}

impl Workspace {
    fn new(grid: &TimeGrid) -> Self {
        let n = grid.n_steps();
        Workspace {
            dw: vec![0.0; n],
            dwp: vec![0.0; n],
            neg_dw: vec![0.0; n],
            neg_dwp: vec![0.0; n],
            base: PathBundle::zeros(grid),
            up: PathBundle::zeros(grid),
            down: PathBundle::zeros(grid),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Acc {
    sum: f64,
    sumsq: f64,
    n: u64,
    excluded: u64,
}

impl Acc {
    fn push(&mut self, v: f64) {
        self.sum += v;
        self.sumsq += v * v;
        self.n += 1;
    }

    fn merge(a: Acc, b: Acc) -> Acc {
        Acc {
            sum: a.sum + b.sum,
            sumsq: a.sumsq + b.sumsq,
            n: a.n + b.n,
            excluded: a.excluded + b.excluded,
        }
    }
}

fn tree_reduce(mut level: Vec<Acc>) -> Acc {
    if level.is_empty() {
        return Acc::default();
    }
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|c| {
                if c.len() == 2 {
                    Acc::merge(c[0], c[1])
                } else {
                    c[0]
                }
            })
            .collect();
    }
    level[0]
}

const BLOCK: u64 = 4096;

struct Plan<'a> {
    model: &'a ModelSpec,
    model_up: Option<ModelSpec>,
    model_down: Option<ModelSpec>,
    grid: TimeGrid,
    payoff: Payoff,
    kind: SampleKind,
    u: Vec<f64>,
    opts: MalliavinOptions,
    req: CacheRequest,
    cfg: &'a EstimatorConfig,
    fd_denom: f64,
}

fn shift_rate(model: &ModelSpec, h: f64) -> ModelSpec {
    let mut m = model.clone();
    m.rate = match &model.rate {
        TimeFn::Constant(v) => TimeFn::Constant(v + h),
        TimeFn::Piecewise { times, values } => TimeFn::Piecewise {
            times: times.clone(),
            values: values.iter().map(|v| v + h).collect(),
        },
    };
    m
}

fn scale_sigma(model: &ModelSpec, factor: f64) -> ModelSpec {
    let inner = model.sigma.clone();
    let mut m = model.clone();
    m.sigma = Surface::Custom(std::sync::Arc::new(move |t, y, k| {
        factor * inner.eval(t, y, k)
    }));
    m
}

impl<'a> Plan<'a> {
    fn new(
        model: &'a ModelSpec,
        payoff: Payoff,
        greek: Greek,
        method: Method,
        kernel: &WeightKernel,
        cfg: &'a EstimatorConfig,
    ) -> Result<Self> {
        let grid = TimeGrid::build(model.maturity, cfg.n_steps)?;
        let u = kernel.discretize(&grid)?;
        let kind = SampleKind::resolve(greek, method, payoff)?;
        let (model_up, model_down, fd_denom) = match kind {
            SampleKind::FdDelta => {
                let h = cfg.fd.delta_bump_rel * model.x0;
                let mut up = model.clone();
                up.x0 += h;
                let mut down = model.clone();
                down.x0 -= h;
                (Some(up), Some(down), 2.0 * h)
            }
            SampleKind::FdGamma => {
                let h = cfg.fd.gamma_bump_rel * model.x0;
                let mut up = model.clone();
                up.x0 += h;
                let mut down = model.clone();
                down.x0 -= h;
                (Some(up), Some(down), h * h)
            }
            SampleKind::FdRho => {
                let h = cfg.fd.rate_bump;
                (
                    Some(shift_rate(model, h)),
                    Some(shift_rate(model, -h)),
                    2.0 * h,
                )
            }
            SampleKind::FdVega => {
                let h = cfg.fd.vol_bump;
                (
                    Some(scale_sigma(model, 1.0 + h)),
                    Some(scale_sigma(model, 1.0 - h)),
                    2.0 * h,
                )
            }
            _ => (None, None, 1.0),
        };
        let opts = MalliavinOptions {
            backend: cfg.backend,
            region: cfg.region,
            convention: cfg.convention,
            eps_i: None,
        };
        let req = kind.cache_request().unwrap_or_default();
        Ok(Plan {
            model,
            model_up,
            model_down,
            grid,
            payoff,
            kind,
            u,
            opts,
            req,
            cfg,
            fd_denom,
        })
    }

    /// One leg (one increment draw). `Ok(None)` marks an excluded path.
    fn sample(&self, ws: &mut Workspace, dw: &[f64], dwp: &[f64], idx: u64) -> Result<Option<f64>> {
        let cfg = self.cfg;
        build_path_into(self.model, &self.grid, dw, dwp, idx, &mut ws.base)?;
        let base = &ws.base;
        let disc = if cfg.discount {
            (-base.rate_integral()).exp()
        } else {
            1.0
        };
        let f = self.payoff.eval(base.s_t());
        let maturity = self.grid.maturity();
        let value = match self.kind {
            SampleKind::PlainPrice => disc * f,
            SampleKind::MalliavinDelta(mode) => {
                let cache = compute_cache(base, &self.u, &self.opts, &self.req)?;
                if cache.excluded {
                    return Ok(None);
                }
                disc * f * delta_weight(&cache, self.model.x0, mode, cfg.region)?
            }
            SampleKind::MalliavinGamma(mode) => {
                let cache = compute_cache(base, &self.u, &self.opts, &self.req)?;
                if cache.excluded {
                    return Ok(None);
                }
                disc * f * gamma_weight(&cache, self.model.x0, mode, cfg.region)?
            }
            SampleKind::MalliavinRho => {
                let cache = compute_cache(base, &self.u, &self.opts, &self.req)?;
                if cache.excluded {
                    return Ok(None);
                }
                let theta = cache.theta_rate.as_ref().unwrap();
                let w = rho_vega_weight(&cache, theta)?;
                // with discounting on, the discount factor's own rate
                // sensitivity contributes -T * price
                let corr = if cfg.discount { maturity * f } else { 0.0 };
                disc * (f * w - corr)
            }
            SampleKind::MalliavinVega => {
                let cache = compute_cache(base, &self.u, &self.opts, &self.req)?;
                if cache.excluded {
                    return Ok(None);
                }
                let theta = cache.theta_vol.as_ref().unwrap();
                disc * f * rho_vega_weight(&cache, theta)?
            }
            SampleKind::FdDelta | SampleKind::FdVega => {
                build_path_into(self.model_up.as_ref().unwrap(), &self.grid, dw, dwp, idx, &mut ws.up)?;
                build_path_into(
                    self.model_down.as_ref().unwrap(),
                    &self.grid,
                    dw,
                    dwp,
                    idx,
                    &mut ws.down,
                )?;
                disc * (self.payoff.eval(ws.up.s_t()) - self.payoff.eval(ws.down.s_t()))
                    / self.fd_denom
            }
            SampleKind::FdGamma => {
                build_path_into(self.model_up.as_ref().unwrap(), &self.grid, dw, dwp, idx, &mut ws.up)?;
                build_path_into(
                    self.model_down.as_ref().unwrap(),
                    &self.grid,
                    dw,
                    dwp,
                    idx,
                    &mut ws.down,
                )?;
                disc * (self.payoff.eval(ws.up.s_t()) - 2.0 * f + self.payoff.eval(ws.down.s_t()))
                    / self.fd_denom
            }
            SampleKind::FdRho => {
                build_path_into(self.model_up.as_ref().unwrap(), &self.grid, dw, dwp, idx, &mut ws.up)?;
                build_path_into(
                    self.model_down.as_ref().unwrap(),
                    &self.grid,
                    dw,
                    dwp,
                    idx,
                    &mut ws.down,
                )?;
                let (disc_up, disc_down) = if cfg.discount {
                    (
                        (-ws.up.rate_integral()).exp(),
                        (-ws.down.rate_integral()).exp(),
                    )
                } else {
                    (1.0, 1.0)
                };
                (disc_up * self.payoff.eval(ws.up.s_t())
                    - disc_down * self.payoff.eval(ws.down.s_t()))
                    / self.fd_denom
            }
            SampleKind::PathwiseDelta => {
                let fp = self.payoff.derivative(base.s_t()).unwrap();
                disc * fp * base.s_t() / self.model.x0
            }
            SampleKind::PathwiseRho => {
                let theta = theta_tangent(base, &self.u, Perturbation::RateShift);
                let fp = self.payoff.derivative(base.s_t()).unwrap();
                let corr = if cfg.discount { maturity * f } else { 0.0 };
                disc * (fp * base.s_t() * theta.theta_l - corr)
            }
            SampleKind::PathwiseVega => {
                let theta = theta_tangent(base, &self.u, Perturbation::VolScale);
                let fp = self.payoff.derivative(base.s_t()).unwrap();
                disc * fp * base.s_t() * theta.theta_l
            }
        };
        if !value.is_finite() {
            return Err(EngineError::NonFinite {
                what: "estimator sample",
                path_index: idx,
            });
        }
        Ok(Some(value))
    }

    fn run_block(&self, ws: &mut Workspace, block: u64) -> Result<Acc> {
        let lo = block * BLOCK;
        let hi = ((block + 1) * BLOCK).min(self.cfg.n_paths);
        let mut acc = Acc::default();
        for idx in lo..hi {
            let stream = RngStream::new(self.cfg.seed, idx);
            {
                let Workspace { dw, dwp, .. } = ws;
                draw_increments_into(&stream, &self.grid, dw, dwp);
            }
            let dw = std::mem::take(&mut ws.dw);
            let dwp = std::mem::take(&mut ws.dwp);
            let first = self.sample(ws, &dw, &dwp, idx)?;
            let value = if self.cfg.antithetic {
                for (dst, src) in ws.neg_dw.iter_mut().zip(dw.iter()) {
                    *dst = -src;
                }
                for (dst, src) in ws.neg_dwp.iter_mut().zip(dwp.iter()) {
                    *dst = -src;
                }
                let neg_dw = std::mem::take(&mut ws.neg_dw);
                let neg_dwp = std::mem::take(&mut ws.neg_dwp);
                let second = self.sample(ws, &neg_dw, &neg_dwp, idx)?;
                ws.neg_dw = neg_dw;
                ws.neg_dwp = neg_dwp;
                match (first, second) {
                    (Some(a), Some(b)) => Some(0.5 * (a + b)),
                    _ => None,
                }
            } else {
                first
            };
            ws.dw = dw;
            ws.dwp = dwp;
            match value {
                Some(v) => acc.push(v),
                None => acc.excluded += 1,
            }
        }
        Ok(acc)
    }
}

/// Run `n_paths` simulations and average the per-path samples of the
/// requested (greek, method) estimator.
pub fn estimate(
    model: &ModelSpec,
    payoff: Payoff,
    greek: Greek,
    method: Method,
    kernel: &WeightKernel,
    cfg: &EstimatorConfig,
) -> Result<GreekEstimate> {
    let start = Instant::now();
    if cfg.n_paths == 0 {
        return Err(EngineError::config("n_paths", "must be >= 1"));
    }
    if cfg.n_steps == 0 {
        return Err(EngineError::config("n_steps", "must be >= 1"));
    }
    if cfg.n_steps > MAX_N_STEPS {
        return Err(EngineError::config(
            "n_steps",
            format!("must be <= {MAX_N_STEPS}"),
        ));
    }

    if method == Method::ClosedForm {
        let value = closed_form_value(model, payoff, greek, cfg)?;
        return Ok(GreekEstimate {
            greek,
            method,
            value,
            stderr: 0.0,
            n_paths: cfg.n_paths,
            n_excluded: 0,
            n_steps: cfg.n_steps,
            seed: cfg.seed,
            runtime_ms: start.elapsed().as_millis() as u64,
            discounted: cfg.discount,
            reliable: true,
        });
    }

    let plan = Plan::new(model, payoff, greek, method, kernel, cfg)?;
    let n_blocks = cfg.n_paths.div_ceil(BLOCK);
    let accs: Result<Vec<Acc>> = (0..n_blocks)
        .into_par_iter()
        .map_init(
            || Workspace::new(&plan.grid),
            |ws, b| plan.run_block(ws, b),
        )
        .collect();
    let acc = tree_reduce(accs?);

    let m = acc.n;
    let (value, stderr) = if m == 0 {
        (f64::NAN, f64::NAN)
    } else if m == 1 {
        (acc.sum, f64::NAN)
    } else {
        let mean = acc.sum / m as f64;
        let var = ((acc.sumsq - acc.sum * acc.sum / m as f64) / (m as f64 - 1.0)).max(0.0);
        (mean, (var / m as f64).sqrt())
    };
    let reliable = m >= 1 && (acc.excluded as f64) <= MAX_EXCLUSION_RATIO * cfg.n_paths as f64;
    Ok(GreekEstimate {
        greek,
        method,
        value,
        stderr,
        n_paths: cfg.n_paths,
        n_excluded: acc.excluded,
        n_steps: cfg.n_steps,
        seed: cfg.seed,
        runtime_ms: start.elapsed().as_millis() as u64,
        discounted: cfg.discount,
        reliable,
    })
}

/// Closed-form dispatch: bs_constant models only. With discounting off the
/// values are converted to derivatives of the undiscounted expectation.
/// Vega is converted to the engine's multiplicative-scale convention
/// (sigma times the standard ∂/∂σ) so it is comparable across methods.
fn closed_form_value(
    model: &ModelSpec,
    payoff: Payoff,
    greek: Greek,
    cfg: &EstimatorConfig,
) -> Result<f64> {
    let (sigma0, r) = model.as_bs_constant().ok_or_else(|| {
        EngineError::UnsupportedCombination(
            "closed form requires a bs_constant model (constant sigma, sigY = 0)".into(),
        )
    })?;
    let t = model.maturity;
    let discounted = bs_closed_form(model.x0, r, sigma0, t, greek, payoff)?;
    let scale_adjusted = match greek {
        Greek::Vega => sigma0 * discounted,
        _ => discounted,
    };
    if cfg.discount {
        return Ok(scale_adjusted);
    }
    // undiscounted targets: ∂ of e^{rT} * discounted value
    let growth = (r * t).exp();
    Ok(match greek {
        Greek::Rho => {
            let price = bs_closed_form(model.x0, r, sigma0, t, Greek::Price, payoff)?;
            growth * (t * price + discounted)
        }
        _ => growth * scale_adjusted,
    })
}
