//! Per-path Malliavin-derivative objects feeding the Greek weights.
//!
//! Everything the weights need reduces to a handful of per-path scalars
//! built from the kernel `G(t, T)` (the logarithmic derivative of `S_T`
//! with respect to a Brownian shock at `t`) and its first and second
//! shock-derivatives:
//!
//! ```text
//! I      = ∫ u_t G(t,T) dt          (so D_u S_T = S_T I)
//! duI    = D_u I                    (double (s,t)-sum over D_s G(t,T))
//! duduI  = D_u D_u I                (triple sum over D_r D_s G(t,T))
//! sko    = δ(u) = ∫ u dW            (Skorohod = Ito for deterministic u)
//! duSko  = D_u δ(u) = ∫ u^2 dt
//! ```
//!
//! Two backends produce these: [`Backend::Analytic`] discretizes the
//! closed-form expressions (first variation as an exponential integrating
//! factor), [`Backend::DiscreteExact`] propagates exact tangents of the
//! Euler scheme itself. Both exploit the separable structure of the first
//! variation, so no dense (s,t) table is ever materialized: every scalar
//! is assembled in O(n) per path from prefix/suffix sums.

pub mod analytic;
pub mod discrete;
pub mod tangent;

use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::model::Convention;
use crate::path::{PathBundle, TimeGrid};

/// Which formula family produces G, dG, d2G.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    /// Closed-form expressions, discretized with left endpoints.
    Analytic,
    /// Exact shock-derivatives of the discretized system.
    #[default]
    DiscreteExact,
}

/// Index region summed when assembling `duI` and `duduI`.
///
/// The printed formulas restrict to ordered times (s ≤ t); the full square
/// adds the transposed region with its Ito boundary terms, which is what
/// `D_u` of a functional actually integrates over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Region {
    PaperRegion,
    #[default]
    FullSquare,
}

/// Deterministic weighting kernel u for D_u = ∫ u_t D_t · dt.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WeightKernel {
    Constant { value: f64 },
    /// value on [t0, t1), zero elsewhere.
    Indicator { t0: f64, t1: f64, value: f64 },
    /// Right-open step function, like `TimeFn::Piecewise`.
    Step { times: Vec<f64>, values: Vec<f64> },
}

impl Default for WeightKernel {
    fn default() -> Self {
        WeightKernel::Constant { value: 1.0 }
    }
}

impl WeightKernel {
    pub fn constant(value: f64) -> Self {
        WeightKernel::Constant { value }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            WeightKernel::Constant { value } => *value,
            WeightKernel::Indicator { t0, t1, value } => {
                if t >= *t0 && t < *t1 {
                    *value
                } else {
                    0.0
                }
            }
            WeightKernel::Step { times, values } => {
                let mut idx = 0;
                while idx < times.len() && t >= times[idx] {
                    idx += 1;
                }
                values[idx.min(values.len() - 1)]
            }
        }
    }

    /// Left-endpoint discretization; rejects kernels with ∫ u^2 dt = 0.
    pub fn discretize(&self, grid: &TimeGrid) -> Result<Vec<f64>> {
        let u: Vec<f64> = (0..grid.n_steps()).map(|i| self.eval(grid.t(i))).collect();
        let norm: f64 = u
            .iter()
            .enumerate()
            .map(|(i, v)| v * v * grid.dt(i))
            .sum();
        if norm <= 0.0 {
            return Err(EngineError::InvalidKernel(format!(
                "kernel has vanishing L2 norm on the grid ({norm})"
            )));
        }
        Ok(u)
    }
}

/// Options shared by all per-path Malliavin computations.
#[derive(Debug, Clone, Copy, Default)]
pub struct MalliavinOptions {
    pub backend: Backend,
    pub region: Region,
    pub convention: Convention,
    /// Override for the singular-weight threshold on |I|.
    pub eps_i: Option<f64>,
}

/// Threshold below which |I| marks the path as excluded: 1e-10 times the
/// typical scale sigma(0, y0) * T, never below 1e-10 itself.
pub fn singular_threshold(path: &PathBundle, override_eps: Option<f64>) -> f64 {
    override_eps.unwrap_or_else(|| {
        let scale = (path.sig[0][0].abs() * path.grid.maturity()).max(1.0);
        1e-10 * scale
    })
}

/// Which optional scalars to compute alongside I / duI / δ(u).
#[derive(Debug, Clone, Copy, Default)]
pub struct CacheRequest {
    /// duduI and duSko (needed by Gamma).
    pub second_order: bool,
    /// Rate-shift tangent of S_T and its D_u (needed by Rho).
    pub theta_rate: bool,
    /// Vol-scale tangent of S_T and its D_u (needed by Vega).
    pub theta_vol: bool,
}

/// Tangent of log S_T with respect to a scalar model perturbation,
/// together with its D_u. `d S_T/d eps = S_T * theta_l`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaTangent {
    pub theta_l: f64,
    pub du_theta_l: f64,
}

/// Per-path scalar functionals; both duI / duduI regions are carried so
/// corrected and paper-literal weights can be assembled side by side.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MalliavinCache {
    pub s_t: f64,
    pub i_int: f64,
    pub du_i_paper: f64,
    pub du_i_full: f64,
    pub dudu_i_paper: f64,
    pub dudu_i_full: f64,
    pub sko: f64,
    pub du_sko: f64,
    /// |I| fell below the singular threshold; weights must not be formed.
    pub excluded: bool,
    /// Threshold used for the exclusion decision.
    pub eps_i: f64,
    pub theta_rate: Option<ThetaTangent>,
    pub theta_vol: Option<ThetaTangent>,
}

impl MalliavinCache {
    pub fn du_i(&self, region: Region) -> f64 {
        match region {
            Region::PaperRegion => self.du_i_paper,
            Region::FullSquare => self.du_i_full,
        }
    }

    pub fn dudu_i(&self, region: Region) -> f64 {
        match region {
            Region::PaperRegion => self.dudu_i_paper,
            Region::FullSquare => self.dudu_i_full,
        }
    }
}

/// δ(u) = Σ u_i dW_i and D_u δ(u) = Σ u_i^2 dt_i for deterministic step u.
pub fn skorohod_delta(u: &[f64], path: &PathBundle) -> (f64, f64) {
    let mut sko = 0.0;
    let mut du_sko = 0.0;
    for i in 0..path.n_steps() {
        sko += u[i] * path.dw[i];
        du_sko += u[i] * u[i] * path.grid.dt(i);
    }
    (sko, du_sko)
}

/// y-partials of the Q-drift of Y along the path, orders 1..=3, computed
/// from the coefficient caches under the selected convention.
pub(crate) fn drift_partials(
    path: &PathBundle,
    convention: Convention,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = path.n_steps();
    let mut ay = vec![0.0; n];
    let mut ayy = vec![0.0; n];
    let mut ayyy = vec![0.0; n];
    for j in 0..n {
        let nu = path.nu[j];
        if nu == 0.0 {
            continue;
        }
        let rm = path.rate_minus_drift[j];
        let s = path.sig[0][j];
        let (psi1, psi2, psi3) = match convention {
            Convention::ChainRule => {
                let s1 = path.sig[1][j];
                let s2 = path.sig[2][j];
                let s3 = path.sig[3][j];
                (
                    -rm * s1 / (s * s),
                    rm * (2.0 * s1 * s1 - s * s2) / (s * s * s),
                    rm * (6.0 * s * s1 * s2 - 6.0 * s1 * s1 * s1 - s * s * s3) / (s * s * s * s),
                )
            }
            Convention::PaperLiteral => (
                -rm / (s * s),
                2.0 * rm / (s * s * s),
                -6.0 * rm / (s * s * s * s),
            ),
        };
        ay[j] = nu * (psi1 + path.beta_partials[0][j]);
        ayy[j] = nu * (psi2 + path.beta_partials[1][j]);
        ayyy[j] = nu * (psi3 + path.beta_partials[2][j]);
    }
    (ay, ayy, ayyy)
}

/// Step measures shared by the dG / d2G assemblies:
/// `m_a = σ_yy dW − (σ_y² + σσ_yy) dt`, `m_b = σ_yyy dW − (3σ_yσ_yy + σσ_yyy) dt`,
/// `m_c = σ_y (dW − σ dt)`.
pub(crate) fn step_measures(path: &PathBundle) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = path.n_steps();
    let mut ma = vec![0.0; n];
    let mut mb = vec![0.0; n];
    let mut mc = vec![0.0; n];
    for j in 0..n {
        let dt = path.grid.dt(j);
        let s0 = path.sig[0][j];
        let s1 = path.sig[1][j];
        let s2 = path.sig[2][j];
        let s3 = path.sig[3][j];
        ma[j] = s2 * path.dw[j] - (s1 * s1 + s0 * s2) * dt;
        mb[j] = s3 * path.dw[j] - (3.0 * s1 * s2 + s0 * s3) * dt;
        mc[j] = s1 * path.k[j];
    }
    (ma, mb, mc)
}

/// Triple chain sums used by the duduI assemblies. All O(n).
pub(crate) struct ChainSums;

impl ChainSums {
    /// Σ_{p1<p2<p3} A(p1) B(p2) C(p3)
    pub fn strict3(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
        let n = a.len();
        let mut suffix_c = 0.0;
        let mut suffix = vec![0.0; n + 1];
        for i in (0..n).rev() {
            suffix_c += c[i];
            suffix[i] = suffix_c;
        }
        let mut prefix_a = 0.0;
        let mut total = 0.0;
        for p2 in 0..n {
            total += b[p2] * prefix_a * suffix.get(p2 + 1).copied().unwrap_or(0.0);
            prefix_a += a[p2];
        }
        total
    }

    /// Σ_{a<b} X(a) C(b)
    pub fn strict2(x: &[f64], c: &[f64]) -> f64 {
        let mut suffix_c = 0.0;
        let mut total = 0.0;
        for i in (0..x.len()).rev() {
            total += x[i] * suffix_c;
            suffix_c += c[i];
        }
        total
    }

    /// Σ_a A(a) B(a) C(a)
    pub fn diag3(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
        a.iter()
            .zip(b.iter())
            .zip(c.iter())
            .map(|((x, y), z)| x * y * z)
            .sum()
    }
}

/// Compute the per-path scalar cache under the selected backend.
///
/// The rate/vol tangents are always built from exact scheme derivatives
/// (chain-rule convention), whatever backend produces I and duI: they
/// exist to differentiate the simulated system, not the printed formulas.
pub fn compute_cache(
    path: &PathBundle,
    u: &[f64],
    opts: &MalliavinOptions,
    req: &CacheRequest,
) -> Result<MalliavinCache> {
    let (sko, du_sko) = skorohod_delta(u, path);
    let scalars = match opts.backend {
        Backend::DiscreteExact => {
            let kernel = discrete::DiscreteKernel::new(path, opts.convention);
            kernel.du_functionals(path, u, req.second_order)
        }
        Backend::Analytic => {
            let kernel = analytic::AnalyticKernel::new(path, opts.convention);
            kernel.du_functionals(path, u, req.second_order)
        }
    };
    let mut cache = MalliavinCache {
        s_t: path.s_t(),
        i_int: scalars.i_int,
        du_i_paper: scalars.du_i_paper,
        du_i_full: scalars.du_i_full,
        dudu_i_paper: scalars.dudu_i_paper,
        dudu_i_full: scalars.dudu_i_full,
        sko,
        du_sko,
        excluded: false,
        eps_i: 0.0,
        theta_rate: None,
        theta_vol: None,
    };
    if !cache.i_int.is_finite() {
        return Err(EngineError::NonFinite {
            what: "Malliavin cache (I)",
            path_index: 0,
        });
    }
    let eps = singular_threshold(path, opts.eps_i);
    cache.eps_i = eps;
    cache.excluded = cache.i_int.abs() < eps;
    if req.theta_rate {
        cache.theta_rate = Some(discrete::theta_tangent(
            path,
            u,
            discrete::Perturbation::RateShift,
        ));
    }
    if req.theta_vol {
        cache.theta_vol = Some(discrete::theta_tangent(
            path,
            u,
            discrete::Perturbation::VolScale,
        ));
    }
    Ok(cache)
}

/// Spec-level wrapper: I, duI, duduI for the configured region, erroring
/// with `SingularWeight` when the IBP denominator degenerates.
pub fn du_functionals(
    path: &PathBundle,
    u: &[f64],
    opts: &MalliavinOptions,
) -> Result<(f64, f64, f64)> {
    let cache = compute_cache(
        path,
        u,
        opts,
        &CacheRequest {
            second_order: true,
            ..CacheRequest::default()
        },
    )?;
    if cache.excluded {
        return Err(EngineError::SingularWeight {
            i_abs: cache.i_int.abs(),
            floor: singular_threshold(path, opts.eps_i),
            path_index: 0,
        });
    }
    Ok((
        cache.i_int,
        cache.du_i(opts.region),
        cache.dudu_i(opts.region),
    ))
}
