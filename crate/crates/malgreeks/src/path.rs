//! Time grids and discretized (S, Y) trajectories under the pricing measure.
//!
//! Y advances by Euler-Maruyama with coefficients frozen at the left
//! endpoint of each step; S advances by the exponential (log-Euler) scheme
//!
//! ```text
//! Y_{i+1} = Y_i + a(t_i, Y_i) dt_i + rho sigY_i dW_i + sigY_i dW'_i
//! S_{i+1} = S_i * exp(sigma(t_i, Y_i) dW_i + (r_i - sigma^2/2) dt_i)
//! ```
//!
//! which keeps S strictly positive and is exact in law when sigma is
//! constant.

use std::io::Write;

use crate::error::{EngineError, Result};
use crate::model::ModelSpec;
use crate::rng::{draw_increments_into, RngStream};

/// Uniform partition of [0, T] with the last node pinned to T exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
    dt: Vec<f64>,
}

impl TimeGrid {
    pub fn build(maturity: f64, n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(EngineError::InvalidGrid("n_steps must be >= 1".into()));
        }
        if !maturity.is_finite() || maturity <= 0.0 {
            return Err(EngineError::InvalidGrid(format!(
                "maturity must be positive, got {maturity}"
            )));
        }
        let mut times: Vec<f64> = (0..n_steps)
            .map(|i| maturity * i as f64 / n_steps as f64)
            .collect();
        times.push(maturity); // last node absorbs any rounding
        let dt = times.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(TimeGrid { times, dt })
    }

    pub fn n_steps(&self) -> usize {
        self.dt.len()
    }

    pub fn maturity(&self) -> f64 {
        *self.times.last().unwrap()
    }

    #[inline]
    pub fn t(&self, i: usize) -> f64 {
        self.times[i]
    }

    #[inline]
    pub fn dt(&self, i: usize) -> f64 {
        self.dt[i]
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }
}

/// One simulated trajectory with the per-node coefficient caches the
/// Malliavin layer consumes.
///
/// Vectors of length `n` are indexed by step (left endpoint); vectors of
/// length `n + 1` by node.
#[derive(Debug, Clone)]
pub struct PathBundle {
    pub grid: TimeGrid,
    /// Correlation loading of Y on W (model constant).
    pub rho: f64,
    pub dw: Vec<f64>,
    pub dwp: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    /// Per-step contribution to log(S_T / x0).
    pub log_s_terms: Vec<f64>,
    /// sigma(t_i, Y_i, k) for k = 0..=3 at every node.
    pub sig: [Vec<f64>; 4],
    /// beta y-partials of order 1..=3 at left endpoints.
    pub beta_partials: [Vec<f64>; 3],
    /// sigY at left endpoints.
    pub nu: Vec<f64>,
    /// r at left endpoints.
    pub rate: Vec<f64>,
    /// r - mu at left endpoints.
    pub rate_minus_drift: Vec<f64>,
    /// Ito kernel per step: dW_i - sigma_i dt_i.
    pub k: Vec<f64>,
}

impl PathBundle {
    pub fn zeros(grid: &TimeGrid) -> Self {
        let n = grid.n_steps();
        PathBundle {
            grid: grid.clone(),
            rho: 0.0,
            dw: vec![0.0; n],
            dwp: vec![0.0; n],
            y: vec![0.0; n + 1],
            s: vec![0.0; n + 1],
            log_s_terms: vec![0.0; n],
            sig: std::array::from_fn(|_| vec![0.0; n + 1]),
            beta_partials: std::array::from_fn(|_| vec![0.0; n]),
            nu: vec![0.0; n],
            rate: vec![0.0; n],
            rate_minus_drift: vec![0.0; n],
            k: vec![0.0; n],
        }
    }

    pub fn n_steps(&self) -> usize {
        self.dw.len()
    }

    pub fn s_t(&self) -> f64 {
        *self.s.last().unwrap()
    }

    pub fn log_s_t(&self) -> f64 {
        (self.s_t() / self.s[0]).ln()
    }

    /// Integral of the deterministic rate over the grid (left endpoints).
    pub fn rate_integral(&self) -> f64 {
        (0..self.n_steps())
            .map(|i| self.rate[i] * self.grid.dt(i))
            .sum()
    }
}

/// Advance the scheme from the given increments, reusing `out`'s buffers.
pub fn build_path_into(
    model: &ModelSpec,
    grid: &TimeGrid,
    dw: &[f64],
    dwp: &[f64],
    path_index: u64,
    out: &mut PathBundle,
) -> Result<()> {
    let n = grid.n_steps();
    assert_eq!(dw.len(), n);
    assert_eq!(dwp.len(), n);
    if out.n_steps() != n || out.grid != *grid {
        *out = PathBundle::zeros(grid);
    }
    out.rho = model.rho;
    out.dw.copy_from_slice(dw);
    out.dwp.copy_from_slice(dwp);

    let mut y = model.y0;
    let mut log_s = 0.0;
    out.y[0] = y;
    out.s[0] = model.x0;
    for j in 0..n {
        let t = grid.t(j);
        let dt = grid.dt(j);
        let s0 = model.sigma_checked(t, y)?;
        for kk in 0..4 {
            out.sig[kk][j] = if kk == 0 {
                s0
            } else {
                model.sigma.eval(t, y, kk as u8)
            };
        }
        for kk in 0..3 {
            out.beta_partials[kk][j] = model.beta.eval(t, y, kk as u8 + 1);
        }
        let r = model.rate.eval(t);
        let nu = model.y_vol.eval(t);
        let rm = r - model.drift.eval(t);
        out.rate[j] = r;
        out.nu[j] = nu;
        out.rate_minus_drift[j] = rm;
        out.k[j] = dw[j] - s0 * dt;

        let a = if nu == 0.0 {
            model.y_drift.eval(t)
        } else {
            model.y_drift.eval(t) + nu * (rm / s0 + model.beta.eval(t, y, 0))
        };
        y += a * dt + model.rho * nu * dw[j] + nu * dwp[j];
        let term = s0 * dw[j] + (r - 0.5 * s0 * s0) * dt;
        log_s += term;
        out.log_s_terms[j] = term;
        out.y[j + 1] = y;
        out.s[j + 1] = model.x0 * log_s.exp();
    }
    let t_n = grid.t(n);
    for kk in 0..4 {
        out.sig[kk][n] = model.sigma.eval(t_n, y, kk as u8);
    }
    if !out.y[n].is_finite() || !out.s[n].is_finite() {
        return Err(EngineError::NonFinite {
            what: "path state (Y, S)",
            path_index,
        });
    }
    Ok(())
}

pub fn build_path(model: &ModelSpec, grid: &TimeGrid, dw: &[f64], dwp: &[f64]) -> Result<PathBundle> {
    let mut out = PathBundle::zeros(grid);
    build_path_into(model, grid, dw, dwp, 0, &mut out)?;
    Ok(out)
}

/// Draw increments for `stream` and advance the scheme. The antithetic flag
/// negates both increment sequences.
pub fn simulate_path(
    model: &ModelSpec,
    grid: &TimeGrid,
    stream: &RngStream,
    antithetic: bool,
) -> Result<PathBundle> {
    let mut dw = vec![0.0; grid.n_steps()];
    let mut dwp = vec![0.0; grid.n_steps()];
    draw_increments_into(stream, grid, &mut dw, &mut dwp);
    if antithetic {
        for v in dw.iter_mut().chain(dwp.iter_mut()) {
            *v = -*v;
        }
    }
    let mut out = PathBundle::zeros(grid);
    build_path_into(model, grid, &dw, &dwp, stream.path_index, &mut out)?;
    Ok(out)
}

/// Debug dump: one CSV row per step.
pub fn dump_path_csv<W: Write>(w: &mut W, path_index: u64, path: &PathBundle) -> std::io::Result<()> {
    for j in 0..path.n_steps() {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            path_index,
            j,
            path.grid.t(j),
            path.dw[j],
            path.dwp[j],
            path.y[j],
            path.s[j]
        )?;
    }
    let n = path.n_steps();
    writeln!(
        w,
        "{},{},{},,,{},{}",
        path_index,
        n,
        path.grid.t(n),
        path.y[n],
        path.s[n]
    )
}

pub const PATH_DUMP_HEADER: &str = "path_index,step,t,dW,dWp,Y,S";
