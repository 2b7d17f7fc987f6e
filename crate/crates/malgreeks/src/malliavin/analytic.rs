//! Analytic backend: the closed-form first variation and the printed
//! kernel formulas, discretized with left endpoints.
//!
//! The first variation is carried as an integrating factor,
//!
//! ```text
//! E_j = exp( Σ_{k<j} a_y(t_k, Y_k) dt_k ),     D_{t_i} Y_{t_j} = rho sigY_i E_j / E_i
//! ```
//!
//! so D Y, D²Y, D³Y and the G-derivative tables are separable in their
//! time arguments and every dG / d2G contribution folds into `duI` and
//! `duduI` through prefix/suffix sums, O(n) per path. The sums over the
//! kernel region start at j = max(time indices), i.e. they include the
//! coincident left endpoint, which is where this backend differs from the
//! discrete-exact one at order sqrt(dt).

use crate::model::Convention;
use crate::path::PathBundle;

use super::discrete::DuScalars;
use super::{drift_partials, step_measures, ChainSums};

/// Integrating factor and source weights of the first variation.
#[derive(Debug, Clone)]
pub struct FirstVariation {
    /// E_j for j = 0..=n.
    pub e: Vec<f64>,
    /// w_i = rho sigY_i / E_i; D_{t_i} Y_{t_j} = w_i E_j for i ≤ j.
    pub w: Vec<f64>,
}

impl FirstVariation {
    pub fn new(path: &PathBundle, convention: Convention) -> Self {
        let n = path.n_steps();
        let (ay, _, _) = drift_partials(path, convention);
        let mut log_e = 0.0;
        let mut e = vec![1.0; n + 1];
        for j in 0..n {
            log_e += ay[j] * path.grid.dt(j);
            e[j + 1] = log_e.exp();
        }
        let w = (0..n).map(|i| path.rho * path.nu[i] / e[i]).collect();
        FirstVariation { e, w }
    }

    /// D_{t_i} Y_{t_j}; zero below the diagonal, rho sigY_i on it.
    pub fn d_y(&self, i: usize, j: usize) -> f64 {
        if j >= i {
            self.w[i] * self.e[j]
        } else {
            0.0
        }
    }
}

/// Separable representation of G, DG, D²G and the scalar assemblies.
#[derive(Debug, Clone)]
pub struct AnalyticKernel {
    n: usize,
    pub fv: FirstVariation,
    /// Prefix kernels: P2 = Σ a_yy E dt, P3 = Σ a_yyy E² dt, P2P = Σ a_yy E P2 dt.
    p2: Vec<f64>,
    p3: Vec<f64>,
    p2p: Vec<f64>,
    /// dG-layer suffixes.
    sa: Vec<f64>,
    scp: Vec<f64>,
    sc: Vec<f64>,
    /// d2G-layer suffixes.
    sap: Vec<f64>,
    sb: Vec<f64>,
    scp2: Vec<f64>,
    scq: Vec<f64>,
    h0_raw: Vec<f64>,
    h1_raw: Vec<f64>,
    /// G(t_i, T).
    pub g: Vec<f64>,
    g_fn: Vec<f64>,
}

impl AnalyticKernel {
    pub fn new(path: &PathBundle, convention: Convention) -> Self {
        let n = path.n_steps();
        let fv = FirstVariation::new(path, convention);
        let (_, ayy, ayyy) = drift_partials(path, convention);
        let (ma, mb, mc) = step_measures(path);

        let mut p2 = vec![0.0; n + 1];
        let mut p3 = vec![0.0; n + 1];
        let mut p2p = vec![0.0; n + 1];
        for j in 0..n {
            let dt = path.grid.dt(j);
            let ej = fv.e[j];
            p2[j + 1] = p2[j] + ayy[j] * ej * dt;
            p3[j + 1] = p3[j] + ayyy[j] * ej * ej * dt;
            p2p[j + 1] = p2p[j] + ayy[j] * ej * p2[j] * dt;
        }

        let mut sg = vec![0.0; n + 1];
        let mut sa = vec![0.0; n + 1];
        let mut scp = vec![0.0; n + 1];
        let mut sc = vec![0.0; n + 1];
        let mut sap = vec![0.0; n + 1];
        let mut sb = vec![0.0; n + 1];
        let mut scp2 = vec![0.0; n + 1];
        let mut scq = vec![0.0; n + 1];
        for j in (0..n).rev() {
            let ej = fv.e[j];
            sg[j] = sg[j + 1] + path.sig[1][j] * ej * path.k[j];
            sa[j] = sa[j + 1] + ma[j] * ej * ej;
            scp[j] = scp[j + 1] + mc[j] * ej * p2[j];
            sc[j] = sc[j + 1] + mc[j] * ej;
            sap[j] = sap[j + 1] + ma[j] * ej * ej * p2[j];
            sb[j] = sb[j + 1] + mb[j] * ej * ej * ej;
            scp2[j] = scp2[j + 1] + mc[j] * ej * p2[j] * p2[j];
            scq[j] = scq[j + 1] + mc[j] * ej * (p3[j] + p2p[j]);
        }

        let g: Vec<f64> = (0..n).map(|i| path.sig[0][i] + fv.w[i] * sg[i]).collect();
        let d_tail: Vec<f64> = (0..n).map(|i| sa[i] + scp[i] - p2[i] * sc[i]).collect();
        let g_fn: Vec<f64> = (0..n)
            .map(|i| path.sig[1][i] * fv.e[i] + fv.w[i] * d_tail[i])
            .collect();
        let h0_raw: Vec<f64> = (0..n)
            .map(|i| path.sig[2][i] * fv.e[i] * fv.e[i] + path.sig[1][i] * fv.e[i] * p2[i])
            .collect();
        let h1_raw: Vec<f64> = (0..n).map(|i| path.sig[1][i] * fv.e[i]).collect();

        AnalyticKernel {
            n,
            fv,
            p2,
            p3,
            p2p,
            sa,
            scp,
            sc,
            sap,
            sb,
            scp2,
            scq,
            h0_raw,
            h1_raw,
            g,
            g_fn,
        }
    }

    /// D_{t_s} D_{t_t} Y_{t_v} (symmetric in s, t; the sum runs from the
    /// larger of the two).
    pub fn d2_y(&self, s: usize, t: usize, v: usize) -> f64 {
        let m = s.max(t);
        if v < m {
            return 0.0;
        }
        self.fv.w[s] * self.fv.w[t] * self.fv.e[v] * (self.p2[v] - self.p2[m])
    }

    /// D³Y for r ≤ s ≤ t ≤ v (sorted internally).
    pub fn d3_y(&self, r: usize, s: usize, t: usize, v: usize) -> f64 {
        let mut idx = [r, s, t];
        idx.sort_unstable();
        let [r, s, t] = idx;
        if v < t {
            return 0.0;
        }
        let a2 = self.p2[v] - self.p2[t];
        let a3 = self.p3[v] - self.p3[t];
        let a2p = self.p2p[v] - self.p2p[t];
        self.fv.w[r]
            * self.fv.w[s]
            * self.fv.w[t]
            * self.fv.e[v]
            * (a2 * a2 + a3 + a2p - self.p2[s] * a2)
    }

    /// D_{t_s} G(t_i, T); symmetric extension to s > i via the Ito
    /// boundary term at the larger index.
    pub fn dg(&self, s: usize, i: usize) -> f64 {
        let (lo, hi) = if s <= i { (s, i) } else { (i, s) };
        self.fv.w[lo] * self.g_fn[hi]
    }

    fn uv(&self, i: usize) -> (f64, f64) {
        let q = self.p2[i];
        let u = 3.0 * self.sap[i] - 2.0 * q * self.sa[i]
            + self.sb[i]
            + self.scp2[i] - 2.0 * q * self.scp[i] + q * q * self.sc[i]
            + self.scq[i]
            - (self.p3[i] + self.p2p[i]) * self.sc[i];
        let v = self.sa[i] + self.scp[i] - q * self.sc[i];
        (u, v)
    }

    /// D_{t_r} D_{t_s} G(t_i, T), arguments in any order.
    pub fn d2g(&self, r: usize, s: usize, i: usize) -> f64 {
        let mut idx = [r, s, i];
        idx.sort_unstable();
        let [p1, p2i, p3i] = idx;
        let x = self.p2[p2i];
        let (u, v) = self.uv(p3i);
        let w = &self.fv.w;
        w[p1] * w[p2i] * (self.h0_raw[p3i] - x * self.h1_raw[p3i])
            + w[p1] * w[p2i] * w[p3i] * (u - x * v)
    }

    /// I, duI, duduI under both regions.
    pub fn du_functionals(&self, path: &PathBundle, u: &[f64], second_order: bool) -> DuScalars {
        let n = self.n;
        let mut i_int = 0.0;
        for i in 0..n {
            i_int += u[i] * self.g[i] * path.grid.dt(i);
        }

        let mut sgf = vec![0.0; n + 1];
        for i in (0..n).rev() {
            sgf[i] = sgf[i + 1] + u[i] * self.g_fn[i] * path.grid.dt(i);
        }
        let mut du_paper = 0.0;
        let mut du_full = 0.0;
        for s in 0..n {
            let a = u[s] * self.fv.w[s] * path.grid.dt(s);
            du_paper += a * sgf[s];
            du_full += a * (sgf[s] + sgf[s + 1]);
        }

        let (mut dudu_paper, mut dudu_full) = (0.0, 0.0);
        if second_order {
            let mut a = vec![0.0; n];
            let mut bx = vec![0.0; n];
            let mut c0 = vec![0.0; n];
            let mut c1 = vec![0.0; n];
            for i in 0..n {
                let dt = path.grid.dt(i);
                let (uu, vv) = self.uv(i);
                a[i] = u[i] * self.fv.w[i] * dt;
                bx[i] = a[i] * self.p2[i];
                c0[i] = u[i] * dt * (self.h0_raw[i] + self.fv.w[i] * uu);
                c1[i] = u[i] * dt * (self.h1_raw[i] + self.fv.w[i] * vv);
            }
            // no coincidence special cases: the analytic boundary factors
            // are continuous across equal indices
            let x3 = |b: &[f64], c: &[f64]| ChainSums::strict3(&a, b, c);
            let ab: Vec<f64> = (0..n).map(|i| a[i] * a[i]).collect();
            let abx: Vec<f64> = (0..n).map(|i| a[i] * bx[i]).collect();
            let bc0: Vec<f64> = (0..n).map(|i| a[i] * c0[i]).collect();
            let bxc1: Vec<f64> = (0..n).map(|i| bx[i] * c1[i]).collect();
            let strict = x3(&a, &c0) - x3(&bx, &c1);
            let low_pair = ChainSums::strict2(&ab, &c0) - ChainSums::strict2(&abx, &c1);
            let d3: Vec<f64> = (0..n).map(|i| bc0[i] - bxc1[i]).collect();
            let high_pair = ChainSums::strict2(&a, &d3);
            let diag = ChainSums::diag3(&a, &a, &c0) - ChainSums::diag3(&a, &bx, &c1);
            dudu_full = 6.0 * strict + 3.0 * low_pair + 3.0 * high_pair + diag;
            dudu_paper = strict + low_pair + high_pair + diag;
        }

        DuScalars {
            i_int,
            du_i_paper: du_paper,
            du_i_full: du_full,
            dudu_i_paper: dudu_paper,
            dudu_i_full: dudu_full,
        }
    }
}
