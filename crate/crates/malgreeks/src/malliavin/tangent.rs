//! Exact shock-derivatives of the discretized system by forward tangent
//! recursion, in plain table form.
//!
//! These are the reference implementations: O(n^2) or worse, written to
//! mirror the recursions one step at a time. The production backend in
//! [`super::discrete`] reproduces them through separable prefix/suffix
//! sums and is tested against this module; this module in turn is tested
//! against central finite differences in the increments.
//!
//! Scaling convention: the continuous D_{t_i} X corresponds to
//! ∂X / ∂(ΔW_i), with no division by Δt, so G(t_i, T) ≈ ∂ log S_T / ∂ΔW_i.

use crate::model::Convention;
use crate::path::PathBundle;

use super::drift_partials;

/// First-order tangents of the discretized system.
pub struct TangentTables {
    /// `t1[i][j]` = ∂Y_j / ∂ΔW_i (zero for j ≤ i).
    pub t1: Vec<Vec<f64>>,
    /// ∂ log S_T / ∂ΔW_i for each i.
    pub g_log_s: Vec<f64>,
}

/// Tangents of Y and of log S_T with respect to every increment of W.
pub fn discrete_tangent(path: &PathBundle, convention: Convention) -> TangentTables {
    let n = path.n_steps();
    let (ay, _, _) = drift_partials(path, convention);
    let mut t1 = vec![vec![0.0; n + 1]; n];
    for i in 0..n {
        t1[i][i + 1] = path.rho * path.nu[i];
        for j in (i + 1)..n {
            t1[i][j + 1] = t1[i][j] * (1.0 + ay[j] * path.grid.dt(j));
        }
    }
    let mut g_log_s = vec![0.0; n];
    for i in 0..n {
        let mut acc = path.sig[0][i];
        for j in (i + 1)..n {
            acc += path.sig[1][j] * t1[i][j] * path.k[j];
        }
        g_log_s[i] = acc;
    }
    TangentTables { t1, g_log_s }
}

/// ∂²Y_·/∂ΔW_s∂ΔW_i along the whole path (one (s, i) pair, O(n)).
pub fn second_tangent_slice(
    path: &PathBundle,
    convention: Convention,
    t1: &TangentTables,
    s: usize,
    i: usize,
) -> Vec<f64> {
    let n = path.n_steps();
    let (ay, ayy, _) = drift_partials(path, convention);
    let mut t2 = vec![0.0; n + 1];
    for j in s.max(i)..n {
        t2[j + 1] =
            t2[j] * (1.0 + ay[j] * path.grid.dt(j)) + ayy[j] * t1.t1[s][j] * t1.t1[i][j] * path.grid.dt(j);
    }
    t2
}

/// ∂² log S_T / ∂ΔW_s ∂ΔW_i (exact, O(n) given first tangents).
pub fn hessian_entry(
    path: &PathBundle,
    convention: Convention,
    t1: &TangentTables,
    s: usize,
    i: usize,
) -> f64 {
    let n = path.n_steps();
    let t2 = second_tangent_slice(path, convention, t1, s, i);
    let mut tot = 0.0;
    if i > s {
        tot += path.sig[1][i] * t1.t1[s][i];
    }
    if s > i {
        tot += path.sig[1][s] * t1.t1[i][s];
    }
    for j in 0..n {
        let dt = path.grid.dt(j);
        let s1 = path.sig[1][j];
        let s2 = path.sig[2][j];
        tot += (s2 * t1.t1[s][j] * t1.t1[i][j] + s1 * t2[j]) * path.k[j]
            - s1 * s1 * t1.t1[s][j] * t1.t1[i][j] * dt;
    }
    tot
}

/// ∂³ log S_T / ∂ΔW_r ∂ΔW_s ∂ΔW_i for r ≤ s ≤ i (exact, O(n)).
pub fn third_entry(
    path: &PathBundle,
    convention: Convention,
    t1: &TangentTables,
    r: usize,
    s: usize,
    i: usize,
) -> f64 {
    assert!(r <= s && s <= i);
    let n = path.n_steps();
    let (ay, ayy, ayyy) = drift_partials(path, convention);
    let t2_rs = second_tangent_slice(path, convention, t1, r, s);
    let t2_ri = second_tangent_slice(path, convention, t1, r, i);
    let t2_si = second_tangent_slice(path, convention, t1, s, i);
    // third tangent of Y by the same variation-of-constants recursion
    let mut t3 = vec![0.0; n + 1];
    for j in i..n {
        let dt = path.grid.dt(j);
        let sym =
            t2_rs[j] * t1.t1[i][j] + t2_ri[j] * t1.t1[s][j] + t2_si[j] * t1.t1[r][j];
        t3[j + 1] = t3[j] * (1.0 + ay[j] * dt)
            + (ayy[j] * sym + ayyy[j] * t1.t1[r][j] * t1.t1[s][j] * t1.t1[i][j]) * dt;
    }
    let mut tot = path.sig[2][i] * t1.t1[r][i] * t1.t1[s][i] + path.sig[1][i] * t2_rs[i];
    for j in 0..n {
        let dt = path.grid.dt(j);
        let s0 = path.sig[0][j];
        let s1 = path.sig[1][j];
        let s2 = path.sig[2][j];
        let s3 = path.sig[3][j];
        let ma = s2 * path.dw[j] - (s1 * s1 + s0 * s2) * dt;
        let mb = s3 * path.dw[j] - (3.0 * s1 * s2 + s0 * s3) * dt;
        let mc = s1 * path.k[j];
        let sym =
            t2_rs[j] * t1.t1[i][j] + t2_ri[j] * t1.t1[s][j] + t2_si[j] * t1.t1[r][j];
        tot += ma * sym + mb * t1.t1[r][j] * t1.t1[s][j] * t1.t1[i][j] + mc * t3[j];
    }
    tot
}
