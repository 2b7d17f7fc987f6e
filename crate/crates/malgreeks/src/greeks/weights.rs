//! Integration-by-parts weight assemblies.
//!
//! The generic identity moves a ζ-derivative off the payoff:
//!
//! ```text
//! ∂_ζ E[H f(F)] = E[ f(F) ( H a δ(u) − D_u(H a) + ∂_ζ H ) ],   a = ∂_ζF / D_u F
//! ```
//!
//! Corrected weights apply it directly. Paper-literal weights reproduce the
//! final printed Delta/Gamma displays verbatim (including the stray S_T
//! factor inside D_u and the paper-region double integral), retained to
//! quantify the erratum.

use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::malliavin::{MalliavinCache, Region, ThetaTangent};

/// Corrected assemblies (default) vs the printed final formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    #[default]
    Corrected,
    PaperLiteral,
}

/// H a δ(u) − (D_uH a + H D_ua) + ∂_ζH.
pub fn generic_ibp_weight(a: f64, dua: f64, h: f64, duh: f64, dzeta_h: f64, sko: f64) -> f64 {
    h * a * sko - (duh * a + h * dua) + dzeta_h
}

fn guard(cache: &MalliavinCache) -> Result<()> {
    if cache.excluded {
        return Err(EngineError::SingularWeight {
            i_abs: cache.i_int.abs(),
            floor: cache.eps_i,
            path_index: 0,
        });
    }
    Ok(())
}

/// Delta weight: E[f(S_T) π_Δ] estimates ∂_x E[f(S_T)].
pub fn delta_weight(cache: &MalliavinCache, x0: f64, mode: WeightMode, region: Region) -> Result<f64> {
    guard(cache)?;
    let i = cache.i_int;
    match mode {
        WeightMode::Corrected => {
            let du_i = cache.du_i(region);
            let a = 1.0 / (x0 * i);
            let dua = -du_i / (x0 * i * i);
            Ok(generic_ibp_weight(a, dua, 1.0, 0.0, 0.0, cache.sko))
        }
        // printed final line; duI restricted to the ordered region
        WeightMode::PaperLiteral => {
            let x = cache.du_i_paper;
            Ok((cache.sko / i - cache.s_t * (1.0 - x / (i * i))) / x0)
        }
    }
}

/// Gamma weight: E[f(S_T) π_Γ] estimates ∂²_x E[f(S_T)].
pub fn gamma_weight(cache: &MalliavinCache, x0: f64, mode: WeightMode, region: Region) -> Result<f64> {
    guard(cache)?;
    let i = cache.i_int;
    let sko = cache.sko;
    match mode {
        WeightMode::Corrected => {
            let du_i = cache.du_i(region);
            let dudu_i = cache.dudu_i(region);
            // H = x0 * delta weight, independent of x0
            let h = sko / i + du_i / (i * i);
            let duh = cache.du_sko / i - sko * du_i / (i * i) + dudu_i / (i * i)
                - 2.0 * du_i * du_i / (i * i * i);
            let a = 1.0 / (x0 * i);
            let dua = -du_i / (x0 * i * i);
            Ok(generic_ibp_weight(a, dua, h, duh, -h / x0, sko) / x0)
        }
        WeightMode::PaperLiteral => {
            // the three printed expressions, assembled as printed
            let x = cache.du_i_paper;
            let z = cache.dudu_i_paper;
            let s_t = cache.s_t;
            let h = sko / i - s_t * (1.0 - x / (i * i));
            let duh = -(x / (i * i)) * sko
                - s_t * (i - x / i - z / (i * i) + 2.0 * x * x / (i * i * i));
            let dxh = -s_t * (1.0 - x / (i * i)) / x0;
            Ok((h * sko / i - (2.0 * h + duh / i + h * x / (i * i)) + x0 * dxh) / (x0 * x0))
        }
    }
}

/// Rho/Vega weight from an exact parameter tangent: with
/// a = ∂_ε S_T / (S_T I) = θ_L / I,
/// E[f(S_T)(a δ(u) − D_u a)] estimates ∂_ε E[f(S_T)].
///
/// Uses the full-square duI: the tangent machinery is discrete-exact and
/// D_u of a functional integrates over the whole square.
pub fn rho_vega_weight(cache: &MalliavinCache, theta: &ThetaTangent) -> Result<f64> {
    guard(cache)?;
    let i = cache.i_int;
    let a = theta.theta_l / i;
    let dua = theta.du_theta_l / i - theta.theta_l * cache.du_i_full / (i * i);
    Ok(generic_ibp_weight(a, dua, 1.0, 0.0, 0.0, cache.sko))
}
