//! Data for the three equilibrium panels: costs against r, costs against ρ,
//! and the strategic R-D curves for two values of r.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::solve_noiseless;
use crate::error::{Error, Result};
use crate::gausslin::SourcePairModel;
use crate::strategic_rd::rd_point;

/// `points` equally spaced values on [lo, hi].
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// Costs against r at fixed ρ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostsVsR {
    pub r: f64,
    pub d_e: f64,
    pub d_d: f64,
    pub valid: bool,
}

/// Costs against ρ at fixed r.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostsVsRho {
    pub rho: f64,
    pub d_e: f64,
    pub d_d: f64,
    pub valid: bool,
}

/// Strategic R-D curves at ρ = 0 for r = 1 and r = 0.1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdCurves {
    pub rate_bits: f64,
    pub d_e_r1: f64,
    pub d_d_r1: f64,
    pub d_e_r01: f64,
    pub d_d_r01: f64,
}

/// Solves each grid point; models violating r > ρ² are kept with `valid = false`
/// and NaN costs.
fn equilibrium_costs(sigma_x2: f64, pts: &[(f64, f64)]) -> Result<Vec<Option<(f64, f64)>>> {
    let out: Vec<Result<Option<(f64, f64)>>> = pts
        .par_iter()
        .map(|&(rho, r)| match SourcePairModel::new(sigma_x2, rho, r) {
            Ok(m) => solve_noiseless(&m).map(|e| Some((e.costs.d_e, e.costs.d_d))),
            Err(_) => Ok(None),
        })
        .collect();
    let out: Vec<Option<(f64, f64)>> = out.into_iter().collect::<Result<_>>()?;
    if out.iter().all(Option::is_none) {
        return Err(Error::InvalidInput("sweep grid contains no valid model (r must exceed rho^2)".into()));
    }
    Ok(out)
}

pub fn costs_vs_r(sigma_x2: f64, rho: f64, r_values: &[f64]) -> Result<Vec<CostsVsR>> {
    let pts: Vec<(f64, f64)> = r_values.iter().map(|&r| (rho, r)).collect();
    Ok(equilibrium_costs(sigma_x2, &pts)?
        .into_iter()
        .zip(r_values)
        .map(|(c, &r)| {
            let (d_e, d_d) = c.unwrap_or((f64::NAN, f64::NAN));
            CostsVsR {
                r,
                d_e,
                d_d,
                valid: c.is_some(),
            }
        })
        .collect())
}

pub fn costs_vs_rho(sigma_x2: f64, r: f64, rho_values: &[f64]) -> Result<Vec<CostsVsRho>> {
    let pts: Vec<(f64, f64)> = rho_values.iter().map(|&rho| (rho, r)).collect();
    Ok(equilibrium_costs(sigma_x2, &pts)?
        .into_iter()
        .zip(rho_values)
        .map(|(c, &rho)| {
            let (d_e, d_d) = c.unwrap_or((f64::NAN, f64::NAN));
            CostsVsRho {
                rho,
                d_e,
                d_d,
                valid: c.is_some(),
            }
        })
        .collect())
}

pub fn rd_curves(sigma_x2: f64, rates: &[f64]) -> Result<Vec<RdCurves>> {
    let m1 = SourcePairModel::new(sigma_x2, 0.0, 1.0)?;
    let m01 = SourcePairModel::new(sigma_x2, 0.0, 0.1)?;
    rates
        .par_iter()
        .map(|&rate| {
            let a = rd_point(&m1, rate)?.costs;
            let b = rd_point(&m01, rate)?.costs;
            Ok(RdCurves {
                rate_bits: rate,
                d_e_r1: a.d_e,
                d_d_r1: a.d_d,
                d_e_r01: b.d_e,
                d_d_r01: b.d_d,
            })
        })
        .collect()
}

/// Default grids: r ∈ [0.05, 10] (200), ρ ∈ [−0.9, 0.9] at r = 1 (200), R ∈ [0, 5] (101).
pub fn default_r_grid() -> Vec<f64> {
    linspace(0.05, 10.0, 200)
}

pub fn default_rho_grid() -> Vec<f64> {
    linspace(-0.9, 0.9, 200)
}

pub fn default_rate_grid() -> Vec<f64> {
    linspace(0.0, 5.0, 101)
}

pub(crate) fn nonincreasing(v: impl Iterator<Item = f64>, slack: f64) -> bool {
    let v: Vec<f64> = v.collect();
    v.windows(2).all(|w| w[1] <= w[0] + slack)
}
