//! Noiseless leader/follower equilibrium.
//!
//! The transmitter commits to `Y = X + αθ`; the receiver answers with
//! `X̂ = κY`. α maximizes the encoder objective
//!
//! ```text
//! J(α, σ_T²) = σ_X² (1+αρ)(1+2αr+αρ+2ρ) / (1 + rα² + 2αρ + σ_T²/σ_X²)
//! ```
//!
//! and D_E = σ_X²(1+2ρ+r) − J at the chosen encoder. Costs are always reported
//! from [`gausslin`](crate::gausslin); the printed closed forms are kept for
//! cross-checks only.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gausslin::{best_decoder, CostPair, LinearScheme, SourcePairModel};

/// Below this |r + ρ| the root formula is 0/0 and the series is used.
pub const SERIES_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquilibriumReport {
    pub alpha: f64,
    pub kappa: f64,
    pub costs: CostPair,
    /// sqrt(1 + 4(r + ρ)).
    pub a_aux: f64,
}

impl EquilibriumReport {
    pub fn scheme(&self) -> LinearScheme {
        LinearScheme::encoder(self.alpha, 0.0).with_decoder(self.kappa, 0.0)
    }
}

/// Encoder objective E{(2θ + X)X̂} under the best-response decoder.
pub fn objective_j(m: &SourcePairModel, alpha: f64, sigma_t2: f64) -> Result<f64> {
    let den = 1.0 + m.r * alpha * alpha + 2.0 * alpha * m.rho + sigma_t2 / m.sigma_x2;
    if den <= 1e-12 {
        return Err(Error::DegenerateDenominator(den));
    }
    let num = (1.0 + alpha * m.rho) * (1.0 + 2.0 * alpha * m.r + alpha * m.rho + 2.0 * m.rho);
    Ok(m.sigma_x2 * num / den)
}

fn j0(m: &SourcePairModel, alpha: f64) -> f64 {
    // r > ρ² keeps 1 + rα² + 2αρ ≥ 1 − ρ²/r > 0.
    objective_j(m, alpha, 0.0).unwrap_or(f64::NEG_INFINITY)
}

/// The two stationary points of J(·, 0); `None` for the second one when r + ρ = 0.
pub fn stationary_points(m: &SourcePairModel) -> (f64, Option<f64>) {
    let s = m.r + m.rho;
    if s.abs() < SERIES_THRESHOLD {
        return (1.0 - s + 2.0 * s * s, None);
    }
    let a = (1.0 + 4.0 * s).sqrt();
    ((a - 1.0) / (2.0 * s), Some((-1.0 - a) / (2.0 * s)))
}

/// Equilibrium encoder weight: the stationary point with the larger J,
/// ties going to the smaller |α|.
pub fn best_alpha(m: &SourcePairModel) -> f64 {
    match stationary_points(m) {
        (plus, None) => plus,
        (plus, Some(minus)) => {
            let (jp, jm) = (j0(m, plus), j0(m, minus));
            if jp > jm || (jp == jm && plus.abs() <= minus.abs()) {
                plus
            } else {
                minus
            }
        }
    }
}

/// Solves the noiseless game: α from the root comparison, κ and costs from
/// covariance algebra.
pub fn solve_noiseless(m: &SourcePairModel) -> Result<EquilibriumReport> {
    m.validate()?;
    let alpha = best_alpha(m);
    let resp = best_decoder(m, &LinearScheme::encoder(alpha, 0.0), 0.0)?;
    Ok(EquilibriumReport {
        alpha,
        kappa: resp.scheme.dec_y_weight,
        costs: resp.costs,
        a_aux: (1.0 + 4.0 * (m.r + m.rho)).sqrt(),
    })
}

/// The printed closed-form costs in terms of A = sqrt(1 + 4(r+ρ)).
///
/// Only meaningful where the '+' root is the equilibrium and r + ρ ≠ 0.
pub fn closed_form_costs(m: &SourcePairModel) -> CostPair {
    let s = m.r + m.rho;
    let a = (1.0 + 4.0 * s).sqrt();
    CostPair {
        d_e: m.sigma_x2 * (1.0 + (a - 3.0) * s / (a - 1.0)),
        d_d: m.sigma_x2 * ((m.r - m.rho * m.rho) * (a - 1.0) / (a * (2.0 * m.r + a * m.rho + m.rho))),
    }
}

/// A one-parameter family of models approaching a singular corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LimitPath {
    /// r takes the supplied values (growing) at fixed ρ.
    RToInfinity { rho: f64 },
    /// r = ρ² + t for the supplied t (shrinking).
    RToRhoSquared { rho: f64 },
    /// ρ = 1 − t for the supplied t (shrinking) at fixed r ≥ 1.
    RhoToOne { r: f64 },
}

impl LimitPath {
    fn model(&self, sigma_x2: f64, p: f64) -> SourcePairModel {
        match *self {
            LimitPath::RToInfinity { rho } => SourcePairModel { sigma_x2, rho, r: p },
            LimitPath::RToRhoSquared { rho } => SourcePairModel {
                sigma_x2,
                rho,
                r: rho * rho + p,
            },
            LimitPath::RhoToOne { r } => SourcePairModel {
                sigma_x2,
                rho: 1.0 - p,
                r,
            },
        }
    }

    /// Variable that vanishes at the limit and in which D_D is asymptotically linear.
    fn vanishing(&self, p: f64) -> f64 {
        match self {
            LimitPath::RToInfinity { .. } => 1.0 / p.sqrt(),
            _ => p,
        }
    }

    /// The limit of D_D / σ_X² along the path.
    pub fn expected(&self) -> f64 {
        match self {
            LimitPath::RToInfinity { .. } => 0.5,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitReport {
    /// (path parameter, D_D / σ_X²).
    pub points: Vec<(f64, f64)>,
    /// Linear extrapolation of the last two points to the limit.
    pub extrapolated: f64,
    pub expected: f64,
}

/// Evaluates the equilibrium D_D along `path` at each parameter value.
pub fn corollary_limits(sigma_x2: f64, path: LimitPath, params: &[f64]) -> Result<LimitReport> {
    if params.len() < 2 {
        return Err(Error::InvalidInput("need at least two path points".into()));
    }
    let mut points = Vec::with_capacity(params.len());
    for &p in params {
        let rep = solve_noiseless(&path.model(sigma_x2, p))?;
        points.push((p, rep.costs.d_d / sigma_x2));
    }
    let n = points.len();
    let (h1, v1) = (path.vanishing(points[n - 2].0), points[n - 2].1);
    let (h2, v2) = (path.vanishing(points[n - 1].0), points[n - 1].1);
    let extrapolated = if (h1 - h2).abs() > 0.0 {
        v2 - h2 * (v1 - v2) / (h1 - h2)
    } else {
        v2
    };
    Ok(LimitReport {
        points,
        extrapolated,
        expected: path.expected(),
    })
}
