//! Quadratic objectives over (X, θ, U, X̂) for decentralized control with a
//! strategic transmitter.
//!
//! Only objectives without a U·X̂ product are reduced. The accepted pattern is
//!
//! ```text
//! φ_E = e·(X + kθ − X̂)² + e·(k1·U² + k2·U·X + k3·U·θ) + (terms in X, θ only)
//! φ_D = d·(X − X̂)² + (terms without X̂)
//! ```
//!
//! with e, d, k1 > 0. Linear and constant monomials are dropped, since every
//! variable is zero-mean under linear strategies. Anything else is rejected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gausslin::{best_decoder, CostPair, LinearScheme, SourcePairModel};
use crate::optimize::minimize_smooth;

/// Coefficients of every monomial of degree ≤ 2 in (X, θ, U, X̂).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadraticObjective {
    pub x2: f64,
    pub theta2: f64,
    pub u2: f64,
    pub x_hat2: f64,
    pub xtheta: f64,
    pub xu: f64,
    pub xx_hat: f64,
    pub thetau: f64,
    pub thetax_hat: f64,
    pub ux_hat: f64,
    pub x: f64,
    pub theta: f64,
    pub u: f64,
    pub x_hat: f64,
    #[serde(rename = "const")]
    pub constant: f64,
}

impl QuadraticObjective {
    fn coefficients(&self) -> [f64; 15] {
        [
            self.x2,
            self.theta2,
            self.u2,
            self.x_hat2,
            self.xtheta,
            self.xu,
            self.xx_hat,
            self.thetau,
            self.thetax_hat,
            self.ux_hat,
            self.x,
            self.theta,
            self.u,
            self.x_hat,
            self.constant,
        ]
    }

    fn from_coefficients(c: [f64; 15]) -> Self {
        Self {
            x2: c[0],
            theta2: c[1],
            u2: c[2],
            x_hat2: c[3],
            xtheta: c[4],
            xu: c[5],
            xx_hat: c[6],
            thetau: c[7],
            thetax_hat: c[8],
            ux_hat: c[9],
            x: c[10],
            theta: c[11],
            u: c[12],
            x_hat: c[13],
            constant: c[14],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.coefficients().iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidInput("objective coefficients must be finite".into()))
        }
    }

    /// `(a·X + b·θ + c·U + d·X̂)²` expanded.
    pub fn square(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self {
            x2: a * a,
            theta2: b * b,
            u2: c * c,
            x_hat2: d * d,
            xtheta: 2.0 * a * b,
            xu: 2.0 * a * c,
            xx_hat: 2.0 * a * d,
            thetau: 2.0 * b * c,
            thetax_hat: 2.0 * b * d,
            ux_hat: 2.0 * c * d,
            ..Self::default()
        }
    }

    pub fn u_squared(k1: f64) -> Self {
        Self {
            u2: k1,
            ..Self::default()
        }
    }

    pub fn plus(&self, o: &Self) -> Self {
        let (a, b) = (self.coefficients(), o.coefficients());
        Self::from_coefficients(std::array::from_fn(|i| a[i] + b[i]))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::from_coefficients(self.coefficients().map(|v| v * s))
    }

    fn magnitude(&self) -> f64 {
        self.coefficients().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `(X + U − X̂)² + k1·U²`.
    pub fn witsenhausen(k1: f64) -> Self {
        Self::square(1.0, 0.0, 1.0, -1.0).plus(&Self::u_squared(k1))
    }

    /// `(X − X̂)² + k1·U²`.
    pub fn test_channel(k1: f64) -> Self {
        Self::square(1.0, 0.0, 0.0, -1.0).plus(&Self::u_squared(k1))
    }
}

/// True iff the U·X̂ coefficient is nonzero (relative to the largest coefficient).
pub fn has_ux_cross_term(phi: &QuadraticObjective) -> bool {
    phi.ux_hat.abs() > 1e-12 * phi.magnitude()
}

/// `(X + kθ − X̂)² + k1·U² + k2·U·X + k3·U·θ` for the transmitter and
/// `(X − X̂)²` for the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CanonicalForm {
    pub theta_weight: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

impl CanonicalForm {
    pub fn new(theta_weight: f64, k1: f64, k2: f64, k3: f64) -> Self {
        Self {
            theta_weight,
            k1,
            k2,
            k3,
        }
    }

    /// The canonical pair (φ_E, φ_D).
    pub fn expand(&self) -> (QuadraticObjective, QuadraticObjective) {
        let e = QuadraticObjective::square(1.0, self.theta_weight, 0.0, -1.0).plus(&QuadraticObjective {
            u2: self.k1,
            xu: self.k2,
            thetau: self.k3,
            ..QuadraticObjective::default()
        });
        (e, QuadraticObjective::square(1.0, 0.0, 0.0, -1.0))
    }
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-12 * scale.max(1.0)
}

/// Reduces (φ_E, φ_D) to canonical form, or explains why it cannot.
pub fn canonicalize(phi_e: &QuadraticObjective, phi_d: &QuadraticObjective) -> Result<CanonicalForm> {
    phi_e.validate()?;
    phi_d.validate()?;
    let reject = |m: &str| Err(Error::NonCanonicalizable(m.to_string()));
    if has_ux_cross_term(phi_e) {
        return reject("phi_e contains a U*X_hat product");
    }
    if has_ux_cross_term(phi_d) {
        return reject("phi_d contains a U*X_hat product");
    }

    let d = phi_d.x_hat2;
    if !(d > 0.0) {
        return reject("phi_d: X_hat^2 coefficient must be positive");
    }
    if !close(phi_d.xx_hat, -2.0 * d, phi_d.magnitude()) {
        return reject("phi_d: X*X_hat coefficient must be -2 times the X_hat^2 coefficient");
    }
    if !close(phi_d.thetax_hat, 0.0, phi_d.magnitude()) {
        return reject("phi_d: theta*X_hat term not allowed");
    }

    let e = phi_e.x_hat2;
    if !(e > 0.0) {
        return reject("phi_e: X_hat^2 coefficient must be positive");
    }
    if !close(phi_e.xx_hat, -2.0 * e, phi_e.magnitude()) {
        return reject("phi_e: X*X_hat coefficient must be -2 times the X_hat^2 coefficient");
    }
    let cf = CanonicalForm {
        theta_weight: -phi_e.thetax_hat / (2.0 * e),
        k1: phi_e.u2 / e,
        k2: phi_e.xu / e,
        k3: phi_e.thetau / e,
    };
    if !(cf.k1 > 0.0) {
        return Err(Error::Unbounded(cf.k1));
    }
    Ok(cf)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CanonicalSolution {
    pub scheme: LinearScheme,
    pub alpha: f64,
    pub gain: f64,
    pub j_e: f64,
    pub j_d: f64,
    pub costs: CostPair,
    pub bound_hit: bool,
    /// Zero gain is optimal: nothing is sent and α is arbitrary.
    pub silent: bool,
}

struct Canonical<'a> {
    m: &'a SourcePairModel,
    cf: CanonicalForm,
    noise: f64,
}

impl Canonical<'_> {
    fn moments(&self, alpha: f64) -> (f64, f64, f64) {
        let m = self.m;
        let var_v = m.sigma_x2 * (1.0 + 2.0 * alpha * m.rho + alpha * alpha * m.r);
        let cov_vx = m.sigma_x2 * (1.0 + alpha * m.rho);
        let cov_vt = m.sigma_x2 * (m.rho + alpha * m.r);
        (var_v, cov_vx, cov_vt)
    }

    fn j_e(&self, alpha: f64, c: f64) -> f64 {
        let enc = LinearScheme::encoder(alpha, 0.0).with_gain(c);
        let Ok(resp) = best_decoder(self.m, &enc, self.noise) else {
            return f64::INFINITY;
        };
        let k = self.cf.theta_weight;
        let track = crate::gausslin::tracking_cost(self.m, &resp.scheme, self.noise, k);
        let (var_v, cov_vx, cov_vt) = self.moments(alpha);
        track + self.cf.k1 * c * c * var_v + c * (self.cf.k2 * cov_vx + self.cf.k3 * cov_vt)
    }

    fn c_max(&self, alpha: f64) -> f64 {
        let (var_v, cov_vx, cov_vt) = self.moments(alpha);
        let k = self.cf.theta_weight;
        let m = self.m;
        let j0 = m.sigma_x2 * (1.0 + 2.0 * k * m.rho + k * k * m.r);
        let l = (self.cf.k2 * cov_vx + self.cf.k3 * cov_vt).abs();
        let a = self.cf.k1 * var_v;
        (l + (l * l + 4.0 * a * j0).sqrt()) / (2.0 * a)
    }

    /// Best gain for a fixed α; the negative half-line only matters with U·X or U·θ terms.
    fn best_gain(&self, alpha: f64) -> (f64, f64, bool) {
        let hi = self.c_max(alpha);
        let pos = minimize_smooth(|c| self.j_e(alpha, c), 0.0, hi, 201);
        let mut best = (pos.x, pos.value, pos.bound_hit && pos.x > 0.0);
        if self.cf.k2 != 0.0 || self.cf.k3 != 0.0 {
            let neg = minimize_smooth(|c| self.j_e(alpha, c), -hi, 0.0, 201);
            if neg.value < best.1 {
                best = (neg.x, neg.value, neg.bound_hit && neg.x < 0.0);
            }
        }
        best
    }
}

/// Minimizes the transmitter's objective over linear encoders `c·(X + αθ)`
/// against the best-responding receiver, through `Y = U + N`.
pub fn solve_canonical(m: &SourcePairModel, cf: &CanonicalForm, noise_var: f64) -> Result<CanonicalSolution> {
    m.validate()?;
    if !(cf.k1 > 0.0) {
        return Err(Error::Unbounded(cf.k1));
    }
    if ![cf.theta_weight, cf.k1, cf.k2, cf.k3].iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput("canonical coefficients must be finite".into()));
    }
    if !(noise_var > 0.0) || !noise_var.is_finite() {
        return Err(Error::InvalidInput("noise_var must be finite and > 0".into()));
    }
    let p = Canonical { m, cf: *cf, noise: noise_var };
    let outer = minimize_smooth(|a| p.best_gain(a).1, -10.0, 10.0, 401);
    let (gain, _, c_bound) = p.best_gain(outer.x);
    let silent = gain.abs() <= 1e-9 * p.c_max(outer.x);
    if (outer.bound_hit || c_bound) && !silent {
        log::warn!("BoundHit: canonical solve at alpha = {}, gain = {gain}", outer.x);
    }
    let enc = LinearScheme::encoder(outer.x, 0.0).with_gain(gain);
    let resp = best_decoder(m, &enc, noise_var)?;
    Ok(CanonicalSolution {
        scheme: resp.scheme,
        alpha: outer.x,
        gain,
        j_e: p.j_e(outer.x, gain),
        j_d: resp.costs.d_d,
        costs: resp.costs,
        bound_hit: outer.bound_hit || c_bound,
        silent,
    })
}

/// Rejects U·X̂ products, canonicalizes and solves.
pub fn solve_objectives(
    m: &SourcePairModel,
    phi_e: &QuadraticObjective,
    phi_d: &QuadraticObjective,
    noise_var: f64,
) -> Result<(CanonicalForm, CanonicalSolution)> {
    if has_ux_cross_term(phi_e) || has_ux_cross_term(phi_d) {
        return Err(Error::CrossTermPresent);
    }
    let cf = canonicalize(phi_e, phi_d)?;
    Ok((cf, solve_canonical(m, &cf, noise_var)?))
}

/// JSON classification report for a pair of objectives.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub phi_e_cross_term: bool,
    pub phi_d_cross_term: bool,
    pub canonical: Option<CanonicalForm>,
    pub reason: Option<String>,
}

pub fn classify(phi_e: &QuadraticObjective, phi_d: &QuadraticObjective) -> Classification {
    let (canonical, reason) = match canonicalize(phi_e, phi_d) {
        Ok(cf) => (Some(cf), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Classification {
        phi_e_cross_term: has_ux_cross_term(phi_e),
        phi_d_cross_term: has_ux_cross_term(phi_d),
        canonical,
        reason,
    }
}
