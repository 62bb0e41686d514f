//! Strategic compression: the Gaussian strategic rate-distortion curve,
//! exact evaluation of discrete achievable triples, and a fixed-rate
//! Lloyd-Max codec on the effective source X + αθ.
//!
//! Rates are in bits. The test channel is `Y = X + βθ + S` with
//! `σ_S² = σ_X² B / (2^{2R} − 1)`, `B = 1 + β²r + 2βρ`, and β equal to the
//! noiseless equilibrium weight at every rate.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::equilibrium::{best_alpha, objective_j, solve_noiseless};
use crate::error::{Error, Result};
use crate::gausslin::{best_decoder, CostPair, LinearScheme, SourcePairModel};
use crate::simkit::{mean_with_stderr, sample, MeanEstimate, SimConfig};

pub fn bits_to_nats(bits: f64) -> f64 {
    bits * std::f64::consts::LN_2
}

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}

/// `2^{2R} − 1` without cancellation at small R.
fn two_pow_2r_minus_one(rate: f64) -> f64 {
    (2.0 * rate * std::f64::consts::LN_2).exp_m1()
}

/// One point of the strategic rate-distortion curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RdPoint {
    pub rate: f64,
    pub costs: CostPair,
    pub beta: f64,
    /// Infinite at rate 0.
    pub sigma_s2: f64,
}

impl RdPoint {
    /// Rate recomputed from (β, σ_S²).
    pub fn implied_rate(&self, m: &SourcePairModel) -> f64 {
        let v = m.sigma_x2 * (1.0 + self.beta * self.beta * m.r + 2.0 * self.beta * m.rho);
        0.5 * (v / self.sigma_s2).ln_1p() / std::f64::consts::LN_2
    }
}

/// Row of an R-D sweep CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdRow {
    pub rate_bits: f64,
    pub d_e: f64,
    pub d_d: f64,
    pub beta: f64,
    pub sigma_s2: f64,
}

impl From<RdPoint> for RdRow {
    fn from(p: RdPoint) -> Self {
        Self {
            rate_bits: p.rate,
            d_e: p.costs.d_e,
            d_d: p.costs.d_d,
            beta: p.beta,
            sigma_s2: p.sigma_s2,
        }
    }
}

/// Test-channel parameters (β, σ_S²) for a positive rate.
pub fn rd_test_channel(m: &SourcePairModel, rate: f64) -> Result<(f64, f64)> {
    m.validate()?;
    if !(rate > 0.0) {
        return Err(Error::ZeroRate(rate));
    }
    let beta = best_alpha(m);
    let b = 1.0 + beta * beta * m.r + 2.0 * beta * m.rho;
    let sigma_s2 = if rate.is_infinite() {
        0.0
    } else {
        m.sigma_x2 * b / two_pow_2r_minus_one(rate)
    };
    Ok((beta, sigma_s2))
}

/// Costs of the test channel at `rate` with a best-responding decoder.
pub fn rd_point(m: &SourcePairModel, rate: f64) -> Result<RdPoint> {
    m.validate()?;
    if rate.is_nan() || rate < 0.0 {
        return Err(Error::InvalidInput(format!("rate must be >= 0, got {rate}")));
    }
    if rate == 0.0 {
        return Ok(RdPoint {
            rate,
            costs: CostPair {
                d_e: m.var_x_plus_theta(),
                d_d: m.sigma_x2,
            },
            beta: best_alpha(m),
            sigma_s2: f64::INFINITY,
        });
    }
    let (beta, sigma_s2) = rd_test_channel(m, rate)?;
    let resp = best_decoder(m, &LinearScheme::encoder(beta, sigma_s2), 0.0)?;
    Ok(RdPoint {
        rate,
        costs: resp.costs,
        beta,
        sigma_s2,
    })
}

/// The same curve from its closed form:
/// `D_D = σ²(2^{−2R}(1−c) + c)`, `D_E = σ²(1+2ρ+r) − (1−2^{−2R}) J(β, 0)`.
pub fn rd_closed_form(m: &SourcePairModel, rate: f64) -> Result<CostPair> {
    let eq = solve_noiseless(m)?;
    let c = eq.costs.d_d / m.sigma_x2;
    let q = (-2.0 * rate * std::f64::consts::LN_2).exp();
    let j = objective_j(m, eq.alpha, 0.0)?;
    Ok(CostPair {
        d_e: m.var_x_plus_theta() - (1.0 - q) * j,
        d_d: m.sigma_x2 * (q * (1.0 - c) + c),
    })
}

/// Evaluates the curve on a rate grid.
pub fn rd_sweep(m: &SourcePairModel, rates: &[f64]) -> Result<Vec<RdPoint>> {
    rates.iter().map(|&r| rd_point(m, r)).collect()
}

/// Finite single-letter instance: p(x, θ) and p(y | x, θ) on grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteInstance {
    pub x_grid: Vec<f64>,
    pub theta_grid: Vec<f64>,
    /// `joint_pmf[i][j] = P(X = x_i, θ = θ_j)`.
    pub joint_pmf: Vec<Vec<f64>>,
    /// `channel[i][j][k] = P(Y = y_k | x_i, θ_j)`.
    pub channel: Vec<Vec<Vec<f64>>>,
    pub recon_grid: Vec<f64>,
}

/// Distortion tables: `d_e[i][j][l]` for (x_i, θ_j, x̂_l) and `d_d[i][l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionTables {
    pub d_e: Vec<Vec<Vec<f64>>>,
    pub d_d: Vec<Vec<f64>>,
}

const PMF_TOL: f64 = 1e-12;

impl DiscreteInstance {
    pub fn y_len(&self) -> usize {
        self.channel
            .first()
            .and_then(|r| r.first())
            .map_or(0, |r| r.len())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidDistribution(m.to_string()));
        let (nx, nt, ny) = (self.x_grid.len(), self.theta_grid.len(), self.y_len());
        if nx == 0 || nt == 0 || ny == 0 || self.recon_grid.is_empty() {
            return bad("grids must be nonempty");
        }
        if self.joint_pmf.len() != nx || self.joint_pmf.iter().any(|r| r.len() != nt) {
            return bad("joint_pmf shape must be |x_grid| x |theta_grid|");
        }
        if self.channel.len() != nx
            || self
                .channel
                .iter()
                .any(|r| r.len() != nt || r.iter().any(|c| c.len() != ny))
        {
            return bad("channel shape must be |x_grid| x |theta_grid| x |y|");
        }
        let all = self
            .joint_pmf
            .iter()
            .flatten()
            .chain(self.channel.iter().flatten().flatten());
        for &p in all {
            if !(p >= 0.0) || !p.is_finite() {
                return bad("probabilities must be finite and >= 0");
            }
        }
        let total: f64 = self.joint_pmf.iter().flatten().sum();
        if (total - 1.0).abs() > PMF_TOL {
            return Err(Error::InvalidDistribution(format!("joint_pmf sums to {total}")));
        }
        for (i, r) in self.channel.iter().enumerate() {
            for (j, c) in r.iter().enumerate() {
                let s: f64 = c.iter().sum();
                if (s - 1.0).abs() > PMF_TOL {
                    return Err(Error::InvalidDistribution(format!("channel row ({i}, {j}) sums to {s}")));
                }
            }
        }
        Ok(())
    }

    /// Quadratic tables `(x + θ − x̂)²` and `(x − x̂)²`.
    pub fn quadratic_tables(&self) -> DistortionTables {
        let d_e = self
            .x_grid
            .iter()
            .map(|x| {
                self.theta_grid
                    .iter()
                    .map(|t| self.recon_grid.iter().map(|xh| (x + t - xh).powi(2)).collect())
                    .collect()
            })
            .collect();
        let d_d = self
            .x_grid
            .iter()
            .map(|x| self.recon_grid.iter().map(|xh| (x - xh).powi(2)).collect())
            .collect();
        DistortionTables { d_e, d_d }
    }

    fn check_tables(&self, t: &DistortionTables) -> Result<()> {
        let nl = self.recon_grid.len();
        let ok_e = t.d_e.len() == self.x_grid.len()
            && t.d_e
                .iter()
                .all(|r| r.len() == self.theta_grid.len() && r.iter().all(|c| c.len() == nl));
        let ok_d = t.d_d.len() == self.x_grid.len() && t.d_d.iter().all(|r| r.len() == nl);
        if ok_e && ok_d {
            Ok(())
        } else {
            Err(Error::InvalidInput("distortion table shape does not match the instance".into()))
        }
    }

    fn y_marginal(&self) -> Vec<f64> {
        let mut py = vec![0.0; self.y_len()];
        for (pr, cr) in self.joint_pmf.iter().zip(&self.channel) {
            for (p, c) in pr.iter().zip(cr) {
                for (k, q) in c.iter().enumerate() {
                    py[k] += p * q;
                }
            }
        }
        py
    }
}

/// Evaluates (I(X,θ;Y) in bits, D_E, D_D) for a decoder given as recon-grid
/// indices, one per Y symbol.
pub fn discrete_triple(inst: &DiscreteInstance, decoder: &[usize], tables: &DistortionTables) -> Result<(f64, CostPair)> {
    inst.validate()?;
    inst.check_tables(tables)?;
    if decoder.len() != inst.y_len() || decoder.iter().any(|&l| l >= inst.recon_grid.len()) {
        return Err(Error::InvalidInput("decoder must map every y to a recon-grid index".into()));
    }
    let py = inst.y_marginal();
    let (mut mi, mut d_e, mut d_d) = (0.0, 0.0, 0.0);
    for (i, (pr, cr)) in inst.joint_pmf.iter().zip(&inst.channel).enumerate() {
        for (j, (p, c)) in pr.iter().zip(cr).enumerate() {
            for (k, q) in c.iter().enumerate() {
                let pxy = p * q;
                if pxy == 0.0 {
                    continue;
                }
                mi += pxy * (q / py[k]).log2();
                d_e += pxy * tables.d_e[i][j][decoder[k]];
                d_d += pxy * tables.d_d[i][decoder[k]];
            }
        }
    }
    Ok((mi.max(0.0), CostPair { d_e, d_d }))
}

/// Receiver best response for the table `d_d`; unreachable y symbols get
/// the prior-optimal reconstruction, ties go to the smallest index.
pub fn discrete_best_response(inst: &DiscreteInstance, d_d: &[Vec<f64>]) -> Result<Vec<usize>> {
    inst.validate()?;
    let nl = inst.recon_grid.len();
    if d_d.len() != inst.x_grid.len() || d_d.iter().any(|r| r.len() != nl) {
        return Err(Error::InvalidInput("d_d shape must be |x_grid| x |recon_grid|".into()));
    }
    let prior: Vec<f64> = inst.joint_pmf.iter().map(|r| r.iter().sum()).collect();
    let argmin = |w: &[f64]| {
        let mut best = (0, f64::INFINITY);
        for l in 0..nl {
            let v: f64 = w.iter().zip(d_d).map(|(p, row)| p * row[l]).sum();
            if v < best.1 {
                best = (l, v);
            }
        }
        best.0
    };
    let fallback = argmin(&prior);
    Ok((0..inst.y_len())
        .map(|k| {
            let w: Vec<f64> = inst
                .joint_pmf
                .iter()
                .zip(&inst.channel)
                .map(|(pr, cr)| pr.iter().zip(cr).map(|(p, c)| p * c[k]).sum())
                .collect();
            if w.iter().sum::<f64>() > 0.0 {
                argmin(&w)
            } else {
                fallback
            }
        })
        .collect())
}

/// Scalar quantizer for a zero-mean Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quantizer {
    pub thresholds: Vec<f64>,
    pub centroids: Vec<f64>,
    pub mse: f64,
    /// Max |centroid − cell mean| at return, in units of the source deviation.
    #[serde(skip)]
    pub residual: f64,
}

impl Quantizer {
    pub fn index(&self, v: f64) -> usize {
        self.thresholds.partition_point(|&t| t < v)
    }

    pub fn quantize(&self, v: f64) -> f64 {
        self.centroids[self.index(v)]
    }

    pub fn rate_bits(&self) -> f64 {
        (self.centroids.len() as f64).log2()
    }
}

fn phi(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
    }
}

/// P(a < Z < b), using upper tails on the right half-line to keep precision.
fn cell_prob(a: f64, b: f64) -> f64 {
    let q = |x: f64| 0.5 * erfc(x / std::f64::consts::SQRT_2);
    if a >= 0.0 {
        q(a) - q(b)
    } else if b <= 0.0 {
        q(-b) - q(-a)
    } else {
        1.0 - q(-a) - q(b)
    }
}

/// Cell probabilities and conditional means of a unit Gaussian.
fn cell_moments(t: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = t.len() + 1;
    let edge = |i: usize| if i == 0 { f64::NEG_INFINITY } else if i == n { f64::INFINITY } else { t[i - 1] };
    let mut p = Vec::with_capacity(n);
    let mut m = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = (edge(i), edge(i + 1));
        let pi = cell_prob(a, b);
        p.push(pi);
        m.push(if pi > 0.0 { (phi(a) - phi(b)) / pi } else { 0.5 * (a + b) });
    }
    (p, m)
}

fn midpoints(c: &[f64]) -> Vec<f64> {
    c.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
}

fn lloyd_residual(c: &[f64]) -> (f64, Vec<f64>) {
    let (_, m) = cell_moments(&midpoints(c));
    let r = c.iter().zip(&m).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    (r, m)
}

/// Solves the tridiagonal system with sub/main/super diagonals `l`, `d`, `u`.
fn thomas(l: &[f64], d: &[f64], u: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = if n > 1 { u[0] / d[0] } else { 0.0 };
    dp[0] = rhs[0] / d[0];
    for i in 1..n {
        let den = d[i] - l[i] * cp[i - 1];
        if i + 1 < n {
            cp[i] = u[i] / den;
        }
        dp[i] = (rhs[i] - l[i] * dp[i - 1]) / den;
    }
    let mut x = dp;
    for i in (0..n.saturating_sub(1)).rev() {
        x[i] -= cp[i] * x[i + 1];
    }
    x
}

/// One Newton step on F(c) = c − G(c), G the cell-mean map.
fn newton_step(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    let t = midpoints(c);
    let (p, m) = cell_moments(&t);
    let mut l = vec![0.0; n];
    let mut d = vec![1.0; n];
    let mut u = vec![0.0; n];
    let mut f = vec![0.0; n];
    for i in 0..n {
        f[i] = c[i] - m[i];
        if p[i] <= 0.0 {
            continue;
        }
        // ∂m/∂a = φ(a)(m − a)/P and ∂m/∂b = φ(b)(b − m)/P; each edge is a midpoint.
        if i > 0 {
            let a = t[i - 1];
            let g = phi(a) * (m[i] - a) / p[i];
            l[i] = -0.5 * g;
            d[i] -= 0.5 * g;
        }
        if i + 1 < n {
            let b = t[i];
            let g = phi(b) * (b - m[i]) / p[i];
            u[i] = -0.5 * g;
            d[i] -= 0.5 * g;
        }
    }
    let step = thomas(&l, &d, &u, &f);
    c.iter().zip(&step).map(|(a, s)| a - s).collect()
}

fn symmetrize(c: &mut [f64]) {
    let n = c.len();
    for i in 0..n / 2 {
        let v = 0.5 * (c[n - 1 - i] - c[i]);
        c[i] = -v;
        c[n - 1 - i] = v;
    }
    if n % 2 == 1 {
        c[n / 2] = 0.0;
    }
}

/// Lloyd-Max quantizer with `levels` cells for N(0, `source_var`).
///
/// Starts from the companded initialization, runs plain Lloyd iterations and
/// finishes with damped Newton steps on the centroid fixed point.
pub fn lloyd_max(levels: usize, source_var: f64) -> Result<Quantizer> {
    if !(2..=4096).contains(&levels) {
        return Err(Error::InvalidInput(format!("levels must be in [2, 4096], got {levels}")));
    }
    if !(source_var > 0.0) || !source_var.is_finite() {
        return Err(Error::InvalidInput("source_var must be finite and > 0".into()));
    }
    let target = 1e-12;
    let std_normal = Normal::standard();
    let mut c: Vec<f64> = (0..levels)
        .map(|i| 3f64.sqrt() * std_normal.inverse_cdf((i as f64 + 0.5) / levels as f64))
        .collect();
    symmetrize(&mut c);
    let (mut res, mut m) = lloyd_residual(&c);
    for _ in 0..200 {
        if res <= target {
            break;
        }
        c = m;
        symmetrize(&mut c);
        (res, m) = lloyd_residual(&c);
    }
    for _ in 0..60 {
        if res <= target {
            break;
        }
        let full = newton_step(&c);
        let mut step = 1.0;
        let mut accepted = false;
        while step >= 1.0 / 64.0 {
            let mut trial: Vec<f64> = c.iter().zip(&full).map(|(a, b)| a + step * (b - a)).collect();
            symmetrize(&mut trial);
            let ordered = trial.windows(2).all(|w| w[0] < w[1]);
            if ordered {
                let (r, mm) = lloyd_residual(&trial);
                if r < res {
                    (c, res, m) = (trial, r, mm);
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            // Fall back to a plain Lloyd step.
            c = m;
            symmetrize(&mut c);
            (res, m) = lloyd_residual(&c);
        }
    }
    log::debug!("lloyd_max levels={levels} residual={res:e}");
    let t = midpoints(&c);
    let (p, _) = cell_moments(&t);
    let explained: f64 = p.iter().zip(&c).map(|(pi, ci)| pi * ci * ci).sum();
    let sd = source_var.sqrt();
    Ok(Quantizer {
        thresholds: t.iter().map(|v| v * sd).collect(),
        centroids: c.iter().map(|v| v * sd).collect(),
        mse: source_var * (1.0 - explained).max(0.0),
        residual: res,
    })
}

/// Empirical costs of the fixed-rate codec on the effective source.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalTriple {
    pub rate_bits: f64,
    pub costs: CostPair,
    pub stderr: CostPair,
    pub alpha: f64,
    /// X̂ = κ·q(X + αθ).
    pub kappa: f64,
    /// Costs predicted from the quantizer MSE without sampling.
    pub predicted: CostPair,
}

/// Quantizes V = X + αθ with a `levels`-cell Lloyd-Max codec; the decoder
/// outputs E{X | cell} = κ·(cell centroid of V).
pub fn empirical_triple(m: &SourcePairModel, levels: usize, n: usize, seed: u64) -> Result<EmpiricalTriple> {
    if n < 10_000 {
        return Err(Error::InvalidInput(format!("n must be >= 10^4, got {n}")));
    }
    let eq = solve_noiseless(m)?;
    let alpha = eq.alpha;
    let var_v = m.sigma_x2 * (1.0 + 2.0 * alpha * m.rho + alpha * alpha * m.r);
    let kappa = eq.kappa;
    // E{X + θ | V} = λV.
    let lambda = m.sigma_x2 * (1.0 + m.rho + alpha * (m.rho + m.r)) / var_v;
    let q = lloyd_max(levels, var_v)?;

    let s = sample(m, &SimConfig::new(seed, n))?;
    let mut e_e = Vec::with_capacity(n);
    let mut e_d = Vec::with_capacity(n);
    for (x, t) in s.x.iter().zip(&s.theta) {
        let xh = kappa * q.quantize(x + alpha * t);
        e_e.push((x + t - xh).powi(2));
        e_d.push((x - xh).powi(2));
    }
    let (me, md): (MeanEstimate, MeanEstimate) = (mean_with_stderr(&e_e), mean_with_stderr(&e_d));
    Ok(EmpiricalTriple {
        rate_bits: q.rate_bits(),
        costs: CostPair { d_e: me.mean, d_d: md.mean },
        stderr: CostPair {
            d_e: me.stderr,
            d_d: md.stderr,
        },
        alpha,
        kappa,
        predicted: CostPair {
            d_e: eq.costs.d_e + q.mse * kappa * (2.0 * lambda - kappa),
            d_d: eq.costs.d_d + q.mse * kappa * kappa,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn golden() -> SourcePairModel {
        SourcePairModel::new(1.0, 0.0, 1.0).unwrap()
    }

    #[test]
    fn test_channel_golden() {
        let (b, s) = rd_test_channel(&golden(), 1.0).unwrap();
        assert_abs_diff_eq!(b, 0.618034, epsilon = 1e-6);
        assert_abs_diff_eq!(s, 1.381966 / 3.0, epsilon = 1e-6);
        let (_, s) = rd_test_channel(&golden(), 200.0).unwrap();
        assert!(s < 1e-100);
        assert!(matches!(rd_test_channel(&golden(), 0.0), Err(Error::ZeroRate(_))));
        assert!(matches!(rd_test_channel(&golden(), -1.0), Err(Error::ZeroRate(_))));
    }

    #[test]
    fn rd_golden_values() {
        let m = golden();
        let p = rd_point(&m, 0.0).unwrap();
        assert_eq!(p.costs, CostPair { d_e: 2.0, d_d: 1.0 });
        let p = rd_point(&m, 1.0).unwrap();
        assert_abs_diff_eq!(p.costs.d_d, 0.4572949, epsilon = 1e-7);
        assert_abs_diff_eq!(p.costs.d_e, 0.7864745, epsilon = 1e-7);
        assert_abs_diff_eq!(p.implied_rate(&m), 1.0, epsilon = 1e-9);
        let p = rd_point(&m, 30.0).unwrap();
        let eq = solve_noiseless(&m).unwrap();
        assert_abs_diff_eq!(p.costs.d_e, eq.costs.d_e, epsilon = 1e-8);
        assert_abs_diff_eq!(p.costs.d_d, eq.costs.d_d, epsilon = 1e-8);
    }

    #[test]
    fn unit_conversion_roundtrip() {
        assert_abs_diff_eq!(nats_to_bits(bits_to_nats(1.7)), 1.7, epsilon = 1e-15);
        assert_abs_diff_eq!(bits_to_nats(1.0), std::f64::consts::LN_2, epsilon = 1e-15);
    }

    fn binary_instance(flip: f64) -> DiscreteInstance {
        DiscreteInstance {
            x_grid: vec![-1.0, 1.0],
            theta_grid: vec![0.0, 0.5],
            joint_pmf: vec![vec![0.25, 0.25], vec![0.25, 0.25]],
            channel: vec![
                vec![vec![1.0 - flip, flip], vec![1.0 - flip, flip]],
                vec![vec![flip, 1.0 - flip], vec![flip, 1.0 - flip]],
            ],
            recon_grid: vec![-1.0, 0.0, 1.0],
        }
    }

    fn h2(p: f64) -> f64 {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }

    #[test]
    fn discrete_examples() {
        let inst = binary_instance(0.11);
        let t = inst.quadratic_tables();
        let (mi, _) = discrete_triple(&inst, &[0, 2], &t).unwrap();
        assert_abs_diff_eq!(mi, 1.0 - h2(0.11), epsilon = 1e-12);

        let inst = binary_instance(0.5);
        let (mi, _) = discrete_triple(&inst, &[1, 1], &inst.quadratic_tables()).unwrap();
        assert_abs_diff_eq!(mi, 0.0, epsilon = 1e-15);
        let dec = discrete_best_response(&inst, &inst.quadratic_tables().d_d).unwrap();
        assert_eq!(dec, vec![1, 1]);

        let inst = DiscreteInstance {
            x_grid: vec![-1.0, 1.0],
            theta_grid: vec![0.0],
            joint_pmf: vec![vec![0.5], vec![0.5]],
            channel: vec![vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]],
            recon_grid: vec![-1.0, 1.0],
        };
        let (mi, c) = discrete_triple(&inst, &[0, 1], &inst.quadratic_tables()).unwrap();
        assert_abs_diff_eq!(mi, 1.0, epsilon = 1e-15);
        assert_eq!(c, CostPair { d_e: 0.0, d_d: 0.0 });
    }

    #[test]
    fn discrete_validation() {
        let mut inst = binary_instance(0.1);
        inst.joint_pmf[0][0] = 0.3;
        assert!(matches!(inst.validate(), Err(Error::InvalidDistribution(_))));
        let mut inst = binary_instance(0.1);
        inst.channel[1][0][0] = -0.1;
        assert!(matches!(inst.validate(), Err(Error::InvalidDistribution(_))));
        let inst = binary_instance(0.1);
        assert!(discrete_triple(&inst, &[0], &inst.quadratic_tables()).is_err());
        assert!(discrete_triple(&inst, &[0, 5], &inst.quadratic_tables()).is_err());
    }

    #[test]
    fn best_response_matches_brute_force() {
        let inst = DiscreteInstance {
            x_grid: vec![-1.0, 0.0, 2.0],
            theta_grid: vec![-0.5, 1.0],
            joint_pmf: vec![vec![0.1, 0.2], vec![0.25, 0.05], vec![0.15, 0.25]],
            channel: vec![
                vec![vec![0.7, 0.2, 0.1], vec![0.5, 0.3, 0.2]],
                vec![vec![0.1, 0.8, 0.1], vec![0.2, 0.6, 0.2]],
                vec![vec![0.05, 0.15, 0.8], vec![0.1, 0.1, 0.8]],
            ],
            recon_grid: vec![-1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0],
        };
        let t = inst.quadratic_tables();
        let dec = discrete_best_response(&inst, &t.d_d).unwrap();
        let (_, c) = discrete_triple(&inst, &dec, &t).unwrap();
        let nl = inst.recon_grid.len();
        let mut best = f64::INFINITY;
        for a in 0..nl {
            for b in 0..nl {
                for d in 0..nl {
                    let (_, cc) = discrete_triple(&inst, &[a, b, d], &t).unwrap();
                    best = best.min(cc.d_d);
                }
            }
        }
        assert_abs_diff_eq!(c.d_d, best, epsilon = 1e-15);
    }

    #[test]
    fn lloyd_max_tables() {
        let q = lloyd_max(2, 1.0).unwrap();
        assert_abs_diff_eq!(q.centroids[1], (2.0 / std::f64::consts::PI).sqrt(), epsilon = 1e-9);
        assert_abs_diff_eq!(q.centroids[0], -q.centroids[1], epsilon = 1e-15);
        assert_abs_diff_eq!(q.mse, 1.0 - 2.0 / std::f64::consts::PI, epsilon = 1e-9);
        let q = lloyd_max(4, 1.0).unwrap();
        assert_abs_diff_eq!(q.mse, 0.1174818, epsilon = 1e-7);
        assert!(q.residual <= 1e-10);
        let q = lloyd_max(16, 1.0).unwrap();
        assert_abs_diff_eq!(q.mse, 0.0095010, epsilon = 1e-7);
        assert!(lloyd_max(1, 1.0).is_err());
        assert!(lloyd_max(4097, 1.0).is_err());

        let q = lloyd_max(8, 4.0).unwrap();
        let u = lloyd_max(8, 1.0).unwrap();
        assert_abs_diff_eq!(q.mse, 4.0 * u.mse, epsilon = 1e-12);
        assert_eq!(q.index(-100.0), 0);
        assert_eq!(q.index(100.0), 7);
    }

    #[test]
    fn lloyd_max_many_levels() {
        for levels in [255, 4096] {
            let q = lloyd_max(levels, 1.0).unwrap();
            assert!(q.residual <= 1e-10, "{levels}: {}", q.residual);
            assert!(q.centroids.windows(2).all(|w| w[0] < w[1]));
            // High-resolution approximation √3·π/2 · 2^{−2R}.
            let hr = 3f64.sqrt() * std::f64::consts::PI / 2.0 / (levels as f64).powi(2);
            assert!((q.mse / hr - 1.0).abs() < 0.05, "{levels}: {} vs {hr}", q.mse);
        }
    }

    #[test]
    fn empirical_codec_sits_between_bounds() {
        let m = golden();
        let t = empirical_triple(&m, 16, 1_000_000, 2024).unwrap();
        assert_eq!(t.rate_bits, 4.0);
        assert_abs_diff_eq!(t.predicted.d_d, 0.28327, epsilon = 2e-5);
        assert_abs_diff_eq!(t.predicted.d_e, 0.39734, epsilon = 2e-5);
        let lo = rd_point(&m, 4.0).unwrap().costs;
        let hi = rd_point(&m, 3.0).unwrap().costs;
        assert!(t.costs.d_d >= lo.d_d && t.costs.d_d <= hi.d_d, "{:?}", t.costs);
        assert!(t.costs.d_e >= lo.d_e && t.costs.d_e <= hi.d_e, "{:?}", t.costs);
        assert!((t.costs.d_d - t.predicted.d_d).abs() <= 4.0 * t.stderr.d_d);
        assert!((t.costs.d_e - t.predicted.d_e).abs() <= 4.0 * t.stderr.d_e);
        assert!(empirical_triple(&m, 16, 100, 1).is_err());
    }

    #[test]
    fn closed_form_matches_covariance_algebra_on_grid() {
        for (rho, r) in [(0.0, 1.0), (0.5, 1.0), (-0.3, 0.4), (0.2, 0.05)] {
            let m = SourcePairModel::new(1.3, rho, r).unwrap();
            for i in 1..=20 {
                let rate = 0.25 * i as f64;
                let a = rd_point(&m, rate).unwrap().costs;
                let b = rd_closed_form(&m, rate).unwrap();
                assert_abs_diff_eq!(a.d_e, b.d_e, epsilon = 1e-10);
                assert_abs_diff_eq!(a.d_d, b.d_d, epsilon = 1e-10);
            }
        }
    }

    fn pair_model() -> impl Strategy<Value = SourcePairModel> {
        (0.1f64..5.0, -0.95f64..0.95, 0.01f64..3.0).prop_map(|(s, rho, gap)| SourcePairModel {
            sigma_x2: s,
            rho,
            r: rho * rho + gap,
        })
    }

    proptest! {
        #[test]
        fn curve_monotone_and_above_gaussian_rd(m in pair_model()) {
            let pts: Vec<RdPoint> = (0..100).map(|i| rd_point(&m, 10.0 * i as f64 / 99.0).unwrap()).collect();
            for w in pts.windows(2) {
                prop_assert!(w[1].costs.d_d <= w[0].costs.d_d + 1e-12);
                prop_assert!(w[1].costs.d_e <= w[0].costs.d_e + 1e-12);
            }
            for p in &pts {
                let floor = m.sigma_x2 * (-2.0 * p.rate * std::f64::consts::LN_2).exp();
                prop_assert!(p.costs.d_d >= floor - 1e-12 * m.sigma_x2);
                if p.rate > 0.0 {
                    prop_assert!((p.implied_rate(&m) - p.rate).abs() <= 1e-9);
                }
            }
        }

        #[test]
        fn mutual_information_bounds(
            pmf in proptest::collection::vec(0.01f64..1.0, 6),
            ch in proptest::collection::vec(0.01f64..1.0, 24),
        ) {
            let tot: f64 = pmf.iter().sum();
            let joint: Vec<Vec<f64>> = pmf.chunks(2).map(|r| r.iter().map(|p| p / tot).collect()).collect();
            let channel: Vec<Vec<Vec<f64>>> = ch
                .chunks(8)
                .map(|xr| xr.chunks(4).map(|c| { let s: f64 = c.iter().sum(); c.iter().map(|v| v / s).collect() }).collect())
                .collect();
            let inst = DiscreteInstance {
                x_grid: vec![-1.0, 0.0, 1.0],
                theta_grid: vec![0.0, 1.0],
                joint_pmf: joint.clone(),
                channel,
                recon_grid: vec![-1.0, 0.0, 1.0],
            };
            prop_assume!(inst.validate().is_ok());
            let (mi, _) = discrete_triple(&inst, &[0, 1, 2, 1], &inst.quadratic_tables()).unwrap();
            let h: f64 = joint.iter().flatten().map(|p| -p * p.log2()).sum();
            prop_assert!(mi >= 0.0);
            prop_assert!(mi <= 2.0f64.min(h) + 1e-12);
        }
    }
}
