//! Receiver side information W.
//!
//! All costs come from [`best_decoder`] observing (Y, W); encoder weights are
//! found by 1-D minimization of the exact D_E on [−10, 10].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gausslin::{best_decoder, CostPair, LinearScheme, SideInfoModel};
use crate::noisy_channel::{capacity, ChannelSpec, NoisySolution};
use crate::optimize::{bisect, minimize_smooth};

/// Search interval half-width for encoder weights.
pub const WEIGHT_BOUND: f64 = 10.0;
const GRID_POINTS: usize = 2001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SiEquilibriumReport {
    pub alpha_si: f64,
    pub dec_y: f64,
    pub dec_w: f64,
    pub costs: CostPair,
    /// The minimizer sits on the search boundary.
    pub bound_hit: bool,
}

impl SiEquilibriumReport {
    pub fn scheme(&self) -> LinearScheme {
        LinearScheme::encoder(self.alpha_si, 0.0).with_decoder(self.dec_y, self.dec_w)
    }
}

fn d_e_of(m: &SideInfoModel, enc: &LinearScheme, noise: f64) -> f64 {
    best_decoder(m, enc, noise).map_or(f64::INFINITY, |r| r.costs.d_e)
}

/// Noiseless equilibrium with side information at the receiver.
pub fn solve_noiseless_si(m: &SideInfoModel) -> Result<SiEquilibriumReport> {
    m.validate()?;
    let min = minimize_smooth(
        |a| d_e_of(m, &LinearScheme::encoder(a, 0.0), 0.0),
        -WEIGHT_BOUND,
        WEIGHT_BOUND,
        GRID_POINTS,
    );
    if min.bound_hit {
        log::warn!("BoundHit: alpha_si = {} on the search boundary", min.x);
    }
    let resp = best_decoder(m, &LinearScheme::encoder(min.x, 0.0), 0.0)?;
    Ok(SiEquilibriumReport {
        alpha_si: min.x,
        dec_y: resp.scheme.dec_y_weight,
        dec_w: resp.scheme.dec_w_weight,
        costs: resp.costs,
        bound_hit: min.bound_hit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SiInvarianceReport {
    pub alpha_si: f64,
    pub reference: CostPair,
    /// (b, costs) for each encoder `X + α_SI·θ + b·W`.
    pub rows: Vec<(f64, CostPair)>,
    pub max_deviation: f64,
}

/// Costs of the equilibrium encoder with W added at the transmitter.
pub fn transmitter_si_invariance(m: &SideInfoModel, b_values: &[f64]) -> Result<SiInvarianceReport> {
    let eq = solve_noiseless_si(m)?;
    let enc = LinearScheme::encoder(eq.alpha_si, 0.0);
    let reference = best_decoder(m, &enc, 0.0)?.costs;
    let mut rows = Vec::with_capacity(b_values.len());
    let mut max_deviation: f64 = 0.0;
    for &b in b_values {
        let c = best_decoder(m, &enc.with_si_weight(b), 0.0)?.costs;
        max_deviation = max_deviation
            .max((c.d_e - reference.d_e).abs())
            .max((c.d_d - reference.d_d).abs());
        rows.push((b, c));
    }
    Ok(SiInvarianceReport {
        alpha_si: eq.alpha_si,
        reference,
        rows,
        max_deviation,
    })
}

/// Var(X + βθ | W).
pub fn conditional_effective_var(m: &SideInfoModel, beta: f64) -> f64 {
    let c = m.normalized();
    let v = c[0][0] + 2.0 * beta * c[0][1] + beta * beta * c[1][1];
    let cw = c[0][2] + beta * c[1][2];
    m.sigma_x2 * (v - cw * cw / c[2][2]).max(0.0)
}

/// ½·log2(Var(Y | W)/σ_S²) for `Y = X + βθ + S`.
pub fn si_rate(m: &SideInfoModel, beta: f64, sigma_s2: f64) -> Result<f64> {
    m.validate()?;
    if !(sigma_s2 > 0.0) {
        return Err(Error::InvalidInput(format!("sigma_s2 must be > 0, got {sigma_s2}")));
    }
    if sigma_s2.is_infinite() {
        return Ok(0.0);
    }
    Ok(0.5 * (conditional_effective_var(m, beta) / sigma_s2).ln_1p() / std::f64::consts::LN_2)
}

fn sigma_s2_for(m: &SideInfoModel, beta: f64, rate: f64) -> f64 {
    conditional_effective_var(m, beta) / (2.0 * rate * std::f64::consts::LN_2).exp_m1()
}

fn rd_d_e(m: &SideInfoModel, beta: f64, rate: f64) -> f64 {
    d_e_of(m, &LinearScheme::encoder(beta, sigma_s2_for(m, beta, rate)), 0.0)
}

/// Encoder weight of the SI test channel at `rate` and the matching σ_S².
pub fn beta_of_rate(m: &SideInfoModel, rate: f64) -> Result<(f64, f64)> {
    m.validate()?;
    if !(rate > 0.0) || rate.is_infinite() {
        return Err(Error::ZeroRate(rate));
    }
    let min = minimize_smooth(|b| rd_d_e(m, b, rate), -WEIGHT_BOUND, WEIGHT_BOUND, GRID_POINTS);
    if min.bound_hit {
        log::warn!("BoundHit: beta({rate}) = {} on the search boundary", min.x);
    }
    Ok((min.x, sigma_s2_for(m, min.x, rate)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SiRdPoint {
    pub rate: f64,
    pub beta: f64,
    /// Infinite at rate 0.
    pub sigma_s2: f64,
    pub costs: CostPair,
}

pub fn si_rd_point(m: &SideInfoModel, rate: f64) -> Result<SiRdPoint> {
    m.validate()?;
    if rate.is_nan() || rate < 0.0 {
        return Err(Error::InvalidInput(format!("rate must be >= 0, got {rate}")));
    }
    if rate == 0.0 {
        let resp = best_decoder(m, &LinearScheme::silent(), 0.0)?;
        return Ok(SiRdPoint {
            rate,
            beta: solve_noiseless_si(m)?.alpha_si,
            sigma_s2: f64::INFINITY,
            costs: resp.costs,
        });
    }
    let (beta, sigma_s2) = beta_of_rate(m, rate)?;
    let resp = best_decoder(m, &LinearScheme::encoder(beta, sigma_s2), 0.0)?;
    Ok(SiRdPoint {
        rate,
        beta,
        sigma_s2,
        costs: resp.costs,
    })
}

/// Linear scheme at full power with the noiseless SI weight.
pub fn solve_noisy_si_linear(m: &SideInfoModel, ch: &ChannelSpec) -> Result<NoisySolution> {
    ch.validate()?;
    let alpha = solve_noiseless_si(m)?.alpha_si;
    let c = m.normalized();
    let v = m.sigma_x2 * (c[0][0] + 2.0 * alpha * c[0][1] + alpha * alpha * c[1][1]);
    let enc = LinearScheme::encoder(alpha, 0.0).with_gain((ch.power / v).sqrt());
    let resp = best_decoder(m, &enc, ch.noise_var)?;
    Ok(NoisySolution {
        scheme: resp.scheme,
        costs: resp.costs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub rate: f64,
    pub beta: f64,
    /// |ρ_XW + ρ_θW·β|.
    pub residual: f64,
    pub matched: bool,
    /// D_E of the linear scheme minus the R-D bound at capacity.
    pub gap: f64,
}

pub fn match_condition(m: &SideInfoModel, ch: &ChannelSpec, tol: f64) -> Result<MatchReport> {
    ch.validate()?;
    let rate = capacity(ch);
    let bound = si_rd_point(m, rate)?;
    let residual = (m.rho_x_w + m.rho_theta_w * bound.beta).abs();
    let linear = solve_noisy_si_linear(m, ch)?;
    Ok(MatchReport {
        rate,
        beta: bound.beta,
        residual,
        matched: residual <= tol,
        gap: linear.costs.d_e - bound.costs.d_e,
    })
}

/// Open interval of ρ_XW keeping the model positive definite.
pub fn feasible_rho_x_w(m: &SideInfoModel) -> Result<(f64, f64)> {
    // det of the normalized covariance is −r_θ x² + 2ρ_Xθρ_θW x + (r_θ r_W − ρ_θW² − ρ_Xθ² r_W).
    let (a, t, w) = (m.rho_x_theta, m.rho_theta_w, m.r_w);
    let rt = m.r_theta;
    let c0 = rt * w - t * t - a * a * w;
    let disc = (a * t).powi(2) + rt * c0;
    if !(rt > 0.0) || !(disc > 0.0) || rt - a * a <= 0.0 {
        return Err(Error::InfeasibleInterval(
            "no rho_x_w makes the covariance positive definite".into(),
        ));
    }
    let s = disc.sqrt();
    Ok(((a * t - s) / rt, (a * t + s) / rt))
}

/// Root of ρ ↦ ρ + ρ_θW·β(C; ρ) over the feasible ρ_XW interval.
pub fn find_matched_rho_xw(m: &SideInfoModel, ch: &ChannelSpec) -> Result<f64> {
    ch.validate()?;
    if m.rho_theta_w == 0.0 {
        return Ok(0.0);
    }
    let (lo, hi) = feasible_rho_x_w(m)?;
    let pad = 1e-6 * (hi - lo);
    let (lo, hi) = (lo + pad, hi - pad);
    let rate = capacity(ch);
    let mut failure = None;
    let mut f = |rho: f64| {
        let mm = m.with_rho_x_w(rho);
        match beta_of_rate(&mm, rate) {
            Ok((b, _)) => rho + m.rho_theta_w * b,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        }
    };
    let root = bisect(&mut f, lo, hi, 1e-13);
    let residual = root.map(&mut f);
    if let Some(e) = failure {
        return Err(e);
    }
    match (root, residual) {
        (Some(r), Some(v)) if v.abs() <= 1e-8 => Ok(r),
        (Some(r), Some(v)) => Err(Error::NoRoot(format!(
            "sign change at rho_x_w = {r} is a jump (|f| = {v:e}), not a root"
        ))),
        _ => Err(Error::NoRoot(format!(
            "rho_x_w + rho_theta_w * beta has constant sign on ({lo}, {hi})"
        ))),
    }
}

/// Row of the matching sweep CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchRow {
    pub rho_x_w: f64,
    pub rate_bits: f64,
    pub beta: f64,
    pub residual: f64,
    pub gap: f64,
}

/// Evaluates the matching condition at each ρ_XW; infeasible values are skipped.
pub fn match_sweep(m: &SideInfoModel, ch: &ChannelSpec, rho_values: &[f64], tol: f64) -> Result<Vec<MatchRow>> {
    let mut rows = Vec::new();
    for &rho in rho_values {
        let mm = m.with_rho_x_w(rho);
        if mm.validate().is_err() {
            continue;
        }
        let r = match_condition(&mm, ch, tol)?;
        rows.push(MatchRow {
            rho_x_w: rho,
            rate_bits: r.rate,
            beta: r.beta,
            residual: r.residual,
            gap: r.gap,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::solve_noiseless;
    use crate::gausslin::{mmse_linear, observation_covariance, SourcePairModel};
    use crate::noisy_channel::solve_noisy;
    use crate::strategic_rd::rd_point;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn generic() -> SideInfoModel {
        SideInfoModel::new(1.0, 0.2, 1.0, 0.5, 0.4, 1.0).unwrap()
    }

    #[test]
    fn useless_side_info_reduces_to_pair() {
        for (rho, r) in [(0.0, 1.0), (0.5, 1.0), (-0.3, 0.4)] {
            let p = SourcePairModel::new(1.7, rho, r).unwrap();
            let si = solve_noiseless_si(&p.with_useless_side_info()).unwrap();
            let eq = solve_noiseless(&p).unwrap();
            assert_abs_diff_eq!(si.alpha_si, eq.alpha, epsilon = 1e-8);
            assert_abs_diff_eq!(si.costs.d_e, eq.costs.d_e, epsilon = 1e-12);
            // D_D is not stationary in α, so it carries the α search error.
            assert_abs_diff_eq!(si.costs.d_d, eq.costs.d_d, epsilon = 1e-9);
            assert_abs_diff_eq!(si.dec_w, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn decoder_weights_are_mmse() {
        let m = generic();
        let r = solve_noiseless_si(&m).unwrap();
        let cov = observation_covariance(&m, &LinearScheme::encoder(r.alpha_si, 0.0), 0.0);
        let est = mmse_linear(&cov, 0, &[3, 2]).unwrap();
        assert_abs_diff_eq!(r.dec_y, est.weights[0], epsilon = 1e-10);
        assert_abs_diff_eq!(r.dec_w, est.weights[1], epsilon = 1e-10);
    }

    #[test]
    fn strong_side_info_reveals_x() {
        let mut prev = f64::INFINITY;
        for eps in [1e-1, 1e-2, 1e-3, 1e-4] {
            let m = SideInfoModel::new(1.0, 0.0, 1.0, 1.0 - eps, 0.0, 1.0).unwrap();
            let d = solve_noiseless_si(&m).unwrap().costs.d_d;
            assert!(d < prev);
            prev = d;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn estimation_benefit_example() {
        let m = SideInfoModel::new(1.0, 0.0, 1.0, 0.5, 0.0, 1.0).unwrap();
        let si = solve_noiseless_si(&m).unwrap();
        let eq = solve_noiseless(&m.pair()).unwrap();
        assert!(si.costs.d_d < eq.costs.d_d);
        // The receiver tracks X more closely with W, which costs the transmitter.
        assert!(si.costs.d_e > eq.costs.d_e);
    }

    #[test]
    fn equilibrium_shift_can_raise_receiver_cost() {
        let m = SideInfoModel::new(0.2, -0.5948023570208177, 1.344275221787075, 0.09447857775643759, 0.47127618325934384, 0.5)
            .unwrap();
        let si = solve_noiseless_si(&m).unwrap();
        let eq = solve_noiseless(&m.pair()).unwrap();
        assert_abs_diff_eq!(si.costs.d_d, 0.126330085, epsilon = 1e-8);
        assert!(si.costs.d_d > eq.costs.d_d);
        // At a common encoder W still helps.
        let pair = best_decoder(&m.pair(), &LinearScheme::encoder(si.alpha_si, 0.0), 0.0).unwrap();
        assert!(si.costs.d_d <= pair.costs.d_d);
    }

    #[test]
    fn zero_encoder_noise_is_optimal() {
        let m = generic();
        let r = solve_noiseless_si(&m).unwrap();
        for t in [1e-6, 1e-3, 0.1, 1.0, 5.0] {
            for da in [-0.2, 0.0, 0.2] {
                let d = d_e_of(&m, &LinearScheme::encoder(r.alpha_si + da, t), 0.0);
                assert!(d >= r.costs.d_e - 1e-12);
            }
        }
    }

    #[test]
    fn transmitter_side_info_is_irrelevant() {
        let m = generic();
        let rep = transmitter_si_invariance(&m, &[-1.0, 0.0, 2.0]).unwrap();
        assert!(rep.max_deviation <= 1e-12, "{}", rep.max_deviation);
        let rep = transmitter_si_invariance(&m, &[1e3]).unwrap();
        assert!(rep.max_deviation <= 1e-9, "{}", rep.max_deviation);

        // Joint search over (α, b) finds nothing better than α alone.
        let best_1d = solve_noiseless_si(&m).unwrap().costs.d_e;
        let mut best_2d = f64::INFINITY;
        for b in [-2.0, -0.5, 0.0, 0.7, 3.0] {
            let v = minimize_smooth(
                |a| d_e_of(&m, &LinearScheme::encoder(a, 0.0).with_si_weight(b), 0.0),
                -WEIGHT_BOUND,
                WEIGHT_BOUND,
                GRID_POINTS,
            );
            best_2d = best_2d.min(v.value);
        }
        assert_abs_diff_eq!(best_2d, best_1d, epsilon = 1e-8);
    }

    #[test]
    fn rate_formula_transcription() {
        let m = SideInfoModel::new(1.4, 0.1, 0.9, 0.3, -0.2, 1.2).unwrap();
        for (beta, s) in [(0.5, 0.2), (-1.0, 3.0), (2.0, 1e-3)] {
            let printed = {
                let (a, rt, xw, tw, rw) = (m.rho_x_theta, m.r_theta, m.rho_x_w, m.rho_theta_w, m.r_w);
                let inner = 1.0 + beta * beta * rt + 2.0 * beta * a - (xw + beta * tw).powi(2) / rw;
                0.5 * (1.0 + m.sigma_x2 / s * inner).log2()
            };
            assert_abs_diff_eq!(si_rate(&m, beta, s).unwrap(), printed, epsilon = 1e-10);
        }
        assert_eq!(si_rate(&m, 0.3, f64::INFINITY).unwrap(), 0.0);
        assert!(si_rate(&m, 0.3, 0.0).is_err());

        let p = SourcePairModel::new(1.0, 0.0, 1.0).unwrap();
        let pt = rd_point(&p, 1.5).unwrap();
        assert_abs_diff_eq!(si_rate(&p.with_useless_side_info(), pt.beta, pt.sigma_s2).unwrap(), 1.5, epsilon = 1e-12);
    }

    #[test]
    fn rd_reduction_and_limits() {
        let p = SourcePairModel::new(1.0, 0.3, 0.8).unwrap();
        let u = p.with_useless_side_info();
        for rate in [0.5, 1.0, 2.0, 4.0] {
            let a = si_rd_point(&u, rate).unwrap();
            let b = rd_point(&p, rate).unwrap();
            assert_abs_diff_eq!(a.beta, b.beta, epsilon = 1e-8);
            assert_abs_diff_eq!(a.costs.d_e, b.costs.d_e, epsilon = 1e-12);
            assert_abs_diff_eq!(a.costs.d_d, b.costs.d_d, epsilon = 1e-9);
            assert_abs_diff_eq!(si_rate(&u, a.beta, a.sigma_s2).unwrap(), rate, epsilon = 1e-9);
        }

        let m = generic();
        let z = si_rd_point(&m, 0.0).unwrap();
        let var_x_given_w = 1.0 - 0.25;
        assert_abs_diff_eq!(z.costs.d_d, var_x_given_w, epsilon = 1e-12);
        let eq = solve_noiseless_si(&m).unwrap();
        let hi = si_rd_point(&m, 30.0).unwrap();
        assert!((hi.beta - eq.alpha_si).abs() <= 1e-4);
        assert_abs_diff_eq!(hi.costs.d_e, eq.costs.d_e, epsilon = 1e-6);
        assert_abs_diff_eq!(hi.costs.d_d, eq.costs.d_d, epsilon = 1e-6);
        assert!(matches!(beta_of_rate(&m, 0.0), Err(Error::ZeroRate(_))));
    }

    #[test]
    fn noisy_linear_reduces_and_converges() {
        let p = SourcePairModel::new(1.0, -0.2, 0.6).unwrap();
        let ch = ChannelSpec::new(2.0, 0.5).unwrap();
        let a = solve_noisy_si_linear(&p.with_useless_side_info(), &ch).unwrap();
        let b = solve_noisy(&p, &ch).unwrap();
        assert_abs_diff_eq!(a.costs.d_e, b.costs.d_e, epsilon = 1e-12);
        assert_abs_diff_eq!(a.costs.d_d, b.costs.d_d, epsilon = 1e-9);

        let m = generic();
        let eq = solve_noiseless_si(&m).unwrap();
        let c = solve_noisy_si_linear(&m, &ChannelSpec::new(1.0, 1e-10).unwrap()).unwrap();
        assert_abs_diff_eq!(c.costs.d_e, eq.costs.d_e, epsilon = 1e-7);
    }

    #[test]
    fn matching_examples() {
        let ch = ChannelSpec::new(3.0, 1.0).unwrap();
        let u = SourcePairModel::new(1.0, 0.0, 1.0).unwrap().with_useless_side_info();
        let r = match_condition(&u, &ch, 1e-6).unwrap();
        assert_eq!(r.residual, 0.0);
        assert!(r.matched && r.gap.abs() <= 1e-6);

        let r = match_condition(&generic(), &ch, 1e-6).unwrap();
        assert!(!r.matched && r.gap > 1e-9, "{r:?}");

        let m = SideInfoModel::new(1.0, 0.0, 1.0, 0.0, -0.3, 1.0).unwrap();
        let root = find_matched_rho_xw(&m, &ch).unwrap();
        let mm = m.with_rho_x_w(root);
        let r = match_condition(&mm, &ch, 1e-6).unwrap();
        assert!(r.residual <= 1e-6 && r.gap.abs() <= 1e-6, "{r:?}");
        for d in [-0.1, 0.1] {
            let pm = m.with_rho_x_w(root + d);
            if pm.validate().is_ok() {
                assert!(match_condition(&pm, &ch, 1e-6).unwrap().gap > 1e-9);
            }
        }
        let indep = SideInfoModel::new(1.0, 0.0, 1.0, 0.2, 0.0, 1.0).unwrap();
        assert_eq!(find_matched_rho_xw(&indep, &ch).unwrap(), 0.0);
    }

    #[test]
    fn feasible_interval_edges() {
        let m = SideInfoModel::new(1.0, 0.3, 1.0, 0.0, 0.5, 1.0).unwrap();
        let (lo, hi) = feasible_rho_x_w(&m).unwrap();
        let inside = |x: f64| m.with_rho_x_w(x).validate().is_ok();
        assert!(inside(lo + 1e-6) && inside(hi - 1e-6));
        assert!(!inside(lo - 1e-6) && !inside(hi + 1e-6));
    }

    fn si_model() -> impl Strategy<Value = SideInfoModel> {
        (0.2f64..3.0, -0.6f64..0.6, 0.5f64..2.0, -0.6f64..0.6, -0.6f64..0.6, 0.5f64..2.0).prop_filter_map(
            "positive definite",
            |(s, a, rt, xw, tw, rw)| SideInfoModel::new(s, a, rt, xw, tw, rw).ok(),
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn gap_is_nonnegative_and_beta_converges(m in si_model(), p in 0.1f64..10.0) {
            let ch = ChannelSpec::new(p, 1.0).unwrap();
            let r = match_condition(&m, &ch, 1e-6).unwrap();
            prop_assert!(r.gap >= -1e-9);
            prop_assert_eq!(r.gap <= 1e-6, r.residual <= 1e-6);
            let eq = solve_noiseless_si(&m).unwrap();
            let (b, _) = beta_of_rate(&m, 30.0).unwrap();
            prop_assert!((b - eq.alpha_si).abs() <= 1e-4);
            let enc = LinearScheme::encoder(eq.alpha_si, 0.0);
            let pair = best_decoder(&m.pair(), &enc, 0.0).unwrap();
            prop_assert!(eq.costs.d_d <= pair.costs.d_d + 1e-10);
        }
    }
}
