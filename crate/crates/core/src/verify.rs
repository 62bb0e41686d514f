//! The check battery behind `stackcomm verify` and the acceptance tests.
//!
//! Every check records what was measured, the tolerance, and whether the
//! tolerance is an upper or a lower bound. Checks are grouped by criterion
//! number so callers can report one line per criterion.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::control_games::{has_ux_cross_term, solve_canonical, CanonicalForm, QuadraticObjective};
use crate::equilibrium::{best_alpha, closed_form_costs, corollary_limits, solve_noiseless, LimitPath};
use crate::error::Result;
use crate::figures::{costs_vs_r, costs_vs_rho, default_r_grid, default_rate_grid, default_rho_grid, nonincreasing, rd_curves};
use crate::gausslin::{encoder_power, scheme_costs, LinearScheme, SideInfoModel, SourcePairModel};
use crate::noisy_channel::{opta_bound, solve_noisy, ChannelSpec};
use crate::side_info::{beta_of_rate, feasible_rho_x_w, find_matched_rho_xw, match_condition, solve_noiseless_si, transmitter_si_invariance};
use crate::simkit::{ace_max_correlation, deviation_search, estimate_costs, sample, DeviationGrid, SimConfig};
use crate::strategic_rd::{empirical_triple, rd_point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Quick,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    /// Passes when measured ≤ tolerance.
    AtMost,
    /// Passes when measured > tolerance.
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub criterion: u8,
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub bound: Bound,
    pub passed: bool,
    /// Shown analytically not to hold for this model class; reported, never hidden.
    pub known_unattainable: bool,
}

impl Check {
    fn at_most(criterion: u8, name: &str, measured: f64, tolerance: f64) -> Self {
        Self {
            criterion,
            name: name.into(),
            measured,
            tolerance,
            bound: Bound::AtMost,
            passed: measured <= tolerance,
            known_unattainable: false,
        }
    }

    fn above(criterion: u8, name: &str, measured: f64, tolerance: f64) -> Self {
        Self {
            criterion,
            name: name.into(),
            measured,
            tolerance,
            bound: Bound::Above,
            passed: measured > tolerance,
            known_unattainable: false,
        }
    }

    /// A boolean property: measured is 0 when it holds, 1 otherwise.
    fn holds(criterion: u8, name: &str, ok: bool) -> Self {
        Self::at_most(criterion, name, if ok { 0.0 } else { 1.0 }, 0.0)
    }

    fn failed(criterion: u8, name: &str, err: &crate::Error) -> Self {
        log::error!("check {name} errored: {err}");
        Self {
            criterion,
            name: name.into(),
            measured: f64::NAN,
            tolerance: 0.0,
            bound: Bound::AtMost,
            passed: false,
            known_unattainable: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub suite: Suite,
    pub seed: u64,
    pub checks: Vec<Check>,
    /// Every check passed except those flagged `known_unattainable`.
    pub passed: bool,
    pub failed: Vec<String>,
}

/// Reference values for the golden-ratio case ρ = 0, r = 1, σ² = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoldenValues {
    pub alpha: f64,
    pub kappa: f64,
    pub d_e: f64,
    pub d_d: f64,
}

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 20_240_917;

pub const GOLDEN: GoldenValues = GoldenValues {
    alpha: 0.6180340,
    kappa: 0.7236068,
    d_e: 0.3819660,
    d_d: 0.2763932,
};

fn random_pair(rng: &mut ChaCha8Rng) -> SourcePairModel {
    let rho = rng.random_range(-0.9..0.9);
    SourcePairModel {
        sigma_x2: rng.random_range(0.2..3.0),
        rho,
        r: rho * rho + rng.random_range(0.05..3.0),
    }
}

fn collect(criterion: u8, name: &str, f: impl FnOnce() -> Result<Vec<Check>>) -> Vec<Check> {
    f().unwrap_or_else(|e| vec![Check::failed(criterion, name, &e)])
}

/// Criterion 1 against the supplied reference values.
pub fn golden_checks(expected: &GoldenValues) -> Vec<Check> {
    collect(1, "golden", || {
        let t = Instant::now();
        let m = SourcePairModel::new(1.0, 0.0, 1.0)?;
        let eq = solve_noiseless(&m)?;
        let elapsed = t.elapsed().as_secs_f64();
        let s = m.r + m.rho;
        let a = (1.0 + 4.0 * s).sqrt();
        let alpha_cf = (a - 1.0) / (2.0 * s);
        let kappa_cf = (1.0 + alpha_cf * m.rho) / (1.0 + 2.0 * alpha_cf * m.rho + alpha_cf * alpha_cf * m.r);
        let cf = closed_form_costs(&m);
        let closed = (eq.alpha - alpha_cf)
            .abs()
            .max((eq.kappa - kappa_cf).abs())
            .max((eq.costs.d_e - cf.d_e).abs())
            .max((eq.costs.d_d - cf.d_d).abs());
        let grid = deviation_search(&m, 0.0, &LinearScheme::encoder(eq.alpha, 0.0), &DeviationGrid::standard(eq.alpha, 1.0))?;
        let off = deviation_search(
            &m,
            0.0,
            &LinearScheme::encoder(0.0, 1.0),
            &DeviationGrid::standard(0.0, 1.0),
        )?;
        Ok(vec![
            Check::at_most(1, "golden.alpha", (eq.alpha - expected.alpha).abs(), 1e-6),
            Check::at_most(1, "golden.kappa", (eq.kappa - expected.kappa).abs(), 1e-6),
            Check::at_most(1, "golden.d_e", (eq.costs.d_e - expected.d_e).abs(), 1e-6),
            Check::at_most(1, "golden.d_d", (eq.costs.d_d - expected.d_d).abs(), 1e-6),
            Check::at_most(1, "golden.closed_form", closed, 1e-6),
            Check::at_most(1, "golden.grid_no_improvement", grid.improvement, 1e-9),
            Check::at_most(1, "golden.grid_argmin_alpha", (off.best_alpha - eq.alpha).abs(), 0.02 + 1e-12),
            Check::at_most(1, "golden.grid_argmin_sigma_t2", off.best_sigma_t2, 0.0),
            Check::at_most(1, "golden.runtime_s", elapsed, 1.0),
        ])
    })
}

fn stackelberg(seed: u64) -> Vec<Check> {
    collect(2, "stackelberg", || {
        let t = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x02);
        let mut worst: f64 = f64::NEG_INFINITY;
        for _ in 0..100 {
            let m = random_pair(&mut rng);
            let eq = solve_noiseless(&m)?;
            let r = deviation_search(&m, 0.0, &eq.scheme(), &DeviationGrid::standard(eq.alpha, m.sigma_x2))?;
            worst = worst.max(r.improvement);
        }
        Ok(vec![
            Check::at_most(2, "stackelberg.max_improvement", worst, 1e-9),
            Check::at_most(2, "stackelberg.runtime_s", t.elapsed().as_secs_f64(), 10.0),
        ])
    })
}

fn monte_carlo(suite: Suite, seed: u64) -> Vec<Check> {
    collect(3, "monte_carlo", || {
        let t = Instant::now();
        let (pairs, n) = match suite {
            Suite::Quick => (10, 100_000),
            Suite::Full => (50, 1_000_000),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x03);
        let mut worst: f64 = 0.0;
        for i in 0..pairs {
            let m = random_pair(&mut rng);
            let scheme = LinearScheme::encoder(rng.random_range(-2.0..2.0), rng.random_range(0.0..1.0))
                .with_gain(rng.random_range(0.3..2.0))
                .with_decoder(rng.random_range(-1.0..1.0), 0.0);
            let noise = rng.random_range(0.0..1.0);
            let cfg = SimConfig::new(seed.wrapping_add(1000 + i as u64), n);
            let est = estimate_costs(&sample(&m, &cfg)?, &scheme, noise, &cfg)?;
            let z = est.z_scores(&scheme_costs(&m, &scheme, noise));
            worst = worst.max(z.d_e).max(z.d_d);
        }
        Ok(vec![
            Check::at_most(3, "monte_carlo.max_z", worst, 4.0),
            Check::at_most(3, "monte_carlo.runtime_s", t.elapsed().as_secs_f64(), 60.0),
        ])
    })
}

/// `2^{−2R}(1 + (2^{−2R} − 1)c)`: the receiver cost with the exponent sign swapped.
pub fn exponent_swapped_d_d(rate: f64, c: f64) -> f64 {
    let q = (-2.0 * rate * std::f64::consts::LN_2).exp();
    q * (1.0 + (q - 1.0) * c)
}

fn rate_distortion(seed: u64) -> Vec<Check> {
    collect(4, "rd", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x04);
        let (mut end0, mut end30, mut floor, mut mono): (f64, f64, f64, f64) = (0.0, 0.0, f64::INFINITY, f64::NEG_INFINITY);
        for _ in 0..20 {
            let m = random_pair(&mut rng);
            let z = rd_point(&m, 0.0)?.costs;
            end0 = end0.max((z.d_e - m.var_x_plus_theta()).abs()).max((z.d_d - m.sigma_x2).abs());
            let eq = solve_noiseless(&m)?;
            let p = rd_point(&m, 30.0)?.costs;
            end30 = end30.max((p.d_e - eq.costs.d_e).abs()).max((p.d_d - eq.costs.d_d).abs());
            let mut prev: Option<crate::CostPair> = None;
            for i in 0..100 {
                let rate = 10.0 * i as f64 / 99.0;
                let c = rd_point(&m, rate)?.costs;
                floor = floor.min(c.d_d - m.sigma_x2 * (-2.0 * rate * std::f64::consts::LN_2).exp());
                if let Some(p) = prev {
                    mono = mono.max(c.d_d - p.d_d).max(c.d_e - p.d_e);
                }
                prev = Some(c);
            }
        }
        let golden = SourcePairModel::new(1.0, 0.0, 1.0)?;
        let c = solve_noiseless(&golden)?.costs.d_d;
        let derived = rd_point(&golden, 60.0)?.costs.d_d;
        Ok(vec![
            Check::at_most(4, "rd.endpoint_rate0", end0, 0.0),
            Check::at_most(4, "rd.endpoint_rate30", end30, 1e-8),
            Check::at_most(4, "rd.gaussian_floor_violation", (-floor).max(0.0), 1e-12),
            Check::at_most(4, "rd.monotone_violation", mono.max(0.0), 1e-12),
            Check::at_most(4, "rd.errata_derived_limit", (derived - 0.2763932).abs(), 1e-7),
            Check::at_most(4, "rd.errata_swapped_limit", exponent_swapped_d_d(60.0, c).abs(), 1e-12),
        ])
    })
}

fn noisy(seed: u64) -> Vec<Check> {
    collect(5, "noisy", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x05);
        let (mut gap, mut power, mut bits): (f64, f64, f64) = (0.0, 0.0, 0.0);
        for _ in 0..50 {
            let m = random_pair(&mut rng);
            let ch = ChannelSpec::new(rng.random_range(0.01..100.0), rng.random_range(0.01..10.0))?;
            let s = solve_noisy(&m, &ch)?;
            gap = gap.max((s.costs.d_e - opta_bound(&m, &ch)?).abs());
            power = power.max((encoder_power(&m, &s.scheme) - ch.power).abs() / ch.power.max(1.0));
            if s.scheme.enc_theta_weight.to_bits() != best_alpha(&m).to_bits() {
                bits = 1.0;
            }
        }
        Ok(vec![
            Check::at_most(5, "noisy.opta_gap", gap, 1e-9),
            Check::at_most(5, "noisy.power_error", power, 1e-12),
            Check::at_most(5, "noisy.alpha_bit_identical", bits, 0.0),
        ])
    })
}

/// The correlated SI model used for the rate-dependence check.
pub fn generic_si_model() -> SideInfoModel {
    SideInfoModel {
        sigma_x2: 1.0,
        rho_x_theta: 0.2,
        r_theta: 1.0,
        rho_x_w: 0.5,
        rho_theta_w: 0.4,
        r_w: 1.0,
    }
}

fn side_information() -> Vec<Check> {
    collect(6, "si", || {
        let m = generic_si_model();
        let inv = transmitter_si_invariance(&m, &[-1.0, 0.0, 2.0, 5.0])?;
        let useless = SourcePairModel::new(1.0, 0.3, 0.8)?;
        let a = best_alpha(&useless);
        let mut dev: f64 = 0.0;
        for rate in [0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
            dev = dev.max((beta_of_rate(&useless.with_useless_side_info(), rate)?.0 - a).abs());
        }
        let alpha_si = solve_noiseless_si(&m)?.alpha_si;
        let b30 = beta_of_rate(&m, 30.0)?.0;
        let b05 = beta_of_rate(&m, 0.5)?.0;
        let b4 = beta_of_rate(&m, 4.0)?.0;
        let mut dep = Check::above(6, "si.beta_rate_dependence", (b05 - b4).abs(), 1e-6);
        dep.known_unattainable = true;
        Ok(vec![
            Check::at_most(6, "si.transmitter_invariance", inv.max_deviation, 1e-12),
            Check::at_most(6, "si.beta_equals_alpha_without_si", dev, 1e-8),
            Check::at_most(6, "si.beta_limit_rate30", (b30 - alpha_si).abs(), 1e-4),
            dep,
        ])
    })
}

fn matching(suite: Suite) -> Vec<Check> {
    collect(7, "match", || {
        let ch = ChannelSpec::new(3.0, 1.0)?;
        let count = match suite {
            Suite::Quick => 6,
            Suite::Full => 20,
        };
        let (mut res, mut gap, mut perturbed): (f64, f64, f64) = (0.0, 0.0, f64::INFINITY);
        for i in 0..count {
            // ρ_θW spread over [−0.5, 0.5] without 0.
            let tw = -0.5 + (i as f64 + 0.5) / count as f64;
            let a = [0.0, 0.3, -0.3, 0.6][i % 4];
            let m = SideInfoModel::new(1.0, a, 1.0, 0.0, tw, 1.0)?;
            let root = find_matched_rho_xw(&m, &ch)?;
            let rep = match_condition(&m.with_rho_x_w(root), &ch, 1e-6)?;
            res = res.max(rep.residual);
            gap = gap.max(rep.gap.abs());
            let (lo, hi) = feasible_rho_x_w(&m)?;
            for d in [-0.1, 0.1] {
                let p = root + d;
                if p > lo && p < hi {
                    perturbed = perturbed.min(match_condition(&m.with_rho_x_w(p), &ch, 1e-6)?.gap);
                }
            }
        }
        Ok(vec![
            Check::at_most(7, "match.root_residual", res, 1e-6),
            Check::at_most(7, "match.root_gap", gap, 1e-6),
            Check::above(7, "match.perturbed_gap", perturbed, 1e-9),
        ])
    })
}

fn codec(seed: u64) -> Vec<Check> {
    collect(8, "codec", || {
        let m = SourcePairModel::new(1.0, 0.0, 1.0)?;
        let t = empirical_triple(&m, 16, 1_000_000, seed)?;
        let lo = rd_point(&m, 4.0)?.costs;
        let hi = rd_point(&m, 3.0)?.costs;
        let outside = |v: f64, a: f64, b: f64| (a - v).max(v - b).max(0.0);
        Ok(vec![
            Check::at_most(8, "codec.d_d_in_bounds", outside(t.costs.d_d, lo.d_d, hi.d_d), 0.0),
            Check::at_most(8, "codec.d_e_in_bounds", outside(t.costs.d_e, lo.d_e, hi.d_e), 0.0),
            Check::at_most(8, "codec.d_d_vs_prediction", (t.costs.d_d - 0.28327).abs(), 4.0 * t.stderr.d_d + 1e-5),
            Check::at_most(8, "codec.d_e_vs_prediction", (t.costs.d_e - 0.39734).abs(), 4.0 * t.stderr.d_e + 1e-5),
            Check::at_most(
                8,
                "codec.converse_margin_stderr",
                ((lo.d_d - t.costs.d_d) / t.stderr.d_d).max((lo.d_e - t.costs.d_e) / t.stderr.d_e),
                4.0,
            ),
        ])
    })
}

fn ace(seed: u64) -> Vec<Check> {
    collect(9, "ace", || {
        let m = SourcePairModel::new(1.0, 0.7, 1.0)?;
        let s = sample(&m, &SimConfig::new(seed ^ 0x09, 100_000))?;
        let r = ace_max_correlation(&s.x, &s.theta, 64, 30)?;
        Ok(vec![
            Check::at_most(9, "ace.estimate_error", (r.estimate - 0.7).abs(), 0.02),
            Check::above(9, "ace.identity_correlation", r.identity_correlation, 0.99 - 1e-15),
        ])
    })
}

fn control() -> Vec<Check> {
    collect(10, "control", || {
        let m = SourcePairModel::new(1.0, 0.0, 1.0)?;
        let cf = CanonicalForm::new(1.0, 0.1, 0.0, 0.0);
        let mut dev: f64 = 0.0;
        for n in [0.1, 1.0, 10.0] {
            dev = dev.max((solve_canonical(&m, &cf, n)?.alpha - 0.618034).abs());
        }
        Ok(vec![
            Check::holds(10, "control.witsenhausen_cross_term", has_ux_cross_term(&QuadraticObjective::witsenhausen(0.1))),
            Check::holds(10, "control.test_channel_no_cross_term", !has_ux_cross_term(&QuadraticObjective::test_channel(0.1))),
            Check::at_most(10, "control.alpha_channel_independent", dev, 1e-5),
        ])
    })
}

fn figure_panels() -> Vec<Check> {
    collect(11, "figures", || {
        let t = Instant::now();
        let a = costs_vs_r(1.0, 0.0, &default_r_grid())?;
        let b = costs_vs_rho(1.0, 1.0, &default_rho_grid())?;
        let c = rd_curves(1.0, &default_rate_grid())?;
        let lim = corollary_limits(1.0, LimitPath::RToInfinity { rho: 0.0 }, &[1e6, 1e8])?;
        let valid_a: Vec<_> = a.iter().filter(|r| r.valid).collect();
        let valid_b: Vec<_> = b.iter().filter(|r| r.valid).collect();
        Ok(vec![
            Check::holds(11, "figures.fig3a_d_d_increasing", nonincreasing(valid_a.iter().map(|r| -r.d_d), 1e-12)),
            Check::holds(11, "figures.fig3a_below_half", valid_a.iter().all(|r| r.d_d < 0.5)),
            Check::at_most(11, "figures.fig3a_limit_half", (lim.extrapolated - 0.5).abs(), 1e-3),
            Check::holds(11, "figures.fig3b_d_d_nonincreasing", nonincreasing(valid_b.iter().map(|r| r.d_d), 1e-12)),
            Check::holds(11, "figures.fig3b_d_e_nondecreasing", nonincreasing(valid_b.iter().map(|r| -r.d_e), 1e-12)),
            Check::holds(11, "figures.fig3c_start_at_sigma2", c[0].d_d_r1 == 1.0 && c[0].d_d_r01 == 1.0),
            Check::holds(
                11,
                "figures.fig3c_nonincreasing",
                nonincreasing(c.iter().map(|r| r.d_d_r1), 1e-12) && nonincreasing(c.iter().map(|r| r.d_d_r01), 1e-12),
            ),
            Check::at_most(11, "figures.runtime_s", t.elapsed().as_secs_f64(), 30.0),
        ])
    })
}

/// Runs the whole battery.
pub fn run(suite: Suite, seed: u64) -> Summary {
    let mut checks = golden_checks(&GOLDEN);
    checks.extend(stackelberg(seed));
    checks.extend(monte_carlo(suite, seed));
    checks.extend(rate_distortion(seed));
    checks.extend(noisy(seed));
    checks.extend(side_information());
    checks.extend(matching(suite));
    checks.extend(codec(seed));
    checks.extend(ace(seed));
    checks.extend(control());
    checks.extend(figure_panels());
    summarize(suite, seed, checks)
}

pub fn summarize(suite: Suite, seed: u64, checks: Vec<Check>) -> Summary {
    let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
    let passed = checks.iter().all(|c| c.passed || c.known_unattainable);
    Summary {
        suite,
        seed,
        checks,
        passed,
        failed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_checks_pass_and_detect_tampering() {
        let ok = golden_checks(&GOLDEN);
        assert!(ok.iter().all(|c| c.passed), "{ok:?}");
        let tampered = GoldenValues { alpha: 0.6180440, ..GOLDEN };
        let bad = golden_checks(&tampered);
        let failed: Vec<&str> = bad.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        assert_eq!(failed, vec!["golden.alpha"]);
    }

    #[test]
    fn swapped_exponent_form_violates_floor() {
        // At R = 1, c = 0.2763932 the swapped form drops below σ²·2^{−2R}.
        assert!(exponent_swapped_d_d(1.0, 0.2763932) < 0.25);
    }

    #[test]
    fn summary_flags() {
        let checks = vec![Check::at_most(1, "a", 0.0, 1.0), Check::above(2, "b", 0.0, 1.0)];
        let s = summarize(Suite::Quick, 0, checks.clone());
        assert!(!s.passed);
        assert_eq!(s.failed, vec!["b".to_string()]);
        let mut c = checks;
        c[1].known_unattainable = true;
        assert!(summarize(Suite::Quick, 0, c).passed);
    }
}
