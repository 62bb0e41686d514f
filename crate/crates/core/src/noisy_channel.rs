//! Equilibrium over the additive white Gaussian noise channel.
//!
//! The transmitter scales the effective source X + αθ to the power budget,
//! the receiver plays the conditional mean. The converse is the strategic
//! R-D curve evaluated at channel capacity.

use serde::{Deserialize, Serialize};

use crate::equilibrium::best_alpha;
use crate::error::{Error, Result};
use crate::gausslin::{best_decoder, CostPair, LinearScheme, SourcePairModel};
use crate::strategic_rd::rd_point;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    /// Average power budget E{U²} ≤ power.
    pub power: f64,
    pub noise_var: f64,
}

impl ChannelSpec {
    pub fn new(power: f64, noise_var: f64) -> Result<Self> {
        let ch = Self { power, noise_var };
        ch.validate()?;
        Ok(ch)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.power > 0.0) || !self.power.is_finite() {
            return Err(Error::InvalidInput(format!("channel.power must be finite and > 0, got {}", self.power)));
        }
        if !(self.noise_var > 0.0) || !self.noise_var.is_finite() {
            return Err(Error::InvalidInput(format!(
                "channel.noise_var must be finite and > 0, got {}",
                self.noise_var
            )));
        }
        Ok(())
    }

    pub fn snr(&self) -> f64 {
        self.power / self.noise_var
    }
}

/// ½·log2(1 + P/N) in bits.
pub fn capacity(ch: &ChannelSpec) -> f64 {
    0.5 * ch.snr().ln_1p() / std::f64::consts::LN_2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoisySolution {
    pub scheme: LinearScheme,
    pub costs: CostPair,
}

/// Encoder gain that puts c·(X + αθ) exactly at the power budget.
pub fn power_gain(m: &SourcePairModel, alpha: f64, power: f64) -> f64 {
    (power / (m.sigma_x2 * (1.0 + 2.0 * alpha * m.rho + alpha * alpha * m.r))).sqrt()
}

pub fn solve_noisy(m: &SourcePairModel, ch: &ChannelSpec) -> Result<NoisySolution> {
    m.validate()?;
    ch.validate()?;
    let alpha = best_alpha(m);
    let enc = LinearScheme::encoder(alpha, 0.0).with_gain(power_gain(m, alpha, ch.power));
    let resp = best_decoder(m, &enc, ch.noise_var)?;
    Ok(NoisySolution {
        scheme: resp.scheme,
        costs: resp.costs,
    })
}

/// Lowest D_E any coding scheme can reach over this channel.
pub fn opta_bound(m: &SourcePairModel, ch: &ChannelSpec) -> Result<f64> {
    ch.validate()?;
    Ok(rd_point(m, capacity(ch))?.costs.d_e)
}

/// Row of the power sweep CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisyRow {
    pub p_over_n: f64,
    pub capacity_bits: f64,
    pub d_e: f64,
    pub d_d: f64,
    pub gain: f64,
}

/// Solves at each SNR in `p_over_n` with unit noise variance scaled by `noise_var`.
pub fn noisy_sweep(m: &SourcePairModel, noise_var: f64, p_over_n: &[f64]) -> Result<Vec<NoisyRow>> {
    p_over_n
        .iter()
        .map(|&snr| {
            let ch = ChannelSpec::new(snr * noise_var, noise_var)?;
            let s = solve_noisy(m, &ch)?;
            Ok(NoisyRow {
                p_over_n: snr,
                capacity_bits: capacity(&ch),
                d_e: s.costs.d_e,
                d_d: s.costs.d_d,
                gain: s.scheme.enc_gain,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::solve_noiseless;
    use crate::gausslin::encoder_power;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn golden() -> SourcePairModel {
        SourcePairModel::new(1.0, 0.0, 1.0).unwrap()
    }

    #[test]
    fn capacity_values() {
        assert_abs_diff_eq!(capacity(&ChannelSpec::new(1.0, 1.0).unwrap()), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(capacity(&ChannelSpec::new(3.0, 1.0).unwrap()), 1.0, epsilon = 1e-15);
        assert!(capacity(&ChannelSpec::new(1e-300, 1.0).unwrap()) < 1e-299);
        assert!(ChannelSpec::new(0.0, 1.0).is_err());
        assert!(ChannelSpec::new(1.0, -1.0).is_err());
    }

    #[test]
    fn golden_noisy() {
        let m = golden();
        let ch = ChannelSpec::new(3.0, 1.0).unwrap();
        let s = solve_noisy(&m, &ch).unwrap();
        assert_abs_diff_eq!(s.scheme.enc_gain, (3.0f64 / 1.381966).sqrt(), epsilon = 1e-6);
        assert_abs_diff_eq!(s.costs.d_e, 0.7864745, epsilon = 1e-7);
        assert_abs_diff_eq!(opta_bound(&m, &ch).unwrap(), 0.7864745, epsilon = 1e-7);
        assert_abs_diff_eq!(encoder_power(&m, &s.scheme), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn limits() {
        let m = SourcePairModel::new(2.0, 0.3, 0.7).unwrap();
        let eq = solve_noiseless(&m).unwrap();
        let s = solve_noisy(&m, &ChannelSpec::new(1.0, 1e-9).unwrap()).unwrap();
        assert_abs_diff_eq!(s.costs.d_e, eq.costs.d_e, epsilon = 1e-7);
        assert_abs_diff_eq!(s.costs.d_d, eq.costs.d_d, epsilon = 1e-7);

        let s = solve_noisy(&m, &ChannelSpec::new(1e-12, 1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(s.costs.d_d, m.sigma_x2, epsilon = 1e-9);
        assert_abs_diff_eq!(s.costs.d_e, m.var_x_plus_theta(), epsilon = 1e-9);
        assert_abs_diff_eq!(opta_bound(&m, &ChannelSpec::new(1e-12, 1.0).unwrap()).unwrap(), m.var_x_plus_theta(), epsilon = 1e-9);
        assert_abs_diff_eq!(opta_bound(&m, &ChannelSpec::new(1e18, 1.0).unwrap()).unwrap(), eq.costs.d_e, epsilon = 1e-8);
    }

    #[test]
    fn sweep_is_monotone() {
        let snrs: Vec<f64> = (0..50).map(|i| 0.1 * 1.2f64.powi(i)).collect();
        let rows = noisy_sweep(&golden(), 0.5, &snrs).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].d_e <= w[0].d_e + 1e-12);
            assert!(w[1].d_d <= w[0].d_d + 1e-12);
            assert!(w[1].capacity_bits > w[0].capacity_bits);
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
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn linear_scheme_meets_the_converse(m in pair_model(), p in 0.01f64..100.0, n in 0.01f64..10.0) {
            let ch = ChannelSpec::new(p, n).unwrap();
            let s = solve_noisy(&m, &ch).unwrap();
            let bound = opta_bound(&m, &ch).unwrap();
            prop_assert!((s.costs.d_e - bound).abs() <= 1e-9 * m.sigma_x2.max(1.0));
            prop_assert!((encoder_power(&m, &s.scheme) - p).abs() <= 1e-12 * p.max(1.0));
            prop_assert_eq!(s.scheme.enc_theta_weight.to_bits(), best_alpha(&m).to_bits());
        }
    }
}
