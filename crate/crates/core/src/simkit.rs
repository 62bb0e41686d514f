//! Seeded Monte Carlo and brute-force oracles.
//!
//! Sampling is split into fixed-size chunks; chunk `i` draws from the ChaCha8
//! stream `i` of the master seed, so results depend only on
//! `(seed, n, chunk)` and never on the thread count. Per-chunk partial sums
//! are combined in chunk order.

use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gausslin::{best_decoder, CostPair, JointModel, LinearScheme};

/// Stream offset for channel/encoder noise, disjoint from source streams.
const NOISE_STREAM_BASE: u64 = 1 << 40;

fn default_chunk() -> usize {
    1 << 16
}

fn default_bins() -> usize {
    64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub n: usize,
    #[serde(default = "default_chunk")]
    pub chunk: usize,
    #[serde(default = "default_bins")]
    pub bins: usize,
}

impl SimConfig {
    pub fn new(seed: u64, n: usize) -> Self {
        Self {
            seed,
            n,
            chunk: default_chunk(),
            bins: default_bins(),
        }
    }

    pub fn with_chunk(self, chunk: usize) -> Self {
        Self { chunk, ..self }
    }

    pub fn with_bins(self, bins: usize) -> Self {
        Self { bins, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::InvalidInput("sim.n must be >= 1".into()));
        }
        if self.chunk < 1 {
            return Err(Error::InvalidInput("sim.chunk must be >= 1".into()));
        }
        if self.bins < 2 {
            return Err(Error::InvalidInput("sim.bins must be >= 2".into()));
        }
        Ok(())
    }

    fn chunk_ranges(&self) -> Vec<(u64, std::ops::Range<usize>)> {
        (0..self.n.div_ceil(self.chunk))
            .map(|i| (i as u64, i * self.chunk..((i + 1) * self.chunk).min(self.n)))
            .collect()
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Columns X, θ and (for side-information models) W.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTable {
    pub x: Vec<f64>,
    pub theta: Vec<f64>,
    pub w: Option<Vec<f64>>,
}

impl SampleTable {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Writes the table as CSV with header `X,theta[,W]`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        match &self.w {
            Some(w) => {
                writeln!(out, "X,theta,W")?;
                for i in 0..self.len() {
                    writeln!(out, "{},{},{}", self.x[i], self.theta[i], w[i])?;
                }
            }
            None => {
                writeln!(out, "X,theta")?;
                for i in 0..self.len() {
                    writeln!(out, "{},{}", self.x[i], self.theta[i])?;
                }
            }
        }
        Ok(())
    }
}

fn cholesky3(c: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut l = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let mut s = c[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = if i == j {
                s.max(0.0).sqrt()
            } else if l[j][j] > 0.0 {
                s / l[j][j]
            } else {
                0.0
            };
        }
    }
    l
}

/// Draws `cfg.n` rows from the model's joint Gaussian law.
pub fn sample<M: JointModel + Sync>(m: &M, cfg: &SimConfig) -> Result<SampleTable> {
    m.check()?;
    cfg.validate()?;
    let l = cholesky3(&m.covariance());
    let chunks: Vec<Vec<[f64; 3]>> = cfg
        .chunk_ranges()
        .into_par_iter()
        .map(|(idx, range)| {
            let mut rng = cfg.rng(idx);
            range
                .map(|_| {
                    let z: [f64; 3] = [
                        StandardNormal.sample(&mut rng),
                        StandardNormal.sample(&mut rng),
                        StandardNormal.sample(&mut rng),
                    ];
                    [
                        l[0][0] * z[0],
                        l[1][0] * z[0] + l[1][1] * z[1],
                        l[2][0] * z[0] + l[2][1] * z[1] + l[2][2] * z[2],
                    ]
                })
                .collect()
        })
        .collect();
    let mut x = Vec::with_capacity(cfg.n);
    let mut theta = Vec::with_capacity(cfg.n);
    let mut w = Vec::with_capacity(if m.has_side_info() { cfg.n } else { 0 });
    for row in chunks.into_iter().flatten() {
        x.push(row[0]);
        theta.push(row[1]);
        if m.has_side_info() {
            w.push(row[2]);
        }
    }
    Ok(SampleTable {
        x,
        theta,
        w: m.has_side_info().then_some(w),
    })
}

/// Mean and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1.0;
        self.sum += v;
        self.sum_sq += v * v;
    }

    fn merge(self, o: Moments) -> Moments {
        Moments {
            n: self.n + o.n,
            sum: self.sum + o.sum,
            sum_sq: self.sum_sq + o.sum_sq,
        }
    }

    fn estimate(&self) -> MeanEstimate {
        let mean = self.sum / self.n;
        let var = if self.n > 1.0 {
            ((self.sum_sq - self.n * mean * mean) / (self.n - 1.0)).max(0.0)
        } else {
            0.0
        };
        MeanEstimate {
            mean,
            stderr: (var / self.n).sqrt(),
        }
    }
}

/// Sample mean and standard error, accumulated in index order.
pub fn mean_with_stderr(values: &[f64]) -> MeanEstimate {
    let mut m = Moments::default();
    values.iter().for_each(|&v| m.push(v));
    m.estimate()
}

/// Empirical (D_E, D_D) with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostEstimate {
    pub costs: CostPair,
    pub stderr: CostPair,
}

impl CostEstimate {
    /// |empirical − closed form| in units of the standard error.
    pub fn z_scores(&self, closed: &CostPair) -> CostPair {
        let z = |e: f64, c: f64, s: f64| if s > 0.0 { (e - c).abs() / s } else if e == c { 0.0 } else { f64::INFINITY };
        CostPair {
            d_e: z(self.costs.d_e, closed.d_e, self.stderr.d_e),
            d_d: z(self.costs.d_d, closed.d_d, self.stderr.d_d),
        }
    }
}

/// Sample means of (X+θ−X̂)² and (X−X̂)², with fresh encoder and channel
/// noise per row drawn from noise streams of the same master seed.
pub fn estimate_costs(
    samples: &SampleTable,
    scheme: &LinearScheme,
    noise_var: f64,
    cfg: &SimConfig,
) -> Result<CostEstimate> {
    scheme.validate()?;
    if noise_var < 0.0 || !noise_var.is_finite() {
        return Err(Error::InvalidInput("noise_var must be finite and >= 0".into()));
    }
    let cfg = SimConfig { n: samples.len(), ..*cfg };
    cfg.validate()?;
    let t_sd = scheme.enc_noise_var.sqrt();
    let n_sd = noise_var.sqrt();
    let parts: Vec<(Moments, Moments)> = cfg
        .chunk_ranges()
        .into_par_iter()
        .map(|(idx, range)| {
            let mut rng = cfg.rng(NOISE_STREAM_BASE + idx);
            let mut me = Moments::default();
            let mut md = Moments::default();
            for i in range {
                let x = samples.x[i];
                let th = samples.theta[i];
                let w = samples.w.as_ref().map_or(0.0, |w| w[i]);
                let t: f64 = StandardNormal.sample(&mut rng);
                let nz: f64 = StandardNormal.sample(&mut rng);
                let u = scheme.enc_gain * (x + scheme.enc_theta_weight * th + scheme.enc_si_weight * w) + t_sd * t;
                let y = u + n_sd * nz;
                let xh = scheme.dec_y_weight * y + scheme.dec_w_weight * w;
                me.push((x + th - xh).powi(2));
                md.push((x - xh).powi(2));
            }
            (me, md)
        })
        .collect();
    let (me, md) = parts
        .into_iter()
        .fold((Moments::default(), Moments::default()), |(a, b), (c, d)| (a.merge(c), b.merge(d)));
    let (e, d) = (me.estimate(), md.estimate());
    Ok(CostEstimate {
        costs: CostPair { d_e: e.mean, d_d: d.mean },
        stderr: CostPair {
            d_e: e.stderr,
            d_d: d.stderr,
        },
    })
}

/// Per-quantile-bin conditional means of X given Y.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalDecoder {
    /// Mean of Y in each bin.
    pub centers: Vec<f64>,
    /// Mean of X in each bin.
    pub means: Vec<f64>,
    pub counts: Vec<usize>,
    /// max over bins of |bin mean − weight · center|.
    pub deviation: f64,
}

/// Bins Y into `bins` equal-count quantile bins and compares the per-bin
/// mean of X with the linear predictor `weight · Y`.
pub fn empirical_decoder(y: &[f64], x: &[f64], bins: usize, weight: f64) -> Result<EmpiricalDecoder> {
    if y.len() != x.len() {
        return Err(Error::InvalidInput("x and y lengths differ".into()));
    }
    if bins < 2 || y.len() < bins {
        return Err(Error::InvalidInput("need bins >= 2 and at least one sample per bin".into()));
    }
    let ranks = quantile_bins(y, bins);
    let mut sy = vec![0.0; bins];
    let mut sx = vec![0.0; bins];
    let mut counts = vec![0usize; bins];
    for (i, &b) in ranks.iter().enumerate() {
        sy[b] += y[i];
        sx[b] += x[i];
        counts[b] += 1;
    }
    let centers: Vec<f64> = sy.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    let means: Vec<f64> = sx.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    let deviation = centers
        .iter()
        .zip(&means)
        .map(|(c, m)| (m - weight * c).abs())
        .fold(0.0, f64::max);
    Ok(EmpiricalDecoder {
        centers,
        means,
        counts,
        deviation,
    })
}

/// Equal-count bin index for each value (ties broken by position).
fn quantile_bins(v: &[f64], bins: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    let n = v.len();
    let mut out = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = rank * bins / n;
    }
    out
}

/// Grid of encoder deviations `Y = g·(X + αθ + T) + N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationGrid {
    pub alpha_center: f64,
    pub alpha_halfwidth: f64,
    pub alpha_points: usize,
    pub sigma_t2_max: f64,
    pub sigma_t2_points: usize,
    /// When set, the gain g is chosen so that E{U²} equals this power.
    pub power: Option<f64>,
}

impl DeviationGrid {
    /// 201 α values on [center − 2, center + 2] by 51 σ_T² values on [0, 2σ_X²].
    pub fn standard(alpha_center: f64, sigma_x2: f64) -> Self {
        Self {
            alpha_center,
            alpha_halfwidth: 2.0,
            alpha_points: 201,
            sigma_t2_max: 2.0 * sigma_x2,
            sigma_t2_points: 51,
            power: None,
        }
    }

    pub fn with_power(self, power: f64) -> Self {
        Self {
            power: Some(power),
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeviationResult {
    pub best_alpha: f64,
    pub best_sigma_t2: f64,
    pub best_d_e: f64,
    pub baseline_d_e: f64,
    /// Baseline D_E minus the best D_E found; positive means the baseline is beaten.
    pub improvement: f64,
}

/// The scheme for one grid point of the deviation family.
pub fn deviation_scheme<M: JointModel>(m: &M, alpha: f64, tau: f64, power: Option<f64>) -> LinearScheme {
    match power {
        None => LinearScheme::encoder(alpha, tau),
        Some(p) => {
            let c = m.covariance();
            let v = c[0][0] + 2.0 * alpha * c[0][1] + alpha * alpha * c[1][1] + tau;
            let g = if v > 0.0 { (p / v).sqrt() } else { 0.0 };
            LinearScheme::encoder(alpha, g * g * tau).with_gain(g)
        }
    }
}

/// Exhaustive closed-form search for an encoder deviation that lowers D_E
/// against the best-responding decoder.
pub fn deviation_search<M: JointModel + Sync>(
    m: &M,
    channel_noise_var: f64,
    baseline: &LinearScheme,
    grid: &DeviationGrid,
) -> Result<DeviationResult> {
    if grid.alpha_points < 1 || grid.sigma_t2_points < 1 {
        return Err(Error::InvalidInput("grid must have at least one point per axis".into()));
    }
    let baseline_d_e = best_decoder(m, baseline, channel_noise_var)?.costs.d_e;
    let alpha_at = |i: usize| {
        if grid.alpha_points == 1 {
            grid.alpha_center
        } else {
            grid.alpha_center - grid.alpha_halfwidth + 2.0 * grid.alpha_halfwidth * i as f64 / (grid.alpha_points - 1) as f64
        }
    };
    let tau_at = |j: usize| {
        if grid.sigma_t2_points == 1 {
            0.0
        } else {
            grid.sigma_t2_max * j as f64 / (grid.sigma_t2_points - 1) as f64
        }
    };
    let rows: Vec<Result<(f64, f64, f64)>> = (0..grid.alpha_points)
        .into_par_iter()
        .map(|i| {
            let a = alpha_at(i);
            let mut best = (a, 0.0, f64::INFINITY);
            for j in 0..grid.sigma_t2_points {
                let tau = tau_at(j);
                let s = deviation_scheme(m, a, tau, grid.power);
                let d = best_decoder(m, &s, channel_noise_var)?.costs.d_e;
                if d < best.2 {
                    best = (a, tau, d);
                }
            }
            Ok(best)
        })
        .collect();
    let mut best = (grid.alpha_center, 0.0, f64::INFINITY);
    for r in rows {
        let r = r?;
        if r.2 < best.2 {
            best = r;
        }
    }
    Ok(DeviationResult {
        best_alpha: best.0,
        best_sigma_t2: best.1,
        best_d_e: best.2,
        baseline_d_e,
        improvement: baseline_d_e - best.2,
    })
}

/// Outcome of the alternating-conditional-expectations fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AceResult {
    pub estimate: f64,
    /// Correlation after each iteration.
    pub history: Vec<f64>,
    /// Fitted zero-mean unit-variance function values per X bin.
    pub f_bins: Vec<f64>,
    pub g_bins: Vec<f64>,
    /// |corr(f(X), X)|: how close the fitted X transform is to the identity.
    pub identity_correlation: f64,
}

/// Maximal-correlation estimate by alternating conditional expectations on
/// quantile-binned data, normalizing to zero mean and unit variance after
/// every half step.
pub fn ace_max_correlation(x: &[f64], y: &[f64], bins: usize, iterations: usize) -> Result<AceResult> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput("x and y lengths differ".into()));
    }
    if !(8..=1024).contains(&bins) {
        return Err(Error::InvalidInput("ACE bins must be in [8, 1024]".into()));
    }
    if iterations < 10 {
        return Err(Error::InvalidInput("ACE needs at least 10 iterations".into()));
    }
    if x.len() < 10_000 {
        return Err(Error::InvalidInput("ACE needs at least 10^4 samples".into()));
    }
    let n = x.len();
    let bx = quantile_bins(x, bins);
    let by = quantile_bins(y, bins);
    let mut table = vec![0.0f64; bins * bins];
    let mut nx = vec![0.0f64; bins];
    let mut ny = vec![0.0f64; bins];
    let mut ysum = vec![0.0f64; bins];
    for i in 0..n {
        table[bx[i] * bins + by[i]] += 1.0;
        nx[bx[i]] += 1.0;
        ny[by[i]] += 1.0;
        ysum[by[i]] += y[i];
    }
    let standardize = |v: &mut [f64], w: &[f64]| {
        let tot: f64 = w.iter().sum();
        let mean = v.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / tot;
        v.iter_mut().for_each(|a| *a -= mean);
        let var = v.iter().zip(w).map(|(a, b)| a * a * b).sum::<f64>() / tot;
        let sd = var.sqrt();
        if sd > 0.0 {
            v.iter_mut().for_each(|a| *a /= sd);
        }
    };
    let mut g: Vec<f64> = ysum.iter().zip(&ny).map(|(s, c)| if *c > 0.0 { s / c } else { 0.0 }).collect();
    standardize(&mut g, &ny);
    let mut f = vec![0.0; bins];
    let mut history = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        for a in 0..bins {
            f[a] = if nx[a] > 0.0 {
                (0..bins).map(|b| table[a * bins + b] * g[b]).sum::<f64>() / nx[a]
            } else {
                0.0
            };
        }
        standardize(&mut f, &nx);
        for b in 0..bins {
            g[b] = if ny[b] > 0.0 {
                (0..bins).map(|a| table[a * bins + b] * f[a]).sum::<f64>() / ny[b]
            } else {
                0.0
            };
        }
        standardize(&mut g, &ny);
        let mut c = 0.0;
        for a in 0..bins {
            for b in 0..bins {
                c += table[a * bins + b] * f[a] * g[b];
            }
        }
        history.push(c / n as f64);
    }
    let fx: Vec<f64> = bx.iter().map(|&b| f[b]).collect();
    Ok(AceResult {
        estimate: *history.last().unwrap_or(&0.0),
        history,
        f_bins: f,
        g_bins: g,
        identity_correlation: pearson(&fx, x).abs(),
    })
}

/// Sample Pearson correlation.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

/// One empirical-versus-closed-form comparison, as exported in JSON reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerificationReport {
    pub estimate: f64,
    pub stderr: f64,
    pub closed_form: f64,
    pub z_score: f64,
}

impl VerificationReport {
    pub fn new(estimate: f64, stderr: f64, closed_form: f64) -> Self {
        let z_score = if stderr > 0.0 {
            (estimate - closed_form) / stderr
        } else {
            0.0
        };
        Self {
            estimate,
            stderr,
            closed_form,
            z_score,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{best_alpha, solve_noiseless};
    use crate::gausslin::{scheme_costs, SideInfoModel, SourcePairModel};
    use approx::assert_abs_diff_eq;

    fn golden() -> SourcePairModel {
        SourcePairModel::new(1.0, 0.0, 1.0).unwrap()
    }

    #[test]
    fn sampled_cross_moment_converges() {
        let m = SourcePairModel::new(1.0, 0.5, 1.0).unwrap();
        let cfg = SimConfig::new(7, 1_000_000);
        let s = sample(&m, &cfg).unwrap();
        let n = s.len() as f64;
        let prods: Vec<f64> = s.x.iter().zip(&s.theta).map(|(a, b)| a * b).collect();
        let mean = prods.iter().sum::<f64>() / n;
        let var = prods.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        // Var(Xθ) = 1 + ρ² for unit-variance pairs, so se ≈ 1.1/√n.
        assert_abs_diff_eq!(se * n.sqrt(), 1.25f64.sqrt(), epsilon = 0.02);
        assert!((mean - 0.5).abs() <= 4.0 * se);
    }

    #[test]
    fn sampling_is_deterministic_and_thread_independent() {
        let m = SideInfoModel::new(2.0, 0.2, 1.0, 0.4, -0.1, 1.5).unwrap();
        let cfg = SimConfig::new(42, 10_000).with_chunk(777);
        let a = sample(&m, &cfg).unwrap();
        let b = sample(&m, &cfg).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| sample(&m, &cfg).unwrap());
        assert_eq!(a, c);
        assert!(a.w.is_some());

        let s = sample(&m, &SimConfig::new(1, 1)).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s.x[0].is_finite() && s.theta[0].is_finite());
    }

    #[test]
    fn csv_header_and_rows() {
        let s = sample(&golden(), &SimConfig::new(3, 4)).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("X,theta"));
        assert_eq!(lines.count(), 4);
    }

    #[test]
    fn golden_costs_by_simulation() {
        let m = golden();
        let rep = solve_noiseless(&m).unwrap();
        let cfg = SimConfig::new(11, 1_000_000);
        let s = sample(&m, &cfg).unwrap();
        let est = estimate_costs(&s, &rep.scheme(), 0.0, &cfg).unwrap();
        let z = est.z_scores(&rep.costs);
        assert!(z.d_d <= 4.0 && z.d_e <= 4.0, "{z:?}");

        let null = estimate_costs(&s, &LinearScheme::silent(), 0.0, &cfg).unwrap();
        assert!((null.costs.d_d - 1.0).abs() <= 4.0 * null.stderr.d_d);
    }

    #[test]
    fn noisy_estimate_matches_closed_form() {
        let m = SourcePairModel::new(1.5, -0.3, 0.8).unwrap();
        let s0 = LinearScheme::encoder(0.4, 0.2).with_gain(1.3);
        let s = best_decoder(&m, &s0, 0.7).unwrap().scheme;
        let cfg = SimConfig::new(5, 400_000);
        let t = sample(&m, &cfg).unwrap();
        let est = estimate_costs(&t, &s, 0.7, &cfg).unwrap();
        let z = est.z_scores(&scheme_costs(&m, &s, 0.7));
        assert!(z.d_d <= 4.0 && z.d_e <= 4.0, "{z:?}");
    }

    #[test]
    fn empirical_decoder_is_linear_for_equilibrium() {
        let m = golden();
        let rep = solve_noiseless(&m).unwrap();
        let cfg = SimConfig::new(9, 1_000_000);
        let s = sample(&m, &cfg).unwrap();
        let y: Vec<f64> = s.x.iter().zip(&s.theta).map(|(x, t)| x + rep.alpha * t).collect();
        let d = empirical_decoder(&y, &s.x, 64, rep.kappa).unwrap();
        assert!(d.deviation <= 0.02, "deviation {}", d.deviation);
        assert_eq!(d.counts.iter().sum::<usize>(), s.len());

        // θ alone is independent of X when ρ = 0.
        let d = empirical_decoder(&s.theta, &s.x, 64, 0.0).unwrap();
        assert!(d.means.iter().all(|v| v.abs() < 0.05));

        // X = Y³ is far from any linear predictor.
        let yy: Vec<f64> = s.x.clone();
        let cubed: Vec<f64> = yy.iter().map(|v| v.powi(3)).collect();
        let d = empirical_decoder(&yy, &cubed, 64, 3.0).unwrap();
        assert!(d.deviation > 1.0);
    }

    #[test]
    fn deviation_search_examples() {
        let m = golden();
        let a = best_alpha(&m);
        let base = LinearScheme::encoder(a, 0.0);
        let r = deviation_search(&m, 0.0, &base, &DeviationGrid::standard(a, 1.0)).unwrap();
        assert!(r.improvement <= 1e-9);

        let off = LinearScheme::encoder(a + 0.1, 0.0);
        let r = deviation_search(&m, 0.0, &off, &DeviationGrid::standard(a + 0.1, 1.0)).unwrap();
        assert!(r.improvement > 0.0);
        assert!((r.best_alpha - a).abs() <= 0.02 + 1e-12);
        assert_eq!(r.best_sigma_t2, 0.0);
    }

    #[test]
    fn ace_recovers_gaussian_correlation() {
        let m = SourcePairModel::new(1.0, 0.7, 1.0).unwrap();
        let s = sample(&m, &SimConfig::new(21, 100_000)).unwrap();
        let r = ace_max_correlation(&s.x, &s.theta, 64, 30).unwrap();
        assert!((r.estimate - 0.7).abs() <= 0.02, "{}", r.estimate);
        assert!(r.identity_correlation >= 0.99);
        assert!(r.history.windows(2).all(|w| w[1] >= w[0] - 1e-3));
    }

    #[test]
    fn ace_independent_and_nonlinear() {
        let m = SourcePairModel::new(1.0, 0.0, 1.0).unwrap();
        let s = sample(&m, &SimConfig::new(22, 100_000)).unwrap();
        let r = ace_max_correlation(&s.x, &s.theta, 16, 20).unwrap();
        assert!(r.estimate <= 0.05, "{}", r.estimate);

        let y: Vec<f64> = s.x.iter().map(|v| v * v).collect();
        assert!(pearson(&s.x, &y).abs() < 0.05);
        let r = ace_max_correlation(&s.x, &y, 64, 30).unwrap();
        assert!(r.estimate >= 0.9, "{}", r.estimate);
    }

    #[test]
    fn ace_rejects_bad_config() {
        let v = vec![0.0; 20_000];
        assert!(ace_max_correlation(&v, &v, 4, 20).is_err());
        assert!(ace_max_correlation(&v, &v, 16, 5).is_err());
        assert!(ace_max_correlation(&v[..100], &v[..100], 16, 20).is_err());
    }
}
