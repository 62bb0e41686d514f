//! Exact second-order algebra for jointly Gaussian (X, θ, W).
//!
//! Everything here is closed form: covariance propagation through linear
//! maps and linear MMSE by elimination on at most 4×4 blocks. Other modules
//! check their formulas against these routines.

use serde::{Deserialize, Serialize};

use crate::error::{Error, ModelViolation, Result};

/// Relative tolerance for positive-definiteness and singularity checks.
pub const PD_TOL: f64 = 1e-12;

/// Second-order statistics of the source X and private information θ.
///
/// The covariance is `sigma_x2 * [[1, rho], [rho, r]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourcePairModel {
    pub sigma_x2: f64,
    pub rho: f64,
    pub r: f64,
}

impl SourcePairModel {
    pub fn new(sigma_x2: f64, rho: f64, r: f64) -> Result<Self> {
        let m = Self { sigma_x2, rho, r };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> std::result::Result<(), ModelViolation> {
        check_sigma(self.sigma_x2)?;
        if !self.rho.is_finite() {
            return Err(ModelViolation::new("rho", "must be finite"));
        }
        if !self.r.is_finite() {
            return Err(ModelViolation::new("r", "must be finite"));
        }
        if self.r - self.rho * self.rho <= PD_TOL * (1.0 + self.r.abs()) {
            return Err(ModelViolation::new(
                "r",
                format!("r must exceed rho^2 (r = {}, rho^2 = {})", self.r, self.rho * self.rho),
            ));
        }
        Ok(())
    }

    /// Same dimensionless parameters at a different source variance.
    pub fn with_sigma_x2(self, sigma_x2: f64) -> Self {
        Self { sigma_x2, ..self }
    }

    /// Embeds the pair into a side-information model whose W is independent
    /// of (X, θ) with unit normalized variance.
    pub fn with_useless_side_info(self) -> SideInfoModel {
        SideInfoModel {
            sigma_x2: self.sigma_x2,
            rho_x_theta: self.rho,
            r_theta: self.r,
            rho_x_w: 0.0,
            rho_theta_w: 0.0,
            r_w: 1.0,
        }
    }

    /// Variance of X + θ, the quantity the transmitter wants reconstructed.
    pub fn var_x_plus_theta(&self) -> f64 {
        self.sigma_x2 * (1.0 + 2.0 * self.rho + self.r)
    }
}

/// Normalized 3×3 covariance of (X, θ, W), scaled by `sigma_x2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SideInfoModel {
    pub sigma_x2: f64,
    pub rho_x_theta: f64,
    pub r_theta: f64,
    pub rho_x_w: f64,
    pub rho_theta_w: f64,
    pub r_w: f64,
}

impl SideInfoModel {
    pub fn new(
        sigma_x2: f64,
        rho_x_theta: f64,
        r_theta: f64,
        rho_x_w: f64,
        rho_theta_w: f64,
        r_w: f64,
    ) -> Result<Self> {
        let m = Self {
            sigma_x2,
            rho_x_theta,
            r_theta,
            rho_x_w,
            rho_theta_w,
            r_w,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> std::result::Result<(), ModelViolation> {
        check_sigma(self.sigma_x2)?;
        let fields = [
            ("rho_x_theta", self.rho_x_theta),
            ("r_theta", self.r_theta),
            ("rho_x_w", self.rho_x_w),
            ("rho_theta_w", self.rho_theta_w),
            ("r_w", self.r_w),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(ModelViolation::new(name, "must be finite"));
            }
        }
        let c = self.normalized();
        let trace = c[0][0] + c[1][1] + c[2][2];
        let tol = PD_TOL * trace.abs().max(1.0);
        let m2 = c[0][0] * c[1][1] - c[0][1] * c[1][0];
        if m2 <= tol {
            return Err(ModelViolation::new(
                "r_theta",
                format!("leading 2x2 minor {m2:e} is not positive (r_theta must exceed rho_x_theta^2)"),
            ));
        }
        let m3 = det3(&c);
        if m3 <= tol {
            return Err(ModelViolation::new(
                "rho_x_w",
                format!("3x3 covariance determinant {m3:e} is not positive (not positive definite)"),
            ));
        }
        Ok(())
    }

    /// Marginal (X, θ) model.
    pub fn pair(&self) -> SourcePairModel {
        SourcePairModel {
            sigma_x2: self.sigma_x2,
            rho: self.rho_x_theta,
            r: self.r_theta,
        }
    }

    pub fn with_rho_x_w(self, rho_x_w: f64) -> Self {
        Self { rho_x_w, ..self }
    }

    pub fn with_sigma_x2(self, sigma_x2: f64) -> Self {
        Self { sigma_x2, ..self }
    }

    /// Normalized covariance (divided by `sigma_x2`).
    pub fn normalized(&self) -> [[f64; 3]; 3] {
        [
            [1.0, self.rho_x_theta, self.rho_x_w],
            [self.rho_x_theta, self.r_theta, self.rho_theta_w],
            [self.rho_x_w, self.rho_theta_w, self.r_w],
        ]
    }

    /// True when W is uncorrelated with both X and θ.
    pub fn side_info_is_useless(&self) -> bool {
        self.rho_x_w == 0.0 && self.rho_theta_w == 0.0
    }
}

fn check_sigma(s: f64) -> std::result::Result<(), ModelViolation> {
    if !s.is_finite() || s <= 0.0 {
        return Err(ModelViolation::new("sigma_x2", format!("must be finite and > 0, got {s}")));
    }
    Ok(())
}

fn det3(c: &[[f64; 3]; 3]) -> f64 {
    c[0][0] * (c[1][1] * c[2][2] - c[1][2] * c[2][1]) - c[0][1] * (c[1][0] * c[2][2] - c[1][2] * c[2][0])
        + c[0][2] * (c[1][0] * c[2][1] - c[1][1] * c[2][0])
}

/// Common view of both source models as a covariance over (X, θ, W).
///
/// Pair models report W ≡ 0, so any weight placed on W is inert.
pub trait JointModel {
    fn sigma_x2(&self) -> f64;
    fn covariance(&self) -> [[f64; 3]; 3];
    fn has_side_info(&self) -> bool;
    fn check(&self) -> std::result::Result<(), ModelViolation>;
}

impl JointModel for SourcePairModel {
    fn sigma_x2(&self) -> f64 {
        self.sigma_x2
    }

    fn covariance(&self) -> [[f64; 3]; 3] {
        let s = self.sigma_x2;
        [
            [s, s * self.rho, 0.0],
            [s * self.rho, s * self.r, 0.0],
            [0.0, 0.0, 0.0],
        ]
    }

    fn has_side_info(&self) -> bool {
        false
    }

    fn check(&self) -> std::result::Result<(), ModelViolation> {
        self.validate()
    }
}

impl JointModel for SideInfoModel {
    fn sigma_x2(&self) -> f64 {
        self.sigma_x2
    }

    fn covariance(&self) -> [[f64; 3]; 3] {
        let mut c = self.normalized();
        for row in c.iter_mut() {
            for v in row.iter_mut() {
                *v *= self.sigma_x2;
            }
        }
        c
    }

    fn has_side_info(&self) -> bool {
        true
    }

    fn check(&self) -> std::result::Result<(), ModelViolation> {
        self.validate()
    }
}

/// Accepts iff the model's invariants hold.
pub fn validate_model<M: JointModel>(m: &M) -> std::result::Result<(), ModelViolation> {
    m.check()
}

/// Encoder `U = c·(X + a·θ + b·W) + T`, `T ~ N(0, σ_T²)` independent, and
/// decoder `X̂ = dec_y·Y + dec_w·W` where `Y = U + N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearScheme {
    pub enc_gain: f64,
    pub enc_theta_weight: f64,
    #[serde(default)]
    pub enc_si_weight: f64,
    #[serde(default)]
    pub enc_noise_var: f64,
    pub dec_y_weight: f64,
    #[serde(default)]
    pub dec_w_weight: f64,
}

impl LinearScheme {
    /// Unit-gain encoder `X + a·θ + T` with no decoder attached yet.
    pub fn encoder(theta_weight: f64, noise_var: f64) -> Self {
        Self {
            enc_gain: 1.0,
            enc_theta_weight: theta_weight,
            enc_si_weight: 0.0,
            enc_noise_var: noise_var,
            dec_y_weight: 0.0,
            dec_w_weight: 0.0,
        }
    }

    /// The babbling scheme: nothing is sent and the decoder outputs 0.
    pub fn silent() -> Self {
        Self {
            enc_gain: 0.0,
            enc_theta_weight: 0.0,
            enc_si_weight: 0.0,
            enc_noise_var: 0.0,
            dec_y_weight: 0.0,
            dec_w_weight: 0.0,
        }
    }

    pub fn with_gain(self, enc_gain: f64) -> Self {
        Self { enc_gain, ..self }
    }

    pub fn with_si_weight(self, enc_si_weight: f64) -> Self {
        Self { enc_si_weight, ..self }
    }

    pub fn with_decoder(self, dec_y_weight: f64, dec_w_weight: f64) -> Self {
        Self {
            dec_y_weight,
            dec_w_weight,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.enc_gain,
            self.enc_theta_weight,
            self.enc_si_weight,
            self.enc_noise_var,
            self.dec_y_weight,
            self.dec_w_weight,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("scheme weights must be finite".into()));
        }
        if self.enc_noise_var < 0.0 {
            return Err(Error::InvalidInput("enc_noise_var must be >= 0".into()));
        }
        Ok(())
    }
}

/// Transmitter and receiver expected costs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostPair {
    pub d_e: f64,
    pub d_d: f64,
}

/// Linear MMSE solution: weights over the observed indices and the error variance.
#[derive(Debug, Clone, PartialEq)]
pub struct MmseEstimate {
    pub weights: Vec<f64>,
    pub err_var: f64,
}

/// Linear MMSE estimate of `cov[target]` from `cov[observed]`.
///
/// The observed block is scaled to unit diagonal and factored as LDLᵀ; a
/// pivot at or below `PD_TOL · k` (k observed variables) is reported as
/// [`Error::SingularObservation`].
pub fn mmse_linear<const N: usize>(
    cov: &[[f64; N]; N],
    target: usize,
    observed: &[usize],
) -> Result<MmseEstimate> {
    if N > 4 {
        return Err(Error::InvalidInput(format!("covariance is {N}x{N}; at most 4x4 supported")));
    }
    if target >= N || observed.iter().any(|&i| i >= N) {
        return Err(Error::InvalidInput("index out of range".into()));
    }
    let k = observed.len();
    let prior = cov[target][target];
    if k == 0 {
        return Ok(MmseEstimate {
            weights: Vec::new(),
            err_var: prior,
        });
    }

    let mut scale = [0.0; 4];
    for (a, &i) in observed.iter().enumerate() {
        let d = cov[i][i];
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::SingularObservation);
        }
        scale[a] = d.sqrt();
    }
    let mut c = [[0.0; 4]; 4];
    let mut rhs = [0.0; 4];
    for (a, &i) in observed.iter().enumerate() {
        for (b, &j) in observed.iter().enumerate() {
            c[a][b] = cov[i][j] / (scale[a] * scale[b]);
        }
        rhs[a] = cov[i][target] / scale[a];
    }

    // LDLᵀ in place: strictly lower part holds L, diagonal holds D.
    for j in 0..k {
        let mut d = c[j][j];
        for p in 0..j {
            d -= c[j][p] * c[j][p] * c[p][p];
        }
        if d <= PD_TOL * k as f64 {
            return Err(Error::SingularObservation);
        }
        c[j][j] = d;
        for i in j + 1..k {
            let mut v = c[i][j];
            for p in 0..j {
                v -= c[i][p] * c[j][p] * c[p][p];
            }
            c[i][j] = v / d;
        }
    }
    let mut u = rhs;
    for i in 0..k {
        for p in 0..i {
            u[i] -= c[i][p] * u[p];
        }
    }
    for i in 0..k {
        u[i] /= c[i][i];
    }
    for i in (0..k).rev() {
        for p in i + 1..k {
            u[i] -= c[p][i] * u[p];
        }
    }

    let weights: Vec<f64> = (0..k).map(|a| u[a] / scale[a]).collect();
    let explained: f64 = observed
        .iter()
        .zip(&weights)
        .map(|(&i, w)| w * cov[i][target])
        .sum();
    Ok(MmseEstimate {
        weights,
        err_var: (prior - explained).max(0.0),
    })
}

// Linear functionals over the base vector (X, θ, W, T, N).
type Functional = [f64; 5];

const FX: Functional = [1.0, 0.0, 0.0, 0.0, 0.0];
const FW: Functional = [0.0, 0.0, 1.0, 0.0, 0.0];

fn base_covariance<M: JointModel>(m: &M, enc_noise_var: f64, channel_noise_var: f64) -> [[f64; 5]; 5] {
    let c3 = m.covariance();
    let mut s = [[0.0; 5]; 5];
    for i in 0..3 {
        s[i][..3].copy_from_slice(&c3[i]);
    }
    s[3][3] = enc_noise_var;
    s[4][4] = channel_noise_var;
    s
}

fn bilinear(s: &[[f64; 5]; 5], a: &Functional, b: &Functional) -> f64 {
    let mut acc = 0.0;
    for i in 0..5 {
        if a[i] == 0.0 {
            continue;
        }
        for j in 0..5 {
            acc += a[i] * s[i][j] * b[j];
        }
    }
    acc
}

fn channel_output(scheme: &LinearScheme) -> Functional {
    let c = scheme.enc_gain;
    [
        c,
        c * scheme.enc_theta_weight,
        c * scheme.enc_si_weight,
        1.0,
        1.0,
    ]
}

fn reconstruction(scheme: &LinearScheme) -> Functional {
    let y = channel_output(scheme);
    let mut f = [0.0; 5];
    for i in 0..5 {
        f[i] = scheme.dec_y_weight * y[i] + scheme.dec_w_weight * FW[i];
    }
    f
}

/// E{(X + k·θ − X̂)²} for the given scheme, exactly.
pub fn tracking_cost<M: JointModel>(m: &M, scheme: &LinearScheme, channel_noise_var: f64, k: f64) -> f64 {
    let s = base_covariance(m, scheme.enc_noise_var, channel_noise_var);
    let xh = reconstruction(scheme);
    let mut e = [1.0, k, 0.0, 0.0, 0.0];
    for i in 0..5 {
        e[i] -= xh[i];
    }
    bilinear(&s, &e, &e).max(0.0)
}

/// Exact (D_E, D_D) of a linear scheme through `Y = U + N`.
pub fn scheme_costs<M: JointModel>(m: &M, scheme: &LinearScheme, channel_noise_var: f64) -> CostPair {
    CostPair {
        d_e: tracking_cost(m, scheme, channel_noise_var, 1.0),
        d_d: tracking_cost(m, scheme, channel_noise_var, 0.0),
    }
}

/// Transmitted power E{U²}.
pub fn encoder_power<M: JointModel>(m: &M, scheme: &LinearScheme) -> f64 {
    let s = base_covariance(m, scheme.enc_noise_var, 0.0);
    let mut u = channel_output(scheme);
    u[4] = 0.0;
    bilinear(&s, &u, &u)
}

/// Covariance of (X, θ, W, Y) induced by the encoder part of `scheme`.
pub fn observation_covariance<M: JointModel>(
    m: &M,
    scheme: &LinearScheme,
    channel_noise_var: f64,
) -> [[f64; 4]; 4] {
    let s = base_covariance(m, scheme.enc_noise_var, channel_noise_var);
    let fs: [Functional; 4] = [FX, [0.0, 1.0, 0.0, 0.0, 0.0], FW, channel_output(scheme)];
    let mut c = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            c[i][j] = bilinear(&s, &fs[i], &fs[j]);
        }
    }
    c
}

/// The receiver's best response and the costs it induces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestResponse {
    pub scheme: LinearScheme,
    pub costs: CostPair,
    /// Receiver error variance as reported by the MMSE solve.
    pub err_var: f64,
}

/// Conditional-mean decoder for the encoder part of `scheme`.
///
/// Observes Y (dropped when Var(Y) = 0) and, for side-information models, W.
/// Decoder fields already present in `scheme` are ignored.
pub fn best_decoder<M: JointModel>(m: &M, scheme: &LinearScheme, channel_noise_var: f64) -> Result<BestResponse> {
    let cov = observation_covariance(m, scheme, channel_noise_var);
    let y_live = cov[3][3] > 0.0;
    let mut observed = Vec::with_capacity(2);
    if y_live {
        observed.push(3);
    }
    if m.has_side_info() {
        observed.push(2);
    }
    let est = mmse_linear(&cov, 0, &observed)?;
    let (dec_y, dec_w) = match (y_live, m.has_side_info()) {
        (true, true) => (est.weights[0], est.weights[1]),
        (true, false) => (est.weights[0], 0.0),
        (false, true) => (0.0, est.weights[0]),
        (false, false) => (0.0, 0.0),
    };
    let scheme = scheme.with_decoder(dec_y, dec_w);
    Ok(BestResponse {
        scheme,
        costs: scheme_costs(m, &scheme, channel_noise_var),
        err_var: est.err_var,
    })
}
