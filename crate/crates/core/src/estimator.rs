//! Multichannel wavelet deconvolution.
//!
//! The channels are fused frequency by frequency with inverse-variance
//! weights,
//!
//! ```text
//! f^_m = sum_l gamma_{m,l} conj(g_{m,l}) y_{m,l} / sum_l gamma_{m,l} |g_{m,l}|^2,
//! gamma_{m,l} = n^{alpha_l} sigma_l^{-2} max(|m|, 1)^{2H_l - 1},
//! ```
//!
//! and the fused coefficients are expanded in the periodized Meyer basis.
//! Regular-smooth and box-car blurs use level-dependent hard thresholding
//! between `j0` and `j1`; super-smooth blurs use a linear projection onto
//! `V_{j0}`.
//!
//! Noise scales `sigma_l` here are always the Fourier-domain scales
//! ([`LrdSpec::fourier_sigma`](crate::noise::LrdSpec::fourier_sigma)).

use std::collections::BTreeSet;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fourier::{FourierCoeffs, SignalGrid};
use crate::kernels::KernelSpec;
use crate::meyer::{FrequencySet, MeyerBasis, WaveletCoeffs};
use crate::model::{ChannelSpec, MultichannelObservation};
use crate::noise::{estimate_sigma_mad_lrd, unit_noise, LrdSpec};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    RegularSmooth,
    SuperSmooth,
    Boxcar,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::RegularSmooth => "regular_smooth",
            Mode::SuperSmooth => "super_smooth",
            Mode::Boxcar => "boxcar",
        })
    }
}

/// How the threshold multiplier `zeta` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ZetaRule {
    /// `sqrt(xi)`.
    #[default]
    SqrtAlpha,
    /// `4 sqrt(xi)`.
    FourSqrtAlpha,
    /// `2 sqrt((p v 2) 2 xi)`.
    Theoretical,
    Fixed(f64),
}

impl ZetaRule {
    pub fn value(&self, xi: f64, p: f64) -> f64 {
        match *self {
            ZetaRule::SqrtAlpha => xi.sqrt(),
            ZetaRule::FourSqrtAlpha => 4.0 * xi.sqrt(),
            ZetaRule::Theoretical => theoretical_zeta(xi, p),
            ZetaRule::Fixed(v) => v,
        }
    }

    pub fn label(&self) -> String {
        match *self {
            ZetaRule::SqrtAlpha => "sqrt_alpha".into(),
            ZetaRule::FourSqrtAlpha => "four_sqrt_alpha".into(),
            ZetaRule::Theoretical => "theoretical".into(),
            ZetaRule::Fixed(v) => format!("{v}"),
        }
    }
}

/// Lower bound on `zeta` under which the risk bounds are proved.
pub fn theoretical_zeta(xi: f64, p: f64) -> f64 {
    2.0 * (p.max(2.0) * 2.0 * xi).sqrt()
}

impl fmt::Display for ZetaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum NameOrNumber {
    Name(String),
    Int(i64),
    Number(f64),
}

impl Serialize for ZetaRule {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            ZetaRule::Fixed(v) => s.serialize_f64(v),
            _ => s.serialize_str(&self.label()),
        }
    }
}

impl<'de> Deserialize<'de> for ZetaRule {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        match NameOrNumber::deserialize(d)? {
            NameOrNumber::Name(s) => s.parse().map_err(D::Error::custom),
            NameOrNumber::Int(v) => Ok(ZetaRule::Fixed(v as f64)),
            NameOrNumber::Number(v) => Ok(ZetaRule::Fixed(v)),
        }
    }
}

impl std::str::FromStr for ZetaRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrt_alpha" => Ok(ZetaRule::SqrtAlpha),
            "four_sqrt_alpha" => Ok(ZetaRule::FourSqrtAlpha),
            "theoretical" => Ok(ZetaRule::Theoretical),
            other => other.parse::<f64>().map(ZetaRule::Fixed).map_err(|_| {
                Error::InvalidConfig(format!(
                    "zeta must be sqrt_alpha, four_sqrt_alpha, theoretical or a number, got {other:?}"
                ))
            }),
        }
    }
}

/// A resolution level that is either chosen by the estimator or fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LevelChoice {
    #[default]
    Auto,
    /// `-1` is accepted for the coarse level and means level 0.
    Fixed(i64),
}

impl Serialize for LevelChoice {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            LevelChoice::Auto => s.serialize_str("auto"),
            LevelChoice::Fixed(v) => s.serialize_i64(v),
        }
    }
}

impl<'de> Deserialize<'de> for LevelChoice {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        match NameOrNumber::deserialize(d)? {
            NameOrNumber::Name(s) if s == "auto" => Ok(LevelChoice::Auto),
            NameOrNumber::Name(s) => Err(D::Error::custom(format!("expected \"auto\" or an integer level, got {s:?}"))),
            NameOrNumber::Int(v) => Ok(LevelChoice::Fixed(v)),
            NameOrNumber::Number(v) => Err(D::Error::custom(format!("level must be an integer, got {v}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Stopping-time rule on probe channels.
    #[default]
    DataDriven,
    /// Closed-form rates from the known channel parameters.
    Theoretical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaSource {
    #[default]
    Known,
    /// Median absolute deviation of the finest-level coefficients.
    Mad,
}

/// What to do when the fused denominator vanishes at a required frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegeneratePolicy {
    /// Leave the frequency out and record it in the report.
    #[default]
    Drop,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub zeta: ZetaRule,
    /// Risk exponent; only enters the theoretical `zeta`.
    pub p: f64,
    pub mode: Mode,
    pub j0: LevelChoice,
    pub j1: LevelChoice,
    pub selection: Selection,
    pub sigma_source: SigmaSource,
    /// Slack in the super-smooth coarse level rule.
    pub epsilon: f64,
    /// Seed of the probe experiments used by data-driven selection.
    pub probe_seed: u64,
    pub degenerate: DegeneratePolicy,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            zeta: ZetaRule::SqrtAlpha,
            p: 2.0,
            mode: Mode::RegularSmooth,
            j0: LevelChoice::Auto,
            j1: LevelChoice::Auto,
            selection: Selection::DataDriven,
            sigma_source: SigmaSource::Known,
            epsilon: 0.1,
            probe_seed: 0,
            degenerate: DegeneratePolicy::Drop,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if let ZetaRule::Fixed(v) = self.zeta {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidConfig(format!("zeta must be nonnegative, got {v}")));
            }
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(Error::InvalidConfig(format!("p must be at least 1, got {}", self.p)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if let LevelChoice::Fixed(v) = self.j0 {
            if v < -1 {
                return Err(Error::NegativeLevel(v));
            }
        }
        if let LevelChoice::Fixed(v) = self.j1 {
            if v < 0 {
                return Err(Error::NegativeLevel(v));
            }
        }
        Ok(())
    }
}

/// Parameters of one channel as seen by the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub kernel: KernelSpec,
    pub alpha: f64,
    /// Fourier-domain noise scale.
    pub sigma: f64,
}

impl ChannelParams {
    pub fn hurst(&self) -> f64 {
        1.0 - self.alpha / 2.0
    }

    pub fn nu(&self) -> f64 {
        self.kernel.dip_index()
    }

    pub fn theta(&self) -> f64 {
        self.kernel.theta()
    }

    pub fn beta(&self) -> f64 {
        self.kernel.beta()
    }
}

/// Per-channel rates and the derived optimal-channel quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRates {
    pub channels: Vec<ChannelParams>,
}

impl ChannelRates {
    pub fn new(channels: Vec<ChannelParams>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::Empty("channel list"));
        }
        for c in &channels {
            c.kernel.validate()?;
            LrdSpec::white(c.sigma).validate()?;
            if !(c.alpha > 0.0 && c.alpha <= 1.0) {
                return Err(Error::InvalidNoise(format!("alpha must lie in (0, 1], got {}", c.alpha)));
            }
        }
        Ok(Self { channels })
    }

    /// Rates with each channel's Fourier-domain noise scale.
    pub fn from_specs(specs: &[ChannelSpec]) -> Result<Self> {
        Self::new(
            specs
                .iter()
                .map(|s| ChannelParams {
                    kernel: s.kernel,
                    alpha: s.lrd.alpha,
                    sigma: s.lrd.fourier_sigma(),
                })
                .collect(),
        )
    }

    /// Same kernels and `alpha`s with replaced noise scales.
    pub fn with_sigmas(&self, sigmas: &[f64]) -> Result<Self> {
        if sigmas.len() != self.channels.len() {
            return Err(Error::LengthMismatch {
                expected: self.channels.len(),
                got: sigmas.len(),
            });
        }
        Self::new(
            self.channels
                .iter()
                .zip(sigmas)
                .map(|(c, &sigma)| ChannelParams { sigma, ..*c })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    /// `alpha_* = min_l alpha_l`.
    pub fn alpha_min(&self) -> f64 {
        self.channels.iter().map(|c| c.alpha).fold(f64::INFINITY, f64::min)
    }

    /// `alpha^* = max_l alpha_l`.
    pub fn alpha_max(&self) -> f64 {
        self.channels.iter().map(|c| c.alpha).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `argmin_l n^{-alpha_l} 2^{alpha_l + 2 nu_l} e^{2 theta_l 2^{beta_l}}`,
    /// smallest index on ties. Compared on the log scale.
    pub fn optimal_channel(&self, n: usize) -> usize {
        let ln_n = (n as f64).ln();
        let crit = |c: &ChannelParams| {
            -c.alpha * ln_n
                + (c.alpha + 2.0 * c.nu()) * std::f64::consts::LN_2
                + 2.0 * c.theta() * 2f64.powf(c.beta())
        };
        let mut best = 0;
        for (l, c) in self.channels.iter().enumerate().skip(1) {
            if crit(c) < crit(&self.channels[best]) {
                best = l;
            }
        }
        best
    }

    /// `nu_* = nu_l + alpha_l / 2 - 1/2` for channel `l`.
    pub fn nu_star(&self, l: usize) -> f64 {
        let c = &self.channels[l];
        c.nu() + c.alpha / 2.0 - 0.5
    }

    /// `(2M + 1) / (2M) + alpha^* / 2 - 1/2`.
    pub fn nu_tilde_star(&self) -> f64 {
        let m = self.channels.len() as f64;
        (2.0 * m + 1.0) / (2.0 * m) + self.alpha_max() / 2.0 - 0.5
    }

    /// `alpha_l` (regular-smooth and super-smooth) or `alpha_*` (box-car).
    pub fn xi(&self, mode: Mode, l: usize) -> f64 {
        match mode {
            Mode::Boxcar => self.alpha_min(),
            _ => self.channels[l].alpha,
        }
    }

    fn noiseless(&self) -> bool {
        self.channels.iter().any(|c| c.sigma == 0.0)
    }

    /// Weights `gamma_{m,l}`. Noiseless channels, if any, take all the weight.
    fn weights_unchecked(&self, m: i64, n: usize) -> Vec<f64> {
        if self.noiseless() {
            return self
                .channels
                .iter()
                .map(|c| if c.sigma == 0.0 { 1.0 } else { 0.0 })
                .collect();
        }
        let nf = n as f64;
        let am = m.unsigned_abs().max(1) as f64;
        self.channels
            .iter()
            .map(|c| nf.powf(c.alpha) * am.powf(2.0 * c.hurst() - 1.0) / (c.sigma * c.sigma))
            .collect()
    }

    /// `sum_l sigma_l^{-2} n^{alpha_l} |m|^{2H_l - 1} |g_{m,l}|^2`, the inverse
    /// variance of the fused coefficient at `m` (infinite if a noiseless
    /// channel sees `m`).
    pub fn precision(&self, m: i64, n: usize) -> f64 {
        let nf = n as f64;
        let am = m.unsigned_abs().max(1) as f64;
        self.channels
            .iter()
            .map(|c| {
                let g2 = c.kernel.multiplier(m).powi(2);
                if g2 == 0.0 {
                    0.0
                } else if c.sigma == 0.0 {
                    f64::INFINITY
                } else {
                    nf.powf(c.alpha) * am.powf(2.0 * c.hurst() - 1.0) * g2 / (c.sigma * c.sigma)
                }
            })
            .sum()
    }
}

/// Free-function form of [`ChannelRates::optimal_channel`].
pub fn optimal_channel(rates: &ChannelRates, n: usize) -> usize {
    rates.optimal_channel(n)
}

/// `gamma*_{m,l} = n^{alpha_l} sigma_l^{-2} max(|m|, 1)^{2H_l - 1}`.
pub fn optimal_weights(m: i64, rates: &ChannelRates, n: usize) -> Result<Vec<f64>> {
    if let Some(l) = rates.channels.iter().position(|c| c.sigma == 0.0) {
        return Err(Error::InvalidNoise(format!("channel {l} has sigma = 0")));
    }
    Ok(rates.weights_unchecked(m, n))
}

/// Variance of the fused coefficient at `m` for arbitrary weights:
/// `sum_l gamma_l^2 sigma_l^2 n^{-alpha_l} |m|^{1-2H_l} |g_l|^2 / (sum_l gamma_l |g_l|^2)^2`.
pub fn fused_variance(m: i64, weights: &[f64], rates: &ChannelRates, n: usize) -> f64 {
    let nf = n as f64;
    let am = m.unsigned_abs().max(1) as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (w, c) in weights.iter().zip(&rates.channels) {
        let g2 = c.kernel.multiplier(m).powi(2);
        num += w * w * c.sigma * c.sigma * nf.powf(-c.alpha) * am.powf(1.0 - 2.0 * c.hurst()) * g2;
        den += w * g2;
    }
    num / (den * den)
}

fn is_degenerate(den: f64) -> bool {
    !(den.is_normal() || den == f64::INFINITY)
}

/// Fused Fourier coefficients `f^_m` for `|m| <= max_freq`, zero elsewhere,
/// together with the frequencies whose denominator vanished.
pub fn fuse_channels(
    obs: &MultichannelObservation,
    rates: &ChannelRates,
    max_freq: i64,
    policy: DegeneratePolicy,
) -> Result<(FourierCoeffs, Vec<i64>)> {
    if rates.len() != obs.channel_count() {
        return Err(Error::LengthMismatch {
            expected: obs.channel_count(),
            got: rates.len(),
        });
    }
    let n = obs.n();
    let mut out = FourierCoeffs::zeros(n)?;
    let band = out.max_frequency().min(max_freq);
    let mut dropped = Vec::new();
    for m in -band..=band {
        let w = rates.weights_unchecked(m, n);
        let mut num = Complex64::new(0.0, 0.0);
        let mut den = 0.0;
        for ((wl, c), y) in w.iter().zip(&rates.channels).zip(obs.coeffs()) {
            if *wl == 0.0 {
                continue;
            }
            let g = c.kernel.multiplier(m);
            num += *wl * g * y.get(m);
            den += *wl * g * g;
        }
        if is_degenerate(den) {
            dropped.push(m);
            continue;
        }
        out.set(m, num / den);
    }
    if !dropped.is_empty() && policy == DegeneratePolicy::Error {
        return Err(Error::DegenerateFrequencies(dropped));
    }
    Ok((out, dropped))
}

/// Highest frequency touched by levels up to `j1` (or by `V_{j0}` alone).
fn support_bound(j0: u32, j1: Option<u32>) -> i64 {
    match j1 {
        Some(j1) => FrequencySet::bounds(j1).1,
        None => (2i64 << j0) / 3,
    }
}

/// Unthresholded `a^_{j0,k}` and `b^_{j,k}` for `j0 <= j <= j1` using the
/// channels' known noise levels; degenerate frequencies are an error.
pub fn estimate_wavelet_coeffs(obs: &MultichannelObservation, j0: u32, j1: u32) -> Result<WaveletCoeffs> {
    let rates = ChannelRates::from_specs(obs.channels())?;
    let (fused, _) = fuse_channels(obs, &rates, support_bound(j0, Some(j1)), DegeneratePolicy::Error)?;
    MeyerBasis::standard().forward_from_fourier(&fused, j0, j1)
}

fn level_variance(j: u32, rates: &ChannelRates, n: usize, dropped: &BTreeSet<i64>) -> Result<f64> {
    let basis = MeyerBasis::standard();
    let scale = (1u64 << j) as f64;
    let mut total = 0.0;
    let mut bad = Vec::new();
    for &(m, w) in basis.psi_table(j).iter() {
        if dropped.contains(&m) {
            continue;
        }
        let prec = rates.precision(m, n);
        if is_degenerate(prec) {
            bad.push(m);
            continue;
        }
        total += w.norm_sqr() / scale / prec;
    }
    if !bad.is_empty() {
        return Err(Error::DegenerateFrequencies(bad));
    }
    Ok(total)
}

/// `Var(b^_{j,k}) = sum_{m in C_j} |Psi^{jk}_m|^2 / precision(m)`; the same for every `k`.
pub fn coeff_variance(j: u32, k: u64, rates: &ChannelRates, n: usize) -> Result<f64> {
    if k >= 1u64 << j {
        return Err(Error::LevelRange(format!("position {k} is outside level {j}")));
    }
    level_variance(j, rates, n, &BTreeSet::new())
}

/// `tau_j = sqrt(n^xi Var(b^_{j,k}))`.
pub fn tau_j(j: u32, rates: &ChannelRates, n: usize, xi: f64) -> Result<f64> {
    Ok(((n as f64).powf(xi) * coeff_variance(j, 0, rates, n)?).sqrt())
}

/// `c_n = sqrt(ln n / n^xi)`.
pub fn c_n(n: f64, xi: f64) -> f64 {
    (n.ln() / n.powf(xi)).sqrt()
}

/// `lambda_j = zeta tau_j c_n`.
pub fn threshold(j: u32, zeta: f64, rates: &ChannelRates, n: usize, xi: f64) -> Result<f64> {
    Ok(zeta * tau_j(j, rates, n, xi)? * c_n(n as f64, xi))
}

fn clamp_level(value: f64, lo: u32, hi: u32) -> u32 {
    if value.is_nan() || value < lo as f64 {
        lo
    } else if value > hi as f64 {
        hi
    } else {
        value as u32
    }
}

/// `j1 = floor(log2((n^{alpha_{l*}} / ln n)^{1/(2 nu_* + 1)}))` for
/// regular-smooth blur, `floor(log2((n^{alpha_*} / ln n)^{1/(2 nu~_* + 1)}))`
/// for box-car, clamped to `[j0, J - 2]`.
pub fn theoretical_j1(mode: Mode, rates: &ChannelRates, n: usize, j0: u32) -> Result<u32> {
    let levels = n.trailing_zeros();
    if levels < 2 {
        return Err(Error::LevelRange(format!("grid of {n} points is too small")));
    }
    let ln_n = (n as f64).ln();
    let (alpha, nu) = match mode {
        Mode::RegularSmooth => {
            let l = rates.optimal_channel(n);
            (rates.channels[l].alpha, rates.nu_star(l))
        }
        Mode::Boxcar => (rates.alpha_min(), rates.nu_tilde_star()),
        Mode::SuperSmooth => {
            return Err(Error::InvalidConfig(
                "the fine level rule applies to regular_smooth and boxcar modes".into(),
            ))
        }
    };
    let exponent = (alpha * ln_n - ln_n.ln()) / (2.0 * nu + 1.0);
    let top = levels - 2;
    Ok(clamp_level((exponent / std::f64::consts::LN_2).floor(), j0.min(top), top))
}

/// `2^{j0} = ((alpha_{l*} - epsilon) ln n / (2 theta_{l*}))^{1/beta_{l*}}`,
/// rounded and clamped to `[0, J - 2]`.
pub fn super_smooth_j0(rates: &ChannelRates, n: usize, epsilon: f64) -> Result<u32> {
    let l = rates.optimal_channel(n);
    let c = &rates.channels[l];
    if c.theta() <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "super_smooth mode needs theta > 0 on the optimal channel {l}"
        )));
    }
    if !(epsilon > 0.0 && epsilon < rates.alpha_min()) {
        return Err(Error::InvalidConfig(format!(
            "epsilon must lie in (0, {}), got {epsilon}",
            rates.alpha_min()
        )));
    }
    let levels = n.trailing_zeros();
    if levels < 2 {
        return Err(Error::LevelRange(format!("grid of {n} points is too small")));
    }
    let base = (c.alpha - epsilon) * (n as f64).ln() / (2.0 * c.theta());
    let value = (base.log2() / c.beta()).round();
    Ok(clamp_level(value, 0, levels - 2))
}

/// First frequency at which a probe drops under the noise envelope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoppingTime {
    pub omega: usize,
    /// False when no frequency crossed and `omega` is the band edge `n/2 - 1`.
    pub crossed: bool,
}

/// `F = min{omega > 0 : |y_omega| <= omega^{alpha/2} eps ln(eps^{-2})}`.
pub fn stopping_time(probe: &FourierCoeffs, alpha: f64, eps: f64) -> StoppingTime {
    let top = probe.max_frequency().max(1) as usize;
    if eps > 0.0 && eps.is_finite() {
        let level = eps * (eps * eps).recip().ln();
        for omega in 1..=top {
            let envelope = (omega as f64).powf(alpha / 2.0) * level;
            if probe.get(omega as i64).norm() <= envelope {
                return StoppingTime { omega, crossed: true };
            }
        }
    }
    StoppingTime {
        omega: top,
        crossed: false,
    }
}

/// `eps_l = sigma_l n^{-alpha_l / 2}`.
pub fn noise_envelope_scale(c: &ChannelParams, n: usize) -> f64 {
    c.sigma * (n as f64).powf(-c.alpha / 2.0)
}

/// Probe experiment `y_m = g_m + DFT(sigma x)_m` with `x` unit-variance
/// noise of the channel's type, independent of any observation noise.
pub fn probe_channel(kernel: &KernelSpec, lrd: &LrdSpec, n: usize, seed_value: u64) -> Result<FourierCoeffs> {
    kernel.validate()?;
    lrd.validate()?;
    let mut probe = if lrd.sigma > 0.0 {
        let mut rng = seed::rng(seed_value, &[seed::stream::PROBE]);
        let noise: Vec<f64> = unit_noise(&mut rng, lrd, n)?.into_iter().map(|v| v * lrd.sigma).collect();
        SignalGrid::new(noise)?.fourier()
    } else {
        FourierCoeffs::zeros(n)?
    };
    for b in 0..probe.len() {
        let m = probe.frequency(b);
        probe.add(m, Complex64::new(kernel.multiplier(m), 0.0));
    }
    Ok(probe)
}

fn data_driven_level(f: &StoppingTime, levels: u32) -> u32 {
    let raw = (f.omega.max(1) as f64).log2().floor() - 1.0;
    clamp_level(raw, 0, levels.saturating_sub(2))
}

/// Per-channel `j_l = floor(log2 F_l) - 1` and their maximum, clamped to
/// `[0, J - 2]`.
pub fn data_driven_j1(probes: &[FourierCoeffs], rates: &ChannelRates, n: usize) -> Result<(u32, Vec<u32>)> {
    let times = stopping_times(probes, rates, n)?;
    let levels = n.trailing_zeros();
    let per: Vec<u32> = times.iter().map(|f| data_driven_level(f, levels)).collect();
    Ok((*per.iter().max().expect("nonempty"), per))
}

/// `argmax_l F_l`, smallest index on ties.
pub fn data_driven_best_channel(probes: &[FourierCoeffs], rates: &ChannelRates, n: usize) -> Result<usize> {
    let times = stopping_times(probes, rates, n)?;
    Ok(argmax_first(&times))
}

fn argmax_first(times: &[StoppingTime]) -> usize {
    let mut best = 0;
    for (l, f) in times.iter().enumerate() {
        if f.omega > times[best].omega {
            best = l;
        }
    }
    best
}

fn stopping_times(probes: &[FourierCoeffs], rates: &ChannelRates, n: usize) -> Result<Vec<StoppingTime>> {
    if probes.len() != rates.len() {
        return Err(Error::LengthMismatch {
            expected: rates.len(),
            got: probes.len(),
        });
    }
    if let Some(p) = probes.iter().find(|p| p.len() != n) {
        return Err(Error::LengthMismatch {
            expected: n,
            got: p.len(),
        });
    }
    Ok(probes
        .iter()
        .zip(&rates.channels)
        .map(|(p, c)| stopping_time(p, c.alpha, noise_envelope_scale(c, n)))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub j: u32,
    pub tau: f64,
    pub lambda: f64,
    pub survivors: usize,
    pub total: usize,
}

/// Diagnostics of one estimation run. Channel indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub mode: Mode,
    pub selection: Selection,
    pub sigma_source: SigmaSource,
    pub n: usize,
    pub j0: u32,
    /// Finest detail level; absent for the linear estimator.
    pub j1: Option<u32>,
    pub theoretical_j1: Option<u32>,
    /// Channel whose rate sets `xi` and `zeta`.
    pub best_channel: usize,
    pub theoretical_best_channel: usize,
    pub stopping_times: Vec<StoppingTime>,
    pub channel_j1: Vec<u32>,
    pub xi: f64,
    pub zeta: f64,
    pub zeta_theoretical_bound: f64,
    pub c_n: f64,
    pub levels: Vec<LevelReport>,
    /// Marginal noise levels recorded with the observation.
    pub sigma_known: Vec<f64>,
    /// Fourier-domain noise scales implied by `sigma_known`.
    pub sigma_known_fourier: Vec<f64>,
    /// MAD estimates of the Fourier-domain scales, when requested.
    pub sigma_mad: Option<Vec<f64>>,
    pub dropped_frequencies: Vec<i64>,
    pub warnings: Vec<String>,
}

impl EstimationReport {
    pub fn survivors(&self) -> usize {
        self.levels.iter().map(|l| l.survivors).sum()
    }
}

#[derive(Debug, Clone)]
pub struct Estimate {
    pub signal: SignalGrid,
    /// Coefficients after thresholding.
    pub coeffs: WaveletCoeffs,
    pub report: EstimationReport,
}

struct Prepared {
    rates: ChannelRates,
    known: Vec<f64>,
    known_fourier: Vec<f64>,
    mad: Option<Vec<f64>>,
}

fn prepare(obs: &MultichannelObservation, config: &EstimatorConfig) -> Result<Prepared> {
    config.validate()?;
    let n = obs.n();
    if n < 16 {
        return Err(Error::LevelRange(format!("estimation needs n >= 16, got {n}")));
    }
    let known_rates = ChannelRates::from_specs(obs.channels())?;
    let known: Vec<f64> = obs.channels().iter().map(|c| c.lrd.sigma).collect();
    let known_fourier: Vec<f64> = known_rates.channels.iter().map(|c| c.sigma).collect();
    let (rates, mad) = match config.sigma_source {
        SigmaSource::Known => (known_rates, None),
        SigmaSource::Mad => {
            let est = obs
                .samples()
                .iter()
                .zip(obs.channels())
                .map(|(s, c)| estimate_sigma_mad_lrd(s, c.lrd.alpha))
                .collect::<Result<Vec<_>>>()?;
            (known_rates.with_sigmas(&est)?, Some(est))
        }
    };
    Ok(Prepared {
        rates,
        known,
        known_fourier,
        mad,
    })
}

fn resolve_j0(choice: LevelChoice, top: u32) -> Result<u32> {
    match choice {
        LevelChoice::Auto | LevelChoice::Fixed(-1) => Ok(0),
        LevelChoice::Fixed(v) if v < 0 => Err(Error::NegativeLevel(v)),
        LevelChoice::Fixed(v) if v as u64 > top as u64 => Err(Error::LevelRange(format!(
            "j0 = {v} exceeds the finest synthesizable level {top}"
        ))),
        LevelChoice::Fixed(v) => Ok(v as u32),
    }
}

/// Runs the estimator selected by `config.mode`.
pub fn estimate(obs: &MultichannelObservation, config: &EstimatorConfig) -> Result<Estimate> {
    match config.mode {
        Mode::SuperSmooth => linear_impl(obs, config),
        Mode::RegularSmooth | Mode::Boxcar => hard_threshold_impl(obs, config),
    }
}

/// Hard-thresholding estimate over `j0..=j1`.
pub fn hard_threshold_estimate(obs: &MultichannelObservation, config: &EstimatorConfig) -> Result<SignalGrid> {
    if config.mode == Mode::SuperSmooth {
        return Err(Error::InvalidConfig("hard thresholding needs regular_smooth or boxcar mode".into()));
    }
    Ok(hard_threshold_impl(obs, config)?.signal)
}

/// Linear projection estimate onto `V_{j0}`.
pub fn linear_estimate(obs: &MultichannelObservation, config: &EstimatorConfig) -> Result<SignalGrid> {
    if config.mode != Mode::SuperSmooth {
        return Err(Error::InvalidConfig("the linear estimator needs super_smooth mode".into()));
    }
    Ok(linear_impl(obs, config)?.signal)
}

fn hard_threshold_impl(obs: &MultichannelObservation, config: &EstimatorConfig) -> Result<Estimate> {
    let prep = prepare(obs, config)?;
    let rates = &prep.rates;
    let n = obs.n();
    let levels = n.trailing_zeros();
    let top = levels - 2;
    let mut warnings = Vec::new();

    let j0 = resolve_j0(config.j0, top)?;
    let theory_best = rates.optimal_channel(n);
    let theory_j1 = theoretical_j1(config.mode, rates, n, j0)?;

    let (auto_j1, best, times, per_channel) = match config.selection {
        Selection::Theoretical => (theory_j1, theory_best, Vec::new(), Vec::new()),
        Selection::DataDriven => {
            let probes = obs
                .channels()
                .iter()
                .enumerate()
                .map(|(l, c)| probe_channel(&c.kernel, &c.lrd, n, seed::derive(config.probe_seed, &[l as u64])))
                .collect::<Result<Vec<_>>>()?;
            let times = stopping_times(&probes, rates, n)?;
            if let Some(l) = times.iter().position(|f| !f.crossed) {
                warnings.push(format!("probe of channel {l} never crossed its noise envelope"));
            }
            let per: Vec<u32> = times.iter().map(|f| data_driven_level(f, levels)).collect();
            let j1 = (*per.iter().max().expect("nonempty")).max(j0);
            (j1, argmax_first(&times), times, per)
        }
    };
    let j1 = match config.j1 {
        LevelChoice::Auto => auto_j1,
        LevelChoice::Fixed(v) if v as u64 > top as u64 => {
            return Err(Error::Aliasing { j1: v as u32, n });
        }
        LevelChoice::Fixed(v) => v as u32,
    };
    if j1 < j0 {
        return Err(Error::LevelRange(format!("j0 = {j0} exceeds j1 = {j1}")));
    }

    let xi = rates.xi(config.mode, best);
    let zeta = config.zeta.value(xi, config.p);
    let bound = theoretical_zeta(xi, config.p);
    if zeta < bound {
        log::debug!("zeta = {zeta:.4} is below the theoretical bound {bound:.4}");
        warnings.push(format!("zeta = {zeta:.4} is below the theoretical bound {bound:.4}"));
    }
    let cn = c_n(n as f64, xi);

    let (fused, dropped) = fuse_channels(obs, rates, support_bound(j0, Some(j1)), config.degenerate)?;
    if !dropped.is_empty() {
        warnings.push(format!("{} degenerate frequencies dropped", dropped.len()));
    }
    let dropped_set: BTreeSet<i64> = dropped.iter().copied().collect();
    let basis = MeyerBasis::standard();
    let mut coeffs = basis.forward_from_fourier(&fused, j0, j1)?;
    let nf = n as f64;
    let mut level_reports = Vec::new();
    for j in j0..=j1 {
        let var = level_variance(j, rates, n, &dropped_set)?;
        let tau = (nf.powf(xi) * var).sqrt();
        let lambda = zeta * tau * cn;
        let level = coeffs.detail_mut(j).expect("level in range");
        let mut survivors = 0;
        for b in level.iter_mut() {
            if b.abs() >= lambda {
                survivors += 1;
            } else {
                *b = 0.0;
            }
        }
        level_reports.push(LevelReport {
            j,
            tau,
            lambda,
            survivors,
            total: level.len(),
        });
    }
    let signal = basis.inverse_transform(&coeffs, n)?;
    Ok(Estimate {
        signal,
        coeffs,
        report: EstimationReport {
            mode: config.mode,
            selection: config.selection,
            sigma_source: config.sigma_source,
            n,
            j0,
            j1: Some(j1),
            theoretical_j1: Some(theory_j1),
            best_channel: best,
            theoretical_best_channel: theory_best,
            stopping_times: times,
            channel_j1: per_channel,
            xi,
            zeta,
            zeta_theoretical_bound: bound,
            c_n: cn,
            levels: level_reports,
            sigma_known: prep.known,
            sigma_known_fourier: prep.known_fourier,
            sigma_mad: prep.mad,
            dropped_frequencies: dropped,
            warnings,
        },
    })
}

fn linear_impl(obs: &MultichannelObservation, config: &EstimatorConfig) -> Result<Estimate> {
    let prep = prepare(obs, config)?;
    let rates = &prep.rates;
    let n = obs.n();
    let top = n.trailing_zeros() - 2;
    let best = rates.optimal_channel(n);
    let j0 = match config.j0 {
        LevelChoice::Auto => super_smooth_j0(rates, n, config.epsilon)?,
        choice => {
            // Validates theta even when the level is fixed.
            super_smooth_j0(rates, n, config.epsilon)?;
            resolve_j0(choice, top)?
        }
    };
    let (fused, dropped) = fuse_channels(obs, rates, support_bound(j0, None), config.degenerate)?;
    let mut warnings = Vec::new();
    if !dropped.is_empty() {
        warnings.push(format!("{} degenerate frequencies dropped", dropped.len()));
    }
    let basis = MeyerBasis::standard();
    let coeffs = basis.scaling_from_fourier(&fused, j0)?;
    let signal = basis.inverse_transform(&coeffs, n)?;
    let xi = rates.xi(Mode::SuperSmooth, best);
    Ok(Estimate {
        signal,
        coeffs,
        report: EstimationReport {
            mode: Mode::SuperSmooth,
            selection: Selection::Theoretical,
            sigma_source: config.sigma_source,
            n,
            j0,
            j1: None,
            theoretical_j1: None,
            best_channel: best,
            theoretical_best_channel: best,
            stopping_times: Vec::new(),
            channel_j1: Vec::new(),
            xi,
            zeta: 0.0,
            zeta_theoretical_bound: theoretical_zeta(xi, config.p),
            c_n: c_n(n as f64, xi),
            levels: Vec::new(),
            sigma_known: prep.known,
            sigma_known_fourier: prep.known_fourier,
            sigma_mad: prep.mad,
            dropped_frequencies: dropped,
            warnings,
        },
    })
}
