//! Long-memory Gaussian noise, SNR calibration and noise-level estimation.
//!
//! Two generators are provided: fractional Gaussian noise by circulant
//! embedding (exact in distribution) and FARIMA(0, d, 0) by a long truncated
//! moving average. Both produce unit-variance series; channels scale them by
//! their `sigma`.
//!
//! The DFT of such a series has, at low frequencies,
//! `E|z_m|^2 ~ c n^{-alpha} |m|^{1-2H}` where the constant `c` depends on the
//! generator (see [`spectral_constant`]). The estimator works with the
//! Fourier-domain scale `sigma * sqrt(c)` so that its weights and thresholds
//! match the noise that is actually injected.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::fourier::{check_power_of_two, fft_forward, fft_inverse, SignalGrid};
use crate::meyer::MeyerBasis;

/// Gaussian consistency constant of the MAD, `Phi^{-1}(3/4)`.
pub const MAD_CONSTANT: f64 = 0.6745;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseGenerator {
    #[default]
    FgnCirculant,
    Farima,
}

/// Long-range dependence index and scale of one channel's noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrdSpec {
    /// `alpha` in `(0, 1]`; 1 is white noise.
    pub alpha: f64,
    /// Marginal standard deviation of the injected series; 0 means noiseless.
    #[serde(default = "unit")]
    pub sigma: f64,
    #[serde(default)]
    pub generator: NoiseGenerator,
}

fn unit() -> f64 {
    1.0
}

impl LrdSpec {
    pub fn new(alpha: f64, sigma: f64, generator: NoiseGenerator) -> Result<Self> {
        let spec = Self {
            alpha,
            sigma,
            generator,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn white(sigma: f64) -> Self {
        Self {
            alpha: 1.0,
            sigma,
            generator: NoiseGenerator::FgnCirculant,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidNoise(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::InvalidNoise(format!(
                "sigma must be finite and nonnegative, got {}",
                self.sigma
            )));
        }
        Ok(())
    }

    /// `H = 1 - alpha / 2`.
    pub fn hurst(&self) -> f64 {
        1.0 - self.alpha / 2.0
    }

    /// FARIMA differencing order `d = (1 - alpha) / 2`.
    pub fn d(&self) -> f64 {
        (1.0 - self.alpha) / 2.0
    }

    pub fn spectral_constant(&self) -> f64 {
        spectral_constant(self.generator, self.alpha)
    }

    /// Scale of the noise in the Fourier-domain model,
    /// `E|z_m|^2 = sigma_F^2 n^{-alpha} |m|^{1-2H}`.
    pub fn fourier_sigma(&self) -> f64 {
        self.sigma * self.spectral_constant().sqrt()
    }

    pub fn with_sigma(self, sigma: f64) -> Self {
        Self { sigma, ..self }
    }
}

/// Low-frequency constant `c` in `E|z_m|^2 ~ c n^{-alpha} |m|^{1-2H}` for a
/// unit-variance series from `generator`.
///
/// * fGn: `Gamma(2H + 1) sin(pi H) (2 pi)^{1 - 2H}`;
/// * FARIMA(0, d, 0): `(2 pi)^{-2d} Gamma(1 - d)^2 / Gamma(1 - 2d)`.
///
/// Both equal 1 for white noise.
pub fn spectral_constant(generator: NoiseGenerator, alpha: f64) -> f64 {
    match generator {
        NoiseGenerator::FgnCirculant => {
            let h = 1.0 - alpha / 2.0;
            gamma(2.0 * h + 1.0) * (PI * h).sin() * (2.0 * PI).powf(1.0 - 2.0 * h)
        }
        NoiseGenerator::Farima => {
            let d = (1.0 - alpha) / 2.0;
            (2.0 * PI).powf(-2.0 * d) * gamma(1.0 - d).powi(2) / gamma(1.0 - 2.0 * d)
        }
    }
}

/// Autocovariance of unit fractional Gaussian noise,
/// `(|k+1|^{2H} + |k-1|^{2H} - 2|k|^{2H}) / 2`.
pub fn fgn_autocovariance(k: i64, hurst: f64) -> f64 {
    let h2 = 2.0 * hurst;
    let k = k.unsigned_abs() as f64;
    0.5 * ((k + 1.0).powf(h2) + (k - 1.0).abs().powf(h2) - 2.0 * k.powf(h2))
}

fn check_hurst(hurst: f64) -> Result<()> {
    if (0.5..1.0).contains(&hurst) {
        Ok(())
    } else {
        Err(Error::InvalidNoise(format!("Hurst index must lie in [1/2, 1), got {hurst}")))
    }
}

type Cache = Mutex<HashMap<(usize, u64), Arc<Vec<f64>>>>;

fn cached(cache: &'static OnceLock<Cache>, key: (usize, u64), build: impl FnOnce() -> Vec<f64>) -> Arc<Vec<f64>> {
    let map = cache.get_or_init(Default::default);
    if let Some(v) = map.lock().expect("noise cache poisoned").get(&key) {
        return v.clone();
    }
    let value = Arc::new(build());
    map.lock()
        .expect("noise cache poisoned")
        .entry(key)
        .or_insert(value)
        .clone()
}

/// `sqrt(lambda_k / 2n)` for the circulant embedding of size `2n`.
fn circulant_amplitudes(n: usize, hurst: f64) -> Arc<Vec<f64>> {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    cached(&CACHE, (n, hurst.to_bits()), || {
        let size = 2 * n;
        let mut row: Vec<Complex64> = (0..size)
            .map(|i| {
                let lag = if i <= n { i } else { size - i };
                Complex64::new(fgn_autocovariance(lag as i64, hurst), 0.0)
            })
            .collect();
        fft_forward(&mut row);
        let largest = row.iter().map(|c| c.re).fold(0.0, f64::max);
        let most_negative = row.iter().map(|c| c.re).fold(0.0, f64::min);
        if most_negative < -1e-10 * largest.max(1.0) {
            log::warn!(
                "circulant embedding for n = {n}, H = {hurst} is not nonnegative definite \
                 (min eigenvalue {most_negative:.3e}); clipping"
            );
        }
        row.iter()
            .map(|c| (c.re.max(0.0) / size as f64).sqrt())
            .collect()
    })
}

/// Fractional Gaussian noise drawn from `rng`.
pub fn fgn_with<R: Rng + ?Sized>(rng: &mut R, n: usize, hurst: f64) -> Result<Vec<f64>> {
    check_hurst(hurst)?;
    if n == 0 {
        return Err(Error::Empty("fGn length"));
    }
    if hurst == 0.5 {
        return Ok((0..n).map(|_| rng.sample(StandardNormal)).collect());
    }
    let amps = circulant_amplitudes(n, hurst);
    let mut buf: Vec<Complex64> = amps
        .iter()
        .map(|&a| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(a * re, a * im)
        })
        .collect();
    fft_forward(&mut buf);
    Ok(buf[..n].iter().map(|c| c.re).collect())
}

/// Unit-variance fractional Gaussian noise of length `n` by circulant embedding.
pub fn fgn_increments(n: usize, hurst: f64, seed: u64) -> Result<Vec<f64>> {
    fgn_with(&mut crate::seed::rng(seed, &[]), n, hurst)
}

/// MA weights `c_k = Gamma(k + d) / (Gamma(d) Gamma(k + 1))`, `k = 0..=taps`,
/// via `c_k = c_{k-1} (k - 1 + d) / k`.
pub fn farima_coefficients(d: f64, taps: usize) -> Vec<f64> {
    let mut c = Vec::with_capacity(taps + 1);
    c.push(1.0);
    for k in 1..=taps {
        let prev = c[k - 1];
        c.push(prev * (k as f64 - 1.0 + d) / k as f64);
    }
    c
}

fn check_d(d: f64) -> Result<()> {
    if (0.0..0.5).contains(&d) {
        Ok(())
    } else {
        Err(Error::InvalidNoise(format!("FARIMA order d must lie in [0, 1/2), got {d}")))
    }
}

/// FFT of the zero-padded MA weights for series of length `n`.
fn farima_kernel(n: usize, d: f64) -> Arc<Vec<f64>> {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    cached(&CACHE, (n, d.to_bits()), || {
        let taps = 10 * n;
        let size = (n + taps).next_power_of_two();
        let mut buf = vec![Complex64::new(0.0, 0.0); size];
        for (slot, c) in buf.iter_mut().zip(farima_coefficients(d, taps)) {
            slot.re = c;
        }
        fft_forward(&mut buf);
        buf.into_iter().flat_map(|c| [c.re, c.im]).collect()
    })
}

/// FARIMA(0, d, 0) drawn from `rng`, standardized to unit sample variance.
pub fn farima_with<R: Rng + ?Sized>(rng: &mut R, n: usize, d: f64) -> Result<Vec<f64>> {
    check_d(d)?;
    if n < 2 {
        return Err(Error::Empty("FARIMA length"));
    }
    let raw: Vec<f64> = if d == 0.0 {
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    } else {
        let kernel = farima_kernel(n, d);
        let size = kernel.len() / 2;
        let taps = 10 * n;
        let mut buf: Vec<Complex64> = (0..size)
            .map(|i| {
                let e: f64 = if i < n + taps { rng.sample(StandardNormal) } else { 0.0 };
                Complex64::new(e, 0.0)
            })
            .collect();
        fft_forward(&mut buf);
        for (b, k) in buf.iter_mut().zip(kernel.chunks_exact(2)) {
            *b *= Complex64::new(k[0], k[1]);
        }
        fft_inverse(&mut buf);
        // Outputs from index `taps` on see the full truncated history.
        buf[taps..taps + n].iter().map(|c| c.re / size as f64).collect()
    };
    let mean = raw.iter().sum::<f64>() / n as f64;
    let var = raw.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let scale = var.sqrt().recip();
    Ok(raw.into_iter().map(|x| x * scale).collect())
}

/// FARIMA(0, d, 0) series of length `n`, unit sample variance.
pub fn farima_series(n: usize, d: f64, seed: u64) -> Result<Vec<f64>> {
    farima_with(&mut crate::seed::rng(seed, &[]), n, d)
}

/// Unit-variance noise for `spec`'s generator and `alpha` (ignores `sigma`).
pub fn unit_noise<R: Rng + ?Sized>(rng: &mut R, spec: &LrdSpec, n: usize) -> Result<Vec<f64>> {
    spec.validate()?;
    match spec.generator {
        NoiseGenerator::FgnCirculant => fgn_with(rng, n, spec.hurst()),
        NoiseGenerator::Farima => farima_with(rng, n, spec.d()),
    }
}

/// `sigma = ||g * f||_2 10^{-snr/20}`; an infinite SNR gives 0.
pub fn calibrate_sigma(blurred: &SignalGrid, snr_db: f64) -> Result<f64> {
    let power = blurred.norm();
    if power == 0.0 {
        return Err(Error::ZeroSignal);
    }
    if snr_db.is_nan() {
        return Err(Error::InvalidNoise("SNR must not be NaN".into()));
    }
    if snr_db == f64::INFINITY {
        return Ok(0.0);
    }
    Ok(power * 10f64.powf(-snr_db / 20.0))
}

fn median(values: &mut [f64]) -> f64 {
    let mid = values.len() / 2;
    let (_, m, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *m;
    if values.len() % 2 == 1 {
        upper
    } else {
        let lower = values[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Median absolute deviation about the median.
pub fn mad(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    let center = median(&mut v);
    let mut dev: Vec<f64> = values.iter().map(|x| (x - center).abs()).collect();
    median(&mut dev)
}

/// Noise scale from the finest-level (`J - 1`) Meyer coefficients of a white
/// noise observation: `MAD / 0.6745`, rescaled so that i.i.d. `N(0, sigma^2)`
/// samples give `sigma`.
pub fn estimate_sigma_mad(observation: &SignalGrid) -> Result<f64> {
    estimate_sigma_mad_lrd(observation, 1.0)
}

/// As [`estimate_sigma_mad`] for long-memory noise with index `alpha`.
///
/// A finest-level coefficient has variance `sigma_F^2 s^2` with
/// `s^2 = n^{-alpha} sum_{m in C_{J-1}, |m| < n/2} |Psi_m|^2 |m|^{1-2H}`;
/// the returned value is `MAD / 0.6745 / s`, an estimate of the Fourier-domain
/// scale `sigma_F` (equal to the marginal `sigma` when `alpha = 1`).
pub fn estimate_sigma_mad_lrd(observation: &SignalGrid, alpha: f64) -> Result<f64> {
    check_power_of_two(observation.len())?;
    if observation.levels() < 4 {
        return Err(Error::LevelRange(format!(
            "noise estimation needs J >= 4, got J = {}",
            observation.levels()
        )));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidNoise(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let basis = MeyerBasis::standard();
    let top = observation.levels() - 1;
    let finest = basis.forward_transform(observation, top, top)?;
    let coeffs = finest.detail(top).expect("level was requested");
    let n = observation.len() as f64;
    let band = observation.len() as i64 / 2 - 1;
    let exponent = alpha - 1.0;
    let level_scale = (1u64 << top) as f64;
    let s2: f64 = basis
        .psi_table(top)
        .iter()
        .filter(|(m, _)| m.abs() <= band)
        .map(|&(m, w)| w.norm_sqr() / level_scale * (m.abs() as f64).powf(exponent))
        .sum::<f64>()
        * n.powf(-alpha);
    Ok(mad(coeffs) / MAD_CONSTANT / s2.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    #[test]
    fn autocovariance_examples() {
        assert_abs_diff_eq!(fgn_autocovariance(0, 0.75), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fgn_autocovariance(1, 0.75), 0.5 * (2f64.powf(1.5) - 2.0), epsilon = 1e-15);
        assert_abs_diff_eq!(fgn_autocovariance(1, 0.75), 0.41421, epsilon = 1e-5);
        assert_abs_diff_eq!(fgn_autocovariance(5, 0.5), 0.0, epsilon = 1e-15);
        assert_eq!(fgn_autocovariance(-3, 0.8), fgn_autocovariance(3, 0.8));
    }

    #[test]
    fn farima_coefficient_examples() {
        let c0 = farima_coefficients(0.0, 5);
        assert_eq!(c0, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let c = farima_coefficients(0.25, 3);
        assert_abs_diff_eq!(c[1], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(c[2], 0.15625, epsilon = 1e-15);
        // Independent route: the Gamma-function ratio.
        for (k, ck) in farima_coefficients(0.3, 20).into_iter().enumerate() {
            let direct = gamma(k as f64 + 0.3) / (gamma(0.3) * gamma(k as f64 + 1.0));
            assert_abs_diff_eq!(ck, direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        assert!(fgn_increments(64, 1.0, 1).is_err());
        assert!(fgn_increments(64, 0.4, 1).is_err());
        assert!(farima_series(64, 0.5, 1).is_err());
        assert!(farima_series(64, -0.1, 1).is_err());
        assert!(LrdSpec::new(0.0, 1.0, NoiseGenerator::Farima).is_err());
        assert!(LrdSpec::new(0.5, -1.0, NoiseGenerator::Farima).is_err());
    }

    #[test]
    fn white_fgn_is_uncorrelated_and_centered() {
        let n = 4096;
        let x = fgn_increments(n, 0.5, 11).unwrap();
        let mean = x.iter().sum::<f64>() / n as f64;
        let lag1 = x.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / n as f64;
        let bound = 4.0 / (n as f64).sqrt();
        assert!(mean.abs() < bound);
        assert!(lag1.abs() < bound);
        let y = fgn_increments(n, 0.85, 12).unwrap();
        let mean = y.iter().sum::<f64>() / n as f64;
        // Long memory inflates the variance of the mean to n^{2H-2}.
        assert!(mean.abs() < 4.0 * (n as f64).powf(0.85 * 2.0 - 2.0).sqrt());
    }

    #[test]
    fn seeded_generators_are_deterministic() {
        assert_eq!(fgn_increments(256, 0.7, 5).unwrap(), fgn_increments(256, 0.7, 5).unwrap());
        assert_ne!(fgn_increments(256, 0.7, 5).unwrap(), fgn_increments(256, 0.7, 6).unwrap());
        assert_eq!(farima_series(256, 0.2, 5).unwrap(), farima_series(256, 0.2, 5).unwrap());
    }

    #[test]
    fn farima_has_unit_sample_variance() {
        let x = farima_series(1024, 0.3, 3).unwrap();
        let mean = x.iter().sum::<f64>() / 1024.0;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 1023.0;
        assert_abs_diff_eq!(var, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn spectral_constants() {
        assert_abs_diff_eq!(spectral_constant(NoiseGenerator::FgnCirculant, 1.0), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(spectral_constant(NoiseGenerator::Farima, 1.0), 1.0, epsilon = 1e-14);
        let c = spectral_constant(NoiseGenerator::FgnCirculant, 0.5);
        assert!((0.3..0.45).contains(&c), "{c}");
    }

    #[test]
    fn fgn_dft_variance_matches_spectral_constant() {
        // Low-frequency periodogram of fGn against c n^{-alpha} |m|^{1-2H}.
        let n = 1024;
        let alpha = 0.5;
        let spec = LrdSpec::new(alpha, 1.0, NoiseGenerator::FgnCirculant).unwrap();
        let reps = 400;
        let ms = [2i64, 4, 8];
        let mut acc = [0.0; 3];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..reps {
            let x = unit_noise(&mut rng, &spec, n).unwrap();
            let f = SignalGrid::new(x).unwrap().fourier();
            for (a, &m) in acc.iter_mut().zip(&ms) {
                *a += f.get(m).norm_sqr();
            }
        }
        for (a, &m) in acc.iter().zip(&ms) {
            let model = spec.spectral_constant() * (n as f64).powf(-alpha) * (m as f64).powf(alpha - 1.0);
            let ratio = a / reps as f64 / model;
            assert!((0.8..1.25).contains(&ratio), "m = {m}: ratio {ratio}");
        }
    }

    #[test]
    fn calibration_examples() {
        let unit = SignalGrid::from_fn(64, |_| 1.0).unwrap();
        assert_abs_diff_eq!(calibrate_sigma(&unit, 20.0).unwrap(), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(calibrate_sigma(&unit, 0.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(calibrate_sigma(&unit, f64::INFINITY).unwrap(), 0.0);
        let g = SignalGrid::from_fn(128, |t| (t * 11.0).sin() * 3.0).unwrap();
        let s = calibrate_sigma(&g, 13.7).unwrap();
        assert_abs_diff_eq!(10.0 * (g.norm().powi(2) / (s * s)).log10(), 13.7, epsilon = 1e-12);
        assert_eq!(calibrate_sigma(&SignalGrid::zeros(8).unwrap(), 10.0), Err(Error::ZeroSignal));
    }

    #[test]
    fn mad_examples() {
        assert_eq!(estimate_sigma_mad(&SignalGrid::zeros(64).unwrap()).unwrap(), 0.0);
        let x = SignalGrid::new(fgn_increments(512, 0.5, 2).unwrap()).unwrap();
        let s = estimate_sigma_mad(&x).unwrap();
        let s3 = estimate_sigma_mad(&x.scaled(-3.0)).unwrap();
        assert_abs_diff_eq!(s3, 3.0 * s, epsilon = 1e-12);
        assert!(estimate_sigma_mad(&SignalGrid::zeros(8).unwrap()).is_err());
        assert_eq!(mad(&[1.0, 2.0, 3.0, 4.0, 100.0]), 1.0);
        assert_eq!(mad(&[1.0, 2.0, 4.0, 8.0]), 1.5);
    }

    #[test]
    fn mad_recovers_white_sigma() {
        let sigma = 0.37;
        let mut ratios: Vec<f64> = (0..100)
            .map(|s| {
                let x: Vec<f64> = fgn_increments(4096, 0.5, 1000 + s)
                    .unwrap()
                    .into_iter()
                    .map(|v| v * sigma)
                    .collect();
                estimate_sigma_mad(&SignalGrid::new(x).unwrap()).unwrap() / sigma
            })
            .collect();
        let med = median(&mut ratios);
        assert!((med - 1.0).abs() < 0.1, "median ratio {med}");
    }
}
