//! Multichannel observation model.
//!
//! Channel `l` observes `y_l(t_i) = (g_l * f)(t_i) + sigma_l x_l(t_i)` where
//! `x_l` is a unit-variance long-memory series. In the Fourier domain this is
//! `y_{m,l} = g_{m,l} f_m + z_{m,l}` with `E|z_{m,l}|^2` of order
//! `sigma_l^2 n^{-alpha_l} |m|^{1 - 2H_l}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{fft_forward, fft_inverse, FourierCoeffs, SignalGrid};
use crate::kernels::KernelSpec;
use crate::noise::{calibrate_sigma, unit_noise, LrdSpec};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub kernel: KernelSpec,
    pub lrd: LrdSpec,
}

impl ChannelSpec {
    pub fn new(kernel: KernelSpec, lrd: LrdSpec) -> Self {
        Self { kernel, lrd }
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        self.lrd.validate()
    }
}

/// Noisy samples and Fourier coefficients of every channel.
#[derive(Debug, Clone)]
pub struct MultichannelObservation {
    channels: Vec<ChannelSpec>,
    samples: Vec<SignalGrid>,
    coeffs: Vec<FourierCoeffs>,
}

impl MultichannelObservation {
    /// Wraps recorded samples; `channels[l].lrd.sigma` is taken as the known
    /// noise level of channel `l`.
    pub fn from_samples(channels: Vec<ChannelSpec>, samples: Vec<SignalGrid>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::Empty("channel list"));
        }
        if channels.len() != samples.len() {
            return Err(Error::LengthMismatch {
                expected: channels.len(),
                got: samples.len(),
            });
        }
        for c in &channels {
            c.validate()?;
        }
        let n = samples[0].len();
        if let Some(bad) = samples.iter().find(|s| s.len() != n) {
            return Err(Error::LengthMismatch {
                expected: n,
                got: bad.len(),
            });
        }
        let coeffs = samples.iter().map(SignalGrid::fourier).collect();
        Ok(Self {
            channels,
            samples,
            coeffs,
        })
    }

    pub fn n(&self) -> usize {
        self.samples[0].len()
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn channels(&self) -> &[ChannelSpec] {
        &self.channels
    }

    pub fn samples(&self) -> &[SignalGrid] {
        &self.samples
    }

    /// `y_{m,l}` for every channel.
    pub fn coeffs(&self) -> &[FourierCoeffs] {
        &self.coeffs
    }
}

/// Free-function form of [`MultichannelObservation::coeffs`].
pub fn sequence_coeffs(obs: &MultichannelObservation) -> &[FourierCoeffs] {
    obs.coeffs()
}

/// Simulates every channel with `sigma_l` calibrated so that channel `l`
/// has the given SNR against its own blurred signal. `snr_db = inf` gives
/// noiseless channels.
///
/// Channel `l` draws its noise from the stream `(seed, l)`, so adding a
/// channel leaves the noise of the existing ones unchanged.
pub fn simulate(f: &SignalGrid, channels: &[ChannelSpec], snr_db: f64, seed: u64) -> Result<MultichannelObservation> {
    simulate_impl(f, channels, Some(snr_db), seed)
}

/// Like [`simulate`] but uses each channel's configured `sigma`.
pub fn simulate_with_noise_levels(f: &SignalGrid, channels: &[ChannelSpec], seed: u64) -> Result<MultichannelObservation> {
    simulate_impl(f, channels, None, seed)
}

fn simulate_impl(
    f: &SignalGrid,
    channels: &[ChannelSpec],
    snr_db: Option<f64>,
    seed_value: u64,
) -> Result<MultichannelObservation> {
    if channels.is_empty() {
        return Err(Error::Empty("channel list"));
    }
    let n = f.len();
    let truth = f.fourier();
    let mut specs = Vec::with_capacity(channels.len());
    let mut samples = Vec::with_capacity(channels.len());
    let mut coeffs = Vec::with_capacity(channels.len());
    for (l, spec) in channels.iter().enumerate() {
        spec.validate()?;
        // The direct channel skips the FFT round trip so that a noiseless
        // observation reproduces f bit for bit.
        let blurred = match spec.kernel {
            KernelSpec::Direct => f.clone(),
            kernel => {
                let mut buf: Vec<Complex64> = truth.iter().map(|(m, fm)| fm * kernel.multiplier(m)).collect();
                fft_inverse(&mut buf);
                SignalGrid::new(buf.iter().map(|c| c.re).collect())?
            }
        };
        let sigma = match snr_db {
            Some(snr) => calibrate_sigma(&blurred, snr)?,
            None => spec.lrd.sigma,
        };
        let mut values = blurred.into_values();
        if sigma > 0.0 {
            let mut rng = seed::rng(seed_value, &[l as u64, seed::stream::OBSERVATION]);
            let noise = unit_noise(&mut rng, &spec.lrd, n)?;
            for (v, z) in values.iter_mut().zip(noise) {
                *v += sigma * z;
            }
        }
        let mut spectrum: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_forward(&mut spectrum);
        let scale = 1.0 / n as f64;
        spectrum.iter_mut().for_each(|c| *c *= scale);
        specs.push(ChannelSpec {
            kernel: spec.kernel,
            lrd: spec.lrd.with_sigma(sigma),
        });
        samples.push(SignalGrid::new(values)?);
        coeffs.push(FourierCoeffs::from_bins(spectrum)?);
    }
    Ok(MultichannelObservation {
        channels: specs,
        samples,
        coeffs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseGenerator;
    use approx::assert_abs_diff_eq;

    fn smooth(n: usize) -> SignalGrid {
        SignalGrid::from_fn(n, |t| (2.0 * std::f64::consts::PI * 3.0 * t).sin() + 0.5 * t).unwrap()
    }

    #[test]
    fn noiseless_channels_are_exact() {
        let f = smooth(128);
        let ch = [
            ChannelSpec::new(KernelSpec::RegularSmooth { nu: 0.5 }, LrdSpec::white(1.0)),
            ChannelSpec::new(KernelSpec::Boxcar { c: 0.3 }, LrdSpec::white(1.0)),
        ];
        let obs = simulate(&f, &ch, f64::INFINITY, 4).unwrap();
        let direct = simulate(&f, &[ChannelSpec::new(KernelSpec::Direct, LrdSpec::white(1.0))], f64::INFINITY, 4).unwrap();
        assert_eq!(direct.samples()[0], f);
        let fm = f.fourier();
        for (spec, y) in obs.channels().iter().zip(obs.coeffs()) {
            assert_eq!(spec.lrd.sigma, 0.0);
            for (m, ym) in y.iter() {
                let expect = fm.get(m) * spec.kernel.multiplier(m);
                assert!((ym - expect).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn coefficients_are_conjugate_symmetric_and_parseval() {
        let f = smooth(256);
        let ch = [ChannelSpec::new(KernelSpec::Direct, LrdSpec::new(0.6, 1.0, NoiseGenerator::Farima).unwrap())];
        let obs = simulate(&f, &ch, 10.0, 8).unwrap();
        let y = &sequence_coeffs(&obs)[0];
        for m in 1..128 {
            assert!((y.get(-m) - y.get(m).conj()).norm() < 1e-14);
        }
        assert_abs_diff_eq!(y.energy(), obs.samples()[0].norm().powi(2), epsilon = 1e-10);
    }

    #[test]
    fn constant_noiseless_input() {
        let f = SignalGrid::from_fn(32, |_| 1.75).unwrap();
        let obs = simulate(&f, &[ChannelSpec::new(KernelSpec::Boxcar { c: 0.2 }, LrdSpec::white(1.0))], f64::INFINITY, 0).unwrap();
        let y = &obs.coeffs()[0];
        assert_abs_diff_eq!(y.get(0).re, 1.75, epsilon = 1e-14);
        for m in 1..16 {
            assert!(y.get(m).norm() < 1e-14);
        }
    }

    #[test]
    fn white_regression_residual_variance() {
        let n = 4096;
        let f = smooth(n);
        let ch = [ChannelSpec::new(KernelSpec::Direct, LrdSpec::white(1.0))];
        let obs = simulate(&f, &ch, 6.0, 21).unwrap();
        let sigma = obs.channels()[0].lrd.sigma;
        assert_abs_diff_eq!(sigma, f.norm() * 10f64.powf(-0.3), epsilon = 1e-12);
        let resid: Vec<f64> = obs.samples()[0].values().iter().zip(f.values()).map(|(y, t)| y - t).collect();
        let var = resid.iter().map(|r| r * r).sum::<f64>() / n as f64;
        // Sampling sd of a variance estimate is sigma^2 sqrt(2/n).
        assert!((var / (sigma * sigma) - 1.0).abs() < 5.0 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn channels_use_independent_streams() {
        let n = 4096;
        let f = smooth(n);
        let spec = ChannelSpec::new(KernelSpec::Direct, LrdSpec::white(1.0));
        let obs = simulate(&f, &[spec, spec], 0.0, 77).unwrap();
        let noise = |l: usize| -> Vec<f64> {
            obs.samples()[l].values().iter().zip(f.values()).map(|(y, t)| y - t).collect()
        };
        let (a, b) = (noise(0), noise(1));
        let sa = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let sb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        let corr = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / (sa * sb);
        assert!(corr.abs() < 4.0 / (n as f64).sqrt());
        // Channel 0's noise does not depend on how many channels follow it.
        let single = simulate(&f, &[spec], 0.0, 77).unwrap();
        assert_eq!(single.samples()[0], obs.samples()[0]);
    }

    #[test]
    fn from_samples_validates() {
        let spec = ChannelSpec::new(KernelSpec::Direct, LrdSpec::white(0.1));
        let a = SignalGrid::zeros(16).unwrap();
        let b = SignalGrid::zeros(32).unwrap();
        assert!(MultichannelObservation::from_samples(vec![spec, spec], vec![a.clone(), b]).is_err());
        assert!(MultichannelObservation::from_samples(vec![spec], vec![a.clone(), a.clone()]).is_err());
        assert!(MultichannelObservation::from_samples(vec![], vec![]).is_err());
        assert!(MultichannelObservation::from_samples(vec![spec], vec![a]).is_ok());
    }
}
