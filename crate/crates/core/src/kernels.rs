//! Blur kernels on the circle, described by their Fourier multipliers.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::SignalGrid;

/// `(sqrt 5 - 1) / 2`, the golden-ratio conjugate.
pub const BA_GOLDEN: f64 = 0.618_033_988_749_894_8;
/// `sqrt 2 - 1`.
pub const BA_SILVER: f64 = std::f64::consts::SQRT_2 - 1.0;
/// `sqrt 3 - 1`.
pub const BA_SQRT3: f64 = 0.732_050_807_568_877_2;

/// Box-car widths used for channels 1, 2, 3 unless configured otherwise.
pub const BA_CONSTANTS: [f64; 3] = [BA_GOLDEN, BA_SILVER, BA_SQRT3];

/// Average degree of ill-posedness of a box-car blur with badly approximable
/// width, used where a single DIP number is needed for ranking channels.
pub const BOXCAR_DIP: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// `g_m = (1 + |m|)^{-nu}`.
    RegularSmooth { nu: f64 },
    /// `g_m = (1 + |m|)^{-nu} exp(-theta |m|^beta)`.
    SuperSmooth { nu: f64, theta: f64, beta: f64 },
    /// Uniform average over a window of width `c`: `g_m = sin(pi m c) / (pi m c)`.
    Boxcar { c: f64 },
    /// No blur.
    Direct,
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidKernel(msg));
        match *self {
            KernelSpec::RegularSmooth { nu } => {
                if !(nu.is_finite() && nu > 0.0) {
                    return bad(format!("regular_smooth needs nu > 0, got {nu}"));
                }
            }
            KernelSpec::SuperSmooth { nu, theta, beta } => {
                if !nu.is_finite() {
                    return bad(format!("super_smooth nu must be finite, got {nu}"));
                }
                if !(theta.is_finite() && theta > 0.0) {
                    return bad(format!("super_smooth needs theta > 0, got {theta}"));
                }
                if !(beta.is_finite() && beta > 0.0) {
                    return bad(format!("super_smooth needs beta > 0, got {beta}"));
                }
            }
            KernelSpec::Boxcar { c } => {
                if !(c.is_finite() && c > 0.0) {
                    return bad(format!("boxcar needs c > 0, got {c}"));
                }
            }
            KernelSpec::Direct => {}
        }
        Ok(())
    }

    pub fn family(&self) -> &'static str {
        match self {
            KernelSpec::RegularSmooth { .. } => "regular_smooth",
            KernelSpec::SuperSmooth { .. } => "super_smooth",
            KernelSpec::Boxcar { .. } => "boxcar",
            KernelSpec::Direct => "direct",
        }
    }

    /// Polynomial decay index `nu` of the multiplier.
    pub fn dip_index(&self) -> f64 {
        match *self {
            KernelSpec::RegularSmooth { nu } | KernelSpec::SuperSmooth { nu, .. } => nu,
            KernelSpec::Boxcar { .. } => BOXCAR_DIP,
            KernelSpec::Direct => 0.0,
        }
    }

    pub fn theta(&self) -> f64 {
        match *self {
            KernelSpec::SuperSmooth { theta, .. } => theta,
            _ => 0.0,
        }
    }

    pub fn beta(&self) -> f64 {
        match *self {
            KernelSpec::SuperSmooth { beta, .. } => beta,
            _ => 1.0,
        }
    }

    /// Real multiplier `g_m`; the kernel must already be valid.
    pub fn multiplier(&self, m: i64) -> f64 {
        let a = m.unsigned_abs() as f64;
        match *self {
            KernelSpec::RegularSmooth { nu } => (1.0 + a).powf(-nu),
            KernelSpec::SuperSmooth { nu, theta, beta } => {
                (1.0 + a).powf(-nu) * (-theta * a.powf(beta)).exp()
            }
            KernelSpec::Boxcar { c } => {
                if m == 0 {
                    return 1.0;
                }
                let x = m as f64 * c;
                if x == x.round() {
                    // sin(pi * integer) is zero; avoid returning 1e-17 noise.
                    0.0
                } else {
                    (PI * x).sin() / (PI * x)
                }
            }
            KernelSpec::Direct => 1.0,
        }
    }

    pub fn fourier_multiplier(&self, m: i64) -> Result<Complex64> {
        self.validate()?;
        Ok(Complex64::new(self.multiplier(m), 0.0))
    }

    /// Circular convolution `f * g` via `h_m = g_m f_m`.
    pub fn convolve(&self, f: &SignalGrid) -> Result<SignalGrid> {
        self.validate()?;
        let mut coeffs = f.fourier();
        for b in 0..coeffs.len() {
            let m = coeffs.frequency(b);
            coeffs.set(m, coeffs.get(m) * self.multiplier(m));
        }
        Ok(coeffs.to_signal())
    }
}

/// Free-function form of [`KernelSpec::fourier_multiplier`].
pub fn fourier_multiplier(kernel: &KernelSpec, m: i64) -> Result<Complex64> {
    kernel.fourier_multiplier(m)
}

/// Free-function form of [`KernelSpec::convolve`].
pub fn convolve(f: &SignalGrid, kernel: &KernelSpec) -> Result<SignalGrid> {
    kernel.convolve(f)
}

/// Distance to the nearest integer.
fn nearest_integer_distance(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// Bounds `2 ||mc|| / |pi m c| <= |g_m| <= ||mc|| / |mc|` for the box-car
/// multiplier, where `||.||` is the distance to the nearest integer.
pub fn boxcar_coeff_bounds(m: i64, c: f64) -> Result<(f64, f64)> {
    if m == 0 {
        return Err(Error::InvalidKernel("box-car bounds need m != 0".into()));
    }
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidKernel(format!("boxcar needs c > 0, got {c}")));
    }
    let x = m as f64 * c;
    let d = nearest_integer_distance(x);
    Ok((2.0 * d / (PI * x).abs(), d / x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn families() -> Vec<KernelSpec> {
        vec![
            KernelSpec::RegularSmooth { nu: 0.7 },
            KernelSpec::SuperSmooth {
                nu: 0.0,
                theta: 0.05,
                beta: 1.0,
            },
            KernelSpec::Boxcar { c: BA_GOLDEN },
            KernelSpec::Direct,
        ]
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn multiplier_examples() {
        let half = KernelSpec::Boxcar { c: 0.5 };
        assert_abs_diff_eq!(half.multiplier(1), 2.0 / PI, epsilon = 1e-15);
        assert_abs_diff_eq!(half.multiplier(1), 0.63662, epsilon = 1e-5);
        assert_eq!(half.multiplier(0), 1.0);
        assert_eq!(half.multiplier(2), 0.0);
        let reg = KernelSpec::RegularSmooth { nu: 0.5 };
        assert_abs_diff_eq!(reg.multiplier(3), 0.5, epsilon = 1e-15);
        assert_eq!(KernelSpec::Direct.multiplier(17), 1.0);
    }

    #[test]
    fn validation() {
        assert!(KernelSpec::RegularSmooth { nu: 0.0 }.validate().is_err());
        assert!(KernelSpec::SuperSmooth {
            nu: -1.0,
            theta: 0.0,
            beta: 1.0
        }
        .validate()
        .is_err());
        assert!(KernelSpec::SuperSmooth {
            nu: -1.0,
            theta: 1.0,
            beta: 1.0
        }
        .validate()
        .is_ok());
        assert!(KernelSpec::Boxcar { c: -0.1 }.fourier_multiplier(1).is_err());
        assert!(KernelSpec::Boxcar { c: f64::NAN }.validate().is_err());
    }

    #[test]
    fn serde_shape() {
        let k: KernelSpec = serde_json::from_str(r#"{"family":"boxcar","c":0.25}"#).unwrap();
        assert_eq!(k, KernelSpec::Boxcar { c: 0.25 });
        let d: KernelSpec = serde_json::from_str(r#"{"family":"direct"}"#).unwrap();
        assert_eq!(d, KernelSpec::Direct);
        assert!(serde_json::from_str::<KernelSpec>(r#"{"family":"boxcar","c":0.25,"w":1}"#).is_err());
    }

    #[test]
    fn direct_is_identity_and_dc_preserved() {
        let f = SignalGrid::from_fn(64, |t| (t * 9.0).sin() + t).unwrap();
        let out = KernelSpec::Direct.convolve(&f).unwrap();
        assert!(out.distance(&f).unwrap() < 1e-14);
        let c = SignalGrid::from_fn(64, |_| 3.0).unwrap();
        for k in families() {
            let out = k.convolve(&c).unwrap();
            assert!(out.values().iter().all(|v| (v - 3.0).abs() < 1e-12));
        }
    }

    /// `h(t_i) = n^{-1} sum_k f(t_k) G(t_i - t_k)` with
    /// `G(t) = sum_m g_m e^{2 pi i m t}` summed directly, no FFT.
    fn brute_force(f: &SignalGrid, k: &KernelSpec) -> Vec<f64> {
        let n = f.len();
        let kernel_time: Vec<f64> = (0..n)
            .map(|d| {
                let t = d as f64 / n as f64;
                (-(n as i64) / 2..n as i64 / 2)
                    .map(|m| {
                        let g = k.multiplier(m);
                        // The Nyquist bin is one-sided; it contributes its real part only.
                        g * (2.0 * PI * m as f64 * t).cos()
                    })
                    .sum()
            })
            .collect();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|kk| f.values()[kk] * kernel_time[(i + n - kk) % n])
                    .sum::<f64>()
                    / n as f64
            })
            .collect()
    }

    #[test]
    fn fft_convolution_matches_brute_force() {
        for n in [16usize, 128, 512] {
            let f = SignalGrid::from_fn(n, |t| {
                if (0.3..0.45).contains(&t) {
                    1.0
                } else {
                    (6.0 * t).cos() * 0.2
                }
            })
            .unwrap();
            for k in families() {
                let fast = k.convolve(&f).unwrap();
                let slow = brute_force(&f, &k);
                for (a, b) in fast.values().iter().zip(&slow) {
                    assert!((a - b).abs() < 1e-9, "{k:?} n={n}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn boxcar_is_a_moving_average() {
        // Smooth periodic bump; the window [t - c/2, t + c/2] spans exactly 64 grid steps.
        let n = 512;
        let c = 0.125;
        let bump = |t: f64| (-((t - 0.5) / 0.08).powi(2)).exp();
        let f = SignalGrid::from_fn(n, bump).unwrap();
        let out = KernelSpec::Boxcar { c }.convolve(&f).unwrap();
        let half = (c * n as f64 / 2.0) as usize;
        for i in (0..n).step_by(17) {
            // Trapezoid rule over the window.
            let mut acc = 0.0;
            for s in 0..=2 * half {
                let idx = (i + n + s - half) % n;
                let w = if s == 0 || s == 2 * half { 0.5 } else { 1.0 };
                acc += w * f.values()[idx];
            }
            let avg = acc / (2 * half) as f64;
            assert!((out.values()[i] - avg).abs() < 1e-4, "i={i}");
        }
    }

    #[test]
    fn bounds_examples() {
        let (lo, hi) = boxcar_coeff_bounds(1, 0.5).unwrap();
        assert_abs_diff_eq!(lo, 2.0 / PI, epsilon = 1e-15);
        assert_abs_diff_eq!(hi, 1.0, epsilon = 1e-15);
        let (lo, hi) = boxcar_coeff_bounds(4, 0.25).unwrap();
        assert_eq!((lo, hi), (0.0, 0.0));
        assert_eq!(KernelSpec::Boxcar { c: 0.25 }.multiplier(4), 0.0);
        assert!(boxcar_coeff_bounds(0, 0.3).is_err());
    }

    #[test]
    fn sandwich_for_golden_ratio() {
        for m in 1..=512 {
            let (lo, hi) = boxcar_coeff_bounds(m, BA_GOLDEN).unwrap();
            let g = KernelSpec::Boxcar { c: BA_GOLDEN }.multiplier(m).abs();
            assert!(lo <= g + 1e-15 && g <= hi + 1e-15, "m={m}");
        }
    }

    proptest! {
        #[test]
        fn sandwich_holds(m in 1i64..2000, c in 0.01f64..3.0) {
            let (lo, hi) = boxcar_coeff_bounds(m, c).unwrap();
            let g = KernelSpec::Boxcar { c }.multiplier(m).abs();
            prop_assert!(lo <= g * (1.0 + 1e-9) + 1e-15);
            prop_assert!(g <= hi * (1.0 + 1e-9) + 1e-15);
        }

        #[test]
        fn symmetric_multipliers(m in -4096i64..4096, nu in 0.01f64..3.0, c in 0.01f64..2.0) {
            for k in [
                KernelSpec::RegularSmooth { nu },
                KernelSpec::SuperSmooth { nu, theta: 0.3, beta: 0.8 },
                KernelSpec::Boxcar { c },
                KernelSpec::Direct,
            ] {
                let a = k.fourier_multiplier(m).unwrap();
                let b = k.fourier_multiplier(-m).unwrap();
                prop_assert!((a - b.conj()).norm() < 1e-15);
            }
        }
    }
}
