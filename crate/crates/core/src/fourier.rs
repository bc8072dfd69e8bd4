//! Sampled signals on `[0, 1)` and their discrete Fourier coefficients.
//!
//! Conventions used throughout the crate:
//!
//! * a grid has `n = 2^J` points `t_i = i / n`;
//! * `f_m = n^{-1} sum_i f(t_i) e^{-2 pi i m t_i}` for signed `m` in
//!   `[-n/2, n/2 - 1]`, so that `f(t_i) = sum_m f_m e^{2 pi i m t_i}` and the
//!   grid Parseval identity reads `sum_m |f_m|^2 = n^{-1} sum_i f(t_i)^2`;
//! * signed frequency `m` lives in FFT bin `m mod n`; the Nyquist bin `n/2`
//!   is read as `m = -n/2`.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Unnormalized forward DFT, `X_k = sum_t x_t e^{-2 pi i k t / N}`.
pub(crate) fn fft_forward(buf: &mut [Complex64]) {
    if buf.len() > 1 {
        plan(buf.len(), false).process(buf);
    }
}

/// Unnormalized inverse DFT, `x_t = sum_k X_k e^{2 pi i k t / N}`.
pub(crate) fn fft_inverse(buf: &mut [Complex64]) {
    if buf.len() > 1 {
        plan(buf.len(), true).process(buf);
    }
}

pub(crate) fn check_power_of_two(n: usize) -> Result<()> {
    if n >= 2 && n.is_power_of_two() {
        Ok(())
    } else {
        Err(Error::NotPowerOfTwo(n))
    }
}

/// A real signal sampled on `n = 2^J` equispaced points of `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SignalGrid {
    values: Vec<f64>,
}

impl SignalGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_power_of_two(values.len())?;
        Ok(Self { values })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![0.0; n])
    }

    /// Samples `f` at `t_i = i / n`.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        check_power_of_two(n)?;
        let values = (0..n).map(|i| f(i as f64 / n as f64)).collect();
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `J` such that `n = 2^J`.
    pub fn levels(&self) -> u32 {
        self.values.len().trailing_zeros()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Discrete `L^2[0, 1]` norm, `(n^{-1} sum_i f(t_i)^2)^{1/2}`.
    pub fn norm(&self) -> f64 {
        let n = self.values.len() as f64;
        (self.values.iter().map(|v| v * v).sum::<f64>() / n).sqrt()
    }

    /// Grid norm of `self - other`.
    pub fn distance(&self, other: &SignalGrid) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        let n = self.len() as f64;
        let ss: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok((ss / n).sqrt())
    }

    pub fn scaled(&self, c: f64) -> SignalGrid {
        SignalGrid {
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn fourier(&self) -> FourierCoeffs {
        FourierCoeffs::from_real(&self.values)
    }
}

impl TryFrom<Vec<f64>> for SignalGrid {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<SignalGrid> for Vec<f64> {
    fn from(grid: SignalGrid) -> Self {
        grid.values
    }
}

/// Complex Fourier coefficients `f_m`, `m` in `[-n/2, n/2 - 1]`, stored in FFT
/// bin order.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCoeffs {
    bins: Vec<Complex64>,
}

impl FourierCoeffs {
    pub fn zeros(n: usize) -> Result<Self> {
        check_power_of_two(n)?;
        Ok(Self {
            bins: vec![Complex64::new(0.0, 0.0); n],
        })
    }

    /// Wraps coefficients already laid out in bin order.
    pub fn from_bins(bins: Vec<Complex64>) -> Result<Self> {
        check_power_of_two(bins.len())?;
        Ok(Self { bins })
    }

    pub(crate) fn from_real(samples: &[f64]) -> Self {
        let n = samples.len();
        let mut bins: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_forward(&mut bins);
        let scale = 1.0 / n as f64;
        bins.iter_mut().for_each(|c| *c *= scale);
        Self { bins }
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    /// Smallest representable frequency, `-n/2`.
    pub fn min_frequency(&self) -> i64 {
        -(self.bins.len() as i64) / 2
    }

    /// Largest representable frequency, `n/2 - 1`.
    pub fn max_frequency(&self) -> i64 {
        self.bins.len() as i64 / 2 - 1
    }

    pub fn contains(&self, m: i64) -> bool {
        (self.min_frequency()..=self.max_frequency()).contains(&m)
    }

    pub fn bin(&self, m: i64) -> usize {
        debug_assert!(self.contains(m), "frequency {m} outside the grid band");
        m.rem_euclid(self.bins.len() as i64) as usize
    }

    /// Signed frequency held in `bin`.
    pub fn frequency(&self, bin: usize) -> i64 {
        let n = self.bins.len();
        if bin < n / 2 {
            bin as i64
        } else {
            bin as i64 - n as i64
        }
    }

    pub fn get(&self, m: i64) -> Complex64 {
        self.bins[self.bin(m)]
    }

    pub fn set(&mut self, m: i64, value: Complex64) {
        let b = self.bin(m);
        self.bins[b] = value;
    }

    pub fn add(&mut self, m: i64, value: Complex64) {
        let b = self.bin(m);
        self.bins[b] += value;
    }

    /// `(m, f_m)` pairs in bin order.
    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.bins
            .iter()
            .enumerate()
            .map(move |(b, &c)| (self.frequency(b), c))
    }

    /// `sum_m |f_m|^2`, the squared grid norm of the synthesized signal.
    pub fn energy(&self) -> f64 {
        self.bins.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Synthesizes `sum_m f_m e^{2 pi i m t_i}` and keeps the real part.
    pub fn to_signal(&self) -> SignalGrid {
        let mut buf = self.bins.clone();
        fft_inverse(&mut buf);
        SignalGrid {
            values: buf.into_iter().map(|c| c.re).collect(),
        }
    }
}
