//! Periodized Meyer wavelets on `[0, 1)`.
//!
//! The basis is band-limited, so analysis and synthesis are done entirely in
//! the Fourier domain. For level `j` and position `k` the periodized wavelet
//! has Fourier coefficients
//!
//! ```text
//! Psi^{jk}_m = 2^{-j/2} e^{-2 pi i m k / 2^j} psi_hat(m / 2^j),    m in C_j,
//! ```
//!
//! and the coefficients of a whole level are obtained with one length-`2^j`
//! FFT after folding the `f_m` onto residues `m mod 2^j`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{check_power_of_two, fft_forward, fft_inverse, FourierCoeffs, SignalGrid};

/// Levels whose frequency tables are memoized. Larger levels are computed on
/// demand (they would need grids of more than `2^31` points anyway).
const CACHED_LEVELS: usize = 31;

/// Default degree of the auxiliary polynomial.
pub const DEFAULT_DEGREE: u32 = 7;

/// The standard degree-7 auxiliary polynomial `x^4 (35 - 84x + 70x^2 - 20x^3)`,
/// clamped to 0 below 0 and 1 above 1.
pub fn nu_poly(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        x.powi(4) * (35.0 + x * (-84.0 + x * (70.0 - 20.0 * x)))
    }
}

/// Mother wavelet in the Fourier domain, standard degree-7 window.
pub fn psi_hat(xi: f64) -> Complex64 {
    MeyerBasis::standard().psi_hat(xi)
}

/// Scaling function in the Fourier domain, standard degree-7 window.
pub fn phi_hat(xi: f64) -> f64 {
    MeyerBasis::standard().phi_hat(xi)
}

/// `C_j = +-{ceil(2^j / 3), ..., floor(2^{j+2} / 3)}`.
pub fn cj_domain(j: i64) -> Result<FrequencySet> {
    if j < 0 {
        return Err(Error::NegativeLevel(j));
    }
    if j > 60 {
        return Err(Error::LevelRange(format!("level {j} is too large")));
    }
    Ok(FrequencySet::new(j as u32))
}

/// `sum_{k=0}^{2^j-1} e^{2 pi i omega k / 2^j}`, summed term by term.
pub fn dyadic_exponential_sum(omega: i64, j: u32) -> Complex64 {
    let len = 1i64 << j;
    let r = omega.rem_euclid(len);
    (0..len)
        .map(|k| {
            // Reduce the phase numerator exactly before converting to radians.
            let num = (r * k) % len;
            Complex64::from_polar(1.0, 2.0 * PI * num as f64 / len as f64)
        })
        .sum()
}

/// Integer frequencies of one detail level, `C_j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencySet {
    pub j: u32,
    members: Vec<i64>,
}

impl FrequencySet {
    fn new(j: u32) -> Self {
        let (lo, hi) = Self::bounds(j);
        let members = (-hi..=-lo).chain(lo..=hi).collect();
        Self { j, members }
    }

    /// `(ceil(2^j / 3), floor(2^{j+2} / 3))`, the positive half's range.
    pub fn bounds(j: u32) -> (i64, i64) {
        let p = 1i64 << j;
        ((p + 2) / 3, (4 * p) / 3)
    }

    pub fn members(&self) -> &[i64] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, m: i64) -> bool {
        let (lo, hi) = Self::bounds(self.j);
        (lo..=hi).contains(&m.abs())
    }
}

/// Scaling and detail coefficients `a_{j0,k}`, `b_{j,k}` for `j0 <= j <= j1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCoeffs", into = "RawCoeffs")]
pub struct WaveletCoeffs {
    j0: u32,
    scaling: Vec<f64>,
    details: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct RawCoeffs {
    j0: u32,
    scaling: Vec<f64>,
    details: Vec<Vec<f64>>,
}

impl TryFrom<RawCoeffs> for WaveletCoeffs {
    type Error = Error;

    fn try_from(raw: RawCoeffs) -> Result<Self> {
        WaveletCoeffs::new(raw.j0, raw.scaling, raw.details)
    }
}

impl From<WaveletCoeffs> for RawCoeffs {
    fn from(w: WaveletCoeffs) -> Self {
        RawCoeffs {
            j0: w.j0,
            scaling: w.scaling,
            details: w.details,
        }
    }
}

impl WaveletCoeffs {
    /// `details[i]` holds level `j0 + i` and must have `2^{j0+i}` entries.
    pub fn new(j0: u32, scaling: Vec<f64>, details: Vec<Vec<f64>>) -> Result<Self> {
        if j0 as usize + details.len() > 40 {
            return Err(Error::LevelRange(format!(
                "levels up to {} are not supported",
                j0 as usize + details.len()
            )));
        }
        if scaling.len() != 1 << j0 {
            return Err(Error::LengthMismatch {
                expected: 1 << j0,
                got: scaling.len(),
            });
        }
        for (i, level) in details.iter().enumerate() {
            let want = 1usize << (j0 as usize + i);
            if level.len() != want {
                return Err(Error::LengthMismatch {
                    expected: want,
                    got: level.len(),
                });
            }
        }
        if scaling.iter().chain(details.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("wavelet coefficients must be finite".into()));
        }
        Ok(Self { j0, scaling, details })
    }

    /// All-zero coefficients over `j0..=j1`.
    pub fn zeros(j0: u32, j1: u32) -> Result<Self> {
        if j1 < j0 {
            return Err(Error::LevelRange(format!("j0 = {j0} exceeds j1 = {j1}")));
        }
        let details = (j0..=j1).map(|j| vec![0.0; 1 << j]).collect();
        Self::new(j0, vec![0.0; 1 << j0], details)
    }

    pub fn j0(&self) -> u32 {
        self.j0
    }

    /// Finest detail level, `None` when only scaling coefficients are held.
    pub fn j1(&self) -> Option<u32> {
        (!self.details.is_empty()).then(|| self.j0 + self.details.len() as u32 - 1)
    }

    pub fn scaling(&self) -> &[f64] {
        &self.scaling
    }

    pub fn scaling_mut(&mut self) -> &mut [f64] {
        &mut self.scaling
    }

    /// `(j, b_{j,.})` for every stored level.
    pub fn levels(&self) -> impl Iterator<Item = (u32, &[f64])> {
        self.details
            .iter()
            .enumerate()
            .map(move |(i, d)| (self.j0 + i as u32, d.as_slice()))
    }

    pub fn detail(&self, j: u32) -> Option<&[f64]> {
        j.checked_sub(self.j0)
            .and_then(|i| self.details.get(i as usize))
            .map(Vec::as_slice)
    }

    pub fn detail_mut(&mut self, j: u32) -> Option<&mut [f64]> {
        j.checked_sub(self.j0)
            .and_then(|i| self.details.get_mut(i as usize))
            .map(Vec::as_mut_slice)
    }

    /// Drops every detail level, keeping the projection onto `V_{j0}`.
    pub fn truncate_details(&mut self) {
        self.details.clear();
    }

    pub fn detail_count(&self) -> usize {
        self.details.iter().map(Vec::len).sum()
    }

    /// `self + c * other`; the two must share the same level layout.
    pub fn add_scaled(&self, c: f64, other: &WaveletCoeffs) -> Result<WaveletCoeffs> {
        if self.j0 != other.j0 || self.details.len() != other.details.len() {
            return Err(Error::LevelRange("coefficient layouts differ".into()));
        }
        let axpy = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + c * y).collect();
        Ok(WaveletCoeffs {
            j0: self.j0,
            scaling: axpy(&self.scaling, &other.scaling),
            details: self
                .details
                .iter()
                .zip(&other.details)
                .map(|(a, b)| axpy(a, b))
                .collect(),
        })
    }

    /// Largest absolute coefficient difference.
    pub fn max_abs_diff(&self, other: &WaveletCoeffs) -> Option<f64> {
        if self.j0 != other.j0 || self.details.len() != other.details.len() {
            return None;
        }
        let a = self.scaling.iter().chain(self.details.iter().flatten());
        let b = other.scaling.iter().chain(other.details.iter().flatten());
        Some(a.zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
    }

    /// Euclidean norm of the whole coefficient vector.
    pub fn norm(&self) -> f64 {
        self.scaling
            .iter()
            .chain(self.details.iter().flatten())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

type PsiTable = Arc<[(i64, Complex64)]>;
type PhiTable = Arc<[(i64, f64)]>;

struct Inner {
    degree: u32,
    /// Coefficients `C(r+i, i)` of `nu_r(x) = x^{r+1} sum_i C(r+i, i) (1-x)^i`.
    binom: Vec<f64>,
    psi_tables: Vec<OnceLock<PsiTable>>,
    phi_tables: Vec<OnceLock<PhiTable>>,
}

/// A Meyer basis with a given auxiliary polynomial and memoized frequency
/// tables. Cloning is cheap and clones share the tables.
#[derive(Clone)]
pub struct MeyerBasis {
    inner: Arc<Inner>,
}

impl std::fmt::Debug for MeyerBasis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MeyerBasis")
            .field("polynomial_degree", &self.inner.degree)
            .finish()
    }
}

impl Default for MeyerBasis {
    fn default() -> Self {
        Self::standard().clone()
    }
}

impl MeyerBasis {
    /// Basis whose auxiliary polynomial has odd degree `2r + 1`, vanishing to
    /// order `r + 1` at both ends of `[0, 1]`.
    pub fn new(polynomial_degree: u32) -> Result<Self> {
        if polynomial_degree & 1 == 0 || polynomial_degree > 41 {
            return Err(Error::InvalidConfig(format!(
                "auxiliary polynomial degree must be odd and at most 41, got {polynomial_degree}"
            )));
        }
        let r = (polynomial_degree - 1) / 2;
        let mut binom = Vec::with_capacity(r as usize + 1);
        let mut c = 1.0;
        for i in 0..=r {
            binom.push(c);
            c = c * f64::from(r + i + 1) / f64::from(i + 1);
        }
        Ok(Self {
            inner: Arc::new(Inner {
                degree: polynomial_degree,
                binom,
                psi_tables: (0..CACHED_LEVELS).map(|_| OnceLock::new()).collect(),
                phi_tables: (0..CACHED_LEVELS).map(|_| OnceLock::new()).collect(),
            }),
        })
    }

    /// Shared degree-7 basis.
    pub fn standard() -> &'static MeyerBasis {
        static STANDARD: OnceLock<MeyerBasis> = OnceLock::new();
        STANDARD.get_or_init(|| MeyerBasis::new(DEFAULT_DEGREE).expect("degree 7 is valid"))
    }

    pub fn polynomial_degree(&self) -> u32 {
        self.inner.degree
    }

    pub fn nu(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        if self.inner.degree == DEFAULT_DEGREE {
            return nu_poly(x);
        }
        let y = 1.0 - x;
        let tail = self.inner.binom.iter().rev().fold(0.0, |acc, &c| acc * y + c);
        x.powi(self.inner.binom.len() as i32) * tail
    }

    /// `|psi_hat(xi)|`, the real window without the phase.
    pub fn psi_window(&self, xi: f64) -> f64 {
        let a = xi.abs();
        if !(1.0 / 3.0..=4.0 / 3.0).contains(&a) {
            0.0
        } else if a <= 2.0 / 3.0 {
            (FRAC_PI_2 * self.nu(3.0 * a - 1.0)).sin()
        } else {
            (FRAC_PI_2 * self.nu(1.5 * a - 1.0)).cos()
        }
    }

    pub fn psi_hat(&self, xi: f64) -> Complex64 {
        let w = self.psi_window(xi);
        if w == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::from_polar(w, PI * xi)
        }
    }

    pub fn phi_hat(&self, xi: f64) -> f64 {
        let a = xi.abs();
        if a <= 1.0 / 3.0 {
            1.0
        } else if a <= 2.0 / 3.0 {
            (FRAC_PI_2 * self.nu(3.0 * a - 1.0)).cos()
        } else {
            0.0
        }
    }

    /// `|phi_hat(xi)|^2 + sum_{j >= 0} |psi_hat(2^{-j} xi)|^2`.
    pub fn partition_of_unity(&self, xi: f64) -> f64 {
        let mut total = self.phi_hat(xi).powi(2);
        let mut scaled = xi;
        while scaled.abs() >= 1.0 / 3.0 {
            total += self.psi_window(scaled).powi(2);
            scaled /= 2.0;
        }
        total
    }

    /// `Psi^{jk}_m = 2^{-j/2} e^{-2 pi i m k / 2^j} psi_hat(m / 2^j)`.
    pub fn psi_fourier_coeff(&self, j: u32, k: u64, m: i64) -> Complex64 {
        let len = 1i64 << j;
        let xi = m as f64 / len as f64;
        let w = self.psi_hat(xi);
        if w == Complex64::new(0.0, 0.0) {
            return w;
        }
        let num = (m.rem_euclid(len) * (k as i64).rem_euclid(len)) % len;
        let phase = Complex64::from_polar(1.0, -2.0 * PI * num as f64 / len as f64);
        w * phase * (len as f64).sqrt().recip()
    }

    /// `Phi^{jk}_m`, the scaling analogue of [`Self::psi_fourier_coeff`].
    pub fn phi_fourier_coeff(&self, j: u32, k: u64, m: i64) -> Complex64 {
        let len = 1i64 << j;
        let w = self.phi_hat(m as f64 / len as f64);
        if w == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let num = (m.rem_euclid(len) * (k as i64).rem_euclid(len)) % len;
        Complex64::from_polar(w / (len as f64).sqrt(), -2.0 * PI * num as f64 / len as f64)
    }

    /// `<Psi_{j,k}, Psi_{j',k'}>` summed over the finite Fourier supports.
    pub fn psi_inner_product(&self, (j, k): (u32, u64), (jp, kp): (u32, u64)) -> Complex64 {
        self.psi_table(j)
            .iter()
            .map(|&(m, _)| self.psi_fourier_coeff(j, k, m) * self.psi_fourier_coeff(jp, kp, m).conj())
            .sum()
    }

    /// `(m, psi_hat(m / 2^j))` for every `m` in `C_j`.
    pub fn psi_table(&self, j: u32) -> Arc<[(i64, Complex64)]> {
        let build = || -> Arc<[(i64, Complex64)]> {
            let scale = (1u64 << j) as f64;
            FrequencySet::new(j)
                .members
                .into_iter()
                .map(|m| (m, self.psi_hat(m as f64 / scale)))
                .collect()
        };
        match self.inner.psi_tables.get(j as usize) {
            Some(cell) => cell.get_or_init(build).clone(),
            None => build(),
        }
    }

    /// `(m, phi_hat(m / 2^j))` for `|m| <= floor(2^{j+1} / 3)`.
    pub fn phi_table(&self, j: u32) -> Arc<[(i64, f64)]> {
        let build = || -> Arc<[(i64, f64)]> {
            let scale = (1u64 << j) as f64;
            let hi = scaling_bound(j);
            (-hi..=hi)
                .map(|m| (m, self.phi_hat(m as f64 / scale)))
                .collect()
        };
        match self.inner.phi_tables.get(j as usize) {
            Some(cell) => cell.get_or_init(build).clone(),
            None => build(),
        }
    }

    pub fn forward_transform(&self, signal: &SignalGrid, j0: u32, j1: u32) -> Result<WaveletCoeffs> {
        self.forward_from_fourier(&signal.fourier(), j0, j1)
    }

    /// Analysis from discrete Fourier coefficients.
    ///
    /// Levels up to `J - 1` are accepted. Level `J - 1` reaches past the grid's
    /// band; its sums are restricted to `|m| <= n/2 - 1`.
    pub fn forward_from_fourier(&self, f: &FourierCoeffs, j0: u32, j1: u32) -> Result<WaveletCoeffs> {
        let levels = f.len().trailing_zeros();
        if j0 > j1 {
            return Err(Error::LevelRange(format!("j0 = {j0} exceeds j1 = {j1}")));
        }
        if j1 >= levels {
            return Err(Error::LevelRange(format!(
                "j1 = {j1} must be below J = {levels} for a grid of {} points",
                f.len()
            )));
        }
        let scaling = self.analyze_scaling(f, j0);
        let details = (j0..=j1).map(|j| self.analyze_detail(f, j)).collect();
        WaveletCoeffs::new(j0, scaling, details)
    }

    /// Projection onto `V_{j0}` only.
    pub fn scaling_from_fourier(&self, f: &FourierCoeffs, j0: u32) -> Result<WaveletCoeffs> {
        let levels = f.len().trailing_zeros();
        if j0 >= levels {
            return Err(Error::LevelRange(format!("j0 = {j0} must be below J = {levels}")));
        }
        WaveletCoeffs::new(j0, self.analyze_scaling(f, j0), Vec::new())
    }

    fn analyze_scaling(&self, f: &FourierCoeffs, j: u32) -> Vec<f64> {
        let table = self.phi_table(j);
        fold_and_invert(f, j, table.iter().map(|&(m, w)| (m, Complex64::new(w, 0.0))))
    }

    fn analyze_detail(&self, f: &FourierCoeffs, j: u32) -> Vec<f64> {
        let table = self.psi_table(j);
        fold_and_invert(f, j, table.iter().map(|&(m, w)| (m, w.conj())))
    }

    /// Synthesis onto a grid of `n` points.
    pub fn inverse_transform(&self, coeffs: &WaveletCoeffs, n: usize) -> Result<SignalGrid> {
        Ok(self.inverse_to_fourier(coeffs, n)?.to_signal())
    }

    /// Fourier coefficients of `sum a Phi + sum b Psi` on a grid of `n` points.
    pub fn inverse_to_fourier(&self, coeffs: &WaveletCoeffs, n: usize) -> Result<FourierCoeffs> {
        check_power_of_two(n)?;
        let top = coeffs.j1().unwrap_or(coeffs.j0);
        let highest = match coeffs.j1() {
            Some(j1) => FrequencySet::bounds(j1).1,
            None => scaling_bound(coeffs.j0),
        };
        if highest > n as i64 / 2 - 1 {
            return Err(Error::Aliasing { j1: top, n });
        }
        let mut out = FourierCoeffs::zeros(n)?;
        let phi = self.phi_table(coeffs.j0);
        spread(
            &coeffs.scaling,
            coeffs.j0,
            phi.iter().map(|&(m, w)| (m, Complex64::new(w, 0.0))),
            &mut out,
        );
        for (j, b) in coeffs.levels() {
            let psi = self.psi_table(j);
            spread(b, j, psi.iter().copied(), &mut out);
        }
        Ok(out)
    }

    /// Checks that the level-`j` wavelet system diagonalizes
    /// white noise: entries over `C_j x C_j` of
    /// `sum_{j' in {j-1, j, j+1}} 1{2^{j'} | m - m'} psi_hat(m/2^{j'}) conj(psi_hat(m'/2^{j'}))`.
    pub fn covariance_matrix_check(&self, j: u32) -> CovarianceCheck {
        let domain = FrequencySet::new(j);
        let size = domain.len();
        let mut matrix = vec![Complex64::new(0.0, 0.0); size * size];
        let scales: Vec<i32> = [j as i32 - 1, j as i32, j as i32 + 1]
            .into_iter()
            .filter(|&s| s >= 0)
            .collect();
        for (a, &m) in domain.members.iter().enumerate() {
            for (b, &mp) in domain.members.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for &s in &scales {
                    let period = 1i64 << s;
                    if (m - mp).rem_euclid(period) == 0 {
                        let scale = period as f64;
                        acc += self.psi_hat(m as f64 / scale) * self.psi_hat(mp as f64 / scale).conj();
                    }
                }
                matrix[a * size + b] = acc;
            }
        }
        CovarianceCheck { domain, matrix }
    }
}

/// Largest frequency in the support of `phi_hat(m / 2^j)`.
fn scaling_bound(j: u32) -> i64 {
    (2i64 << j) / 3
}

/// `c_k = 2^{-j/2} sum_r (sum_{m = r mod 2^j} f_m w_m) e^{2 pi i r k / 2^j}`.
fn fold_and_invert(
    f: &FourierCoeffs,
    j: u32,
    weights: impl Iterator<Item = (i64, Complex64)>,
) -> Vec<f64> {
    let len = 1usize << j;
    let band = f.max_frequency();
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for (m, w) in weights {
        if m.abs() <= band {
            buf[m.rem_euclid(len as i64) as usize] += f.get(m) * w;
        }
    }
    fft_inverse(&mut buf);
    let scale = (len as f64).sqrt().recip();
    buf.into_iter().map(|c| c.re * scale).collect()
}

/// `F_m += 2^{-j/2} w_m sum_k c_k e^{-2 pi i m k / 2^j}`.
fn spread(
    coeffs: &[f64],
    j: u32,
    weights: impl Iterator<Item = (i64, Complex64)>,
    out: &mut FourierCoeffs,
) {
    let len = coeffs.len();
    let mut buf: Vec<Complex64> = coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect();
    fft_forward(&mut buf);
    let scale = (len as f64).sqrt().recip();
    debug_assert_eq!(len, 1 << j);
    for (m, w) in weights {
        out.add(m, buf[m.rem_euclid(len as i64) as usize] * w * scale);
    }
}

/// Result of [`MeyerBasis::covariance_matrix_check`], row-major over `C_j`.
#[derive(Debug, Clone)]
pub struct CovarianceCheck {
    pub domain: FrequencySet,
    pub matrix: Vec<Complex64>,
}

impl CovarianceCheck {
    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[row * self.domain.len() + col]
    }

    /// `max |M_{m,m'} - delta_{m,m'}|`.
    pub fn max_deviation_from_identity(&self) -> f64 {
        let size = self.domain.len();
        self.matrix
            .iter()
            .enumerate()
            .map(|(idx, v)| {
                let target = if idx / size == idx % size { 1.0 } else { 0.0 };
                (v - target).norm()
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn nu_examples() {
        assert_eq!(nu_poly(0.0), 0.0);
        assert_abs_diff_eq!(nu_poly(0.5), 0.5, epsilon = 1e-15);
        for x in [0.1, 0.25, 0.7] {
            assert_abs_diff_eq!(nu_poly(x) + nu_poly(1.0 - x), 1.0, epsilon = 1e-14);
        }
        assert_eq!(nu_poly(-3.0), 0.0);
        assert_eq!(nu_poly(2.0), 1.0);
    }

    #[test]
    fn general_degree_matches_closed_form() {
        let b7 = MeyerBasis::new(7).unwrap();
        let b9 = MeyerBasis::new(9).unwrap();
        let b1 = MeyerBasis::new(1).unwrap();
        for i in 0..=50 {
            let x = i as f64 / 50.0;
            // Route the degree-7 basis through the generic branch by hand.
            let y = 1.0 - x;
            let generic = x.powi(4) * (1.0 + 4.0 * y + 10.0 * y * y + 20.0 * y * y * y);
            assert_abs_diff_eq!(b7.nu(x), generic, epsilon = 1e-13);
            assert_abs_diff_eq!(b9.nu(x) + b9.nu(1.0 - x), 1.0, epsilon = 1e-13);
            assert_abs_diff_eq!(b1.nu(x), x, epsilon = 1e-15);
        }
        assert!(MeyerBasis::new(6).is_err());
    }

    #[test]
    fn psi_hat_examples() {
        assert_abs_diff_eq!(psi_hat(1.0 / 3.0).norm(), 0.0, epsilon = 1e-15);
        let half = psi_hat(0.5);
        assert_abs_diff_eq!(half.re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(half.im, 0.5f64.sqrt(), epsilon = 1e-15);
        let one = psi_hat(1.0);
        assert_abs_diff_eq!(one.re, -(0.5f64.sqrt()), epsilon = 1e-15);
        assert_abs_diff_eq!(one.im, 0.0, epsilon = 1e-15);
        assert_eq!(psi_hat(1.5), Complex64::new(0.0, 0.0));
        assert_eq!(psi_hat(0.2), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn phi_hat_examples() {
        assert_eq!(phi_hat(0.0), 1.0);
        assert_abs_diff_eq!(phi_hat(2.0 / 3.0), 0.0, epsilon = 1e-15);
        for i in 0..=40 {
            let xi = 1.0 / 3.0 + i as f64 / 120.0;
            assert_abs_diff_eq!(phi_hat(xi).powi(2) + psi_hat(xi).norm_sqr(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn cj_examples() {
        assert_eq!(cj_domain(2).unwrap().members(), &[-5, -4, -3, -2, 2, 3, 4, 5]);
        assert_eq!(cj_domain(0).unwrap().members(), &[-1, 1]);
        let c3 = cj_domain(3).unwrap();
        let expect: Vec<i64> = (-10..=-3).chain(3..=10).collect();
        assert_eq!(c3.members(), expect.as_slice());
        assert_eq!(cj_domain(-1), Err(Error::NegativeLevel(-1)));
        for j in 0..12 {
            let c = cj_domain(j).unwrap();
            let p = 1i64 << j;
            let lo = (p as f64 / 3.0).ceil() as i64;
            let hi = (4.0 * p as f64 / 3.0).floor() as i64;
            assert_eq!(c.len() as i64, 2 * (hi - lo + 1));
        }
    }

    #[test]
    fn psi_coeff_support_and_norm() {
        let basis = MeyerBasis::standard();
        assert_eq!(basis.psi_fourier_coeff(4, 7, 100), Complex64::new(0.0, 0.0));
        let total: f64 = cj_domain(4)
            .unwrap()
            .members()
            .iter()
            .map(|&m| basis.psi_fourier_coeff(4, 7, m).norm_sqr())
            .sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-13);
        let m = 9;
        let direct = psi_hat(m as f64 / 16.0) * 0.25;
        assert_abs_diff_eq!((basis.psi_fourier_coeff(4, 0, m) - direct).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn dyadic_sum_examples() {
        assert_abs_diff_eq!((dyadic_exponential_sum(0, 3) - Complex64::new(8.0, 0.0)).norm(), 0.0);
        assert_abs_diff_eq!(dyadic_exponential_sum(4, 3).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!((dyadic_exponential_sum(16, 3) - Complex64::new(8.0, 0.0)).norm(), 0.0);
    }

    #[test]
    fn covariance_entries() {
        let check = MeyerBasis::standard().covariance_matrix_check(4);
        let dom = &check.domain;
        let idx = |m: i64| dom.members().iter().position(|&x| x == m).unwrap();
        // C_4 = +-{6..21}; 6 lies in the sine block, 6 - 16 = -10 as well.
        assert_abs_diff_eq!((check.entry(idx(6), idx(6)) - 1.0).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(check.entry(idx(6), idx(-10)).norm(), 0.0, epsilon = 1e-14);
        assert!(check.max_deviation_from_identity() < 1e-12);
    }

    #[test]
    fn constant_signal_has_no_details() {
        let basis = MeyerBasis::standard();
        let grid = SignalGrid::from_fn(64, |_| 2.5).unwrap();
        let w = basis.forward_transform(&grid, 2, 4).unwrap();
        for (_, level) in w.levels() {
            assert!(level.iter().all(|v| v.abs() < 1e-14));
        }
        for &a in w.scaling() {
            assert_abs_diff_eq!(a, 2.5 * 0.5, epsilon = 1e-14);
        }
    }

    #[test]
    fn synthesized_wavelet_analyzes_to_unit_vector() {
        let basis = MeyerBasis::standard();
        let mut w = WaveletCoeffs::zeros(2, 6).unwrap();
        w.detail_mut(5).unwrap()[3] = 1.0;
        let grid = basis.inverse_transform(&w, 256).unwrap();
        let back = basis.forward_transform(&grid, 2, 6).unwrap();
        assert!(back.max_abs_diff(&w).unwrap() < 1e-12);
    }

    #[test]
    fn inverse_examples() {
        let basis = MeyerBasis::standard();
        let zero = WaveletCoeffs::zeros(0, 3).unwrap();
        assert!(basis.inverse_transform(&zero, 32).unwrap().values().iter().all(|&v| v == 0.0));
        let mut unit = WaveletCoeffs::zeros(0, 3).unwrap();
        unit.scaling_mut()[0] = 1.0;
        let g = basis.inverse_transform(&unit, 32).unwrap();
        assert!(g.values().iter().all(|v| (v - 1.0).abs() < 1e-14));
        assert_eq!(
            basis.inverse_transform(&WaveletCoeffs::zeros(0, 4).unwrap(), 32),
            Err(Error::Aliasing { j1: 4, n: 32 })
        );
    }

    #[test]
    fn forward_rejects_bad_levels() {
        let basis = MeyerBasis::standard();
        let grid = SignalGrid::zeros(32).unwrap();
        assert!(basis.forward_transform(&grid, 0, 4).is_ok());
        assert!(matches!(basis.forward_transform(&grid, 0, 5), Err(Error::LevelRange(_))));
        assert!(matches!(basis.forward_transform(&grid, 3, 2), Err(Error::LevelRange(_))));
    }

    #[test]
    fn band_limited_round_trip() {
        let basis = MeyerBasis::standard();
        let n = 512;
        // Band-limited to |m| <= 40, inside the span of V_0 + W_0..W_6.
        let grid = SignalGrid::from_fn(n, |t| {
            (1..=40)
                .map(|m| ((2.0 * PI * m as f64 * t) + m as f64).cos() / m as f64)
                .sum::<f64>()
        })
        .unwrap();
        let w = basis.forward_transform(&grid, 0, 6).unwrap();
        let back = basis.inverse_transform(&w, n).unwrap();
        assert!(back.distance(&grid).unwrap() / grid.norm() < 1e-12);
    }

    #[test]
    fn partition_of_unity_on_grid() {
        let basis = MeyerBasis::standard();
        for i in 0..=800 {
            let xi = -4.0 + i as f64 / 100.0;
            assert_abs_diff_eq!(basis.partition_of_unity(xi), 1.0, epsilon = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn reflection_identity(x in 0.0f64..=1.0) {
            prop_assert!((nu_poly(x) + nu_poly(1.0 - x) - 1.0).abs() < 2e-13);
        }

        #[test]
        fn nu_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(nu_poly(lo) <= nu_poly(hi) + 1e-15);
        }

        #[test]
        fn supports(xi in -3.0f64..3.0) {
            if xi.abs() < 1.0 / 3.0 || xi.abs() > 4.0 / 3.0 {
                prop_assert_eq!(psi_hat(xi), Complex64::new(0.0, 0.0));
            }
            if xi.abs() > 2.0 / 3.0 {
                prop_assert_eq!(phi_hat(xi), 0.0);
            }
        }

        #[test]
        fn perfect_reconstruction(
            j0 in 0u32..3,
            extra in 0u32..4,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let j1 = j0 + extra;
            let n = 1usize << (j1 + 2);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut w = WaveletCoeffs::zeros(j0, j1).unwrap();
            w.scaling_mut().iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
            for j in j0..=j1 {
                w.detail_mut(j).unwrap().iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
            }
            let basis = MeyerBasis::standard();
            let grid = basis.inverse_transform(&w, n).unwrap();
            let back = basis.forward_transform(&grid, j0, j1).unwrap();
            prop_assert!(back.max_abs_diff(&w).unwrap() <= 1e-8 * w.norm());
        }

        #[test]
        fn inverse_is_linear(seed in any::<u64>(), c1 in -3.0f64..3.0, c2 in -3.0f64..3.0) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut draw = || {
                let mut w = WaveletCoeffs::zeros(1, 4).unwrap();
                w.scaling_mut().iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
                for j in 1..=4 {
                    w.detail_mut(j).unwrap().iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
                }
                w
            };
            let (w1, w2) = (draw(), draw());
            let basis = MeyerBasis::standard();
            let combo = WaveletCoeffs::zeros(1, 4).unwrap()
                .add_scaled(c1, &w1).unwrap()
                .add_scaled(c2, &w2).unwrap();
            let lhs = basis.inverse_transform(&combo, 64).unwrap();
            let r1 = basis.inverse_transform(&w1, 64).unwrap();
            let r2 = basis.inverse_transform(&w2, 64).unwrap();
            for i in 0..64 {
                let rhs = c1 * r1.values()[i] + c2 * r2.values()[i];
                prop_assert!((lhs.values()[i] - rhs).abs() < 1e-12);
            }
        }
    }
}
