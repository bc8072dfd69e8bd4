//! Adaptive multichannel deconvolution with periodized Meyer wavelets.
//!
//! A signal `f` on `[0, 1)` is observed through `M` channels, each blurred by a
//! known periodic kernel and corrupted by long-range dependent noise whose
//! strength is indexed by `alpha` in `(0, 1]` (Hurst index `H = 1 - alpha / 2`).
//! Channels are fused frequency by frequency with variance-optimal weights,
//! projected onto a band-limited Meyer basis, and reconstructed with
//! level-dependent hard thresholds (or a linear projection for super-smooth
//! blur).
//!
//! Module map:
//!
//! * [`fourier`]: sampled grids and signed-frequency Fourier coefficients.
//! * [`meyer`]: the periodized Meyer basis and its fast transforms.
//! * [`kernels`]: blur families and their Fourier multipliers.
//! * [`noise`]: fractional Gaussian noise, FARIMA, SNR calibration, MAD.
//! * [`model`]: the multichannel observation simulator.
//! * [`estimator`]: fusion weights, thresholds, scale selection, estimators.
//! * [`bench`]: test signals, RMSE and the replicated experiment harness.

pub mod bench;
pub mod error;
pub mod estimator;
pub mod fourier;
pub mod kernels;
pub mod meyer;
pub mod model;
pub mod noise;
pub mod seed;

pub use error::{Error, Result};
pub use fourier::{FourierCoeffs, SignalGrid};
pub use kernels::KernelSpec;
pub use meyer::{MeyerBasis, WaveletCoeffs};
pub use model::{ChannelSpec, MultichannelObservation};
pub use noise::{LrdSpec, NoiseGenerator};
