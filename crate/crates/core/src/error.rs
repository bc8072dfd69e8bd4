use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("signal length {0} is not a power of two (need n = 2^J with J >= 1)")]
    NotPowerOfTwo(usize),

    #[error("negative resolution level {0}")]
    NegativeLevel(i64),

    #[error("invalid level range: {0}")]
    LevelRange(String),

    #[error("level {j1} aliases on a grid of {n} points (need floor(2^(j1+2)/3) < n/2)")]
    Aliasing { j1: u32, n: usize },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid noise specification: {0}")]
    InvalidNoise(String),

    #[error("invalid estimator configuration: {0}")]
    InvalidConfig(String),

    #[error("blurred signal has zero norm; SNR calibration is undefined")]
    ZeroSignal,

    #[error("fused channel denominator vanishes at frequencies {0:?}")]
    DegenerateFrequencies(Vec<i64>),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("unknown test signal `{0}`")]
    UnknownSignal(String),

    #[error("degenerate regression: {0}")]
    DegenerateRegression(String),
}
