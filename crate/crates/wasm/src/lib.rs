//! Browser bindings for the demo page in `www/`.
//!
//! Two operations are exported: [`deconvolve`] simulates blurred noisy
//! channels and runs the adaptive estimator, and [`compress`] keeps the
//! largest Meyer coefficients of a test signal and reconstructs it.
//! The plain-Rust cores ([`run_deconvolution`], [`run_compression`]) are
//! what the native tests exercise.

use mcwd_core::bench::TestSignal;
use mcwd_core::estimator::{estimate, EstimatorConfig};
use mcwd_core::model::simulate;
use mcwd_core::{ChannelSpec, KernelSpec, LrdSpec, MeyerBasis, NoiseGenerator, Result, SignalGrid, WaveletCoeffs};
use wasm_bindgen::prelude::*;

const MAX_LOG2N: u32 = 14;

fn grid_size(log2n: u32) -> Result<usize> {
    if !(5..=MAX_LOG2N).contains(&log2n) {
        return Err(mcwd_core::Error::LevelRange(format!("log2 n must lie in 5..={MAX_LOG2N}, got {log2n}")));
    }
    Ok(1 << log2n)
}

#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Deconvolution {
    truth: Vec<f64>,
    observation: Vec<f64>,
    estimate: Vec<f64>,
    error: f64,
    j1: u32,
    best_channel: usize,
    survivors: usize,
}

#[wasm_bindgen]
impl Deconvolution {
    #[wasm_bindgen(getter)]
    pub fn truth(&self) -> Vec<f64> {
        self.truth.clone()
    }

    /// First channel's samples.
    #[wasm_bindgen(getter)]
    pub fn observation(&self) -> Vec<f64> {
        self.observation.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn estimate(&self) -> Vec<f64> {
        self.estimate.clone()
    }

    /// Grid RMSE of the estimate.
    #[wasm_bindgen(getter)]
    pub fn error(&self) -> f64 {
        self.error
    }

    #[wasm_bindgen(getter)]
    pub fn j1(&self) -> u32 {
        self.j1
    }

    #[wasm_bindgen(getter)]
    pub fn best_channel(&self) -> usize {
        self.best_channel
    }

    #[wasm_bindgen(getter)]
    pub fn survivors(&self) -> usize {
        self.survivors
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeconvolutionParams {
    pub log2n: u32,
    pub nu: f64,
    pub alpha: f64,
    pub channels: usize,
    pub snr_db: f64,
    pub seed: u64,
}

pub fn run_deconvolution(signal: TestSignal, p: DeconvolutionParams) -> Result<Deconvolution> {
    let n = grid_size(p.log2n)?;
    if !(1..=8).contains(&p.channels) {
        return Err(mcwd_core::Error::InvalidConfig(format!("channels must lie in 1..=8, got {}", p.channels)));
    }
    let truth = signal.sample(n)?;
    let spec = ChannelSpec::new(
        KernelSpec::RegularSmooth { nu: p.nu },
        LrdSpec::new(p.alpha, 1.0, NoiseGenerator::FgnCirculant)?,
    );
    let obs = simulate(&truth, &vec![spec; p.channels], p.snr_db, p.seed)?;
    let config = EstimatorConfig {
        probe_seed: p.seed,
        ..EstimatorConfig::default()
    };
    let est = estimate(&obs, &config)?;
    Ok(Deconvolution {
        error: est.signal.distance(&truth)?,
        observation: obs.samples()[0].values().to_vec(),
        truth: truth.into_values(),
        j1: est.report.j1.unwrap_or(est.report.j0),
        best_channel: est.report.best_channel,
        survivors: est.report.survivors(),
        estimate: est.signal.into_values(),
    })
}

#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Compression {
    truth: Vec<f64>,
    approximation: Vec<f64>,
    kept: usize,
    total: usize,
    error: f64,
}

#[wasm_bindgen]
impl Compression {
    #[wasm_bindgen(getter)]
    pub fn truth(&self) -> Vec<f64> {
        self.truth.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn approximation(&self) -> Vec<f64> {
        self.approximation.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn kept(&self) -> usize {
        self.kept
    }

    #[wasm_bindgen(getter)]
    pub fn total(&self) -> usize {
        self.total
    }

    #[wasm_bindgen(getter)]
    pub fn error(&self) -> f64 {
        self.error
    }
}

/// Keeps the `keep` largest coefficients over levels `0..=J-2` (the scaling
/// coefficient always survives) and synthesizes.
pub fn run_compression(signal: TestSignal, log2n: u32, keep: usize) -> Result<Compression> {
    let n = grid_size(log2n)?;
    let truth = signal.sample(n)?;
    let basis = MeyerBasis::standard();
    let coeffs = basis.forward_transform(&truth, 0, log2n - 2)?;
    let mut magnitudes: Vec<f64> = coeffs.levels().flat_map(|(_, d)| d.iter().map(|v| v.abs())).collect();
    let total = magnitudes.len() + coeffs.scaling().len();
    magnitudes.sort_by(|a, b| b.total_cmp(a));
    let cut = match keep {
        0 => f64::INFINITY,
        k if k > magnitudes.len() => 0.0,
        k => magnitudes[k - 1],
    };
    let mut kept = coeffs.scaling().len();
    let mut details = Vec::new();
    for (_, level) in coeffs.levels() {
        let row: Vec<f64> = level
            .iter()
            .map(|&v| {
                // Ties at the cut may keep a few extra coefficients.
                if v.abs() >= cut && v != 0.0 {
                    kept += 1;
                    v
                } else {
                    0.0
                }
            })
            .collect();
        details.push(row);
    }
    let pruned = WaveletCoeffs::new(0, coeffs.scaling().to_vec(), details)?;
    let approx = basis.inverse_transform(&pruned, n)?;
    Ok(Compression {
        error: approx.distance(&truth)?,
        truth: truth.into_values(),
        approximation: approx.into_values(),
        kept,
        total,
    })
}

fn parse_signal(name: &str) -> std::result::Result<TestSignal, JsValue> {
    name.parse().map_err(|e: mcwd_core::Error| JsValue::from_str(&e.to_string()))
}

fn js<T>(r: Result<T>) -> std::result::Result<T, JsValue> {
    r.map_err(|e| JsValue::from_str(&e.to_string()))
}

/// Names accepted by the `signal` arguments.
#[wasm_bindgen]
pub fn signal_names() -> Vec<String> {
    TestSignal::ALL.iter().map(|s| s.name().to_string()).collect()
}

#[wasm_bindgen]
pub fn deconvolve(
    signal: &str,
    log2n: u32,
    nu: f64,
    alpha: f64,
    channels: usize,
    snr_db: f64,
    seed: u32,
) -> std::result::Result<Deconvolution, JsValue> {
    let params = DeconvolutionParams {
        log2n,
        nu,
        alpha,
        channels,
        snr_db,
        seed: seed as u64,
    };
    js(run_deconvolution(parse_signal(signal)?, params))
}

#[wasm_bindgen]
pub fn compress(signal: &str, log2n: u32, keep: usize) -> std::result::Result<Compression, JsValue> {
    js(run_compression(parse_signal(signal)?, log2n, keep))
}

/// Samples of a test signal, for plotting.
#[wasm_bindgen]
pub fn test_signal(signal: &str, log2n: u32) -> std::result::Result<Vec<f64>, JsValue> {
    let s = parse_signal(signal)?;
    js(grid_size(log2n).and_then(|n| s.sample(n)).map(SignalGrid::into_values))
}
