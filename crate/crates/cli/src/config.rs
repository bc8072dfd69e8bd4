//! TOML run configuration. Every table rejects unknown keys.
//!
//! ```toml
//! seed = 7
//! threads = 4
//! out = "results"
//!
//! [simulate]
//! signal = "doppler"          # or signal_file = "f.txt"
//! n = 4096
//! noise = { snr_db = 20.0 }   # or noise = "fixed" to use each channel's sigma
//!
//! [[simulate.channels]]
//! kernel = { family = "regular_smooth", nu = 0.5 }
//! lrd = { alpha = 0.8, generator = "farima" }
//!
//! [estimate]
//! observation = "results/observation.txt"
//! metadata = "results/metadata.json"
//! estimator = { zeta = "sqrt_alpha", sigma_source = "mad" }
//!
//! [bench]
//! signals = ["lidar"]
//! ms = [1, 2, 3]
//! reps = 200
//!
//! [transform]
//! input = "f.txt"
//! j0 = 0
//! j1 = 8
//!
//! [signals]
//! names = ["lidar", "bumps"]
//! n = 1024
//! ```

use std::path::{Path, PathBuf};

use mcwd_core::bench::{ExperimentGrid, NoiseLevel, TestSignal};
use mcwd_core::estimator::EstimatorConfig;
use mcwd_core::{ChannelSpec, KernelSpec, LrdSpec};
use serde::Deserialize;

use crate::error::{CliError, CliResult};
use crate::formats::read_file;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub simulate: SimulateConfig,
    pub estimate: EstimateConfig,
    pub bench: ExperimentGrid,
    pub transform: TransformConfig,
    pub signals: SignalsConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub signal: TestSignal,
    /// Two-column signal file; overrides `signal` and `n`.
    pub signal_file: Option<PathBuf>,
    pub n: usize,
    pub noise: NoiseLevel,
    pub channels: Vec<ChannelSpec>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            signal: TestSignal::Lidar,
            signal_file: None,
            n: 4096,
            noise: NoiseLevel::SnrDb(20.0),
            channels: vec![ChannelSpec::new(KernelSpec::RegularSmooth { nu: 0.5 }, LrdSpec::white(1.0))],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    /// Defaults to `observation.txt` in the output directory.
    pub observation: Option<PathBuf>,
    /// Defaults to `metadata.json` next to the observation.
    pub metadata: Option<PathBuf>,
    /// Optional truth signal; its distance to the estimate is printed.
    pub truth: Option<PathBuf>,
    pub estimator: EstimatorConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformConfig {
    /// Signal file (forward) or coefficient file (inverse).
    pub input: Option<PathBuf>,
    pub j0: u32,
    /// Defaults to `J - 2`.
    pub j1: Option<u32>,
    pub inverse: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalsConfig {
    pub names: Vec<TestSignal>,
    pub n: usize,
}

impl Default for SignalsConfig {
    fn default() -> Self {
        Self {
            names: TestSignal::ALL.to_vec(),
            n: 4096,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        Self::parse(&read_file(path)?).map_err(|e| CliError::parse(path, e))
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_example_parses() {
        let src = include_str!("config.rs");
        let example: String = src
            .lines()
            .skip_while(|l| !l.starts_with("//! ```toml"))
            .skip(1)
            .take_while(|l| !l.starts_with("//! ```"))
            .map(|l| l.trim_start_matches("//!").trim_start())
            .collect::<Vec<_>>()
            .join("\n");
        let cfg = RunConfig::parse(&example).unwrap();
        assert_eq!(cfg.seed, Some(7));
        assert_eq!(cfg.simulate.signal, TestSignal::Doppler);
        assert_eq!(cfg.simulate.channels.len(), 1);
        assert_eq!(cfg.bench.ms, vec![1, 2, 3]);
        assert_eq!(cfg.transform.j1, Some(8));
        assert_eq!(cfg.signals.n, 1024);
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        for text in [
            "sed = 1",
            "[simulate]\nsnr = 3",
            "[bench]\nrep = 3",
            "[estimate.estimator]\nzetta = 1",
            "[[simulate.channels]]\nkernel = { family = \"direct\" }\nlrd = { alpha = 1.0, hurst = 0.5 }",
        ] {
            let err = RunConfig::parse(text).unwrap_err().to_string();
            assert!(err.contains("unknown field"), "{text}: {err}");
            assert!(err.contains("line"), "{text}: {err}");
        }
    }

    #[test]
    fn empty_config_uses_defaults() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }
}
