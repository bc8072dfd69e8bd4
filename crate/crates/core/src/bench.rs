//! Monte-Carlo harness: test signals, RMSE, replicated experiments over
//! parameter grids, paired trend tests and rate slopes.
//!
//! Replicate `r` of a cell seeded with `seed` simulates with
//! `derive(seed, [r])` and probes with `derive(seed, [r, PROBE])`. Cells of
//! one grid share the master seed, so they see common random numbers and
//! differences between cells can be tested pairwise.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{estimate, EstimatorConfig, ZetaRule};
use crate::fourier::SignalGrid;
use crate::kernels::KernelSpec;
use crate::model::{simulate, simulate_with_noise_levels, ChannelSpec};
use crate::noise::{LrdSpec, NoiseGenerator};
use crate::seed;

/// Standard test signals on `[0, 1)`.
///
/// Blocks, Bumps and Doppler use the Donoho-Johnstone parameterizations with
/// their original amplitudes. LIDAR is a step profile of a return pulse:
///
/// | interval        | value |
/// |-----------------|-------|
/// | [0.20, 0.30)    | 0.8   |
/// | [0.30, 0.32)    | 1.6   |
/// | [0.32, 0.45)    | 0.8   |
/// | [0.60, 0.62)    | 1.3   |
/// | [0.62, 0.75)    | 0.5   |
///
/// and zero elsewhere. Wave is the smooth profile
/// `0.6 exp(-40 (t - 1/2)^2) + 0.2 sin(2 pi t)` used for rate checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestSignal {
    Lidar,
    Doppler,
    Bumps,
    Blocks,
    Wave,
}

const DJ_POSITIONS: [f64; 11] = [0.1, 0.13, 0.15, 0.23, 0.25, 0.40, 0.44, 0.65, 0.76, 0.78, 0.81];
const BLOCKS_HEIGHTS: [f64; 11] = [4.0, -5.0, 3.0, -4.0, 5.0, -4.2, 2.1, 4.3, -3.1, 2.1, -4.2];
const BUMPS_HEIGHTS: [f64; 11] = [4.0, 5.0, 3.0, 4.0, 5.0, 4.2, 2.1, 4.3, 3.1, 5.1, 4.2];
const BUMPS_WIDTHS: [f64; 11] = [0.005, 0.005, 0.006, 0.01, 0.01, 0.03, 0.01, 0.01, 0.005, 0.008, 0.005];
const LIDAR_STEPS: [(f64, f64, f64); 5] = [
    (0.20, 0.30, 0.8),
    (0.30, 0.32, 1.6),
    (0.32, 0.45, 0.8),
    (0.60, 0.62, 1.3),
    (0.62, 0.75, 0.5),
];

impl TestSignal {
    pub const ALL: [TestSignal; 5] = [
        TestSignal::Lidar,
        TestSignal::Doppler,
        TestSignal::Bumps,
        TestSignal::Blocks,
        TestSignal::Wave,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TestSignal::Lidar => "lidar",
            TestSignal::Doppler => "doppler",
            TestSignal::Bumps => "bumps",
            TestSignal::Blocks => "blocks",
            TestSignal::Wave => "wave",
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TestSignal::Lidar => LIDAR_STEPS
                .iter()
                .find(|&&(a, b, _)| t >= a && t < b)
                .map_or(0.0, |s| s.2),
            TestSignal::Doppler => (t * (1.0 - t)).sqrt() * (2.0 * PI * 1.05 / (t + 0.05)).sin(),
            TestSignal::Blocks => DJ_POSITIONS
                .iter()
                .zip(BLOCKS_HEIGHTS)
                .map(|(&p, h)| if t >= p { h } else { 0.0 })
                .sum(),
            TestSignal::Bumps => DJ_POSITIONS
                .iter()
                .zip(BUMPS_HEIGHTS)
                .zip(BUMPS_WIDTHS)
                .map(|((&p, h), w)| h * (1.0 + ((t - p) / w).abs()).powi(-4))
                .sum(),
            TestSignal::Wave => 0.6 * (-40.0 * (t - 0.5).powi(2)).exp() + 0.2 * (2.0 * PI * t).sin(),
        }
    }

    pub fn sample(&self, n: usize) -> Result<SignalGrid> {
        SignalGrid::from_fn(n, |t| self.eval(t))
    }
}

impl fmt::Display for TestSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestSignal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TestSignal::ALL
            .into_iter()
            .find(|sig| sig.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownSignal(s.to_string()))
    }
}

/// Samples the named test signal on the `n`-point grid.
pub fn test_signal(name: &str, n: usize) -> Result<SignalGrid> {
    name.parse::<TestSignal>()?.sample(n)
}

/// `(1/m) sum_i ||f^_i - f||`.
pub fn rmse(estimates: &[SignalGrid], truth: &SignalGrid) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::Empty("estimate list"));
    }
    let mut total = 0.0;
    for e in estimates {
        total += e.distance(truth)?;
    }
    Ok(total / estimates.len() as f64)
}

fn map_reps<T, F>(reps: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..reps).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..reps).map(f).collect()
    }
}

/// How the channels' noise levels are set in a cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseLevel {
    /// Calibrate each channel to this SNR in dB.
    SnrDb(f64),
    /// Use the `sigma` in each channel's spec.
    Fixed,
}

/// Outcome of replicated simulate-estimate cycles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub rmse: f64,
    /// Standard error of `rmse` over replicates.
    pub se: f64,
    pub mean_j1: f64,
    pub modal_best_channel: usize,
    pub mean_survivors: f64,
    /// Replicates whose estimate failed; excluded from the statistics.
    pub failed: usize,
    /// Per-replicate errors `||f^_r - f||` (NaN for failed replicates).
    pub errors: Vec<f64>,
}

/// Replicate seed for simulation.
pub fn replicate_seed(cell_seed: u64, r: usize) -> u64 {
    seed::derive(cell_seed, &[r as u64])
}

/// Replicate seed for probes.
pub fn probe_seed(cell_seed: u64, r: usize) -> u64 {
    seed::derive(cell_seed, &[r as u64, seed::stream::PROBE])
}

/// Runs `reps` independent simulate-estimate cycles.
pub fn run_cell(
    truth: &SignalGrid,
    channels: &[ChannelSpec],
    config: &EstimatorConfig,
    noise: NoiseLevel,
    reps: usize,
    seed_value: u64,
) -> Result<CellStats> {
    if reps == 0 {
        return Err(Error::InvalidConfig("reps must be at least 1".into()));
    }
    config.validate()?;
    for c in channels {
        c.validate()?;
    }
    let outcomes = map_reps(reps, |r| -> Result<(f64, u32, usize, usize)> {
        let obs = match noise {
            NoiseLevel::SnrDb(snr) => simulate(truth, channels, snr, replicate_seed(seed_value, r))?,
            NoiseLevel::Fixed => simulate_with_noise_levels(truth, channels, replicate_seed(seed_value, r))?,
        };
        let cfg = EstimatorConfig {
            probe_seed: probe_seed(seed_value, r),
            ..config.clone()
        };
        let est = estimate(&obs, &cfg)?;
        let j1 = est.report.j1.unwrap_or(est.report.j0);
        Ok((
            est.signal.distance(truth)?,
            j1,
            est.report.best_channel,
            est.report.survivors(),
        ))
    });
    let mut errors = Vec::with_capacity(reps);
    let mut ok = Vec::new();
    let mut first_error = None;
    for o in outcomes {
        match o {
            Ok(v) => {
                errors.push(v.0);
                ok.push(v);
            }
            Err(e) => {
                errors.push(f64::NAN);
                first_error.get_or_insert(e);
            }
        }
    }
    if ok.is_empty() {
        return Err(first_error.expect("some replicate failed"));
    }
    let k = ok.len() as f64;
    let mean = ok.iter().map(|o| o.0).sum::<f64>() / k;
    let var = if ok.len() > 1 {
        ok.iter().map(|o| (o.0 - mean).powi(2)).sum::<f64>() / (k - 1.0)
    } else {
        0.0
    };
    let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
    for o in &ok {
        *votes.entry(o.2).or_default() += 1;
    }
    let top = *votes.values().max().expect("nonempty");
    let modal = *votes.iter().find(|(_, &c)| c == top).expect("nonempty").0;
    Ok(CellStats {
        rmse: mean,
        se: (var / k).sqrt(),
        mean_j1: ok.iter().map(|o| o.1 as f64).sum::<f64>() / k,
        modal_best_channel: modal,
        mean_survivors: ok.iter().map(|o| o.3 as f64).sum::<f64>() / k,
        failed: reps - ok.len(),
        errors,
    })
}

/// Parameter grid of a benchmark. With `M > 1` every channel shares the
/// cell's `(alpha, nu)` and carries independent noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentGrid {
    pub signals: Vec<TestSignal>,
    pub nus: Vec<f64>,
    pub alphas: Vec<f64>,
    pub ms: Vec<usize>,
    pub snr_dbs: Vec<f64>,
    pub zeta_rules: Vec<ZetaRule>,
    pub reps: usize,
    pub n: usize,
    pub master_seed: u64,
    pub generator: NoiseGenerator,
    /// Base estimator settings; `zeta` and `probe_seed` are overridden per cell.
    pub estimator: EstimatorConfig,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        Self {
            signals: vec![TestSignal::Lidar],
            nus: vec![0.3],
            alphas: vec![1.0],
            ms: vec![1],
            snr_dbs: vec![20.0],
            zeta_rules: vec![ZetaRule::SqrtAlpha],
            reps: 200,
            n: 4096,
            master_seed: 0,
            generator: NoiseGenerator::Farima,
            estimator: EstimatorConfig {
                sigma_source: crate::estimator::SigmaSource::Mad,
                ..EstimatorConfig::default()
            },
        }
    }
}

/// Identifies one grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellKey {
    pub signal: TestSignal,
    pub nu: f64,
    pub alpha: f64,
    pub m: usize,
    pub snr_db: f64,
    pub zeta: ZetaRule,
}

impl fmt::Display for CellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} nu={} alpha={} M={} snr={}dB zeta={}",
            self.signal, self.nu, self.alpha, self.m, self.snr_db, self.zeta
        )
    }
}

impl CellKey {
    pub fn channels(&self, generator: NoiseGenerator) -> Result<Vec<ChannelSpec>> {
        let lrd = LrdSpec::new(self.alpha, 1.0, generator)?;
        let kernel = KernelSpec::RegularSmooth { nu: self.nu };
        kernel.validate()?;
        Ok(vec![ChannelSpec::new(kernel, lrd); self.m])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub key: CellKey,
    pub n: usize,
    pub reps: usize,
    pub stats: CellStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub cells: Vec<CellResult>,
    /// Cells that failed outright, with the error message.
    pub failures: Vec<(CellKey, String)>,
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidConfig("reps must be at least 1".into()));
        }
        let lists = [
            ("signals", self.signals.is_empty()),
            ("nus", self.nus.is_empty()),
            ("alphas", self.alphas.is_empty()),
            ("ms", self.ms.is_empty()),
            ("snr_dbs", self.snr_dbs.is_empty()),
            ("zeta_rules", self.zeta_rules.is_empty()),
        ];
        if let Some((name, _)) = lists.iter().find(|(_, empty)| *empty) {
            return Err(Error::InvalidConfig(format!("{name} must not be empty")));
        }
        if self.ms.contains(&0) {
            return Err(Error::InvalidConfig("M must be at least 1".into()));
        }
        crate::fourier::check_power_of_two(self.n)?;
        self.estimator.validate()
    }

    /// Cells in the order signal, nu, alpha, M, SNR, zeta.
    pub fn cells(&self) -> Vec<CellKey> {
        let mut out = Vec::new();
        for &signal in &self.signals {
            for &nu in &self.nus {
                for &alpha in &self.alphas {
                    for &m in &self.ms {
                        for &snr_db in &self.snr_dbs {
                            for &zeta in &self.zeta_rules {
                                out.push(CellKey {
                                    signal,
                                    nu,
                                    alpha,
                                    m,
                                    snr_db,
                                    zeta,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Evaluates every cell of the grid. Cell failures are recorded, not fatal.
pub fn run_grid(grid: &ExperimentGrid) -> Result<ExperimentResult> {
    grid.validate()?;
    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for key in grid.cells() {
        let run = || -> Result<CellStats> {
            let truth = key.signal.sample(grid.n)?;
            let channels = key.channels(grid.generator)?;
            let config = EstimatorConfig {
                zeta: key.zeta,
                ..grid.estimator.clone()
            };
            run_cell(&truth, &channels, &config, NoiseLevel::SnrDb(key.snr_db), grid.reps, grid.master_seed)
        };
        match run() {
            Ok(stats) => cells.push(CellResult {
                key,
                n: grid.n,
                reps: grid.reps,
                stats,
            }),
            Err(e) => {
                log::warn!("cell {key} failed: {e}");
                failures.push((key, e.to_string()));
            }
        }
    }
    Ok(ExperimentResult { cells, failures })
}

/// Column order of [`ExperimentResult::to_csv`].
pub const CSV_COLUMNS: [&str; 14] = [
    "signal",
    "nu",
    "alpha",
    "M",
    "snr_db",
    "zeta_rule",
    "rmse",
    "se",
    "mean_j1",
    "modal_best_channel",
    "mean_survivors",
    "failed",
    "n",
    "reps",
];

/// Column order of [`ExperimentResult::to_long_csv`].
pub const LONG_COLUMNS: [&str; 8] = ["signal", "nu", "alpha", "M", "snr_db", "zeta_rule", "rep", "error"];

fn csv_error(e: impl fmt::Display) -> Error {
    Error::InvalidConfig(format!("csv: {e}"))
}

impl ExperimentResult {
    pub fn find(&self, pred: impl Fn(&CellKey) -> bool) -> Option<&CellResult> {
        self.cells.iter().find(|c| pred(&c.key))
    }

    /// One row per cell with columns [`CSV_COLUMNS`].
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_COLUMNS).map_err(csv_error)?;
        for c in &self.cells {
            let k = &c.key;
            let s = &c.stats;
            w.write_record([
                k.signal.to_string(),
                k.nu.to_string(),
                k.alpha.to_string(),
                k.m.to_string(),
                k.snr_db.to_string(),
                k.zeta.to_string(),
                s.rmse.to_string(),
                s.se.to_string(),
                s.mean_j1.to_string(),
                s.modal_best_channel.to_string(),
                s.mean_survivors.to_string(),
                s.failed.to_string(),
                c.n.to_string(),
                c.reps.to_string(),
            ])
            .map_err(csv_error)?;
        }
        String::from_utf8(w.into_inner().map_err(csv_error)?).map_err(csv_error)
    }

    /// One row per replicate with columns [`LONG_COLUMNS`].
    pub fn to_long_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(LONG_COLUMNS).map_err(csv_error)?;
        for c in &self.cells {
            let k = &c.key;
            for (r, e) in c.stats.errors.iter().enumerate() {
                w.write_record([
                    k.signal.to_string(),
                    k.nu.to_string(),
                    k.alpha.to_string(),
                    k.m.to_string(),
                    k.snr_db.to_string(),
                    k.zeta.to_string(),
                    r.to_string(),
                    e.to_string(),
                ])
                .map_err(csv_error)?;
            }
        }
        String::from_utf8(w.into_inner().map_err(csv_error)?).map_err(csv_error)
    }

    /// Tables laid out with one block per `(nu, snr)`, one row per signal
    /// and zeta rule, and one column per `(alpha, M)`. Cells show
    /// `rmse (mean j1)`.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let mut blocks: Vec<(f64, f64)> = Vec::new();
        let mut columns: Vec<(f64, usize)> = Vec::new();
        let mut rows: Vec<(TestSignal, ZetaRule)> = Vec::new();
        for c in &self.cells {
            let k = &c.key;
            if !blocks.contains(&(k.nu, k.snr_db)) {
                blocks.push((k.nu, k.snr_db));
            }
            if !columns.contains(&(k.alpha, k.m)) {
                columns.push((k.alpha, k.m));
            }
            if !rows.contains(&(k.signal, k.zeta)) {
                rows.push((k.signal, k.zeta));
            }
        }
        for (nu, snr) in blocks {
            out.push_str(&format!("### nu = {nu}, SNR {snr} dB\n\n| signal | zeta |"));
            for (alpha, m) in &columns {
                out.push_str(&format!(" alpha={alpha} M={m} |"));
            }
            out.push_str("\n|---|---|");
            out.push_str(&"---|".repeat(columns.len()));
            out.push('\n');
            for (signal, zeta) in &rows {
                out.push_str(&format!("| {signal} | {zeta} |"));
                for (alpha, m) in &columns {
                    let cell = self.find(|k| {
                        k.nu == nu && k.snr_db == snr && k.signal == *signal && k.zeta == *zeta && k.alpha == *alpha && k.m == *m
                    });
                    match cell {
                        Some(c) => out.push_str(&format!(" {:.3} ({:.1}) |", c.stats.rmse, c.stats.mean_j1)),
                        None => out.push_str(" - |"),
                    }
                }
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }
}

/// Reads back a table written by [`ExperimentResult::to_csv`]. Per-replicate
/// errors are not part of that table and come back empty.
pub fn cells_from_csv(text: &str) -> Result<Vec<CellResult>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(csv_error)?.clone();
    if header.iter().ne(CSV_COLUMNS.iter().copied()) {
        return Err(Error::InvalidConfig(format!("unexpected header {header:?}")));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_error)?;
        let f = |i: usize| -> Result<f64> { rec[i].parse().map_err(|_| csv_error(format!("bad number {:?}", &rec[i]))) };
        let u = |i: usize| -> Result<usize> { rec[i].parse().map_err(|_| csv_error(format!("bad count {:?}", &rec[i]))) };
        out.push(CellResult {
            key: CellKey {
                signal: rec[0].parse()?,
                nu: f(1)?,
                alpha: f(2)?,
                m: u(3)?,
                snr_db: f(4)?,
                zeta: rec[5].parse()?,
            },
            stats: CellStats {
                rmse: f(6)?,
                se: f(7)?,
                mean_j1: f(8)?,
                modal_best_channel: u(9)?,
                mean_survivors: f(10)?,
                failed: u(11)?,
                errors: Vec::new(),
            },
            n: u(12)?,
            reps: u(13)?,
        });
    }
    Ok(out)
}

/// One-sided paired comparison of `a` against `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTest {
    /// Mean of `a_r - b_r`.
    pub mean_diff: f64,
    pub se: f64,
    /// `mean_diff / se`.
    pub z: f64,
    pub pairs: usize,
}

/// One-sided 95% normal quantile.
pub const Z_95: f64 = 1.6448536269514722;

impl PairedTest {
    /// `a > b` on average at 95% confidence.
    pub fn greater(&self) -> bool {
        self.z > Z_95
    }

    /// `a < b` on average at 95% confidence.
    pub fn less(&self) -> bool {
        self.z < -Z_95
    }
}

/// Paired differences over replicates where both sides succeeded.
pub fn paired_test(a: &[f64], b: &[f64]) -> Result<PairedTest> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|v| v.is_finite()).collect();
    if d.len() < 2 {
        return Err(Error::Empty("paired replicates"));
    }
    let k = d.len() as f64;
    let mean = d.iter().sum::<f64>() / k;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    let se = (var / k).sqrt();
    let z = if se > 0.0 {
        mean / se
    } else if mean > 0.0 {
        f64::INFINITY
    } else if mean < 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    };
    Ok(PairedTest {
        mean_diff: mean,
        se,
        z,
        pairs: d.len(),
    })
}

/// How a trend is judged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendKind {
    /// The first cell's error must exceed the second's significantly.
    Strict,
    /// The first cell's error must not be significantly below the second's.
    NonInferior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendCheck {
    pub name: String,
    /// Cell expected to have the larger error.
    pub worse: CellKey,
    pub better: CellKey,
    pub kind: TrendKind,
    pub test: PairedTest,
    pub passed: bool,
}

impl TrendCheck {
    pub fn compare(name: &str, worse: &CellResult, better: &CellResult, kind: TrendKind) -> Result<Self> {
        let test = paired_test(&worse.stats.errors, &better.stats.errors)?;
        let passed = match kind {
            TrendKind::Strict => test.greater(),
            TrendKind::NonInferior => !test.less(),
        };
        Ok(Self {
            name: name.to_string(),
            worse: worse.key,
            better: better.key,
            kind,
            test,
            passed,
        })
    }
}

impl fmt::Display for TrendCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: [{}] vs [{}] diff={:.5} z={:.2}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.worse,
            self.better,
            self.test.mean_diff,
            self.test.z
        )
    }
}

/// Trend checks supported by the grid:
/// fewer channels are worse (strict, LIDAR and Doppler only),
/// each smaller `alpha` is no better (non-inferior),
/// each larger `nu` is no better (non-inferior).
pub fn trend_checks(result: &ExperimentResult) -> Result<Vec<TrendCheck>> {
    let mut out = Vec::new();
    let same = |a: &CellKey, b: &CellKey| a.signal == b.signal && a.snr_db == b.snr_db && a.zeta == b.zeta;
    for c in &result.cells {
        let k = c.key;
        if matches!(k.signal, TestSignal::Lidar | TestSignal::Doppler) {
            let larger_m = result
                .cells
                .iter()
                .filter(|o| same(&o.key, &k) && o.key.nu == k.nu && o.key.alpha == k.alpha && o.key.m > k.m)
                .max_by_key(|o| o.key.m);
            let smallest = !result
                .cells
                .iter()
                .any(|o| same(&o.key, &k) && o.key.nu == k.nu && o.key.alpha == k.alpha && o.key.m < k.m);
            if let (Some(b), true) = (larger_m, smallest) {
                out.push(TrendCheck::compare("channels", c, b, TrendKind::Strict)?);
            }
        }
        let next_alpha = result
            .cells
            .iter()
            .filter(|o| same(&o.key, &k) && o.key.nu == k.nu && o.key.m == k.m && o.key.alpha > k.alpha)
            .min_by(|a, b| a.key.alpha.total_cmp(&b.key.alpha));
        if let Some(b) = next_alpha {
            out.push(TrendCheck::compare("dependence", c, b, TrendKind::NonInferior)?);
        }
        let next_nu = result
            .cells
            .iter()
            .filter(|o| same(&o.key, &k) && o.key.alpha == k.alpha && o.key.m == k.m && o.key.nu < k.nu)
            .max_by(|a, b| a.key.nu.total_cmp(&b.key.nu));
        if let Some(b) = next_nu {
            out.push(TrendCheck::compare("ill-posedness", c, b, TrendKind::NonInferior)?);
        }
    }
    Ok(out)
}

/// Weighted least-squares slope of `log rmse` against `log n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSlope {
    pub slope: f64,
    pub se: f64,
    /// `(n, rmse, se)` per grid size.
    pub points: Vec<(usize, f64, f64)>,
}

impl RateSlope {
    /// `other` has a significantly larger (shallower) slope at 95%.
    pub fn shallower(&self, other: &RateSlope) -> bool {
        let se = (self.se.powi(2) + other.se.powi(2)).sqrt();
        (other.slope - self.slope) / se > Z_95
    }
}

/// Fits `log rmse = a + b log n` with weights `(rmse / se)^2`; points with
/// zero spread get the largest finite weight.
pub fn fit_rate_slope(points: &[(usize, f64, f64)]) -> Result<RateSlope> {
    if points.len() < 3 {
        return Err(Error::DegenerateRegression(format!("need at least 3 grid sizes, got {}", points.len())));
    }
    if let Some(p) = points.iter().find(|p| !(p.1 > 0.0 && p.1.is_finite())) {
        return Err(Error::DegenerateRegression(format!("rmse {} at n = {} has no logarithm", p.1, p.0)));
    }
    let raw: Vec<f64> = points.iter().map(|p| (p.2 / p.1).powi(2)).collect();
    let floor = raw.iter().copied().filter(|v| *v > 0.0).fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = raw
        .iter()
        .map(|&v| if v > 0.0 { 1.0 / v } else if floor.is_finite() { 1.0 / floor } else { 1.0 })
        .collect();
    let x: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let sw: f64 = w.iter().sum();
    let mx = w.iter().zip(&x).map(|(w, x)| w * x).sum::<f64>() / sw;
    let my = w.iter().zip(&y).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = w.iter().zip(&x).map(|(w, x)| w * (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateRegression("all grid sizes coincide".into()));
    }
    let sxy: f64 = w.iter().zip(&x).zip(&y).map(|((w, x), y)| w * (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    // Known-variance weights when every point has spread; otherwise the
    // residual scale.
    let se = if raw.iter().all(|v| *v > 0.0) {
        (1.0 / sxx).sqrt()
    } else {
        let rss: f64 = w
            .iter()
            .zip(&x)
            .zip(&y)
            .map(|((w, x), y)| w * (y - my - slope * (x - mx)).powi(2))
            .sum();
        (rss / (points.len() as f64 - 2.0) / sxx).sqrt()
    };
    Ok(RateSlope {
        slope,
        se,
        points: points.to_vec(),
    })
}

/// Runs `reps` replicates at each grid size with the channels' configured
/// noise levels and fits the rate slope.
pub fn rate_slope(
    signal: TestSignal,
    channels: &[ChannelSpec],
    config: &EstimatorConfig,
    n_list: &[usize],
    reps: usize,
    seed_value: u64,
) -> Result<RateSlope> {
    if n_list.len() < 3 {
        return Err(Error::DegenerateRegression(format!("need at least 3 grid sizes, got {}", n_list.len())));
    }
    let mut points = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let truth = signal.sample(n)?;
        let stats = run_cell(&truth, channels, config, NoiseLevel::Fixed, reps, seed_value)?;
        points.push((n, stats.rmse, stats.se));
    }
    fit_rate_slope(&points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{LevelChoice, Selection};
    use approx::assert_abs_diff_eq;

    #[test]
    fn signal_examples() {
        assert_eq!(TestSignal::Doppler.eval(0.0), 0.0);
        let n = 4096;
        let bumps = test_signal("bumps", n).unwrap();
        assert!(bumps.values().iter().all(|&v| v >= 0.0));
        let blocks = test_signal("Blocks", n).unwrap();
        let jumps = blocks.values().windows(2).filter(|w| w[0] != w[1]).count();
        assert!(jumps <= DJ_POSITIONS.len());
        let lidar = test_signal("LIDAR", n).unwrap();
        assert!(lidar.values().windows(2).filter(|w| w[0] != w[1]).count() <= 2 * LIDAR_STEPS.len());
        assert_abs_diff_eq!(lidar.values().iter().copied().fold(0.0, f64::max), 1.6);
        assert!(matches!(test_signal("sine", n), Err(Error::UnknownSignal(_))));
        assert!(test_signal("lidar", 1000).is_err());
        for s in TestSignal::ALL {
            let norm = s.sample(n).unwrap().norm();
            assert!(norm > 0.1 && norm < 5.0, "{s}: {norm}");
        }
    }

    #[test]
    fn rmse_examples() {
        let f = TestSignal::Wave.sample(64).unwrap();
        assert_eq!(rmse(&[f.clone(), f.clone()], &f).unwrap(), 0.0);
        let shifted = SignalGrid::new(f.values().iter().map(|v| v + 0.25).collect()).unwrap();
        assert_abs_diff_eq!(rmse(&[shifted], &f).unwrap(), 0.25, epsilon = 1e-14);
        let zero = SignalGrid::zeros(16).unwrap();
        let a = SignalGrid::from_fn(16, |_| 0.1).unwrap();
        let b = SignalGrid::from_fn(16, |_| -0.3).unwrap();
        assert_abs_diff_eq!(rmse(&[a, b], &zero).unwrap(), 0.2, epsilon = 1e-14);
        assert!(rmse(&[], &zero).is_err());
        assert!(rmse(&[SignalGrid::zeros(32).unwrap()], &zero).is_err());
    }

    fn band_limited(n: usize) -> SignalGrid {
        SignalGrid::from_fn(n, |t| (2.0 * PI * 3.0 * t).sin() + 0.3 * (2.0 * PI * 7.0 * t).cos()).unwrap()
    }

    #[test]
    fn noiseless_cell_is_exact() {
        let f = band_limited(512);
        let ch = [ChannelSpec::new(KernelSpec::RegularSmooth { nu: 0.3 }, LrdSpec::white(1.0))];
        let config = EstimatorConfig {
            zeta: ZetaRule::Fixed(0.0),
            selection: Selection::Theoretical,
            j1: LevelChoice::Fixed(5),
            ..Default::default()
        };
        let stats = run_cell(&f, &ch, &config, NoiseLevel::SnrDb(f64::INFINITY), 1, 0).unwrap();
        assert!(stats.rmse < 1e-6);
        assert_eq!(stats.se, 0.0);
    }

    #[test]
    fn cells_are_deterministic() {
        let f = TestSignal::Lidar.sample(256).unwrap();
        let ch = [ChannelSpec::new(
            KernelSpec::RegularSmooth { nu: 0.3 },
            LrdSpec::new(0.8, 1.0, NoiseGenerator::Farima).unwrap(),
        )];
        let a = run_cell(&f, &ch, &EstimatorConfig::default(), NoiseLevel::SnrDb(20.0), 6, 11).unwrap();
        let b = run_cell(&f, &ch, &EstimatorConfig::default(), NoiseLevel::SnrDb(20.0), 6, 11).unwrap();
        assert_eq!(a, b);
        assert!(run_cell(&f, &ch, &EstimatorConfig::default(), NoiseLevel::SnrDb(20.0), 0, 11).is_err());
    }

    fn small_grid() -> ExperimentGrid {
        ExperimentGrid {
            signals: vec![TestSignal::Lidar, TestSignal::Doppler],
            alphas: vec![1.0, 0.6],
            ms: vec![1, 2],
            reps: 3,
            n: 256,
            ..Default::default()
        }
    }

    #[test]
    fn grid_outputs_round_trip() {
        let grid = small_grid();
        let result = run_grid(&grid).unwrap();
        assert_eq!(result.cells.len(), 8);
        assert!(result.failures.is_empty());
        assert_eq!(run_grid(&grid).unwrap(), result);
        let csv = result.to_csv().unwrap();
        assert_eq!(csv.lines().count(), 9);
        let back = cells_from_csv(&csv).unwrap();
        for (a, b) in back.iter().zip(&result.cells) {
            assert_eq!(a.key, b.key);
            assert_eq!(a.stats.rmse, b.stats.rmse);
            assert_eq!(a.stats.se, b.stats.se);
            assert_eq!(a.stats.mean_j1, b.stats.mean_j1);
        }
        assert_eq!(result.to_long_csv().unwrap().lines().count(), 1 + 8 * 3);
        let md = result.to_markdown();
        assert!(md.contains("| lidar | sqrt_alpha |"));
        let checks = trend_checks(&result).unwrap();
        assert_eq!(checks.iter().filter(|c| c.name == "channels").count(), 4);
        assert_eq!(checks.iter().filter(|c| c.name == "dependence").count(), 4);
    }

    #[test]
    fn grid_validation() {
        let mut g = small_grid();
        g.ms = vec![];
        assert!(run_grid(&g).is_err());
        let mut g = small_grid();
        g.reps = 0;
        assert!(run_grid(&g).is_err());
        assert!(serde_json::from_str::<ExperimentGrid>(r#"{"sigals": ["lidar"]}"#).is_err());
        let g: ExperimentGrid = serde_json::from_str(r#"{"signals": ["doppler"], "zeta_rules": ["sqrt_alpha", 0.5]}"#).unwrap();
        assert_eq!(g.zeta_rules, vec![ZetaRule::SqrtAlpha, ZetaRule::Fixed(0.5)]);
    }

    #[test]
    fn paired_test_examples() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [0.5, 1.4, 2.6, 3.3];
        let t = paired_test(&a, &b).unwrap();
        assert_abs_diff_eq!(t.mean_diff, 0.55, epsilon = 1e-12);
        assert!(t.greater());
        assert!(!paired_test(&b, &a).unwrap().greater());
        assert!(paired_test(&b, &a).unwrap().less());
        assert!(paired_test(&[1.0], &[0.0]).is_err());
        let same = paired_test(&a, &a).unwrap();
        assert_eq!(same.z, 0.0);
    }

    #[test]
    fn slope_fit_examples() {
        let exact: Vec<(usize, f64, f64)> = [1024usize, 2048, 4096, 8192]
            .iter()
            .map(|&n| (n, 3.0 * (n as f64).powf(-0.4), 0.01 * (n as f64).powf(-0.4)))
            .collect();
        let fit = fit_rate_slope(&exact).unwrap();
        assert_abs_diff_eq!(fit.slope, -0.4, epsilon = 1e-12);
        assert!(fit.se > 0.0);
        assert!(fit_rate_slope(&exact[..2]).is_err());
        let flat: Vec<(usize, f64, f64)> = [64usize, 128, 256].iter().map(|&n| (n, 0.5, 0.0)).collect();
        let fit = fit_rate_slope(&flat).unwrap();
        assert_abs_diff_eq!(fit.slope, 0.0, epsilon = 1e-12);
        assert!(fit_rate_slope(&[(64, 0.0, 0.0), (128, 0.1, 0.0), (256, 0.1, 0.0)]).is_err());
    }

    #[test]
    fn noiseless_slope_is_flat() {
        let ch = [ChannelSpec::new(KernelSpec::Direct, LrdSpec::white(0.0))];
        let config = EstimatorConfig {
            zeta: ZetaRule::Fixed(0.0),
            selection: Selection::Theoretical,
            j1: LevelChoice::Fixed(4),
            ..Default::default()
        };
        let fit = rate_slope(TestSignal::Wave, &ch, &config, &[256, 512, 1024], 1, 0).unwrap();
        assert!(fit.slope.abs() < 0.05, "{fit:?}");
    }
}
