use std::path::{Path, PathBuf};

use log::{info, warn};
use mcwd_core::bench::{self, NoiseLevel};
use mcwd_core::estimator::estimate;
use mcwd_core::model::{simulate, simulate_with_noise_levels};
use mcwd_core::{Error, MeyerBasis, MultichannelObservation};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::formats::{self, Metadata};
use crate::{Cli, Command, SharedArgs, OUT_DIR_ENV};

/// Settings shared by all commands after merging flags, config and environment.
#[derive(Debug, Clone)]
pub struct Context {
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub assert_trends: bool,
}

impl Context {
    pub fn resolve(shared: &SharedArgs, config: &RunConfig) -> Self {
        let out = shared
            .out
            .clone()
            .or_else(|| config.out.clone())
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        Self {
            out,
            seed: shared.seed.or(config.seed),
            assert_trends: shared.assert_trends,
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let config = match &cli.shared.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(threads) = cli.shared.threads.or(config.threads) {
        if threads == 0 {
            return Err(CliError::Validation("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    }
    let ctx = Context::resolve(&cli.shared, &config);
    match &cli.command {
        Command::Simulate => cmd_simulate(&ctx, &config),
        Command::Estimate { observation, metadata } => {
            let mut est = config.estimate.clone();
            est.observation = observation.clone().or(est.observation);
            est.metadata = metadata.clone().or(est.metadata);
            cmd_estimate(&ctx, &RunConfig { estimate: est, ..config })
        }
        Command::Bench => cmd_bench(&ctx, &config),
        Command::Transform { input, j0, j1, inverse } => {
            let mut t = config.transform.clone();
            t.input = input.clone().or(t.input);
            t.j0 = j0.unwrap_or(t.j0);
            t.j1 = j1.or(t.j1);
            t.inverse |= inverse;
            cmd_transform(&ctx, &RunConfig { transform: t, ..config })
        }
        Command::Signals { n } => {
            let mut s = config.signals.clone();
            s.n = n.unwrap_or(s.n);
            cmd_signals(&ctx, &RunConfig { signals: s, ..config })
        }
    }
}

pub fn cmd_simulate(ctx: &Context, config: &RunConfig) -> CliResult<()> {
    let cfg = &config.simulate;
    let (truth, label) = match &cfg.signal_file {
        Some(path) => (formats::read_signal(path)?, path.display().to_string()),
        None => (cfg.signal.sample(cfg.n)?, cfg.signal.to_string()),
    };
    let seed = ctx.seed.unwrap_or(0);
    let (obs, snr_db) = match cfg.noise {
        NoiseLevel::SnrDb(snr) => (simulate(&truth, &cfg.channels, snr, seed)?, Some(snr)),
        NoiseLevel::Fixed => (simulate_with_noise_levels(&truth, &cfg.channels, seed)?, None),
    };
    let meta = Metadata {
        n: obs.n(),
        seed,
        snr_db,
        signal: label,
        channels: obs.channels().to_vec(),
    };
    formats::write_signal(&ctx.path("truth.txt"), &truth)?;
    formats::write_observation(&ctx.path("observation.txt"), obs.samples())?;
    meta.write(&ctx.path("metadata.json"))?;
    let sigmas: Vec<f64> = obs.channels().iter().map(|c| c.lrd.sigma).collect();
    println!("simulated n={} M={} sigma={sigmas:?} -> {}", obs.n(), obs.channel_count(), ctx.out.display());
    Ok(())
}

pub fn load_observation(observation: &Path, metadata: &Path) -> CliResult<MultichannelObservation> {
    let meta = Metadata::read(metadata)?;
    let samples = formats::read_observation(observation, meta.channels.len())?;
    if samples[0].len() != meta.n {
        return Err(CliError::Validation(format!(
            "{} has {} rows but {} records n = {}",
            observation.display(),
            samples[0].len(),
            metadata.display(),
            meta.n
        )));
    }
    MultichannelObservation::from_samples(meta.channels, samples)
        .map_err(|e| CliError::Validation(format!("{}: {e}", metadata.display())))
}

pub fn cmd_estimate(ctx: &Context, config: &RunConfig) -> CliResult<()> {
    let cfg = &config.estimate;
    let observation = cfg.observation.clone().unwrap_or_else(|| ctx.path("observation.txt"));
    let metadata = cfg
        .metadata
        .clone()
        .unwrap_or_else(|| observation.with_file_name("metadata.json"));
    let obs = load_observation(&observation, &metadata)?;
    let mut est_cfg = cfg.estimator.clone();
    if let Some(seed) = ctx.seed {
        est_cfg.probe_seed = seed;
    }
    let est = estimate(&obs, &est_cfg)?;
    for w in &est.report.warnings {
        warn!("{w}");
    }
    formats::write_signal(&ctx.path("reconstruction.txt"), &est.signal)?;
    let report = serde_json::to_string_pretty(&est.report).map_err(|e| CliError::Runtime(e.to_string()))?;
    formats::write_file(&ctx.path("report.json"), &(report + "\n"))?;
    let r = &est.report;
    print!(
        "mode={} j0={} j1={} best_channel={} survivors={}",
        r.mode,
        r.j0,
        r.j1.map_or("-".to_string(), |j| j.to_string()),
        r.best_channel,
        r.survivors()
    );
    if let Some(path) = &cfg.truth {
        let truth = formats::read_signal(path)?;
        print!(" error={}", est.signal.distance(&truth)?);
    }
    println!();
    Ok(())
}

pub fn cmd_bench(ctx: &Context, config: &RunConfig) -> CliResult<()> {
    let mut grid = config.bench.clone();
    if let Some(seed) = ctx.seed {
        grid.master_seed = seed;
    }
    info!("running {} cells x {} replicates", grid.cells().len(), grid.reps);
    let result = bench::run_grid(&grid)?;
    formats::write_file(&ctx.path("bench.csv"), &result.to_csv()?)?;
    formats::write_file(&ctx.path("bench.md"), &result.to_markdown())?;
    formats::write_file(&ctx.path("bench_long.csv"), &result.to_long_csv()?)?;
    print!("{}", result.to_markdown());

    let checks = if grid.reps >= 2 {
        bench::trend_checks(&result)?
    } else {
        Vec::new()
    };
    if !checks.is_empty() {
        formats::write_file(&ctx.path("trends.csv"), &formats::format_trends(&checks)?)?;
    }
    let failed: Vec<_> = checks.iter().filter(|c| !c.passed).collect();
    for c in &checks {
        info!("{c}");
    }

    if !result.failures.is_empty() {
        for (key, msg) in &result.failures {
            eprintln!("cell {key} failed: {msg}");
        }
        return Err(CliError::Runtime(format!("{} cell(s) failed", result.failures.len())));
    }
    if ctx.assert_trends {
        if checks.is_empty() {
            warn!("--assert-trends: the grid has no comparable cells");
        }
        if !failed.is_empty() {
            for c in &failed {
                eprintln!("{c}");
            }
            return Err(CliError::Assertion(format!("{} of {} trend checks failed", failed.len(), checks.len())));
        }
        println!("{} trend checks passed", checks.len());
    }
    Ok(())
}

pub fn cmd_transform(ctx: &Context, config: &RunConfig) -> CliResult<()> {
    let cfg = &config.transform;
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| CliError::Validation("transform needs an input file (--input or transform.input)".into()))?;
    let basis = MeyerBasis::standard();
    if cfg.inverse {
        let (coeffs, n) = formats::parse_coeffs(&formats::read_file(input)?, input)?;
        let signal = basis.inverse_transform(&coeffs, n)?;
        formats::write_signal(&ctx.path("inverse.txt"), &signal)?;
        println!("inverse n={n} -> {}", ctx.path("inverse.txt").display());
        return Ok(());
    }
    let signal = formats::read_signal(input)?;
    let n = signal.len();
    let levels = signal.levels();
    if levels < 2 {
        return Err(CliError::Validation(format!("transform needs n >= 4, got {n}")));
    }
    let top = levels - 2;
    let j1 = cfg.j1.unwrap_or(top);
    if j1 > top {
        return Err(Error::Aliasing { j1, n }.into());
    }
    if cfg.j0 > j1 {
        return Err(Error::LevelRange(format!("j0 = {} exceeds j1 = {j1}", cfg.j0)).into());
    }
    let coeffs = basis.forward_transform(&signal, cfg.j0, j1)?;
    formats::write_file(&ctx.path("coefficients.csv"), &formats::format_coeffs(&coeffs, n)?)?;
    println!("forward n={n} j0={} j1={j1} -> {}", cfg.j0, ctx.path("coefficients.csv").display());
    Ok(())
}

pub fn cmd_signals(ctx: &Context, config: &RunConfig) -> CliResult<()> {
    let cfg = &config.signals;
    if cfg.names.is_empty() {
        return Err(CliError::Validation("signals.names must not be empty".into()));
    }
    for s in &cfg.names {
        let path = ctx.path(&format!("{s}.txt"));
        formats::write_signal(&path, &s.sample(cfg.n)?)?;
        println!("{}", path.display());
    }
    Ok(())
}
