// SPDX-License-Identifier: MIT OR Apache-2.0

//! Argument parsing and the four subcommands.

use crate::config::{ConfigLayer, RunConfig};
use clap::{Args, Parser, Subcommand};
use std::fs;
use std::path::{Path, PathBuf};
use varseg::io::{ingest_csv, read_json, write_json, write_series_file, IngestOptions};
use varseg::pipeline::{
    detect, run_replicates, schedule_for, DetectOptions, DetectionReport, ReplicateConfig, DEFAULT_ETA_C,
};
use varseg::plot::{render_svg, PlotBundle};
use varseg::sim::{make_scenario, simulate, ScenarioId, ScenarioPreset};
use varseg::stage1::BcdOptions;
use varseg::stage2::Strategy;
use varseg::{TuningSchedule, VarsegError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    NotConverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Data(_) => EXIT_DATA,
            Self::NotConverged(_) => EXIT_NOT_CONVERGED,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Data(m) => write!(f, "{m}"),
            Self::NotConverged(m) => write!(f, "not converged: {m}"),
        }
    }
}

fn data_err(stage: &'static str) -> impl Fn(VarsegError) -> CliError {
    move |e| CliError::Data(e.in_stage(stage).to_string())
}

#[derive(Debug, Parser)]
#[command(name = "varseg", version, about = "Structural break detection for piecewise VAR models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a benchmark scenario; writes data.csv and model.json.
    Simulate(Flags),
    /// Detect breaks in a CSV series; writes result.json, plot.json, plot.svg and markers.csv.
    Detect(Flags),
    /// Run seeded replicates of a scenario; writes summary.csv and summary.json.
    Evaluate(Flags),
    /// Render a plot bundle JSON to plot.svg.
    Plot(Flags),
}

#[derive(Debug, Default, Args)]
pub struct Flags {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON config file; flags take precedence over its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long = "lambda-c")]
    pub lambda_c: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long = "omega-v")]
    pub omega_v: Option<f64>,
    #[arg(long, value_parser = ["backward", "exhaustive"])]
    pub strategy: Option<String>,
    #[arg(long = "exhaustive-cap")]
    pub exhaustive_cap: Option<usize>,
    #[arg(long = "zero-tol")]
    pub zero_tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub scenario: Option<u8>,
    #[arg(long)]
    pub difference: bool,
    #[arg(long)]
    pub downsample: Option<usize>,
    #[arg(long)]
    pub center: bool,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub strict: bool,
}

impl Flags {
    /// The flags that were actually given, as a config layer.
    pub fn layer(&self) -> ConfigLayer {
        ConfigLayer {
            input: self.input.clone(),
            out: self.out.clone(),
            d: self.d,
            lambda_c: self.lambda_c,
            eta: self.eta,
            omega_v: self.omega_v,
            strategy: self.strategy.as_deref().map(|s| s.parse::<Strategy>().expect("validated by clap")),
            exhaustive_cap: self.exhaustive_cap,
            zero_tol: self.zero_tol,
            seed: self.seed,
            replicates: self.replicates,
            scenario: self.scenario,
            difference: self.difference.then_some(true),
            downsample: self.downsample,
            center: self.center.then_some(true),
            jobs: self.jobs,
            strict: self.strict.then_some(true),
            ..ConfigLayer::default()
        }
    }

    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(path) => Some(ConfigLayer::from_file(path).map_err(CliError::Usage)?),
            None => None,
        };
        RunConfig::resolve(file.as_ref(), &self.layer()).map_err(CliError::Usage)
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run_from<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return Ok(());
        }
        Err(e) => return Err(CliError::Usage(e.to_string())),
    };
    run(&cli.command)
}

pub fn run(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Simulate(f) => cmd_simulate(&f.resolve()?),
        Command::Detect(f) => cmd_detect(&f.resolve()?),
        Command::Evaluate(f) => cmd_evaluate(&f.resolve()?),
        Command::Plot(f) => cmd_plot(&f.resolve()?),
    }
}

fn out_dir(cfg: &RunConfig) -> Result<&Path, CliError> {
    fs::create_dir_all(&cfg.out)
        .map_err(|e| CliError::Data(format!("output: cannot create {}: {e}", cfg.out.display())))?;
    Ok(&cfg.out)
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Data(format!("output: cannot write {}: {e}", path.display())))
}

fn preset_for(cfg: &RunConfig) -> Result<ScenarioPreset, CliError> {
    let id = ScenarioId::from_number(cfg.scenario)
        .ok_or_else(|| CliError::Usage(format!("unknown scenario {}", cfg.scenario)))?;
    Ok(ScenarioPreset::new(id))
}

/// Tuning schedule for a series of `len` points under `cfg`.
pub fn schedule(cfg: &RunConfig, len: usize, p: usize) -> Result<TuningSchedule, CliError> {
    let mut s = schedule_for(len, p, cfg.d, cfg.lambda_c, cfg.omega_v, DEFAULT_ETA_C).map_err(data_err("schedule"))?;
    if let Some(eta) = cfg.eta {
        s.eta_n = eta;
    }
    if let Some(omega) = cfg.omega {
        s = s.with_omega(omega);
    }
    Ok(s)
}

pub fn detect_options(cfg: &RunConfig) -> DetectOptions {
    DetectOptions {
        bcd: BcdOptions {
            max_sweeps: cfg.max_sweeps,
            tol: cfg.tol,
            ..BcdOptions::default()
        },
        zero_tol: cfg.zero_tol,
        strategy: cfg.strategy,
        exhaustive_cap: cfg.exhaustive_cap,
        ..DetectOptions::default()
    }
}

fn cmd_simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let preset = preset_for(cfg)?;
    let sim = make_scenario(&preset, cfg.seed);
    let data = simulate(&sim).map_err(data_err("simulate"))?;
    let dir = out_dir(cfg)?;
    write_series_file(&data, &dir.join("data.csv")).map_err(data_err("output"))?;
    write_json(&sim.model, &dir.join("model.json")).map_err(data_err("output"))?;
    log::info!("simulate: scenario {} seed {} -> {}", cfg.scenario, cfg.seed, dir.display());
    Ok(())
}

fn cmd_detect(cfg: &RunConfig) -> Result<(), CliError> {
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| CliError::Usage("detect needs --input".into()))?;
    let ingest = IngestOptions {
        difference: cfg.difference,
        downsample: cfg.downsample,
        center: cfg.center,
    };
    let data = ingest_csv(input, &ingest).map_err(data_err("ingest"))?;
    let sched = schedule(cfg, data.len(), data.dim())?;
    let result = detect(&data, cfg.d, &sched, &detect_options(cfg)).map_err(|e| CliError::Data(e.to_string()))?;

    let dir = out_dir(cfg)?;
    write_json(&DetectionReport::from(&result), &dir.join("result.json")).map_err(data_err("output"))?;
    let bundle = PlotBundle::from_detection(&data, &result);
    write_json(&bundle, &dir.join("plot.json")).map_err(data_err("output"))?;
    write_text(&dir.join("plot.svg"), &render_svg(&bundle).map_err(data_err("plot"))?)?;
    write_text(&dir.join("markers.csv"), &bundle.markers_csv())?;
    println!("{}", join(&result.final_breaks));

    if !result.estimate.converged {
        let msg = format!("stage 1: no convergence after {} sweeps", result.estimate.iterations);
        if cfg.strict {
            return Err(CliError::NotConverged(msg));
        }
        log::warn!("{msg}");
    }
    Ok(())
}

fn cmd_evaluate(cfg: &RunConfig) -> Result<(), CliError> {
    let preset = preset_for(cfg)?;
    let config = ReplicateConfig {
        schedule: schedule(cfg, preset.len, preset.p)?,
        options: detect_options(cfg),
        window_frac: cfg.window,
        coverage_radius: None,
    };
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(j) = cfg.jobs {
            b = b.num_threads(j);
        }
        b.build().map_err(|e| CliError::Usage(format!("jobs: {e}")))?
    };
    let summary = pool
        .install(|| run_replicates(&preset, cfg.replicates, cfg.seed, &config))
        .map_err(data_err("evaluate"))?;

    let dir = out_dir(cfg)?;
    write_text(&dir.join("summary.csv"), &summary.to_csv())?;
    write_json(&summary, &dir.join("summary.json")).map_err(data_err("output"))?;
    print!("{}", summary.to_csv());

    let stalled = summary.outcomes.iter().filter(|o| !o.stage1_converged).count();
    if summary.failures > 0 {
        log::warn!("evaluate: {} of {} replicates failed", summary.failures, summary.replicates);
    }
    if stalled > 0 {
        let msg = format!("stage 1 did not converge in {stalled} of {} replicates", summary.replicates);
        if cfg.strict {
            return Err(CliError::NotConverged(msg));
        }
        log::warn!("{msg}");
    }
    Ok(())
}

fn cmd_plot(cfg: &RunConfig) -> Result<(), CliError> {
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| CliError::Usage("plot needs --input".into()))?;
    let bundle: PlotBundle = read_json(input).map_err(data_err("plot"))?;
    let svg = render_svg(&bundle).map_err(data_err("plot"))?;
    let dir = out_dir(cfg)?;
    write_text(&dir.join("plot.svg"), &svg)
}

fn join(breaks: &[usize]) -> String {
    breaks.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}
