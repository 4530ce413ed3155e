//! `swapsched` command-line tool.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use log::info;
use serde::{Deserialize, Serialize};

use swapsched_core::experiments::{
    build_scenario, run_sweep, scenario_forecaster, Axis, ScenarioConfig, SweepSpec,
    TopologySource, TrafficSourceKind,
};
use swapsched_core::forecast::ForecasterSpec;
use swapsched_core::simulate::TraceSummary;
use swapsched_core::traffic::{apply_shift, generate_synthetic};
use swapsched_core::{
    compute_metrics, hindsight_optimum, run_simulation, Error, Metrics, PolicyConfig,
};

const OUT_ENV: &str = "SWAPSCHED_OUT";
const DEFAULT_OUT: &str = "out";

#[derive(Parser)]
#[command(
    name = "swapsched",
    version,
    about = "Rolling-horizon scheduling of mobile battery-swapping stations"
)]
struct Cli {
    /// Log more (-v info, -vv debug). Logs go to stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic station-demand CSV and the topology it was built on.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Days of hourly demand (default: enough for history plus test hours).
        #[arg(long)]
        days: Option<usize>,
    },
    /// Simulate one policy on one scenario and report its metrics.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Sweep one parameter over several seeds and compare all policies.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// inventory | horizon | mobile-ratio | shift
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated axis values (default: the axis's standard set).
        #[arg(long)]
        values: Option<String>,
        /// Seeds per axis value.
        #[arg(long)]
        repetitions: Option<usize>,
    },
    /// Summarize a trace CSV written by `run`.
    InspectTrace { trace: PathBuf },
}

/// Options shared by the scenario-driven subcommands. Flags override the
/// config file.
#[derive(Args)]
struct Common {
    /// TOML config file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory (default: config `[output] dir`, then $SWAPSCHED_OUT, then ./out).
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Topology edge-list file.
    #[arg(long)]
    topology: Option<PathBuf>,
    /// Station-demand CSV instead of synthetic demand.
    #[arg(long, conflicts_with = "edges")]
    demand: Option<PathBuf>,
    /// Edge-traffic CSV converted to station demand.
    #[arg(long)]
    edges: Option<PathBuf>,
    #[arg(long)]
    swap_rate: Option<f64>,
    #[arg(long)]
    history_hours: Option<usize>,
    /// Simulated hours.
    #[arg(long)]
    hours: Option<usize>,
    #[arg(long)]
    inventory: Option<f64>,
    #[arg(long)]
    mobile_ratio: Option<f64>,
    /// Planning horizon.
    #[arg(long)]
    h: Option<usize>,
    /// oracle | noisy-oracle | seasonal-naive | historical-average
    #[arg(long)]
    forecaster: Option<String>,
    /// Relative noise of the noisy oracle.
    #[arg(long)]
    noise: Option<f64>,
    /// External forecast CSV (`t,step,station,value`).
    #[arg(long, conflicts_with = "forecaster")]
    forecast_file: Option<PathBuf>,
    #[arg(long)]
    shift_hours: Option<usize>,
    #[arg(long)]
    shift_fraction: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SweepSection {
    axis: Option<String>,
    values: Option<Vec<f64>>,
    repetitions: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct OutputSection {
    dir: Option<PathBuf>,
}

struct FileConfig {
    scenario: ScenarioConfig,
    sweep: SweepSection,
    output: OutputSection,
}

enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

type CmdResult<T = ()> = std::result::Result<T, Failure>;

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

/// Core errors caused by bad inputs are usage errors; the rest are runtime.
fn classify(e: Error) -> Failure {
    match e {
        Error::Io { .. }
        | Error::Infeasible(_)
        | Error::NegativeCycle
        | Error::InconsistentFlow(_) => runtime(e),
        _ => usage(e),
    }
}

fn take_section<T: Default + serde::de::DeserializeOwned>(
    table: &mut toml::Table,
    key: &str,
    path: &Path,
) -> CmdResult<T> {
    match table.remove(key) {
        Some(v) => v
            .try_into()
            .map_err(|e| usage(anyhow!("config {} [{key}]: {e}", path.display()))),
        None => Ok(T::default()),
    }
}

fn load_config(path: Option<&Path>) -> CmdResult<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig {
            scenario: ScenarioConfig::default(),
            sweep: SweepSection::default(),
            output: OutputSection::default(),
        });
    };
    let text = fs::read_to_string(path)
        .map_err(|e| usage(anyhow!("cannot read config {}: {e}", path.display())))?;
    let mut table: toml::Table = text
        .parse()
        .map_err(|e| usage(anyhow!("config {}: {e}", path.display())))?;
    let sweep: SweepSection = take_section(&mut table, "sweep", path)?;
    let output: OutputSection = take_section(&mut table, "output", path)?;
    let scenario: ScenarioConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e| usage(anyhow!("config {}: {e}", path.display())))?;
    Ok(FileConfig {
        scenario,
        sweep,
        output,
    })
}

fn forecaster_from_name(name: &str, noise: Option<f64>) -> CmdResult<ForecasterSpec> {
    Ok(match name {
        "oracle" => ForecasterSpec::Oracle,
        "noisy-oracle" => ForecasterSpec::NoisyOracle {
            noise: noise.unwrap_or(0.15),
            noise_growth: 0.0,
            seed: 0,
        },
        "seasonal-naive" => ForecasterSpec::SeasonalNaive { period: 24 },
        "historical-average" => ForecasterSpec::HistoricalAverage {
            period: 24,
            window: None,
        },
        other => return Err(usage(anyhow!("unknown forecaster {other:?}"))),
    })
}

impl Common {
    fn apply(&self, cfg: &mut ScenarioConfig) -> CmdResult {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(path) = &self.topology {
            cfg.topology = TopologySource::File { path: path.clone() };
        }
        if let Some(path) = &self.demand {
            cfg.traffic.source = TrafficSourceKind::StationCsv;
            cfg.traffic.path = Some(path.clone());
        }
        if let Some(path) = &self.edges {
            cfg.traffic.source = TrafficSourceKind::EdgeCsv;
            cfg.traffic.path = Some(path.clone());
        }
        if let Some(rate) = self.swap_rate {
            cfg.traffic.swap_rate = rate;
        }
        if let Some(v) = self.history_hours {
            cfg.history_hours = v;
        }
        if let Some(v) = self.hours {
            cfg.test_hours = v;
        }
        if let Some(v) = self.inventory {
            cfg.fleet.inventory_level = v;
        }
        if let Some(v) = self.mobile_ratio {
            cfg.fleet.mobile_ratio = v;
        }
        if let Some(v) = self.h {
            cfg.policy.h = v;
        }
        if let Some(name) = &self.forecaster {
            cfg.policy.forecaster = forecaster_from_name(name, self.noise)?;
        } else if let Some(noise) = self.noise {
            match &mut cfg.policy.forecaster {
                ForecasterSpec::NoisyOracle { noise: n, .. } => *n = noise,
                _ => {
                    return Err(usage(anyhow!(
                        "--noise applies to the noisy-oracle forecaster only"
                    )))
                }
            }
        }
        if let Some(path) = &self.forecast_file {
            cfg.policy.forecaster = ForecasterSpec::ExternalFile { path: path.clone() };
        }
        if let Some(v) = self.shift_hours {
            cfg.shift.hours = v;
        }
        if let Some(v) = self.shift_fraction {
            cfg.shift.fraction = v;
        }
        Ok(())
    }

    /// Loads the config, applies flag overrides, checks referenced files
    /// and resolves the output directory.
    fn resolve(&self) -> CmdResult<(FileConfig, PathBuf)> {
        let mut file = load_config(self.config.as_deref())?;
        self.apply(&mut file.scenario)?;
        check_paths(&file.scenario)?;
        file.scenario.validate().map_err(usage)?;
        let out = self
            .out
            .clone()
            .or_else(|| file.output.dir.clone())
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        Ok((file, out))
    }
}

fn check_paths(cfg: &ScenarioConfig) -> CmdResult {
    let mut paths: Vec<(&str, &Path)> = Vec::new();
    if let TopologySource::File { path } = &cfg.topology {
        paths.push(("topology", path));
    }
    if cfg.traffic.source != TrafficSourceKind::Synthetic {
        match &cfg.traffic.path {
            Some(path) => paths.push(("traffic", path)),
            None => {
                return Err(usage(anyhow!(
                    "traffic.path is required for CSV traffic sources"
                )))
            }
        }
    }
    let forecasters =
        std::iter::once(&cfg.policy.forecaster).chain(cfg.policies.iter().map(|p| &p.forecaster));
    for spec in forecasters {
        if let ForecasterSpec::ExternalFile { path } = spec {
            paths.push(("forecast", path));
        }
    }
    for (what, path) in paths {
        if !path.is_file() {
            return Err(usage(anyhow!("{what} file not found: {}", path.display())));
        }
    }
    Ok(())
}

fn create_dir(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))
        .map_err(runtime)
}

fn write_file(path: &Path, contents: &str) -> CmdResult {
    fs::write(path, contents)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(runtime)?;
    info!("wrote {}", path.display());
    Ok(())
}

/// Writes one line of machine-readable output; a closed stdout is not an error.
fn emit(text: &str) -> CmdResult {
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(runtime(e)),
        _ => Ok(()),
    }
}

fn cmd_generate(common: &Common, days: Option<usize>) -> CmdResult {
    let (file, out) = common.resolve()?;
    let cfg = &file.scenario;
    if cfg.traffic.source != TrafficSourceKind::Synthetic {
        return Err(usage(anyhow!("generate only produces synthetic demand")));
    }
    let days = days.unwrap_or_else(|| (cfg.history_hours + cfg.test_hours).div_ceil(24));
    let topo = cfg.topology.load().map_err(classify)?;
    let mut series =
        generate_synthetic(&topo, days, cfg.seed, &cfg.traffic.synthetic).map_err(classify)?;
    if let Some(spec) = cfg.shift_spec(topo.station_count()) {
        series = apply_shift(&series, &spec).map_err(classify)?;
    }
    create_dir(&out)?;
    write_file(&out.join("demand.csv"), &series.to_csv())?;
    write_file(&out.join("topology.txt"), &topo.to_edge_list())?;
    emit(&out.join("demand.csv").display().to_string())?;
    Ok(())
}

#[derive(Serialize)]
struct RunSummary {
    seed: u64,
    policy: &'static str,
    h: usize,
    hours: usize,
    stations: usize,
    fixed_batteries: u32,
    mobile_batteries: u32,
    hindsight_lost: u64,
    #[serde(flatten)]
    metrics: Metrics,
}

fn cmd_run(common: &Common) -> CmdResult {
    let (file, out) = common.resolve()?;
    let cfg = &file.scenario;
    let scenario = build_scenario(cfg).map_err(classify)?;
    info!(
        "scenario: {} stations, {} fixed + {} mobile batteries",
        scenario.topo.station_count(),
        scenario.fleet.fixed,
        scenario.fleet.mobile
    );
    let policy = PolicyConfig {
        forecaster: scenario_forecaster(&cfg.policy.forecaster, cfg.seed),
        ..cfg.policy.clone()
    };
    let best = hindsight_optimum(
        &scenario.topo,
        &scenario.demand,
        &scenario.fixed,
        &scenario.initial,
        scenario.window,
    )
    .map_err(classify)?;
    let trace = run_simulation(
        &scenario.topo,
        &scenario.demand,
        &scenario.fixed,
        &scenario.initial,
        &policy,
        scenario.window,
    )
    .map_err(classify)?;
    let summary = RunSummary {
        seed: cfg.seed,
        policy: policy.forecaster.name(),
        h: policy.h,
        hours: scenario.window.hours,
        stations: scenario.topo.station_count(),
        fixed_batteries: scenario.fleet.fixed,
        mobile_batteries: scenario.fleet.mobile,
        hindsight_lost: best,
        metrics: compute_metrics(&trace, best),
    };
    let json = serde_json::to_string_pretty(&summary).map_err(runtime)?;
    create_dir(&out)?;
    write_file(&out.join("trace.csv"), &trace.to_csv())?;
    write_file(&out.join("metrics.json"), &format!("{json}\n"))?;
    emit(&json)?;
    Ok(())
}

fn parse_values(text: &str) -> CmdResult<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| usage(anyhow!("invalid axis value {s:?}")))
        })
        .collect()
}

fn cmd_sweep(
    common: &Common,
    axis: Option<&str>,
    values: Option<&str>,
    repetitions: Option<usize>,
) -> CmdResult {
    let (file, out) = common.resolve()?;
    let axis_name = axis
        .map(str::to_string)
        .or(file.sweep.axis.clone())
        .ok_or_else(|| usage(anyhow!("sweep needs --axis or [sweep] axis")))?;
    let axis =
        Axis::parse(&axis_name).ok_or_else(|| usage(anyhow!("unknown axis {axis_name:?}")))?;
    let values = match values {
        Some(text) => parse_values(text)?,
        None => file
            .sweep
            .values
            .clone()
            .unwrap_or_else(|| axis.default_values()),
    };
    let spec = SweepSpec {
        axis,
        values,
        repetitions: repetitions.or(file.sweep.repetitions).unwrap_or(1),
    };
    spec.validate().map_err(usage)?;
    info!(
        "sweeping {} over {:?} with {} seed(s)",
        axis.as_str(),
        spec.values,
        spec.repetitions
    );
    let results = run_sweep(&spec, &file.scenario).map_err(classify)?;
    create_dir(&out)?;
    write_file(&out.join("results.csv"), &results.to_csv())?;
    write_file(
        &out.join("plot.json"),
        &format!("{}\n", results.plot_json()),
    )?;
    emit(&out.join("results.csv").display().to_string())?;
    Ok(())
}

#[derive(Serialize)]
struct TraceReport {
    #[serde(flatten)]
    summary: TraceSummary,
    lost_ratio: f64,
}

fn cmd_inspect(trace: &Path) -> CmdResult {
    if !trace.is_file() {
        return Err(usage(anyhow!("trace file not found: {}", trace.display())));
    }
    let summary = TraceSummary::load(trace).map_err(classify)?;
    let report = TraceReport {
        lost_ratio: summary.lost_ratio(),
        summary,
    };
    emit(&serde_json::to_string_pretty(&report).map_err(runtime)?)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();

    let result = match &cli.command {
        Command::Generate { common, days } => cmd_generate(common, *days),
        Command::Run { common } => cmd_run(common),
        Command::Sweep {
            common,
            axis,
            values,
            repetitions,
        } => cmd_sweep(common, axis.as_deref(), values.as_deref(), *repetitions),
        Command::InspectTrace { trace } => cmd_inspect(trace),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
