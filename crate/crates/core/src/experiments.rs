//! Scenario construction and parameter sweeps.
//!
//! A scenario is a topology, an hourly demand series split into a history
//! prefix and a simulated window, and a battery fleet sized from the
//! window's mean demand. Every policy in a scenario starts from the same
//! fixed stock and the same initial mobile placement, so the hindsight
//! optimum is a lower bound for all of them.

use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocation::{allocate_fixed, allocate_mobile_initial, FleetConfig, FleetSize};
use crate::error::{Error, Result};
use crate::forecast::{Forecaster, ForecasterSpec};
use crate::scheduler::{Integerization, PolicyConfig};
use crate::simulate::{
    compute_metrics, hindsight_optimum, relative_to_oracle, run_with_forecaster, SimWindow,
};
use crate::topology::{load_topology, Topology};
use crate::traffic::{
    apply_shift, apply_shift_edges, edge_to_station_demand, generate_synthetic, SeasonalitySpec,
    ShiftSpec, TrafficSeries,
};

const SHIFT_SALT: u64 = 0x5348_4946_5453_4545;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TopologySource {
    Grid { rows: usize, cols: usize },
    Ring { n: usize },
    Path { n: usize },
    File { path: PathBuf },
}

impl Default for TopologySource {
    fn default() -> Self {
        TopologySource::Grid { rows: 3, cols: 4 }
    }
}

impl TopologySource {
    pub fn load(&self) -> Result<Topology> {
        match self {
            TopologySource::Grid { rows, cols } if rows * cols > 0 => {
                Ok(Topology::grid(*rows, *cols))
            }
            TopologySource::Ring { n } if *n >= 3 => Ok(Topology::ring(*n)),
            TopologySource::Path { n } if *n >= 1 => Ok(Topology::path(*n)),
            TopologySource::File { path } => load_topology(path),
            other => Err(Error::InvalidParam(format!(
                "degenerate topology {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrafficSourceKind {
    #[default]
    Synthetic,
    StationCsv,
    EdgeCsv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    pub source: TrafficSourceKind,
    /// CSV path for the file-backed sources.
    pub path: Option<PathBuf>,
    /// Fraction of incident edge traffic that becomes swap demand.
    pub swap_rate: f64,
    pub synthetic: SeasonalitySpec,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig {
            source: TrafficSourceKind::Synthetic,
            path: None,
            swap_rate: 1.0,
            synthetic: SeasonalitySpec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShiftConfig {
    /// Fraction of stations whose demand is advanced.
    pub fraction: f64,
    pub hours: usize,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        ShiftConfig {
            fraction: 0.3,
            hours: 0,
        }
    }
}

/// A rolling policy compared in sweeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedPolicy {
    pub name: String,
    pub forecaster: ForecasterSpec,
}

pub const HINDSIGHT: &str = "hindsight";

pub fn default_policies() -> Vec<NamedPolicy> {
    vec![
        NamedPolicy {
            name: "oracle".into(),
            forecaster: ForecasterSpec::Oracle,
        },
        NamedPolicy {
            name: "noisy-oracle".into(),
            forecaster: ForecasterSpec::NoisyOracle {
                noise: 0.15,
                noise_growth: 0.0,
                seed: 0,
            },
        },
        // sharper on the first steps, worse further out
        NamedPolicy {
            name: "noisy-oracle-ramp".into(),
            forecaster: ForecasterSpec::NoisyOracle {
                noise: 0.09,
                noise_growth: 0.25,
                seed: 0,
            },
        },
        NamedPolicy {
            name: "seasonal-naive".into(),
            forecaster: ForecasterSpec::SeasonalNaive { period: 24 },
        },
    ]
}

fn default_policy() -> PolicyConfig {
    PolicyConfig {
        h: 6,
        forecaster: ForecasterSpec::NoisyOracle {
            noise: 0.15,
            noise_growth: 0.0,
            seed: 0,
        },
        integerization: Integerization::HalfUp,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub topology: TopologySource,
    pub traffic: TrafficConfig,
    /// Hours of demand before the simulated window (forecaster history).
    pub history_hours: usize,
    /// Simulated hours.
    pub test_hours: usize,
    pub fleet: FleetConfig,
    /// Horizon of the initial-placement model.
    pub alloc_horizon: usize,
    /// Policy for single runs.
    pub policy: PolicyConfig,
    /// Rolling policies compared in sweeps (hindsight is always added).
    pub policies: Vec<NamedPolicy>,
    pub shift: ShiftConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 1,
            topology: TopologySource::default(),
            traffic: TrafficConfig::default(),
            history_hours: 7 * 24,
            test_hours: 48,
            fleet: FleetConfig::default(),
            alloc_horizon: 6,
            policy: default_policy(),
            policies: default_policies(),
            shift: ShiftConfig::default(),
        }
    }
}

impl ScenarioConfig {
    /// Stations to shift, drawn from the seed alone so that every shift
    /// magnitude moves the same stations.
    pub fn shift_spec(&self, station_count: usize) -> Option<ShiftSpec> {
        (self.shift.hours > 0).then(|| {
            ShiftSpec::random(
                station_count,
                self.shift.fraction,
                self.shift.hours,
                self.seed ^ SHIFT_SALT,
            )
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.fleet.validate()?;
        self.policy.validate()?;
        for p in &self.policies {
            p.forecaster.validate()?;
            if p.name == HINDSIGHT {
                return Err(Error::InvalidParam(format!(
                    "policy name {HINDSIGHT:?} is reserved"
                )));
            }
        }
        if self.test_hours == 0 {
            return Err(Error::InvalidParam("test_hours must be at least 1".into()));
        }
        if self.alloc_horizon == 0 {
            return Err(Error::InvalidParam(
                "alloc_horizon must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.shift.fraction) {
            return Err(Error::InvalidParam(
                "shift fraction must lie in [0, 1]".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.traffic.swap_rate) {
            return Err(Error::InvalidParam("swap_rate must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Everything needed to simulate policies on one scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub topo: Topology,
    pub demand: TrafficSeries,
    pub window: SimWindow,
    pub fleet: FleetSize,
    pub fixed: Vec<u32>,
    pub initial: Vec<u32>,
    pub shift: Option<ShiftSpec>,
}

pub fn build_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let topo = cfg.topology.load()?;
    let n = topo.station_count();
    let hours_needed = cfg.history_hours + cfg.test_hours;
    let shift = cfg.shift_spec(n);

    let csv_path = || {
        cfg.traffic
            .path
            .as_ref()
            .ok_or_else(|| Error::InvalidParam("traffic.path is required for CSV sources".into()))
    };
    let demand = match cfg.traffic.source {
        TrafficSourceKind::Synthetic => {
            let days = hours_needed.div_ceil(24);
            let series = generate_synthetic(&topo, days, cfg.seed, &cfg.traffic.synthetic)?;
            match &shift {
                Some(s) => apply_shift(&series, s)?,
                None => series,
            }
        }
        TrafficSourceKind::StationCsv => {
            let series = TrafficSeries::load_csv(csv_path()?)?;
            match &shift {
                Some(s) => apply_shift(&series, s)?,
                None => series,
            }
        }
        TrafficSourceKind::EdgeCsv => {
            let mut edges = TrafficSeries::load_csv(csv_path()?)?;
            if let Some(s) = &shift {
                edges = apply_shift_edges(&edges, &topo, s)?;
            }
            edge_to_station_demand(&edges, &topo, cfg.traffic.swap_rate)?
        }
    };
    if demand.series_count() != n {
        return Err(Error::Dimension(format!(
            "demand has {} series, topology {n} stations",
            demand.series_count()
        )));
    }
    if demand.horizon() < hours_needed {
        return Err(Error::Dimension(format!(
            "demand covers {} hours, scenario needs {hours_needed}",
            demand.horizon()
        )));
    }

    let window = SimWindow {
        start: cfg.history_hours,
        hours: cfg.test_hours,
    };
    let test_range = window.start..window.start + window.hours;
    let avg = demand.means(test_range);
    let fleet = cfg.fleet.size(&avg)?;
    let fixed = allocate_fixed(&avg, fleet.fixed)?;
    let alloc_end = window.start + cfg.alloc_horizon.min(window.hours);
    let initial = allocate_mobile_initial(
        &topo,
        &fixed,
        &demand.rows()[window.start..alloc_end],
        fleet.mobile,
    )?;

    Ok(Scenario {
        topo,
        demand,
        window,
        fleet,
        fixed,
        initial,
        shift,
    })
}

/// Reseeds noisy forecasters per scenario so repetitions draw fresh noise.
pub fn scenario_forecaster(spec: &ForecasterSpec, scenario_seed: u64) -> ForecasterSpec {
    match spec {
        ForecasterSpec::NoisyOracle {
            noise,
            noise_growth,
            seed,
        } => ForecasterSpec::NoisyOracle {
            noise: *noise,
            noise_growth: *noise_growth,
            seed: seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ scenario_seed,
        },
        other => other.clone(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutcome {
    pub policy: String,
    pub total_demand: u64,
    pub total_lost: u64,
    pub lost_ratio: f64,
    pub relative_to_oracle: f64,
}

/// Hindsight first, then each rolling policy with planning horizon `h`.
pub fn evaluate_policies(
    scenario: &Scenario,
    policies: &[NamedPolicy],
    h: usize,
    integerization: Integerization,
    seed: u64,
) -> Result<Vec<PolicyOutcome>> {
    let Scenario {
        topo,
        demand,
        window,
        fixed,
        initial,
        ..
    } = scenario;
    let best = hindsight_optimum(topo, demand, fixed, initial, *window)?;
    let total_demand: u64 = demand.rows()[window.start..window.start + window.hours]
        .iter()
        .flatten()
        .map(|&v| u64::from(v))
        .sum();
    let mut out = vec![PolicyOutcome {
        policy: HINDSIGHT.into(),
        total_demand,
        total_lost: best,
        lost_ratio: if total_demand == 0 {
            0.0
        } else {
            best as f64 / total_demand as f64
        },
        relative_to_oracle: relative_to_oracle(best, best),
    }];
    for p in policies {
        let cfg = PolicyConfig {
            h,
            forecaster: scenario_forecaster(&p.forecaster, seed),
            integerization,
        };
        let forecaster = Forecaster::new(cfg.forecaster.clone())?;
        let trace = run_with_forecaster(topo, demand, fixed, initial, &cfg, &forecaster, *window)?;
        let m = compute_metrics(&trace, best);
        out.push(PolicyOutcome {
            policy: p.name.clone(),
            total_demand: m.total_demand,
            total_lost: m.total_lost,
            lost_ratio: m.lost_ratio,
            relative_to_oracle: m.relative_to_oracle,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    Inventory,
    Horizon,
    MobileRatio,
    Shift,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Inventory => "inventory",
            Axis::Horizon => "horizon",
            Axis::MobileRatio => "mobile-ratio",
            Axis::Shift => "shift",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.replace('_', "-").as_str() {
            "inventory" => Some(Axis::Inventory),
            "horizon" => Some(Axis::Horizon),
            "mobile-ratio" => Some(Axis::MobileRatio),
            "shift" => Some(Axis::Shift),
            _ => None,
        }
    }

    /// Standard values for each axis.
    pub fn default_values(self) -> Vec<f64> {
        match self {
            Axis::Inventory => vec![0.6, 0.75, 0.9],
            Axis::Horizon => vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            Axis::MobileRatio => vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
            Axis::Shift => vec![0.0, 4.0, 8.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
    /// Seeds `base.seed .. base.seed + repetitions`.
    pub repetitions: usize,
}

fn as_whole(v: f64) -> Option<usize> {
    (v >= 0.0 && v.fract() == 0.0).then_some(v as usize)
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidParam(
                "sweep needs at least one axis value".into(),
            ));
        }
        if self.repetitions == 0 {
            return Err(Error::InvalidParam(
                "sweep needs at least one repetition".into(),
            ));
        }
        for &v in &self.values {
            let ok = match self.axis {
                Axis::Inventory => v > 0.0 && v <= 1.5,
                Axis::Horizon => as_whole(v).is_some_and(|h| (1..=6).contains(&h)),
                Axis::MobileRatio => (0.0..=1.0).contains(&v),
                Axis::Shift => as_whole(v).is_some_and(|s| s <= 23),
            };
            if !ok {
                return Err(Error::InvalidParam(format!(
                    "value {v} out of range for axis {}",
                    self.axis.as_str()
                )));
            }
        }
        Ok(())
    }

    fn apply(&self, base: &ScenarioConfig, value: f64, seed: u64) -> ScenarioConfig {
        let mut cfg = base.clone();
        cfg.seed = seed;
        match self.axis {
            Axis::Inventory => cfg.fleet.inventory_level = value,
            Axis::Horizon => cfg.policy.h = value as usize,
            Axis::MobileRatio => cfg.fleet.mobile_ratio = value,
            Axis::Shift => cfg.shift.hours = value as usize,
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub axis_value: f64,
    pub policy: String,
    pub seed: u64,
    pub total_demand: u64,
    pub total_lost: u64,
    pub lost_ratio: f64,
    pub relative_to_oracle: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResults {
    pub axis: Axis,
    pub rows: Vec<ResultRow>,
}

pub const RESULTS_HEADER: &str =
    "axis_value,policy,seed,total_demand,total_lost,lost_ratio,relative_to_oracle";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotPoint {
    pub axis_value: f64,
    pub n: usize,
    pub mean_lost_ratio: f64,
    pub std_lost_ratio: f64,
    /// `None` when some repetition has an infinite ratio.
    pub mean_relative_to_oracle: Option<f64>,
    pub std_relative_to_oracle: Option<f64>,
    pub mean_total_lost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotSeries {
    pub policy: String,
    pub points: Vec<PlotPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotData {
    pub axis: &'static str,
    pub series: Vec<PlotSeries>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl SweepResults {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{RESULTS_HEADER}\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.axis_value,
                r.policy,
                r.seed,
                r.total_demand,
                r.total_lost,
                r.lost_ratio,
                r.relative_to_oracle
            );
        }
        out
    }

    /// Policies in first-appearance order.
    pub fn policies(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        for r in &self.rows {
            if !names.contains(&r.policy) {
                names.push(r.policy.clone());
            }
        }
        names
    }

    /// Axis values in first-appearance order.
    pub fn axis_values(&self) -> Vec<f64> {
        let mut vals: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !vals.contains(&r.axis_value) {
                vals.push(r.axis_value);
            }
        }
        vals
    }

    pub fn cell(&self, policy: &str, axis_value: f64) -> impl Iterator<Item = &ResultRow> {
        let policy = policy.to_string();
        self.rows
            .iter()
            .filter(move |r| r.policy == policy && r.axis_value == axis_value)
    }

    pub fn mean_lost_ratio(&self, policy: &str, axis_value: f64) -> f64 {
        let xs: Vec<f64> = self
            .cell(policy, axis_value)
            .map(|r| r.lost_ratio)
            .collect();
        mean_std(&xs).0
    }

    pub fn plot_data(&self) -> PlotData {
        let series = self
            .policies()
            .into_iter()
            .map(|policy| {
                let points = self
                    .axis_values()
                    .into_iter()
                    .map(|x| {
                        let rows: Vec<&ResultRow> = self.cell(&policy, x).collect();
                        let lr: Vec<f64> = rows.iter().map(|r| r.lost_ratio).collect();
                        let rel: Vec<f64> = rows.iter().map(|r| r.relative_to_oracle).collect();
                        let lost: Vec<f64> = rows.iter().map(|r| r.total_lost as f64).collect();
                        let (mean_lr, std_lr) = mean_std(&lr);
                        let (mean_rel, std_rel) = if rel.iter().all(|v| v.is_finite()) {
                            let (m, s) = mean_std(&rel);
                            (Some(m), Some(s))
                        } else {
                            (None, None)
                        };
                        PlotPoint {
                            axis_value: x,
                            n: rows.len(),
                            mean_lost_ratio: mean_lr,
                            std_lost_ratio: std_lr,
                            mean_relative_to_oracle: mean_rel,
                            std_relative_to_oracle: std_rel,
                            mean_total_lost: mean_std(&lost).0,
                        }
                    })
                    .collect();
                PlotSeries { policy, points }
            })
            .collect();
        PlotData {
            axis: self.axis.as_str(),
            series,
        }
    }

    pub fn plot_json(&self) -> String {
        serde_json::to_string_pretty(&self.plot_data()).expect("plot data serializes")
    }
}

/// Runs every (axis value, seed) cell, in parallel, and returns rows ordered
/// by axis value, then seed, then policy.
pub fn run_sweep(spec: &SweepSpec, base: &ScenarioConfig) -> Result<SweepResults> {
    spec.validate()?;
    base.validate()?;
    let cells: Vec<(f64, u64)> = spec
        .values
        .iter()
        .flat_map(|&v| (0..spec.repetitions as u64).map(move |r| (v, base.seed + r)))
        .collect();
    let per_cell: Vec<Vec<ResultRow>> = cells
        .par_iter()
        .map(|&(value, seed)| {
            let cfg = spec.apply(base, value, seed);
            let scenario = build_scenario(&cfg)?;
            let outcomes = evaluate_policies(
                &scenario,
                &cfg.policies,
                cfg.policy.h,
                cfg.policy.integerization,
                seed,
            )?;
            Ok(outcomes
                .into_iter()
                .map(|o| ResultRow {
                    axis_value: value,
                    policy: o.policy,
                    seed,
                    total_demand: o.total_demand,
                    total_lost: o.total_lost,
                    lost_ratio: o.lost_ratio,
                    relative_to_oracle: o.relative_to_oracle,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(SweepResults {
        axis: spec.axis,
        rows: per_cell.into_iter().flatten().collect(),
    })
}
