//! Hour-by-hour execution of a rolling policy against realized demand.
//!
//! Each hour the policy sees the demand history, obtains a forecast, plans,
//! and executes the first hour: batteries that stay serve together with the
//! fixed stock, relocating batteries spend the hour on the road and arrive
//! for the next one. Unserved swaps are lost.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{solve_schedule, SchedulingInstance};
use crate::forecast::Forecaster;
use crate::scheduler::{plan_step, PolicyConfig};
use crate::topology::{StationId, Topology};
use crate::traffic::{SeriesKind, TrafficSeries};

/// Simulated hours `start .. start + hours` of a demand series; hours before
/// `start` are history available to forecasters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimWindow {
    pub start: usize,
    pub hours: usize,
}

impl SimWindow {
    pub fn whole(series: &TrafficSeries) -> Self {
        SimWindow {
            start: 0,
            hours: series.horizon(),
        }
    }

    fn check(&self, actual: &TrafficSeries, topo: &Topology) -> Result<()> {
        if actual.kind() != SeriesKind::StationDemand {
            return Err(Error::KindMismatch {
                expected: SeriesKind::StationDemand.as_str(),
                actual: actual.kind().as_str(),
            });
        }
        if actual.series_count() != topo.station_count() {
            return Err(Error::Dimension(format!(
                "demand has {} series, topology {} stations",
                actual.series_count(),
                topo.station_count()
            )));
        }
        if self.hours == 0 || self.start + self.hours > actual.horizon() {
            return Err(Error::Dimension(format!(
                "simulation window {}..{} not covered by {} hours of demand",
                self.start,
                self.start + self.hours,
                actual.horizon()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HourRecord {
    pub hour: usize,
    pub positions_before: Vec<u32>,
    pub moves: BTreeMap<(StationId, StationId), u32>,
    pub actual: Vec<u32>,
    pub served: Vec<u32>,
    pub lost: Vec<u32>,
    pub positions_after: Vec<u32>,
}

impl HourRecord {
    pub fn stayers(&self) -> Vec<u32> {
        let mut out = vec![0; self.actual.len()];
        for (&(i, j), &c) in &self.moves {
            if i == j {
                out[i.index()] += c;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub fixed: Vec<u32>,
    pub hours: Vec<HourRecord>,
    pub total_demand: u64,
    pub total_lost: u64,
}

impl SimulationTrace {
    pub fn lost_ratio(&self) -> f64 {
        if self.total_demand == 0 {
            0.0
        } else {
            self.total_lost as f64 / self.total_demand as f64
        }
    }

    pub const CSV_HEADER: &'static str =
        "hour,station,position_before,stay,moved_out,moved_in,position_after,actual,served,lost";

    /// One row per (hour, station).
    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for rec in &self.hours {
            let n = rec.actual.len();
            let mut stay = vec![0u32; n];
            let mut out_moves = vec![0u32; n];
            let mut in_moves = vec![0u32; n];
            for (&(i, j), &c) in &rec.moves {
                if i == j {
                    stay[i.index()] += c;
                } else {
                    out_moves[i.index()] += c;
                    in_moves[j.index()] += c;
                }
            }
            for i in 0..n {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{}",
                    rec.hour,
                    i,
                    rec.positions_before[i],
                    stay[i],
                    out_moves[i],
                    in_moves[i],
                    rec.positions_after[i],
                    rec.actual[i],
                    rec.served[i],
                    rec.lost[i]
                );
            }
        }
        out
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Runs the rolling policy over `window` of `actual`.
pub fn run_simulation(
    topo: &Topology,
    actual: &TrafficSeries,
    fixed: &[u32],
    initial: &[u32],
    cfg: &PolicyConfig,
    window: SimWindow,
) -> Result<SimulationTrace> {
    let forecaster = Forecaster::new(cfg.forecaster.clone())?;
    run_with_forecaster(topo, actual, fixed, initial, cfg, &forecaster, window)
}

/// Same as [`run_simulation`] with a prepared forecaster.
pub fn run_with_forecaster(
    topo: &Topology,
    actual: &TrafficSeries,
    fixed: &[u32],
    initial: &[u32],
    cfg: &PolicyConfig,
    forecaster: &Forecaster,
    window: SimWindow,
) -> Result<SimulationTrace> {
    cfg.validate()?;
    window.check(actual, topo)?;
    let n = topo.station_count();
    if fixed.len() != n || initial.len() != n {
        return Err(Error::Dimension(format!(
            "F has {} and Q has {} entries for {n} stations",
            fixed.len(),
            initial.len()
        )));
    }
    let rows = actual.rows();
    let end = window.start + window.hours;
    let mut positions = initial.to_vec();
    let mut records = Vec::with_capacity(window.hours);
    let mut total_demand = 0u64;
    let mut total_lost = 0u64;

    for hour in window.start..end {
        let h = cfg.h.min(end - hour);
        let forecast = forecaster.predict(&rows[..hour], Some(&rows[hour..end]), h)?;
        let step = plan_step(&positions, fixed, &forecast, topo, cfg)?;
        let stayers = step.stayers(n);
        let demand = &rows[hour];
        let mut served = vec![0u32; n];
        let mut lost = vec![0u32; n];
        for i in 0..n {
            served[i] = demand[i].min(fixed[i] + stayers[i]);
            lost[i] = demand[i] - served[i];
            total_demand += u64::from(demand[i]);
            total_lost += u64::from(lost[i]);
        }
        let after = step.arrivals(n);
        records.push(HourRecord {
            hour,
            positions_before: std::mem::replace(&mut positions, after.clone()),
            moves: step.moves,
            actual: demand.clone(),
            served,
            lost,
            positions_after: after,
        });
    }
    Ok(SimulationTrace {
        fixed: fixed.to_vec(),
        hours: records,
        total_demand,
        total_lost,
    })
}

/// Optimal total lost demand over the window with perfect knowledge of the
/// realized demand, solved once over the full window.
pub fn hindsight_optimum(
    topo: &Topology,
    actual: &TrafficSeries,
    fixed: &[u32],
    initial: &[u32],
    window: SimWindow,
) -> Result<u64> {
    window.check(actual, topo)?;
    let demand = actual.rows()[window.start..window.start + window.hours].to_vec();
    let inst = SchedulingInstance::new(topo, initial.to_vec(), fixed.to_vec(), demand)?;
    Ok(solve_schedule(&inst)?.objective)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub total_demand: u64,
    pub total_lost: u64,
    /// lost / demand (0 when there is no demand)
    pub lost_ratio: f64,
    /// lost / hindsight lost; 1 when both are zero, +inf when only the
    /// hindsight is zero
    pub relative_to_oracle: f64,
}

pub fn relative_to_oracle(lost: u64, baseline: u64) -> f64 {
    match (lost, baseline) {
        (0, 0) => 1.0,
        (_, 0) => f64::INFINITY,
        (l, b) => l as f64 / b as f64,
    }
}

pub fn compute_metrics(trace: &SimulationTrace, baseline: u64) -> Metrics {
    Metrics {
        total_demand: trace.total_demand,
        total_lost: trace.total_lost,
        lost_ratio: trace.lost_ratio(),
        relative_to_oracle: relative_to_oracle(trace.total_lost, baseline),
    }
}

/// Totals recovered from an exported trace CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceSummary {
    pub hours: usize,
    pub stations: usize,
    pub total_demand: u64,
    pub total_served: u64,
    pub total_lost: u64,
    pub relocations: u64,
    pub lost_by_station: Vec<u64>,
}

impl TraceSummary {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == SimulationTrace::CSV_HEADER => {}
            _ => {
                return Err(Error::parse(
                    origin,
                    1,
                    format!("expected header `{}`", SimulationTrace::CSV_HEADER),
                ))
            }
        }
        let mut hours = std::collections::BTreeSet::new();
        let mut summary = TraceSummary {
            hours: 0,
            stations: 0,
            total_demand: 0,
            total_served: 0,
            total_lost: 0,
            relocations: 0,
            lost_by_station: Vec::new(),
        };
        for (lineno, line) in lines {
            let lineno = lineno + 1;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<u64> = line
                .split(',')
                .map(|s| s.trim().parse::<u64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(origin, lineno, "expected non-negative integers"))?;
            if f.len() != 10 {
                return Err(Error::parse(origin, lineno, "expected 10 fields"));
            }
            let (hour, station) = (f[0], f[1] as usize);
            if f[7] != f[8] + f[9] {
                return Err(Error::parse(origin, lineno, "actual != served + lost"));
            }
            hours.insert(hour);
            if summary.lost_by_station.len() <= station {
                summary.lost_by_station.resize(station + 1, 0);
            }
            summary.lost_by_station[station] += f[9];
            summary.total_demand += f[7];
            summary.total_served += f[8];
            summary.total_lost += f[9];
            summary.relocations += f[4];
        }
        summary.hours = hours.len();
        summary.stations = summary.lost_by_station.len();
        Ok(summary)
    }

    pub fn lost_ratio(&self) -> f64 {
        if self.total_demand == 0 {
            0.0
        } else {
            self.total_lost as f64 / self.total_demand as f64
        }
    }
}
