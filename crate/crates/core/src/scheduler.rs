//! Rolling-horizon policy: plan the next `h` hours, execute the first.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{solve_schedule, MovePlan, SchedulingInstance};
use crate::forecast::{ForecastWindow, ForecasterSpec};
use crate::topology::{StationId, Topology};

pub const MAX_PLANNING_HORIZON: usize = 24;

/// How fractional forecasts become integer demand.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integerization {
    #[default]
    HalfUp,
    Ceil,
    Floor,
}

impl Integerization {
    pub fn apply(self, window: &ForecastWindow) -> Vec<Vec<u32>> {
        match self {
            Integerization::HalfUp => window.integerized(),
            Integerization::Ceil | Integerization::Floor => window
                .values
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|&v| {
                            let r = if self == Integerization::Ceil {
                                v.ceil()
                            } else {
                                v.floor()
                            };
                            r.max(0.0) as u32
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    /// Planning horizon in hours.
    pub h: usize,
    pub forecaster: ForecasterSpec,
    #[serde(default)]
    pub integerization: Integerization,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            h: 6,
            forecaster: ForecasterSpec::Oracle,
            integerization: Integerization::HalfUp,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_PLANNING_HORIZON).contains(&self.h) {
            return Err(Error::InvalidParam(format!(
                "planning horizon h must lie in 1..={MAX_PLANNING_HORIZON}, got {}",
                self.h
            )));
        }
        self.forecaster.validate()
    }
}

/// Moves executed in the current hour, `(from, to) -> count`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FirstStepMoves {
    pub moves: BTreeMap<(StationId, StationId), u32>,
}

impl FirstStepMoves {
    pub fn get(&self, i: StationId, j: StationId) -> u32 {
        self.moves.get(&(i, j)).copied().unwrap_or(0)
    }

    pub fn stayers(&self, n: usize) -> Vec<u32> {
        let mut out = vec![0; n];
        for (&(i, j), &c) in &self.moves {
            if i == j {
                out[i.index()] += c;
            }
        }
        out
    }

    pub fn departures(&self, n: usize) -> Vec<u32> {
        let mut out = vec![0; n];
        for (&(i, _), &c) in &self.moves {
            out[i.index()] += c;
        }
        out
    }

    pub fn arrivals(&self, n: usize) -> Vec<u32> {
        let mut out = vec![0; n];
        for (&(_, j), &c) in &self.moves {
            out[j.index()] += c;
        }
        out
    }

    pub fn relocations(&self) -> u32 {
        self.moves
            .iter()
            .filter(|((i, j), _)| i != j)
            .map(|(_, &c)| c)
            .sum()
    }
}

/// Full plan over the forecast window from the current positions.
pub fn plan_window(
    positions: &[u32],
    fixed: &[u32],
    forecast: &ForecastWindow,
    topo: &Topology,
    cfg: &PolicyConfig,
) -> Result<MovePlan> {
    if forecast.h() > cfg.h {
        return Err(Error::Dimension(format!(
            "forecast covers {} hours, planning horizon is {}",
            forecast.h(),
            cfg.h
        )));
    }
    if forecast.station_count() != topo.station_count() {
        return Err(Error::Dimension(format!(
            "forecast has {} stations, topology {}",
            forecast.station_count(),
            topo.station_count()
        )));
    }
    let demand = cfg.integerization.apply(forecast);
    let inst = SchedulingInstance::new(topo, positions.to_vec(), fixed.to_vec(), demand)?;
    solve_schedule(&inst)
}

/// Solves the window and returns only the current hour's moves. A forecast
/// shorter than `cfg.h` (end of the run) is planned as is.
pub fn plan_step(
    positions: &[u32],
    fixed: &[u32],
    forecast: &ForecastWindow,
    topo: &Topology,
    cfg: &PolicyConfig,
) -> Result<FirstStepMoves> {
    let mut plan = plan_window(positions, fixed, forecast, topo, cfg)?;
    Ok(FirstStepMoves {
        moves: std::mem::take(&mut plan.moves[0]),
    })
}
