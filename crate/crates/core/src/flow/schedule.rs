//! Mobile-battery scheduling as min-cost flow on a time-expanded graph.
//!
//! Node `(t, i)` for `t in 0..=T` holds the batteries parked at station `i`
//! at the start of period `t + 1`. Arcs from layer `t` to layer `t + 1` are
//! the decisions `z_{t+1,i,j}`:
//!
//! * a *serving* stay arc `(t,i) -> (t+1,i)` with capacity
//!   `max(0, D_{i,t+1} - F_i)` and cost `-W`, one unit of reward per swap that
//!   a staying battery covers beyond the fixed stock;
//! * a free stay arc in parallel, unbounded, cost 0;
//! * a movement arc `(t,i) -> (t+1,j)` for each `j in N(i)`, unbounded,
//!   cost `+1`.
//!
//! Batteries only serve while staying, and in the final period every battery
//! present counts, so the last layer carries stay arcs only. Layer `T` drains
//! into a sink. The movement cost is a tie-break: with
//! `W = ΣQ · (T - 1) + 1` it can never outweigh one unit of served demand,
//! so the flow first minimizes lost demand and then the number of moves.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::flow::mcf::{solve_min_cost_flow, Capacity, FlowNetwork, FlowSolution};
use crate::topology::{StationId, Topology};

/// Input to the scheduling model: horizon, initial mobile batteries `Q`,
/// fixed batteries `F` and integer demand `D[t][i]`.
#[derive(Debug, Clone)]
pub struct SchedulingInstance<'a> {
    pub topo: &'a Topology,
    pub initial: Vec<u32>,
    pub fixed: Vec<u32>,
    pub demand: Vec<Vec<u32>>,
}

impl<'a> SchedulingInstance<'a> {
    pub fn new(
        topo: &'a Topology,
        initial: Vec<u32>,
        fixed: Vec<u32>,
        demand: Vec<Vec<u32>>,
    ) -> Result<Self> {
        let inst = SchedulingInstance {
            topo,
            initial,
            fixed,
            demand,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.topo.station_count();
        if self.initial.len() != n || self.fixed.len() != n {
            return Err(Error::Dimension(format!(
                "Q has {} and F has {} entries for {n} stations",
                self.initial.len(),
                self.fixed.len()
            )));
        }
        if self.demand.is_empty() {
            return Err(Error::InvalidParam(
                "planning horizon must be at least 1".into(),
            ));
        }
        if let Some(t) = self.demand.iter().position(|r| r.len() != n) {
            return Err(Error::Dimension(format!("demand row {t} is not {n} wide")));
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.demand.len()
    }

    pub fn station_count(&self) -> usize {
        self.topo.station_count()
    }

    pub fn total_mobile(&self) -> u64 {
        self.initial.iter().map(|&q| u64::from(q)).sum()
    }

    /// Σ max(0, D - F): lost demand with no mobile battery serving.
    pub fn uncovered_demand(&self) -> u64 {
        uncovered(&self.demand, &self.fixed)
    }
}

fn uncovered(demand: &[Vec<u32>], fixed: &[u32]) -> u64 {
    demand
        .iter()
        .flat_map(|row| {
            row.iter()
                .zip(fixed)
                .map(|(&d, &f)| u64::from(d.saturating_sub(f)))
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ArcRole {
    /// z_{t+1,i,i}, serving part
    Serve {
        t: usize,
        i: usize,
    },
    /// z_{t+1,i,i}, free part
    Stay {
        t: usize,
        i: usize,
    },
    Move {
        t: usize,
        i: usize,
        j: usize,
    },
    Drain,
    Source,
}

/// The flow network together with the meaning of each arc.
#[derive(Debug, Clone)]
pub struct TimeExpandedNetwork {
    pub network: FlowNetwork,
    roles: Vec<ArcRole>,
    reward: i64,
    horizon: usize,
    stations: usize,
    uncovered: u64,
    pooled: bool,
}

impl TimeExpandedNetwork {
    pub fn node(&self, t: usize, i: usize) -> usize {
        t * self.stations + i
    }

    pub fn sink(&self) -> usize {
        (self.horizon + 1) * self.stations
    }

    /// Cost of one served unit, negated.
    pub fn reward_weight(&self) -> i64 {
        self.reward
    }

    /// Total lost demand implied by an optimal flow cost.
    pub fn lost_from_cost(&self, cost: i64) -> u64 {
        let served = (-cost + self.reward - 1).div_euclid(self.reward);
        self.uncovered - served.max(0) as u64
    }

    /// Reads `z` and `L` back out of a flow on this network.
    pub fn extract_plan(&self, inst: &SchedulingInstance, flow: &FlowSolution) -> Result<MovePlan> {
        if inst.horizon() != self.horizon || inst.station_count() != self.stations {
            return Err(Error::Dimension("instance does not match network".into()));
        }
        self.network.check_flow(&flow.flow)?;
        let n = self.stations;
        let mut moves: Vec<BTreeMap<(StationId, StationId), u32>> =
            vec![BTreeMap::new(); self.horizon];
        for (role, &f) in self.roles.iter().zip(&flow.flow) {
            if f == 0 {
                continue;
            }
            let f =
                u32::try_from(f).map_err(|_| Error::InconsistentFlow(format!("arc flow {f}")))?;
            let (t, i, j) = match *role {
                ArcRole::Serve { t, i } | ArcRole::Stay { t, i } => (t, i, i),
                ArcRole::Move { t, i, j } => (t, i, j),
                ArcRole::Drain | ArcRole::Source => continue,
            };
            *moves[t]
                .entry((StationId::from(i), StationId::from(j)))
                .or_insert(0) += f;
        }
        let mut initial = vec![0u32; n];
        for (&(i, _), &c) in &moves[0] {
            initial[i.index()] += c;
        }
        if !self.pooled && initial != inst.initial {
            return Err(Error::InconsistentFlow(format!(
                "first-period departures {initial:?} differ from Q {:?}",
                inst.initial
            )));
        }
        MovePlan::from_moves(inst, initial, moves)
    }
}

/// Where the mobile batteries of layer 0 come from.
#[derive(Debug, Clone, Copy)]
pub(crate) enum BatterySource<'s> {
    /// Fixed per-station counts `Q_i`.
    Placed(&'s [u32]),
    /// A pool of `total` batteries routed through a super-source; stations
    /// in `pinned` receive exactly their listed count, `capped` optionally
    /// bounds the first free station.
    Pooled {
        total: u32,
        pinned: &'s [u32],
        capped: Option<u32>,
    },
}

pub(crate) fn build_network(
    topo: &Topology,
    fixed: &[u32],
    demand: &[Vec<u32>],
    source: BatterySource<'_>,
) -> TimeExpandedNetwork {
    let n = topo.station_count();
    let horizon = demand.len();
    let total_mobile: i64 = match source {
        BatterySource::Placed(q) => q.iter().map(|&v| i64::from(v)).sum(),
        BatterySource::Pooled { total, .. } => i64::from(total),
    };
    let reward = total_mobile * (horizon as i64 - 1) + 1;
    let sink = (horizon + 1) * n;
    let mut net = FlowNetwork::new(sink + 1);
    let mut roles = Vec::new();
    let node = |t: usize, i: usize| t * n + i;

    for (t, row) in demand.iter().enumerate() {
        let last = t + 1 == horizon;
        for i in 0..n {
            let serve = row[i].saturating_sub(fixed[i]);
            if serve > 0 {
                net.add_arc(
                    node(t, i),
                    node(t + 1, i),
                    Capacity::Finite(i64::from(serve)),
                    -reward,
                );
                roles.push(ArcRole::Serve { t, i });
            }
            net.add_arc(node(t, i), node(t + 1, i), Capacity::Unbounded, 0);
            roles.push(ArcRole::Stay { t, i });
            if !last {
                for j in topo.neighbors_unchecked(i) {
                    net.add_arc(node(t, i), node(t + 1, j.index()), Capacity::Unbounded, 1);
                    roles.push(ArcRole::Move { t, i, j: j.index() });
                }
            }
        }
    }
    for i in 0..n {
        net.add_arc(node(horizon, i), sink, Capacity::Unbounded, 0);
        roles.push(ArcRole::Drain);
    }

    match source {
        BatterySource::Placed(q) => {
            for (i, &qi) in q.iter().enumerate() {
                net.set_supply(node(0, i), i64::from(qi));
            }
        }
        BatterySource::Pooled {
            total,
            pinned,
            capped,
        } => {
            let pinned_total: u32 = pinned.iter().sum();
            for (i, &qi) in pinned.iter().enumerate() {
                net.set_supply(node(0, i), i64::from(qi));
            }
            let pool = net.add_node();
            net.set_supply(pool, i64::from(total - pinned_total));
            for i in pinned.len()..n {
                let cap = match capped {
                    Some(c) if i == pinned.len() => Capacity::Finite(i64::from(c)),
                    _ => Capacity::Unbounded,
                };
                net.add_arc(pool, node(0, i), cap, 0);
                roles.push(ArcRole::Source);
            }
        }
    }
    net.set_supply(sink, -total_mobile);

    TimeExpandedNetwork {
        network: net,
        roles,
        reward,
        horizon,
        stations: n,
        uncovered: uncovered(demand, fixed),
        pooled: matches!(source, BatterySource::Pooled { .. }),
    }
}

/// Time-expanded flow network for a scheduling instance. Total lost demand
/// of an optimal flow is `Σ max(0, D - F)` minus the served units, see
/// [`TimeExpandedNetwork::lost_from_cost`].
pub fn build_time_expanded_network(inst: &SchedulingInstance) -> TimeExpandedNetwork {
    build_network(
        inst.topo,
        &inst.fixed,
        &inst.demand,
        BatterySource::Placed(&inst.initial),
    )
}

/// Extracts a plan from a flow on `build_time_expanded_network(inst)`.
pub fn extract_plan(inst: &SchedulingInstance, flow: &FlowSolution) -> Result<MovePlan> {
    build_time_expanded_network(inst).extract_plan(inst, flow)
}

/// Optimal plan for the instance.
pub fn solve_schedule(inst: &SchedulingInstance) -> Result<MovePlan> {
    inst.validate()?;
    let net = build_time_expanded_network(inst);
    let flow = solve_min_cost_flow(&net.network)?;
    let plan = net.extract_plan(inst, &flow)?;
    debug_assert_eq!(plan.objective, net.lost_from_cost(flow.cost));
    Ok(plan)
}

/// A complete schedule: moves per period, lost demand and its total.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MovePlan {
    /// Initial positions the plan starts from.
    pub initial: Vec<u32>,
    /// `moves[t][(i, j)] = z_{t+1,i,j}`; zero entries are omitted and
    /// `(i, i)` means staying.
    pub moves: Vec<BTreeMap<(StationId, StationId), u32>>,
    /// `lost[t][i] = L_{t+1,i}`
    pub lost: Vec<Vec<u32>>,
    pub objective: u64,
}

impl MovePlan {
    /// Builds a plan from its moves, deriving lost demand as the least value
    /// allowed by the lost-demand constraints.
    pub fn from_moves(
        inst: &SchedulingInstance,
        initial: Vec<u32>,
        moves: Vec<BTreeMap<(StationId, StationId), u32>>,
    ) -> Result<Self> {
        let n = inst.station_count();
        let horizon = inst.horizon();
        if moves.len() != horizon {
            return Err(Error::InconsistentFlow(
                "move periods do not match horizon".into(),
            ));
        }
        let mut lost = vec![vec![0u32; n]; horizon];
        let mut objective = 0u64;
        let mut arrivals_prev = initial.clone();
        for t in 0..horizon {
            let mut departures = vec![0u32; n];
            let mut arrivals = vec![0u32; n];
            let mut stayers = vec![0u32; n];
            for (&(i, j), &c) in &moves[t] {
                departures[i.index()] += c;
                arrivals[j.index()] += c;
                if i == j {
                    stayers[i.index()] += c;
                }
            }
            if departures != arrivals_prev {
                return Err(Error::InconsistentFlow(format!(
                    "period {} departures {departures:?} differ from stock {arrivals_prev:?}",
                    t + 1
                )));
            }
            let available = if t + 1 < horizon {
                &stayers
            } else {
                &arrivals_prev
            };
            for i in 0..n {
                let l =
                    inst.demand[t][i].saturating_sub(inst.fixed[i].saturating_add(available[i]));
                lost[t][i] = l;
                objective += u64::from(l);
            }
            arrivals_prev = arrivals;
        }
        Ok(MovePlan {
            initial,
            moves,
            lost,
            objective,
        })
    }

    pub fn horizon(&self) -> usize {
        self.moves.len()
    }

    pub fn moves_at(&self, t: usize, i: StationId, j: StationId) -> u32 {
        self.moves[t].get(&(i, j)).copied().unwrap_or(0)
    }

    /// Positions at the start of period `t + 1` (`t = 0` is the initial stock).
    pub fn positions(&self, t: usize) -> Vec<u32> {
        let mut pos = self.initial.clone();
        for period in &self.moves[..t] {
            pos.iter_mut().for_each(|p| *p = 0);
            for (&(_, j), &c) in period {
                pos[j.index()] += c;
            }
        }
        pos
    }

    pub fn move_count(&self) -> u64 {
        self.moves
            .iter()
            .flat_map(|m| m.iter())
            .filter(|((i, j), _)| i != j)
            .map(|(_, &c)| u64::from(c))
            .sum()
    }

    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (t, period) in self.moves.iter().enumerate() {
            for (&(i, j), &c) in period {
                let _ = writeln!(out, "z {} {i} {j} {c}", t + 1);
            }
        }
        for (t, row) in self.lost.iter().enumerate() {
            for (i, &l) in row.iter().enumerate() {
                if l > 0 {
                    let _ = writeln!(out, "L {} {i} {l}", t + 1);
                }
            }
        }
        let _ = writeln!(out, "objective {}", self.objective);
        out
    }
}
