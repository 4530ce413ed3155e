//! Exhaustive reference solver for tiny scheduling instances.
//!
//! Every battery follows a trajectory of positions `p_0 .. p_{T-1}` with
//! `p_{k+1} ∈ {p_k} ∪ N(p_k)`; a battery serves in period `k + 1` when it
//! stays (`p_{k+1} = p_k`), and in the final period it serves wherever it is.
//! Batteries are interchangeable, so only multisets of trajectories per
//! starting station are enumerated.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::flow::schedule::{MovePlan, SchedulingInstance};
use crate::topology::{StationId, Topology};

pub const MAX_STATIONS: usize = 4;
pub const MAX_HORIZON: usize = 4;
pub const MAX_BATTERIES: u64 = 3;

pub fn within_guard(inst: &SchedulingInstance) -> bool {
    inst.station_count() <= MAX_STATIONS
        && inst.horizon() <= MAX_HORIZON
        && inst.total_mobile() <= MAX_BATTERIES
}

/// Minimum-objective plan by enumeration; ties go to fewer moves, then to
/// the first plan in enumeration order (staying enumerated first).
pub fn brute_force_schedule(inst: &SchedulingInstance) -> Result<MovePlan> {
    inst.validate()?;
    if !within_guard(inst) {
        return Err(Error::GuardExceeded(format!(
            "{} stations, T={}, ΣQ={} (limits {MAX_STATIONS}, {MAX_HORIZON}, {MAX_BATTERIES})",
            inst.station_count(),
            inst.horizon(),
            inst.total_mobile()
        )));
    }
    let horizon = inst.horizon();
    let mut groups: Vec<(Vec<Vec<usize>>, usize)> = Vec::new();
    for (start, &q) in inst.initial.iter().enumerate() {
        if q > 0 {
            groups.push((trajectories(inst.topo, start, horizon), q as usize));
        }
    }

    let mut chosen: Vec<&[usize]> = Vec::new();
    let mut best: Option<(u64, u64, Vec<Vec<usize>>)> = None;
    search(inst, &groups, 0, 0, &mut chosen, &mut best);

    let (_, _, trajs) = best.unwrap_or((0, 0, Vec::new()));
    let mut moves: Vec<BTreeMap<(StationId, StationId), u32>> = vec![BTreeMap::new(); horizon];
    for traj in &trajs {
        for t in 0..horizon {
            let from = traj[t];
            let to = if t + 1 < horizon {
                traj[t + 1]
            } else {
                traj[t]
            };
            *moves[t]
                .entry((StationId::from(from), StationId::from(to)))
                .or_insert(0) += 1;
        }
    }
    MovePlan::from_moves(inst, inst.initial.clone(), moves)
}

fn trajectories(topo: &Topology, start: usize, horizon: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![start]];
    for _ in 1..horizon {
        let mut next = Vec::new();
        for traj in &out {
            let here = *traj.last().unwrap();
            let mut step = traj.clone();
            step.push(here);
            next.push(step);
            for j in topo.neighbors_unchecked(here) {
                let mut step = traj.clone();
                step.push(j.index());
                next.push(step);
            }
        }
        out = next;
    }
    out
}

/// Picks, for each group, a non-decreasing index sequence of trajectories
/// (a multiset), then scores the full assignment.
fn search<'g>(
    inst: &SchedulingInstance,
    groups: &'g [(Vec<Vec<usize>>, usize)],
    group: usize,
    min_index: usize,
    chosen: &mut Vec<&'g [usize]>,
    best: &mut Option<(u64, u64, Vec<Vec<usize>>)>,
) {
    if group == groups.len() {
        let (objective, moves) = score(inst, chosen);
        let better = match best {
            None => true,
            Some((bo, bm, _)) => (objective, moves) < (*bo, *bm),
        };
        if better {
            *best = Some((
                objective,
                moves,
                chosen.iter().map(|t| t.to_vec()).collect(),
            ));
        }
        return;
    }
    let (trajs, count) = &groups[group];
    let placed_in_group = chosen.len() - groups[..group].iter().map(|g| g.1).sum::<usize>();
    if placed_in_group == *count {
        search(inst, groups, group + 1, 0, chosen, best);
        return;
    }
    for (k, traj) in trajs.iter().enumerate().skip(min_index) {
        chosen.push(traj);
        search(inst, groups, group, k, chosen, best);
        chosen.pop();
    }
}

fn score(inst: &SchedulingInstance, trajs: &[&[usize]]) -> (u64, u64) {
    let horizon = inst.horizon();
    let n = inst.station_count();
    let mut objective = 0u64;
    let mut available = vec![0u32; n];
    for t in 0..horizon {
        available.iter_mut().for_each(|a| *a = 0);
        for traj in trajs {
            if t + 1 == horizon || traj[t + 1] == traj[t] {
                available[traj[t]] += 1;
            }
        }
        for ((&d, &f), &a) in inst.demand[t].iter().zip(&inst.fixed).zip(&available) {
            objective += u64::from(d.saturating_sub(f + a));
        }
    }
    let moves = trajs
        .iter()
        .map(|traj| traj.windows(2).filter(|w| w[0] != w[1]).count() as u64)
        .sum();
    (objective, moves)
}
