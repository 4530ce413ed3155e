//! Successive shortest paths with Johnson potentials.
//!
//! Initial potentials come from Bellman-Ford, so negative arc costs are fine
//! as long as the network has no negative cycle. Every augmentation pushes
//! the bottleneck along a shortest path found by Dijkstra on reduced costs;
//! with integral capacities and supplies the resulting flow is integral.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Capacity {
    Finite(i64),
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowArc {
    pub from: usize,
    pub to: usize,
    pub capacity: Capacity,
    pub cost: i64,
}

/// Directed network with per-node supplies (positive = source).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FlowNetwork {
    node_count: usize,
    arcs: Vec<FlowArc>,
    supplies: Vec<i64>,
}

impl FlowNetwork {
    pub fn new(node_count: usize) -> Self {
        FlowNetwork {
            node_count,
            arcs: Vec::new(),
            supplies: vec![0; node_count],
        }
    }

    pub fn add_node(&mut self) -> usize {
        self.node_count += 1;
        self.supplies.push(0);
        self.node_count - 1
    }

    pub fn add_arc(&mut self, from: usize, to: usize, capacity: Capacity, cost: i64) -> usize {
        assert!(
            from < self.node_count && to < self.node_count,
            "arc endpoint out of range"
        );
        if let Capacity::Finite(c) = capacity {
            assert!(c >= 0, "negative capacity");
        }
        self.arcs.push(FlowArc {
            from,
            to,
            capacity,
            cost,
        });
        self.arcs.len() - 1
    }

    pub fn set_supply(&mut self, node: usize, supply: i64) {
        self.supplies[node] = supply;
    }

    pub fn add_supply(&mut self, node: usize, supply: i64) {
        self.supplies[node] += supply;
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn arcs(&self) -> &[FlowArc] {
        &self.arcs
    }

    pub fn supplies(&self) -> &[i64] {
        &self.supplies
    }

    /// Line-oriented dump for golden-file diffs.
    pub fn dump(&self) -> String {
        let mut out = format!("nodes {}\n", self.node_count);
        for (v, s) in self.supplies.iter().enumerate() {
            if *s != 0 {
                let _ = writeln!(out, "supply {v} {s}");
            }
        }
        for (k, a) in self.arcs.iter().enumerate() {
            let cap = match a.capacity {
                Capacity::Finite(c) => c.to_string(),
                Capacity::Unbounded => "inf".into(),
            };
            let _ = writeln!(out, "arc {k} {} {} {cap} {}", a.from, a.to, a.cost);
        }
        out
    }

    /// Checks conservation and capacity bounds of `flow`, returning its cost.
    pub fn check_flow(&self, flow: &[i64]) -> Result<i64> {
        if flow.len() != self.arcs.len() {
            return Err(Error::InconsistentFlow(format!(
                "{} flow values for {} arcs",
                flow.len(),
                self.arcs.len()
            )));
        }
        let mut balance = self.supplies.clone();
        let mut cost = 0i64;
        for (k, (a, &f)) in self.arcs.iter().zip(flow).enumerate() {
            let within = match a.capacity {
                Capacity::Finite(c) => (0..=c).contains(&f),
                Capacity::Unbounded => f >= 0,
            };
            if !within {
                return Err(Error::InconsistentFlow(format!("arc {k} carries {f}")));
            }
            balance[a.from] -= f;
            balance[a.to] += f;
            cost += a.cost * f;
        }
        if let Some(v) = balance.iter().position(|&b| b != 0) {
            return Err(Error::InconsistentFlow(format!(
                "node {v} unbalanced by {}",
                balance[v]
            )));
        }
        Ok(cost)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowSolution {
    /// Flow per arc, in the network's arc order.
    pub flow: Vec<i64>,
    pub cost: i64,
}

struct Edge {
    to: usize,
    rev: usize,
    cap: i64,
    cost: i64,
}

struct Residual {
    graph: Vec<Vec<usize>>,
    edges: Vec<Edge>,
}

impl Residual {
    fn new(n: usize) -> Self {
        Residual {
            graph: vec![Vec::new(); n],
            edges: Vec::new(),
        }
    }

    fn add(&mut self, from: usize, to: usize, cap: i64, cost: i64) -> usize {
        let fwd = self.edges.len();
        self.edges.push(Edge {
            to,
            rev: fwd + 1,
            cap,
            cost,
        });
        self.edges.push(Edge {
            to: from,
            rev: fwd,
            cap: 0,
            cost: -cost,
        });
        self.graph[from].push(fwd);
        self.graph[to].push(fwd + 1);
        fwd
    }
}

const INF: i64 = i64::MAX / 4;

/// Minimum-cost flow satisfying every supply exactly.
///
/// Dijkstra pops `(distance, node)` pairs and relaxes arcs in insertion order
/// with strict improvement only, so the result depends only on the input.
pub fn solve_min_cost_flow(net: &FlowNetwork) -> Result<FlowSolution> {
    let total: i64 = net.supplies.iter().sum();
    if total != 0 {
        return Err(Error::InvalidParam(format!(
            "supplies sum to {total}, expected 0"
        )));
    }
    let demand: i64 = net.supplies.iter().filter(|s| **s > 0).sum();
    let n = net.node_count;
    let source = n;
    let sink = n + 1;
    let mut res = Residual::new(n + 2);
    let arc_edges: Vec<usize> = net
        .arcs
        .iter()
        .map(|a| {
            let cap = match a.capacity {
                Capacity::Finite(c) => c,
                Capacity::Unbounded => demand,
            };
            res.add(a.from, a.to, cap, a.cost)
        })
        .collect();
    for (v, &s) in net.supplies.iter().enumerate() {
        if s > 0 {
            res.add(source, v, s, 0);
        } else if s < 0 {
            res.add(v, sink, -s, 0);
        }
    }

    let mut potential = bellman_ford(&res, source)?;
    let mut remaining = demand;
    let mut cost = 0i64;
    let mut dist = vec![INF; n + 2];
    let mut prev_edge = vec![usize::MAX; n + 2];
    let mut heap = BinaryHeap::new();

    while remaining > 0 {
        dist.fill(INF);
        prev_edge.fill(usize::MAX);
        dist[source] = 0;
        heap.push(Reverse((0i64, source)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &e in &res.graph[u] {
                let edge = &res.edges[e];
                if edge.cap == 0 {
                    continue;
                }
                let nd = d + edge.cost + potential[u] - potential[edge.to];
                if nd < dist[edge.to] {
                    dist[edge.to] = nd;
                    prev_edge[edge.to] = e;
                    heap.push(Reverse((nd, edge.to)));
                }
            }
        }
        if dist[sink] == INF {
            return Err(Error::Infeasible(remaining));
        }
        let reached_max = dist.iter().copied().filter(|&d| d < INF).max().unwrap_or(0);
        for (p, &d) in potential.iter_mut().zip(&dist) {
            *p += if d < INF { d } else { reached_max };
        }

        let mut push = remaining;
        let mut v = sink;
        while v != source {
            let e = prev_edge[v];
            push = push.min(res.edges[e].cap);
            v = res.edges[res.edges[e].rev].to;
        }
        let mut v = sink;
        while v != source {
            let e = prev_edge[v];
            let rev = res.edges[e].rev;
            res.edges[e].cap -= push;
            res.edges[rev].cap += push;
            cost += push * res.edges[e].cost;
            v = res.edges[rev].to;
        }
        remaining -= push;
    }

    let flow = arc_edges
        .iter()
        .map(|&e| res.edges[res.edges[e].rev].cap)
        .collect();
    Ok(FlowSolution { flow, cost })
}

/// Shortest distances from `source` over positive-capacity edges; nodes not
/// reachable get potential 0 (they stay unreachable for the whole run).
fn bellman_ford(res: &Residual, source: usize) -> Result<Vec<i64>> {
    let n = res.graph.len();
    let mut dist = vec![INF; n];
    dist[source] = 0;
    for round in 0..n {
        let mut changed = false;
        for u in 0..n {
            if dist[u] == INF {
                continue;
            }
            for &e in &res.graph[u] {
                let edge = &res.edges[e];
                if edge.cap > 0 && dist[u] + edge.cost < dist[edge.to] {
                    dist[edge.to] = dist[u] + edge.cost;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
        if round == n - 1 {
            return Err(Error::NegativeCycle);
        }
    }
    Ok(dist
        .into_iter()
        .map(|d| if d == INF { 0 } else { d })
        .collect())
}
