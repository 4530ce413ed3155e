//! Fleet sizing and initial placement of mobile batteries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::mcf::solve_min_cost_flow;
use crate::flow::schedule::{build_network, BatterySource};
use crate::topology::Topology;
use crate::traffic::round_half_up;

/// How many batteries the network gets and how they split between fixed
/// stations and mobile units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetConfig {
    /// Total batteries as a multiple of the network's mean hourly demand.
    pub inventory_level: f64,
    /// Fraction of the fleet that is mobile.
    pub mobile_ratio: f64,
}

impl Default for FleetConfig {
    fn default() -> Self {
        FleetConfig {
            inventory_level: 0.75,
            mobile_ratio: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FleetSize {
    pub total: u32,
    pub mobile: u32,
    pub fixed: u32,
}

impl FleetConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.inventory_level >= 0.0 && self.inventory_level.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "inventory_level must be >= 0, got {}",
                self.inventory_level
            )));
        }
        if !(0.0..=1.0).contains(&self.mobile_ratio) {
            return Err(Error::InvalidParam(format!(
                "mobile_ratio must lie in [0, 1], got {}",
                self.mobile_ratio
            )));
        }
        Ok(())
    }

    /// `B = round(level · Σ avg_i)`, `Q = round(ratio · B)`, fixed `= B - Q`.
    pub fn size(&self, avg_demand: &[f64]) -> Result<FleetSize> {
        self.validate()?;
        let network_mean: f64 = avg_demand.iter().sum();
        let total = round_half_up(self.inventory_level * network_mean);
        let mobile = round_half_up(self.mobile_ratio * f64::from(total));
        Ok(FleetSize {
            total,
            mobile,
            fixed: total - mobile,
        })
    }
}

/// Largest-remainder apportionment of `fixed_total` proportional to
/// `avg_demand`. Equal remainders go to the lower station index.
pub fn allocate_fixed(avg_demand: &[f64], fixed_total: u32) -> Result<Vec<u32>> {
    if let Some(v) = avg_demand.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        return Err(Error::InvalidParam(format!(
            "average demand {v} is negative or not finite"
        )));
    }
    let sum: f64 = avg_demand.iter().sum();
    if sum <= 0.0 {
        if fixed_total == 0 {
            return Ok(vec![0; avg_demand.len()]);
        }
        return Err(Error::InvalidParam(
            "cannot apportion fixed batteries over all-zero demand".into(),
        ));
    }
    let quotas: Vec<f64> = avg_demand
        .iter()
        .map(|a| f64::from(fixed_total) * a / sum)
        .collect();
    let mut out: Vec<u32> = quotas.iter().map(|q| q.floor() as u32).collect();
    let assigned: u32 = out.iter().sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    let rem = |i: usize| quotas[i] - quotas[i].floor();
    // Remainders within 1e-9 count as equal so scaling the input cannot
    // reorder ties through rounding noise.
    order.sort_by(|&a, &b| {
        let (ra, rb) = (rem(a), rem(b));
        if (ra - rb).abs() <= 1e-9 {
            a.cmp(&b)
        } else {
            rb.total_cmp(&ra)
        }
    });
    for &i in order
        .iter()
        .take(fixed_total.saturating_sub(assigned) as usize)
    {
        out[i] += 1;
    }
    Ok(out)
}

/// Places `q_total` mobile batteries to minimize lost demand over `demand`
/// (`demand[t][i]`, one row per hour) when the placement is free.
///
/// Among optimal placements the lexicographically smallest `(Q_0, Q_1, ...)`
/// is returned: station by station, the smallest count that keeps the
/// optimum reachable is pinned.
pub fn allocate_mobile_initial(
    topo: &Topology,
    fixed: &[u32],
    demand: &[Vec<u32>],
    q_total: u32,
) -> Result<Vec<u32>> {
    let n = topo.station_count();
    if fixed.len() != n {
        return Err(Error::Dimension(format!(
            "F has {} entries for {n} stations",
            fixed.len()
        )));
    }
    if demand.is_empty() {
        return Err(Error::InvalidParam(
            "allocation horizon must be at least 1".into(),
        ));
    }
    if let Some(t) = demand.iter().position(|r| r.len() != n) {
        return Err(Error::Dimension(format!("demand row {t} is not {n} wide")));
    }
    if q_total == 0 || n == 0 {
        return Ok(vec![0; n]);
    }

    let lost_with = |pinned: &[u32], capped: Option<u32>| -> Result<u64> {
        let net = build_network(
            topo,
            fixed,
            demand,
            BatterySource::Pooled {
                total: q_total,
                pinned,
                capped,
            },
        );
        let sol = solve_min_cost_flow(&net.network)?;
        Ok(net.lost_from_cost(sol.cost))
    };

    let optimum = lost_with(&[], None)?;
    let mut pinned: Vec<u32> = Vec::with_capacity(n);
    let mut remaining = q_total;
    for _ in 0..n - 1 {
        if remaining == 0 {
            break;
        }
        // smallest cap on the next station that still attains the optimum
        let (mut lo, mut hi) = (0u32, remaining);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if lost_with(&pinned, Some(mid))? == optimum {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        pinned.push(lo);
        remaining -= lo;
    }
    pinned.resize(n - 1, 0);
    pinned.push(remaining);
    Ok(pinned)
}
