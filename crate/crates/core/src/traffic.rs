//! Hourly traffic and swap-demand series.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::fs;
use std::ops::Range;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{StationId, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesKind {
    EdgeTraffic,
    StationDemand,
}

impl SeriesKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SeriesKind::EdgeTraffic => "edge-traffic",
            SeriesKind::StationDemand => "station-demand",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "edge-traffic" => Some(SeriesKind::EdgeTraffic),
            "station-demand" => Some(SeriesKind::StationDemand),
            _ => None,
        }
    }
}

/// Matrix of non-negative hourly counts, `values[hour][series]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrafficSeries {
    kind: SeriesKind,
    series_count: usize,
    values: Vec<Vec<u32>>,
}

impl TrafficSeries {
    pub fn new(kind: SeriesKind, values: Vec<Vec<u32>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParam(
                "series horizon must be at least 1".into(),
            ));
        }
        let m = values[0].len();
        if let Some(bad) = values.iter().position(|row| row.len() != m) {
            return Err(Error::Dimension(format!(
                "hour {bad} has {} series, expected {m}",
                values[bad].len()
            )));
        }
        Ok(TrafficSeries {
            kind,
            series_count: m,
            values,
        })
    }

    pub fn zeros(kind: SeriesKind, horizon: usize, series: usize) -> Self {
        Self::new(kind, vec![vec![0; series]; horizon.max(1)]).expect("non-empty")
    }

    pub fn kind(&self) -> SeriesKind {
        self.kind
    }

    pub fn horizon(&self) -> usize {
        self.values.len()
    }

    pub fn series_count(&self) -> usize {
        self.series_count
    }

    pub fn get(&self, hour: usize, series: usize) -> u32 {
        self.values[hour][series]
    }

    pub fn row(&self, hour: usize) -> &[u32] {
        &self.values[hour]
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.values
    }

    pub fn column(&self, series: usize) -> impl Iterator<Item = u32> + '_ {
        self.values.iter().map(move |r| r[series])
    }

    /// Hours `range` as a new series of the same kind.
    pub fn window(&self, range: Range<usize>) -> Result<Self> {
        if range.start >= range.end || range.end > self.horizon() {
            return Err(Error::Dimension(format!(
                "window {range:?} outside horizon {}",
                self.horizon()
            )));
        }
        Self::new(self.kind, self.values[range].to_vec())
    }

    /// Mean hourly value per series over `range`.
    pub fn means(&self, range: Range<usize>) -> Vec<f64> {
        let len = range.len().max(1) as f64;
        let mut sums = vec![0u64; self.series_count];
        for row in &self.values[range] {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += u64::from(*v);
            }
        }
        sums.into_iter().map(|s| s as f64 / len).collect()
    }

    pub fn total(&self) -> u64 {
        self.values.iter().flatten().map(|&v| u64::from(v)).sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# kind={}\nhour", self.kind.as_str());
        for s in 0..self.series_count {
            let _ = write!(out, ",series_{s}");
        }
        out.push('\n');
        for (h, row) in self.values.iter().enumerate() {
            let _ = write!(out, "{h}");
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, path)
    }

    /// Parses the traffic CSV format. A missing `# kind=` line means
    /// station demand.
    pub fn parse_csv(text: &str, origin: &Path) -> Result<Self> {
        let mut kind = SeriesKind::StationDemand;
        let mut header: Option<usize> = None;
        let mut values = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(k) = comment.trim().strip_prefix("kind=") {
                    kind = SeriesKind::parse(k.trim()).ok_or_else(|| {
                        Error::parse(origin, lineno, format!("unknown series kind {k:?}"))
                    })?;
                }
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let Some(m) = header else {
                if fields.first() != Some(&"hour") {
                    return Err(Error::parse(
                        origin,
                        lineno,
                        "header must start with `hour`",
                    ));
                }
                for (k, f) in fields[1..].iter().enumerate() {
                    if *f != format!("series_{k}") {
                        return Err(Error::parse(
                            origin,
                            lineno,
                            format!("expected column series_{k}, got {f:?}"),
                        ));
                    }
                }
                header = Some(fields.len() - 1);
                continue;
            };
            if fields.len() != m + 1 {
                return Err(Error::parse(
                    origin,
                    lineno,
                    format!("expected {} fields, got {}", m + 1, fields.len()),
                ));
            }
            let hour: usize = fields[0]
                .parse()
                .map_err(|_| Error::parse(origin, lineno, format!("bad hour {:?}", fields[0])))?;
            if hour != values.len() {
                return Err(Error::parse(
                    origin,
                    lineno,
                    format!("expected hour {}, got {hour}", values.len()),
                ));
            }
            let row = fields[1..]
                .iter()
                .map(|f| {
                    f.parse::<u32>().map_err(|_| {
                        Error::parse(origin, lineno, format!("not a non-negative integer: {f:?}"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            values.push(row);
        }
        if header.is_none() || values.is_empty() {
            return Err(Error::parse(origin, 0, "no data rows"));
        }
        Self::new(kind, values)
    }
}

/// Daily demand shape used by [`generate_synthetic`].
///
/// Station `i` gets a base level drawn uniformly from `[base_min, base_max]`
/// and a peak hour `peak_hour + U(-peak_jitter, peak_jitter)`. Hour `h`
/// then has expected value `base * (1 + amplitude * cos(2π (h - peak) / 24))`,
/// realized with multiplicative noise `1 + noise * U(-1, 1)` and rounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeasonalitySpec {
    pub base_min: f64,
    pub base_max: f64,
    pub amplitude: f64,
    pub peak_hour: f64,
    pub peak_jitter: f64,
    pub noise: f64,
}

impl Default for SeasonalitySpec {
    fn default() -> Self {
        SeasonalitySpec {
            base_min: 10.0,
            base_max: 30.0,
            amplitude: 0.7,
            peak_hour: 14.0,
            peak_jitter: 1.5,
            noise: 0.2,
        }
    }
}

impl SeasonalitySpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParam(m));
        if !(self.base_min >= 0.0 && self.base_min.is_finite()) {
            return bad(format!("base_min must be >= 0, got {}", self.base_min));
        }
        if !(self.base_max >= self.base_min && self.base_max.is_finite()) {
            return bad(format!(
                "base_max ({}) must be >= base_min ({})",
                self.base_max, self.base_min
            ));
        }
        if !(0.0..=1.0).contains(&self.amplitude) {
            return bad(format!(
                "amplitude must lie in [0, 1], got {}",
                self.amplitude
            ));
        }
        if !(self.peak_jitter >= 0.0 && self.peak_jitter.is_finite() && self.peak_hour.is_finite())
        {
            return bad("peak_hour/peak_jitter must be finite, jitter >= 0".into());
        }
        if !(0.0..1.0).contains(&self.noise) {
            return bad(format!("noise must lie in [0, 1), got {}", self.noise));
        }
        Ok(())
    }
}

/// Per-station expected profile drawn by the generator; exposed so callers
/// can compare realizations against it.
#[derive(Debug, Clone, PartialEq)]
pub struct StationProfile {
    pub base: f64,
    pub peak: f64,
}

impl StationProfile {
    pub fn expected(&self, hour_of_day: usize, amplitude: f64) -> f64 {
        let phase = TAU * (hour_of_day as f64 - self.peak) / 24.0;
        self.base * (1.0 + amplitude * phase.cos())
    }
}

pub fn synthetic_profiles(n: usize, seed: u64, params: &SeasonalitySpec) -> Vec<StationProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let base = if params.base_max > params.base_min {
                rng.random_range(params.base_min..=params.base_max)
            } else {
                params.base_min
            };
            let jitter = if params.peak_jitter > 0.0 {
                rng.random_range(-params.peak_jitter..=params.peak_jitter)
            } else {
                0.0
            };
            StationProfile {
                base,
                peak: params.peak_hour + jitter,
            }
        })
        .collect()
}

/// Hourly station-demand series with a 24-hour cycle, deterministic in `seed`.
pub fn generate_synthetic(
    topo: &Topology,
    days: usize,
    seed: u64,
    params: &SeasonalitySpec,
) -> Result<TrafficSeries> {
    if days == 0 {
        return Err(Error::InvalidParam("days must be at least 1".into()));
    }
    params.validate()?;
    let n = topo.station_count();
    let profiles = synthetic_profiles(n, seed, params);
    // Noise stream is separate from the profile stream so that changing the
    // noise level leaves the profiles untouched.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let values = (0..days * 24)
        .map(|h| {
            profiles
                .iter()
                .map(|p| {
                    let u: f64 = if params.noise > 0.0 {
                        rng.random_range(-1.0..=1.0)
                    } else {
                        0.0
                    };
                    let v = p.expected(h % 24, params.amplitude) * (1.0 + params.noise * u);
                    round_half_up(v)
                })
                .collect()
        })
        .collect();
    TrafficSeries::new(SeriesKind::StationDemand, values)
}

/// Non-negative half-up rounding to an integer count.
pub fn round_half_up(v: f64) -> u32 {
    if v.is_nan() || v <= 0.0 {
        0
    } else {
        (v + 0.5).floor().min(u32::MAX as f64) as u32
    }
}

/// Station demand = `round(swap_rate * Σ traffic on incident edges)`.
pub fn edge_to_station_demand(
    traffic: &TrafficSeries,
    topo: &Topology,
    swap_rate: f64,
) -> Result<TrafficSeries> {
    if traffic.kind != SeriesKind::EdgeTraffic {
        return Err(Error::KindMismatch {
            expected: SeriesKind::EdgeTraffic.as_str(),
            actual: traffic.kind.as_str(),
        });
    }
    if !(0.0..=1.0).contains(&swap_rate) {
        return Err(Error::InvalidParam(format!(
            "swap_rate must lie in [0, 1], got {swap_rate}"
        )));
    }
    let edges = topo.edges();
    if traffic.series_count != edges.len() {
        return Err(Error::Dimension(format!(
            "edge traffic has {} series but topology has {} links",
            traffic.series_count,
            edges.len()
        )));
    }
    let n = topo.station_count();
    let values = traffic
        .values
        .iter()
        .map(|row| {
            let mut incident = vec![0u64; n];
            for (&(a, b), &v) in edges.iter().zip(row) {
                incident[a.index()] += u64::from(v);
                incident[b.index()] += u64::from(v);
            }
            incident
                .into_iter()
                .map(|s| round_half_up(swap_rate * s as f64))
                .collect()
        })
        .collect();
    TrafficSeries::new(SeriesKind::StationDemand, values)
}

/// Stations whose series are advanced in time, and by how many hours.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftSpec {
    pub shifted_stations: Vec<StationId>,
    pub shift_hours: usize,
}

impl ShiftSpec {
    /// Picks `round(fraction * n)` stations uniformly at random.
    pub fn random(station_count: usize, fraction: f64, shift_hours: usize, seed: u64) -> Self {
        let k = ((fraction.clamp(0.0, 1.0) * station_count as f64) + 0.5).floor() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked: Vec<StationId> = sample(&mut rng, station_count, k.min(station_count))
            .into_iter()
            .map(StationId::from)
            .collect();
        picked.sort();
        ShiftSpec {
            shifted_stations: picked,
            shift_hours,
        }
    }
}

fn shift_columns(
    traffic: &TrafficSeries,
    columns: &[usize],
    shift: usize,
) -> Result<TrafficSeries> {
    let horizon = traffic.horizon();
    if shift >= horizon {
        return Err(Error::InvalidParam(format!(
            "shift of {shift} hours must be smaller than the horizon ({horizon})"
        )));
    }
    let mut values = traffic.values.clone();
    for &c in columns {
        for (t, row) in values.iter_mut().enumerate() {
            row[c] = traffic.values[(t + shift) % horizon][c];
        }
    }
    TrafficSeries::new(traffic.kind, values)
}

/// Circularly advances the selected stations' demand series:
/// `value[t] = original[(t + shift) mod horizon]`.
pub fn apply_shift(traffic: &TrafficSeries, spec: &ShiftSpec) -> Result<TrafficSeries> {
    if traffic.kind != SeriesKind::StationDemand {
        return Err(Error::KindMismatch {
            expected: SeriesKind::StationDemand.as_str(),
            actual: traffic.kind.as_str(),
        });
    }
    let mut cols = Vec::with_capacity(spec.shifted_stations.len());
    for s in &spec.shifted_stations {
        if s.index() >= traffic.series_count {
            return Err(Error::StationOutOfRange {
                id: s.index(),
                count: traffic.series_count,
            });
        }
        cols.push(s.index());
    }
    cols.sort_unstable();
    cols.dedup();
    shift_columns(traffic, &cols, spec.shift_hours)
}

/// Edge-traffic variant: every link incident to a selected station is shifted.
pub fn apply_shift_edges(
    traffic: &TrafficSeries,
    topo: &Topology,
    spec: &ShiftSpec,
) -> Result<TrafficSeries> {
    if traffic.kind != SeriesKind::EdgeTraffic {
        return Err(Error::KindMismatch {
            expected: SeriesKind::EdgeTraffic.as_str(),
            actual: traffic.kind.as_str(),
        });
    }
    if traffic.series_count != topo.edges().len() {
        return Err(Error::Dimension(
            "edge series count does not match topology".into(),
        ));
    }
    for s in &spec.shifted_stations {
        if s.index() >= topo.station_count() {
            return Err(Error::StationOutOfRange {
                id: s.index(),
                count: topo.station_count(),
            });
        }
    }
    let cols: Vec<usize> = topo
        .edges()
        .iter()
        .enumerate()
        .filter(|(_, (a, b))| {
            spec.shifted_stations.contains(a) || spec.shifted_stations.contains(b)
        })
        .map(|(k, _)| k)
        .collect();
    shift_columns(traffic, &cols, spec.shift_hours)
}
