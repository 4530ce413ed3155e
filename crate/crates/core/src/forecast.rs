//! Demand forecasters producing `h`-hour windows from a history prefix.
//!
//! A forecast made at hour `t` has seen hours `0..t` and step `s` (1-based)
//! predicts hour `t + s - 1`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Predicted demand for hours `start_hour .. start_hour + h`,
/// `values[step][station]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastWindow {
    pub start_hour: usize,
    pub values: Vec<Vec<f64>>,
}

impl ForecastWindow {
    pub fn new(start_hour: usize, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParam(
                "forecast window must cover at least one hour".into(),
            ));
        }
        let n = values[0].len();
        for row in &values {
            if row.len() != n {
                return Err(Error::Dimension("ragged forecast window".into()));
            }
            if let Some(v) = row.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
                return Err(Error::InvalidParam(format!(
                    "forecast value {v} is not a non-negative number"
                )));
            }
        }
        Ok(ForecastWindow { start_hour, values })
    }

    pub fn h(&self) -> usize {
        self.values.len()
    }

    pub fn station_count(&self) -> usize {
        self.values[0].len()
    }

    /// Integer demand matrix with half-up rounding.
    pub fn integerized(&self) -> Vec<Vec<u32>> {
        self.values
            .iter()
            .map(|r| {
                r.iter()
                    .map(|&v| crate::traffic::round_half_up(v))
                    .collect()
            })
            .collect()
    }

    pub fn truncated(&self, h: usize) -> ForecastWindow {
        ForecastWindow {
            start_hour: self.start_hour,
            values: self.values[..h.min(self.h())].to_vec(),
        }
    }

    /// Rows in the external forecast CSV format (no header).
    pub fn to_csv_rows(&self, out: &mut String) {
        for (k, row) in self.values.iter().enumerate() {
            for (i, v) in row.iter().enumerate() {
                let _ = writeln!(out, "{},{},{},{}", self.start_hour, k + 1, i, v);
            }
        }
    }
}

pub const EXTERNAL_FORECAST_HEADER: &str = "t,step,station,value";

pub fn write_external_forecast(path: impl AsRef<Path>, windows: &[ForecastWindow]) -> Result<()> {
    let path = path.as_ref();
    let mut out = format!("{EXTERNAL_FORECAST_HEADER}\n");
    for w in windows {
        w.to_csv_rows(&mut out);
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn default_period() -> usize {
    24
}

/// Forecaster selection and parameters, as found in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ForecasterSpec {
    /// Returns the realized future.
    Oracle,
    /// Realized future times `1 + ε`, ε ~ N(0, σ²) with
    /// σ = noise · (1 + noise_growth · (step − 1)), truncated at zero.
    NoisyOracle {
        noise: f64,
        #[serde(default)]
        noise_growth: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Value one period earlier; persistence with less than a period of history.
    SeasonalNaive {
        #[serde(default = "default_period")]
        period: usize,
    },
    /// Mean of all earlier same-phase observations, optionally restricted to
    /// the last `window` periods.
    HistoricalAverage {
        #[serde(default = "default_period")]
        period: usize,
        #[serde(default)]
        window: Option<usize>,
    },
    ExternalFile {
        path: PathBuf,
    },
}

impl ForecasterSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ForecasterSpec::Oracle => "oracle",
            ForecasterSpec::NoisyOracle { .. } => "noisy-oracle",
            ForecasterSpec::SeasonalNaive { .. } => "seasonal-naive",
            ForecasterSpec::HistoricalAverage { .. } => "historical-average",
            ForecasterSpec::ExternalFile { .. } => "external-file",
        }
    }

    pub fn needs_future(&self) -> bool {
        matches!(
            self,
            ForecasterSpec::Oracle | ForecasterSpec::NoisyOracle { .. }
        )
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ForecasterSpec::NoisyOracle {
                noise,
                noise_growth,
                ..
            } => {
                if !(*noise >= 0.0 && noise.is_finite()) {
                    return Err(Error::InvalidParam(format!(
                        "noise must be >= 0, got {noise}"
                    )));
                }
                if !(*noise_growth >= 0.0 && noise_growth.is_finite()) {
                    return Err(Error::InvalidParam(format!(
                        "noise_growth must be >= 0, got {noise_growth}"
                    )));
                }
            }
            ForecasterSpec::SeasonalNaive { period }
            | ForecasterSpec::HistoricalAverage { period, .. }
                if *period == 0 =>
            {
                return Err(Error::InvalidParam("period must be positive".into()));
            }
            _ => {}
        }
        if let ForecasterSpec::HistoricalAverage {
            window: Some(0), ..
        } = self
        {
            return Err(Error::InvalidParam(
                "averaging window must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A ready-to-use forecaster. External files are read once at construction.
#[derive(Debug, Clone)]
pub struct Forecaster {
    spec: ForecasterSpec,
    external: Option<ExternalForecastTable>,
}

impl Forecaster {
    pub fn new(spec: ForecasterSpec) -> Result<Self> {
        spec.validate()?;
        let external = match &spec {
            ForecasterSpec::ExternalFile { path } => Some(ExternalForecastTable::load(path)?),
            _ => None,
        };
        Ok(Forecaster { spec, external })
    }

    pub fn spec(&self) -> &ForecasterSpec {
        &self.spec
    }

    /// Forecast for hours `t .. t + h` where `t = history.len()`.
    ///
    /// `actual_future` must start at hour `t` and cover `h` hours for the
    /// oracle kinds; other kinds ignore it.
    pub fn predict(
        &self,
        history: &[Vec<u32>],
        actual_future: Option<&[Vec<u32>]>,
        h: usize,
    ) -> Result<ForecastWindow> {
        if h == 0 {
            return Err(Error::InvalidParam(
                "forecast length h must be at least 1".into(),
            ));
        }
        let t = history.len();
        let values = match &self.spec {
            ForecasterSpec::Oracle => to_f64(future_slice(actual_future, h)?),
            ForecasterSpec::NoisyOracle {
                noise,
                noise_growth,
                seed,
            } => {
                let fut = future_slice(actual_future, h)?;
                fut.iter()
                    .enumerate()
                    .map(|(k, row)| {
                        let sigma = noise * (1.0 + noise_growth * k as f64);
                        row.iter()
                            .enumerate()
                            .map(|(i, &d)| {
                                let eps = sigma * entry_normal(*seed, t, i, k + 1);
                                (f64::from(d) * (1.0 + eps)).max(0.0)
                            })
                            .collect()
                    })
                    .collect()
            }
            ForecasterSpec::SeasonalNaive { period } => {
                let last = history.last().ok_or_else(|| {
                    Error::InsufficientHistory(
                        "seasonal-naive needs at least one observed hour".into(),
                    )
                })?;
                (t..t + h)
                    .map(|u| match u.checked_sub(*period) {
                        Some(src) if src < t => {
                            history[src].iter().map(|&v| f64::from(v)).collect()
                        }
                        _ => last.iter().map(|&v| f64::from(v)).collect(),
                    })
                    .collect()
            }
            ForecasterSpec::HistoricalAverage { period, window } => {
                let last = history.last().ok_or_else(|| {
                    Error::InsufficientHistory(
                        "historical-average needs at least one observed hour".into(),
                    )
                })?;
                let n = last.len();
                (t..t + h)
                    .map(|u| {
                        // same phase, strictly before t, newest first
                        let first = u % period;
                        let mut hours: Vec<usize> = (first..t).step_by(*period).collect();
                        if let Some(w) = window {
                            let skip = hours.len().saturating_sub(*w);
                            hours.drain(..skip);
                        }
                        if hours.is_empty() {
                            return last.iter().map(|&v| f64::from(v)).collect();
                        }
                        let mut sums = vec![0u64; n];
                        for &src in &hours {
                            for (s, &v) in sums.iter_mut().zip(&history[src]) {
                                *s += u64::from(v);
                            }
                        }
                        sums.into_iter()
                            .map(|s| s as f64 / hours.len() as f64)
                            .collect()
                    })
                    .collect()
            }
            ForecasterSpec::ExternalFile { .. } => {
                let table = self.external.as_ref().expect("loaded in Forecaster::new");
                return table.window(t, h);
            }
        };
        ForecastWindow::new(t, values)
    }
}

/// One-shot convenience wrapper around [`Forecaster`].
pub fn predict(
    spec: &ForecasterSpec,
    history: &[Vec<u32>],
    actual_future: Option<&[Vec<u32>]>,
    h: usize,
) -> Result<ForecastWindow> {
    Forecaster::new(spec.clone())?.predict(history, actual_future, h)
}

fn future_slice(actual_future: Option<&[Vec<u32>]>, h: usize) -> Result<&[Vec<u32>]> {
    let fut = actual_future.ok_or_else(|| {
        Error::InsufficientHistory("oracle forecasters need the realized future".into())
    })?;
    if fut.len() < h {
        return Err(Error::InsufficientHistory(format!(
            "realized future covers {} hours, {h} requested",
            fut.len()
        )));
    }
    Ok(&fut[..h])
}

fn to_f64(rows: &[Vec<u32>]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| r.iter().map(|&v| f64::from(v)).collect())
        .collect()
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Standard normal draw keyed by `(seed, t, station, step)`.
fn entry_normal(seed: u64, t: usize, station: usize, step: usize) -> f64 {
    let mut key = splitmix64(seed);
    for part in [t as u64, station as u64, step as u64] {
        key = splitmix64(key ^ part);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    StandardNormal.sample(&mut rng)
}

/// Predictions read from an external forecast CSV (`t,step,station,value`).
#[derive(Debug, Clone, Default)]
pub struct ExternalForecastTable {
    entries: HashMap<(usize, usize, usize), f64>,
    stations: HashMap<usize, usize>,
}

impl ExternalForecastTable {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut table = ExternalForecastTable::default();
        let mut saw_header = false;
        for (lineno, raw) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !saw_header {
                if line.replace(' ', "") != EXTERNAL_FORECAST_HEADER {
                    return Err(Error::parse(
                        origin,
                        lineno,
                        format!("expected header `{EXTERNAL_FORECAST_HEADER}`"),
                    ));
                }
                saw_header = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(Error::parse(origin, lineno, "expected 4 fields"));
            }
            let int = |k: usize| {
                fields[k].parse::<usize>().map_err(|_| {
                    Error::parse(origin, lineno, format!("bad integer {:?}", fields[k]))
                })
            };
            let (t, step, station) = (int(0)?, int(1)?, int(2)?);
            if step == 0 {
                return Err(Error::parse(origin, lineno, "steps are 1-based"));
            }
            let value: f64 = fields[3]
                .parse()
                .map_err(|_| Error::parse(origin, lineno, format!("bad value {:?}", fields[3])))?;
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::parse(
                    origin,
                    lineno,
                    format!("negative or non-finite value {value}"),
                ));
            }
            if table.entries.insert((t, step, station), value).is_some() {
                return Err(Error::parse(
                    origin,
                    lineno,
                    format!("duplicate entry t={t} step={step} station={station}"),
                ));
            }
            let n = table.stations.entry(t).or_insert(0);
            *n = (*n).max(station + 1);
        }
        if !saw_header {
            return Err(Error::parse(origin, 0, "empty forecast file"));
        }
        Ok(table)
    }

    pub fn window(&self, t: usize, h: usize) -> Result<ForecastWindow> {
        let n = *self.stations.get(&t).ok_or(Error::MissingForecast {
            t,
            step: 1,
            station: 0,
        })?;
        let mut values = Vec::with_capacity(h);
        for step in 1..=h {
            let mut row = Vec::with_capacity(n);
            for station in 0..n {
                row.push(
                    *self
                        .entries
                        .get(&(t, step, station))
                        .ok_or(Error::MissingForecast { t, step, station })?,
                );
            }
            values.push(row);
        }
        ForecastWindow::new(t, values)
    }
}

pub fn load_external_forecast(
    path: impl AsRef<Path>,
    t: usize,
    h: usize,
) -> Result<ForecastWindow> {
    ExternalForecastTable::load(path)?.window(t, h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn periodic(days: usize, stations: usize) -> Vec<Vec<u32>> {
        (0..days * 24)
            .map(|h| (0..stations).map(|i| ((h % 24) * 3 + i) as u32).collect())
            .collect()
    }

    #[test]
    fn oracle_returns_future() {
        let series = periodic(2, 3);
        let w = predict(
            &ForecasterSpec::Oracle,
            &series[..10],
            Some(&series[10..]),
            6,
        )
        .unwrap();
        assert_eq!(w.start_hour, 10);
        assert_eq!(w.integerized(), series[10..16].to_vec());
    }

    #[test]
    fn zero_noise_equals_oracle() {
        let series = periodic(2, 3);
        let spec = ForecasterSpec::NoisyOracle {
            noise: 0.0,
            noise_growth: 0.5,
            seed: 3,
        };
        let noisy = predict(&spec, &series[..5], Some(&series[5..]), 4).unwrap();
        let exact = predict(&ForecasterSpec::Oracle, &series[..5], Some(&series[5..]), 4).unwrap();
        assert_eq!(noisy, exact);
    }

    #[test]
    fn oracle_without_future_errors() {
        let series = periodic(1, 2);
        assert!(matches!(
            predict(&ForecasterSpec::Oracle, &series, None, 2),
            Err(Error::InsufficientHistory(_))
        ));
        assert!(predict(
            &ForecasterSpec::Oracle,
            &series[..20],
            Some(&series[20..]),
            6
        )
        .is_err());
    }

    #[test]
    fn seasonal_naive_exact_on_periodic_series() {
        let series = periodic(4, 3);
        let spec = ForecasterSpec::SeasonalNaive { period: 24 };
        for t in 24..(3 * 24) {
            let w = predict(&spec, &series[..t], None, 6).unwrap();
            assert_eq!(w.integerized(), series[t..t + 6].to_vec(), "t={t}");
        }
    }

    #[test]
    fn seasonal_naive_falls_back_to_persistence() {
        let series = periodic(1, 2);
        let w = predict(
            &ForecasterSpec::SeasonalNaive { period: 24 },
            &series[..5],
            None,
            3,
        )
        .unwrap();
        for row in w.integerized() {
            assert_eq!(row, series[4]);
        }
        assert!(predict(&ForecasterSpec::SeasonalNaive { period: 24 }, &[], None, 3).is_err());
    }

    #[test]
    fn historical_average_matches_direct_mean() {
        let series = periodic(12, 2);
        let spec = ForecasterSpec::HistoricalAverage {
            period: 24,
            window: None,
        };
        for t in [240, 241, 250, 263] {
            let w = predict(&spec, &series[..t], None, 6).unwrap();
            for (k, row) in w.values.iter().enumerate() {
                let u = t + k;
                for (i, &v) in row.iter().enumerate() {
                    let obs: Vec<f64> = (0..t)
                        .filter(|s| s % 24 == u % 24)
                        .map(|s| series[s][i] as f64)
                        .collect();
                    assert!(obs.len() >= 10);
                    let mean = obs.iter().sum::<f64>() / obs.len() as f64;
                    assert_eq!(v, mean);
                    assert_eq!(v, series[u][i] as f64);
                }
            }
        }
    }

    #[test]
    fn historical_average_respects_window() {
        let mut series = periodic(3, 1);
        series[0][0] = 1000;
        let all = predict(
            &ForecasterSpec::HistoricalAverage {
                period: 24,
                window: None,
            },
            &series[..72],
            None,
            1,
        )
        .unwrap();
        let recent = predict(
            &ForecasterSpec::HistoricalAverage {
                period: 24,
                window: Some(2),
            },
            &series[..72],
            None,
            1,
        )
        .unwrap();
        assert!(all.values[0][0] > 300.0);
        assert_eq!(recent.values[0][0], 0.0);
    }

    #[test]
    fn noisy_oracle_is_deterministic_and_non_negative() {
        let series = periodic(2, 4);
        let spec = ForecasterSpec::NoisyOracle {
            noise: 2.0,
            noise_growth: 0.0,
            seed: 9,
        };
        let a = predict(&spec, &series[..7], Some(&series[7..]), 6).unwrap();
        let b = predict(&spec, &series[..7], Some(&series[7..]), 6).unwrap();
        assert_eq!(a, b);
        assert!(a.values.iter().flatten().all(|&v| v >= 0.0));
    }

    #[test]
    fn noisy_oracle_relative_rmse_tracks_coefficient() {
        // Direct measurement over 12,000 entries.
        let future: Vec<Vec<u32>> = vec![vec![50; 20]; 6];
        let sigma = 0.15;
        let spec = ForecasterSpec::NoisyOracle {
            noise: sigma,
            noise_growth: 0.0,
            seed: 1,
        };
        let f = Forecaster::new(spec).unwrap();
        let hist = vec![vec![0u32; 20]; 100];
        let mut sq = 0.0;
        let mut count = 0usize;
        for t in 0..100 {
            let w = f.predict(&hist[..t], Some(&future), 6).unwrap();
            for row in &w.values {
                for &v in row {
                    sq += ((v - 50.0) / 50.0).powi(2);
                    count += 1;
                }
            }
        }
        assert!(count >= 10_000);
        let rel = (sq / count as f64).sqrt();
        assert!((rel - sigma).abs() <= 0.1 * sigma, "relative RMSE {rel}");
    }

    #[test]
    fn external_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        let w =
            ForecastWindow::new(7, vec![vec![1.5, 0.0], vec![2.25, 3.0], vec![0.0, 0.0]]).unwrap();
        write_external_forecast(&p, std::slice::from_ref(&w)).unwrap();
        assert_eq!(load_external_forecast(&p, 7, 3).unwrap(), w);

        let zeros = ForecastWindow::new(0, vec![vec![0.0; 3]; 2]).unwrap();
        write_external_forecast(&p, std::slice::from_ref(&zeros)).unwrap();
        assert_eq!(load_external_forecast(&p, 0, 2).unwrap(), zeros);

        let mut text = String::from("t,step,station,value\n");
        for step in [1, 2, 4, 5, 6] {
            text.push_str(&format!("4,{step},0,1.0\n"));
        }
        let table = ExternalForecastTable::parse(&text, Path::new("x")).unwrap();
        match table.window(4, 6).unwrap_err() {
            Error::MissingForecast { t, step, .. } => assert_eq!((t, step), (4, 3)),
            e => panic!("{e}"),
        }

        let neg = "t,step,station,value\n0,1,0,-1\n";
        assert!(matches!(
            ExternalForecastTable::parse(neg, Path::new("x")),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn external_forecaster_uses_history_length() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        let w = ForecastWindow::new(2, vec![vec![4.0]]).unwrap();
        write_external_forecast(&p, std::slice::from_ref(&w)).unwrap();
        let f = Forecaster::new(ForecasterSpec::ExternalFile { path: p }).unwrap();
        assert_eq!(f.predict(&[vec![0], vec![0]], None, 1).unwrap(), w);
    }

    #[test]
    fn integerization_rounds_half_up() {
        let w = ForecastWindow::new(0, vec![vec![0.49, 0.5, 2.5, 3.7]]).unwrap();
        assert_eq!(w.integerized(), vec![vec![0, 1, 3, 4]]);
    }
}
