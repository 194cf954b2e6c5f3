//! Per-sensor baselines: Holt-Winters and Gaussian-process forecasts with
//! uncertainty bounds.

pub mod gp;
pub mod holt_winters;
mod io;
mod preprocess;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use gp::{fit_gp, forecast_gp, GpConfig, GpState, KernelParams};
pub use holt_winters::{fit_holt_winters, forecast_holt_winters, HwModel, HwParams};
pub use io::{read_counts_csv, read_forecasts_csv, write_counts_csv, write_forecasts_csv};
pub use preprocess::{preprocess, Rejection};

/// Lower floor applied to every baseline so likelihood ratios stay defined.
pub const BASELINE_FLOOR: f64 = 1e-6;

pub const DEFAULT_SIGMA_K: f64 = 3.0;

/// Day of week of an hour since the Unix epoch, Monday = 0.
pub fn weekday(hour: i64) -> usize {
    (hour.div_euclid(24) + 3).rem_euclid(7) as usize
}

/// Contiguous hourly counts for one sensor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorSeries {
    pub sensor_id: String,
    /// First timestamp, in hours since the Unix epoch.
    pub start: i64,
    pub counts: Vec<u32>,
}

impl SensorSeries {
    pub fn new(sensor_id: impl Into<String>, start: i64, counts: Vec<u32>) -> Self {
        Self {
            sensor_id: sensor_id.into(),
            start,
            counts,
        }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// One past the last timestamp.
    pub fn end(&self) -> i64 {
        self.start + self.counts.len() as i64
    }

    pub fn timestamps(&self) -> impl Iterator<Item = i64> + '_ {
        self.start..self.end()
    }

    pub fn weekdays(&self) -> impl Iterator<Item = usize> + '_ {
        self.timestamps().map(weekday)
    }

    pub fn count_at(&self, hour: i64) -> Option<u32> {
        let i = hour.checked_sub(self.start)?;
        usize::try_from(i)
            .ok()
            .and_then(|i| self.counts.get(i).copied())
    }

    /// Sub-series covering `[from, to)`, clipped to the available data.
    pub fn window(&self, from: i64, to: i64) -> SensorSeries {
        let lo = from.clamp(self.start, self.end());
        let hi = to.clamp(lo, self.end());
        SensorSeries {
            sensor_id: self.sensor_id.clone(),
            start: lo,
            counts: self.counts[(lo - self.start) as usize..(hi - self.start) as usize].to_vec(),
        }
    }
}

/// Baseline mean, spread and bounds over a forecast window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastSeries {
    pub sensor_id: String,
    pub start: i64,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ForecastSeries {
    /// Bounds are `mean ± k·std` with the lower bound and the mean floored
    /// at [`BASELINE_FLOOR`].
    pub fn from_moments(
        sensor_id: impl Into<String>,
        start: i64,
        mean: Vec<f64>,
        std: Vec<f64>,
        k: f64,
    ) -> Self {
        assert_eq!(mean.len(), std.len());
        let mean: Vec<f64> = mean.into_iter().map(|m| m.max(BASELINE_FLOOR)).collect();
        let std: Vec<f64> = std.into_iter().map(|s| s.max(0.0)).collect();
        let lower = mean
            .iter()
            .zip(&std)
            .map(|(m, s)| (m - k * s).max(BASELINE_FLOOR))
            .collect();
        let upper = mean.iter().zip(&std).map(|(m, s)| m + k * s).collect();
        Self {
            sensor_id: sensor_id.into(),
            start,
            mean,
            std,
            lower,
            upper,
        }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn end(&self) -> i64 {
        self.start + self.mean.len() as i64
    }

    pub fn covers(&self, from: i64, to: i64) -> bool {
        from >= self.start && to <= self.end()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ForecastMethod {
    HoltWinters,
    Gp(GpConfig),
}

impl ForecastMethod {
    pub fn name(&self) -> &'static str {
        match self {
            ForecastMethod::HoltWinters => "HW",
            ForecastMethod::Gp(_) => "GP",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastSettings {
    pub method: ForecastMethod,
    pub sigma_k: f64,
    /// Divide out per-weekday level factors before fitting.
    pub weekday_adjust: bool,
}

impl Default for ForecastSettings {
    fn default() -> Self {
        Self {
            method: ForecastMethod::HoltWinters,
            sigma_k: DEFAULT_SIGMA_K,
            weekday_adjust: true,
        }
    }
}

/// Multiplicative day-of-week level factors (weekday mean / overall mean).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeekdayFactors(pub [f64; 7]);

impl WeekdayFactors {
    pub fn estimate(series: &SensorSeries) -> Self {
        let mut sum = [0.0; 7];
        let mut n = [0usize; 7];
        for (h, &c) in series.timestamps().zip(&series.counts) {
            let d = weekday(h);
            sum[d] += c as f64;
            n[d] += 1;
        }
        let total: f64 = sum.iter().sum();
        let overall = total / series.len().max(1) as f64;
        let mut f = [1.0; 7];
        if overall > 0.0 {
            for d in 0..7 {
                if n[d] > 0 && sum[d] > 0.0 {
                    f[d] = (sum[d] / n[d] as f64) / overall;
                }
            }
        }
        Self(f)
    }

    pub fn at(&self, hour: i64) -> f64 {
        self.0[weekday(hour)]
    }
}

/// Forecasts `horizon` hours following the end of `train`.
///
/// Only `train` is read; the caller is responsible for passing a training
/// window disjoint from the forecast window.
pub fn forecast_sensor(
    train: &SensorSeries,
    horizon: usize,
    settings: &ForecastSettings,
) -> Result<ForecastSeries> {
    if horizon == 0 {
        return Err(Error::Forecast {
            sensor: train.sensor_id.clone(),
            message: "horizon must be at least one hour".into(),
        });
    }
    let factors = if settings.weekday_adjust {
        WeekdayFactors::estimate(train)
    } else {
        WeekdayFactors([1.0; 7])
    };
    let adjusted: Vec<f64> = train
        .timestamps()
        .zip(&train.counts)
        .map(|(h, &c)| c as f64 / factors.at(h))
        .collect();
    let start = train.end();

    let (mean, std) = match &settings.method {
        ForecastMethod::HoltWinters => {
            let model = fit_holt_winters(&adjusted).map_err(|message| Error::Forecast {
                sensor: train.sensor_id.clone(),
                message,
            })?;
            if matches!(model, HwModel::Floor) {
                log::warn!(
                    "sensor {}: all-zero training data, using a constant floor baseline",
                    train.sensor_id
                );
            }
            (
                forecast_holt_winters(&model, &adjusted, horizon),
                vec![0.0; horizon],
            )
        }
        ForecastMethod::Gp(config) => {
            let state = fit_gp(train.start, &adjusted, config).map_err(|e| match e {
                Error::IllConditioned { .. } => e,
                other => Error::Forecast {
                    sensor: train.sensor_id.clone(),
                    message: other.to_string(),
                },
            })?;
            forecast_gp(&state, horizon)
        }
    };
    let mean = mean
        .iter()
        .enumerate()
        .map(|(i, m)| m * factors.at(start + i as i64))
        .collect();
    let std = std
        .iter()
        .enumerate()
        .map(|(i, s)| s * factors.at(start + i as i64))
        .collect();
    Ok(ForecastSeries::from_moments(
        train.sensor_id.clone(),
        start,
        mean,
        std,
        settings.sigma_k,
    ))
}

/// Forecasts every sensor in parallel; output order follows the input.
pub fn forecast_all(
    trains: &[SensorSeries],
    horizon: usize,
    settings: &ForecastSettings,
) -> Result<Vec<ForecastSeries>> {
    trains
        .par_iter()
        .map(|t| forecast_sensor(t, horizon, settings))
        .collect()
}
