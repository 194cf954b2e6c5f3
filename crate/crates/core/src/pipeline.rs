//! One evaluation day end to end: train, forecast, scan.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::{forecast_all, ForecastSeries, ForecastSettings, SensorSeries};
use crate::scan::{scan_top, RegionScore, ScanData, ScanParams, SearchSpace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSettings {
    pub forecast: ForecastSettings,
    pub train_hours: usize,
    /// Window family; its `max_len` is the scan interval `W`.
    pub scan: ScanParams,
}

impl PipelineSettings {
    pub fn window_hours(&self) -> usize {
        self.scan.windows.max_len
    }
}

/// Hour ranges, half-open, used for one evaluation day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayPlan {
    pub day: usize,
    pub train_start: i64,
    pub train_end: i64,
    pub window_start: i64,
    pub window_end: i64,
}

/// The scan interval is the `window_hours` ending at the close of `day`;
/// training is the `train_hours` before it, clipped at `data_start` and
/// never reaching past `train_cap`.
pub fn plan_day(
    data_start: i64,
    day: usize,
    window_hours: usize,
    train_hours: usize,
    train_cap: Option<i64>,
) -> Result<DayPlan> {
    let window_end = data_start + 24 * (day as i64 + 1);
    let window_start = window_end - window_hours as i64;
    if window_start < data_start {
        return Err(Error::InvalidInput(format!(
            "day {day}: scan window starts before the data"
        )));
    }
    let train_end = train_cap.map_or(window_start, |c| c.min(window_start));
    let train_start = (train_end - train_hours as i64).max(data_start);
    if train_end - train_start < 48 {
        return Err(Error::InvalidInput(format!(
            "day {day}: only {} training hours available, need at least 48",
            train_end - train_start
        )));
    }
    Ok(DayPlan {
        day,
        train_start,
        train_end,
        window_start,
        window_end,
    })
}

#[derive(Debug, Clone)]
pub struct DayOutcome {
    pub plan: DayPlan,
    pub forecasts: Vec<ForecastSeries>,
    /// Best region per search space, in the order given.
    pub tops: Vec<Option<RegionScore>>,
    pub forecast_secs: f64,
    /// Scan time per search space.
    pub scan_secs: Vec<f64>,
}

/// Forecasts every sensor from its training range and returns the top
/// region of each search space. Counts inside the scan interval are only
/// read by the scan, never by the forecast.
pub fn run_day(
    series: &[SensorSeries],
    spaces: &[&SearchSpace],
    plan: &DayPlan,
    settings: &PipelineSettings,
) -> Result<DayOutcome> {
    let t = Instant::now();
    let trains: Vec<SensorSeries> = series
        .iter()
        .map(|s| s.window(plan.train_start, plan.train_end))
        .collect();
    let horizon = (plan.window_end - plan.train_end) as usize;
    let forecasts = forecast_all(&trains, horizon, &settings.forecast)?;
    let forecast_secs = t.elapsed().as_secs_f64();

    let mut tops = Vec::with_capacity(spaces.len());
    let mut scan_secs = Vec::with_capacity(spaces.len());
    for space in spaces {
        let t = Instant::now();
        let data = ScanData::new(
            &space.sensor_ids,
            &forecasts,
            series,
            plan.window_start,
            settings.window_hours(),
        )?;
        tops.push(scan_top(space, &data, &settings.scan));
        scan_secs.push(t.elapsed().as_secs_f64());
    }
    Ok(DayOutcome {
        plan: *plan,
        forecasts,
        tops,
        forecast_secs,
        scan_secs,
    })
}

/// Runs several days in parallel; output follows `days`.
pub fn run_days(
    series: &[SensorSeries],
    spaces: &[&SearchSpace],
    days: &[usize],
    settings: &PipelineSettings,
    train_cap: Option<i64>,
) -> Vec<Result<DayOutcome>> {
    let start = series.iter().map(|s| s.start).min().unwrap_or(0);
    days.par_iter()
        .map(|&d| {
            let plan = plan_day(
                start,
                d,
                settings.window_hours(),
                settings.train_hours,
                train_cap,
            )?;
            run_day(series, spaces, &plan, settings)
        })
        .collect()
}
