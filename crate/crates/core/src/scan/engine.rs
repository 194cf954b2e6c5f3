//! Prefix-sum scoring of every space-time region.

use std::cmp::Ordering;
use std::collections::HashMap;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metric::{score_unchecked, BoundMode, Metric, Score};
use super::space::{SearchSpace, WindowFamily};
use crate::error::{Error, Result};
use crate::forecast::{ForecastSeries, SensorSeries};

/// Baselines are summed as integers in units of 2^-72, which represents
/// every double above 2^-20 exactly. Sums are therefore exact and
/// independent of summation order; the aggregate is the correctly rounded
/// double nearest the true sum.
const FRAC_BITS: i32 = 72;
const MAX_TOTAL_BASELINE: f64 = (1u64 << 54) as f64;

pub fn to_fixed(v: f64) -> i128 {
    (v * 2f64.powi(FRAC_BITS)).round() as i128
}

pub fn from_fixed(v: i128) -> f64 {
    v as f64 * 2f64.powi(-FRAC_BITS)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanParams {
    pub metric: Metric,
    pub bound_mode: BoundMode,
    pub windows: WindowFamily,
}

/// Per-sensor cumulative counts and baselines over a scan interval of
/// `len` hours starting at `start`.
#[derive(Debug, Clone)]
pub struct ScanData {
    pub start: i64,
    pub len: usize,
    valid: Vec<bool>,
    c: Vec<Vec<u64>>,
    b: [Vec<Vec<i128>>; 3],
}

fn prefix<T: Copy + std::ops::Add<Output = T>>(zero: T, xs: impl Iterator<Item = T>) -> Vec<T> {
    let mut out = vec![zero];
    let mut acc = zero;
    for x in xs {
        acc = acc + x;
        out.push(acc);
    }
    out
}

impl ScanData {
    /// Sensors without forecasts or counts for every hour of the interval
    /// are marked invalid; regions containing them are skipped, never
    /// zero-filled.
    pub fn new(
        sensor_ids: &[String],
        forecasts: &[ForecastSeries],
        actuals: &[SensorSeries],
        start: i64,
        len: usize,
    ) -> Result<Self> {
        let f_by_id: HashMap<&str, &ForecastSeries> = forecasts
            .iter()
            .map(|f| (f.sensor_id.as_str(), f))
            .collect();
        let a_by_id: HashMap<&str, &SensorSeries> =
            actuals.iter().map(|a| (a.sensor_id.as_str(), a)).collect();
        let end = start + len as i64;
        let n = sensor_ids.len();
        let mut data = ScanData {
            start,
            len,
            valid: vec![false; n],
            c: vec![Vec::new(); n],
            b: [
                vec![Vec::new(); n],
                vec![Vec::new(); n],
                vec![Vec::new(); n],
            ],
        };
        let mut total = 0.0;
        for (i, id) in sensor_ids.iter().enumerate() {
            let (Some(f), Some(a)) = (f_by_id.get(id.as_str()), a_by_id.get(id.as_str())) else {
                debug!("sensor {id}: no forecast or counts");
                continue;
            };
            if !f.covers(start, end) || start < a.start || end > a.end() {
                debug!("sensor {id}: data does not cover the scan interval");
                continue;
            }
            let fo = (start - f.start) as usize;
            let ao = (start - a.start) as usize;
            let bounds = [&f.mean, &f.upper, &f.lower];
            for series in bounds {
                for &v in &series[fo..fo + len] {
                    if !(v > 0.0) || !v.is_finite() {
                        return Err(Error::InvalidInput(format!(
                            "sensor {id}: baselines must be positive and finite, got {v}"
                        )));
                    }
                }
            }
            total += f.upper[fo..fo + len].iter().sum::<f64>();
            data.valid[i] = true;
            data.c[i] = prefix(0u64, a.counts[ao..ao + len].iter().map(|&c| c as u64));
            for (k, series) in bounds.into_iter().enumerate() {
                data.b[k][i] = prefix(0i128, series[fo..fo + len].iter().map(|&v| to_fixed(v)));
            }
        }
        if total >= MAX_TOTAL_BASELINE {
            return Err(Error::InvalidInput(format!(
                "baselines sum to {total:e}, beyond the supported range"
            )));
        }
        Ok(data)
    }

    pub fn is_valid(&self, sensor: usize) -> bool {
        self.valid[sensor]
    }

    /// Exact `(B, C)` over members and the inclusive hour offsets
    /// `[first, last]`.
    pub fn aggregate(
        &self,
        members: &[usize],
        first: usize,
        last: usize,
        mode: BoundMode,
    ) -> (f64, f64) {
        let k = match mode {
            BoundMode::Mean => 0,
            BoundMode::Upper => 1,
            BoundMode::Lower => 2,
        };
        let mut b = 0i128;
        let mut c = 0u64;
        for &m in members {
            let pb = &self.b[k][m];
            let pc = &self.c[m];
            b += pb[last + 1] - pb[first];
            c += pc[last + 1] - pc[first];
        }
        (from_fixed(b), c as f64)
    }
}

/// One scored space-time region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionScore {
    /// Index into the search space's units.
    pub unit: usize,
    /// First and last hour of the window, inclusive.
    pub t_start: i64,
    pub t_end: i64,
    /// Baseline selected by the bound mode.
    pub b: f64,
    pub c: f64,
    pub score: Score,
    pub corrected: Option<f64>,
    /// 1-based position after sorting; 0 until ranked.
    pub rank: usize,
}

/// Descending score order with deterministic tie-breaks: earlier start,
/// smaller extent, smaller key, direction, earlier end.
pub fn compare_scores(space: &SearchSpace, a: &RegionScore, b: &RegionScore) -> Ordering {
    b.score
        .log
        .total_cmp(&a.score.log)
        .then(a.t_start.cmp(&b.t_start))
        .then_with(|| {
            let (ua, ub) = (&space.units[a.unit], &space.units[b.unit]);
            ua.extent
                .total_cmp(&ub.extent)
                .then_with(|| ua.key.cmp(&ub.key))
                .then(ua.direction.cmp(&ub.direction))
        })
        .then(a.t_end.cmp(&b.t_end))
}

fn usable(space: &SearchSpace, data: &ScanData) -> Vec<usize> {
    let mut skipped = 0usize;
    let units: Vec<usize> = (0..space.units.len())
        .filter(|&u| {
            let ok = space.units[u].members.iter().all(|&m| data.is_valid(m));
            if !ok {
                skipped += 1;
                debug!(
                    "region {} skipped: member sensor without data",
                    space.units[u].key
                );
            }
            ok
        })
        .collect();
    if skipped > 0 {
        warn!(
            "{skipped} of {} {} regions skipped because a member sensor lacks forecasts or counts",
            space.units.len(),
            space.scan_type
        );
    }
    units
}

fn score_unit(
    space: &SearchSpace,
    data: &ScanData,
    params: &ScanParams,
    windows: &[(usize, usize)],
    u: usize,
) -> Vec<RegionScore> {
    let members = &space.units[u].members;
    windows
        .iter()
        .filter(|&&(_, last)| last < data.len)
        .map(|&(first, last)| {
            let (b, c) = data.aggregate(members, first, last, params.bound_mode);
            RegionScore {
                unit: u,
                t_start: data.start + first as i64,
                t_end: data.start + last as i64,
                b,
                c,
                score: score_unchecked(params.metric, b, c),
                corrected: None,
                rank: 0,
            }
        })
        .collect()
}

/// Scores every region, sorted best first and ranked.
pub fn scan(space: &SearchSpace, data: &ScanData, params: &ScanParams) -> Vec<RegionScore> {
    let windows = params.windows.windows();
    let mut scores: Vec<RegionScore> = usable(space, data)
        .into_par_iter()
        .flat_map_iter(|u| score_unit(space, data, params, &windows, u))
        .collect();
    scores.par_sort_unstable_by(|a, b| compare_scores(space, a, b));
    for (i, s) in scores.iter_mut().enumerate() {
        s.rank = i + 1;
    }
    scores
}

/// The best region without materialising every score; `None` when no
/// region can be scored.
pub fn scan_top(space: &SearchSpace, data: &ScanData, params: &ScanParams) -> Option<RegionScore> {
    let windows = params.windows.windows();
    let best = |a: RegionScore, b: RegionScore| {
        if compare_scores(space, &a, &b) == Ordering::Greater {
            b
        } else {
            a
        }
    };
    usable(space, data)
        .into_par_iter()
        .filter_map(|u| {
            score_unit(space, data, params, &windows, u)
                .into_iter()
                .reduce(best)
        })
        .reduce_with(best)
        .map(|s| RegionScore { rank: 1, ..s })
}

/// First element of an already sorted score list.
pub fn top_region(scores: &[RegionScore]) -> Option<&RegionScore> {
    scores.first()
}
