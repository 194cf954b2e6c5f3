use std::collections::BTreeMap;
use std::fmt;

use super::SensorSeries;

/// Why a raw series was dropped.
#[derive(Debug, Clone, PartialEq)]
pub enum Rejection {
    Empty,
    Coverage {
        coverage: f64,
        required: f64,
    },
    Gap {
        start: i64,
        hours: usize,
        max_gap: usize,
    },
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rejection::Empty => write!(f, "no observations"),
            Rejection::Coverage { coverage, required } => {
                write!(f, "coverage {coverage:.3} below required {required:.3}")
            }
            Rejection::Gap {
                start,
                hours,
                max_gap,
            } => {
                write!(f, "gap of {hours} hours starting at hour {start} exceeds the {max_gap}-hour limit")
            }
        }
    }
}

impl std::error::Error for Rejection {}

/// Multiple of the 99th percentile above which a count is treated as an anomaly.
const ANOMALY_FACTOR: f64 = 5.0;

/// Turns raw, possibly gappy observations into a contiguous hourly series.
///
/// `span` is the half-open hour range the series should cover; by default
/// the first to last observed hour. Counts above five times the series' 99th
/// percentile are dropped as anomalies, then every gap of at most `max_gap`
/// hours is linearly interpolated and rounded. Edge gaps copy the nearest
/// observation.
pub fn preprocess(
    sensor_id: &str,
    observations: &BTreeMap<i64, u32>,
    span: Option<(i64, i64)>,
    max_gap: usize,
    min_coverage: f64,
) -> Result<SensorSeries, Rejection> {
    let (&first, _) = observations.first_key_value().ok_or(Rejection::Empty)?;
    let (&last, _) = observations.last_key_value().ok_or(Rejection::Empty)?;
    let (start, end) = span.unwrap_or((first, last + 1));
    if end <= start {
        return Err(Rejection::Empty);
    }
    let len = (end - start) as usize;
    let mut values: Vec<Option<f64>> = vec![None; len];
    for (&h, &c) in observations.range(start..end) {
        values[(h - start) as usize] = Some(c as f64);
    }
    let observed = values.iter().filter(|v| v.is_some()).count();
    if observed == 0 {
        return Err(Rejection::Empty);
    }
    let coverage = observed as f64 / len as f64;
    if coverage < min_coverage {
        return Err(Rejection::Coverage {
            coverage,
            required: min_coverage,
        });
    }

    let mut sorted: Vec<f64> = values.iter().flatten().copied().collect();
    sorted.sort_by(f64::total_cmp);
    let rank = ((0.99 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    let p99 = sorted[rank - 1];
    if p99 > 0.0 {
        for v in values.iter_mut() {
            if v.is_some_and(|c| c > ANOMALY_FACTOR * p99) {
                *v = None;
            }
        }
    }

    let mut i = 0;
    while i < len {
        if values[i].is_some() {
            i += 1;
            continue;
        }
        let gap_start = i;
        while i < len && values[i].is_none() {
            i += 1;
        }
        let hours = i - gap_start;
        if hours > max_gap {
            return Err(Rejection::Gap {
                start: start + gap_start as i64,
                hours,
                max_gap,
            });
        }
        let left = gap_start.checked_sub(1).and_then(|j| values[j]);
        let right = values.get(i).copied().flatten();
        for (k, slot) in values[gap_start..i].iter_mut().enumerate() {
            let v = match (left, right) {
                (Some(a), Some(b)) => a + (b - a) * (k + 1) as f64 / (hours + 1) as f64,
                (Some(a), None) => a,
                (None, Some(b)) => b,
                (None, None) => unreachable!("series has at least one observation"),
            };
            *slot = Some(v.round());
        }
    }
    Ok(SensorSeries::new(
        sensor_id,
        start,
        values
            .into_iter()
            .map(|v| v.unwrap_or(0.0) as u32)
            .collect(),
    ))
}
