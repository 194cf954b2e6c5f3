use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::forecast::SensorSeries;
use crate::io::{csv_writer, fmt_f64, write_atomic, write_err, CsvTable};
use crate::pipeline::{run_days, PipelineSettings};
use crate::scan::{score_from_raw, Metric, NullDistribution, ScanType, ScoreScale, SearchSpace};

/// Daily maximum score of each search space over surge-free `days`. All
/// spaces share each day's forecasts. Any failing day aborts the whole
/// calibration.
pub fn calibrate_null(
    series: &[SensorSeries],
    spaces: &[&SearchSpace],
    settings: &PipelineSettings,
    days: &[usize],
) -> Result<Vec<NullDistribution>> {
    let outcomes = run_days(series, spaces, days, settings, None);
    let mut nulls: Vec<NullDistribution> = spaces
        .iter()
        .map(|s| NullDistribution {
            scan_type: s.scan_type,
            metric: settings.scan.metric,
            samples: Vec::with_capacity(days.len()),
            days: Vec::with_capacity(days.len()),
        })
        .collect();
    for (&day, outcome) in days.iter().zip(outcomes) {
        let outcome = outcome.map_err(|e| Error::Calibration {
            day,
            message: e.to_string(),
        })?;
        for (null, top) in nulls.iter_mut().zip(&outcome.tops) {
            let top = top.ok_or_else(|| Error::Calibration {
                day,
                message: format!("no {} region could be scored", null.scan_type),
            })?;
            null.samples.push(top.score);
            null.days.push(day);
        }
    }
    Ok(nulls)
}

/// `scan_type,metric,day_index,max_score` with raw scores.
pub fn write_null_csv(path: &Path, nulls: &[NullDistribution]) -> Result<()> {
    write_atomic(path, |w: &mut dyn Write| {
        let e = write_err(path);
        let mut out = csv_writer(w);
        out.write_record(["scan_type", "metric", "day_index", "max_score"])
            .map_err(&e)?;
        for n in nulls {
            for (s, d) in n.samples.iter().zip(&n.days) {
                out.write_record([
                    n.scan_type.as_str(),
                    n.metric.as_str(),
                    &d.to_string(),
                    &fmt_f64(s.raw),
                ])
                .map_err(&e)?;
            }
        }
        out.flush().map_err(|err| Error::io(path, err))
    })
}

pub fn read_null_csv(path: &Path) -> Result<Vec<NullDistribution>> {
    let mut table = CsvTable::open(
        path,
        &[&["scan_type"], &["metric"], &["day_index"], &["max_score"]],
        &[],
    )?;
    let mut by_key: BTreeMap<(ScanType, &'static str), NullDistribution> = BTreeMap::new();
    table.for_each(|row| {
        let scan_type = ScanType::parse(row.str_at(0))
            .ok_or_else(|| row.error(0, "scan_type must be PL or NET"))?;
        let metric = Metric::parse(row.str_at(1))
            .ok_or_else(|| row.error(1, "metric must be EBP or ASYM"))?;
        let day: usize = row.parse_at(2, "day index")?;
        let raw: f64 = row.parse_at(3, "score")?;
        if raw.is_nan() {
            return Err(row.error(3, "score must not be NaN"));
        }
        let n = by_key
            .entry((scan_type, metric.as_str()))
            .or_insert_with(|| NullDistribution {
                scan_type,
                metric,
                samples: Vec::new(),
                days: Vec::new(),
            });
        n.samples.push(score_from_raw(metric, raw));
        n.days.push(day);
        Ok(())
    })?;
    Ok(by_key.into_values().collect())
}

/// Alarm levels derived from the null samples on both score scales.
pub fn write_thresholds_csv(
    path: &Path,
    nulls: &[NullDistribution],
    percentile: f64,
) -> Result<()> {
    let mut rows = Vec::new();
    for n in nulls {
        rows.push([
            n.scan_type.as_str().to_string(),
            n.metric.as_str().to_string(),
            fmt_f64(percentile),
            n.len().to_string(),
            fmt_f64(n.threshold(percentile, ScoreScale::Raw)?),
            fmt_f64(n.threshold(percentile, ScoreScale::Log)?),
        ]);
    }
    write_atomic(path, |w: &mut dyn Write| {
        let e = write_err(path);
        let mut out = csv_writer(w);
        out.write_record([
            "scan_type",
            "metric",
            "percentile",
            "samples",
            "threshold_raw",
            "threshold_log",
        ])
        .map_err(&e)?;
        for r in &rows {
            out.write_record(r).map_err(&e)?;
        }
        out.flush().map_err(|err| Error::io(path, err))
    })
}
