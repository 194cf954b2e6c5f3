use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use super::{ForecastSeries, SensorSeries};
use crate::error::{Error, Result};
use crate::io::{csv_writer, fmt_f64, format_hour, write_atomic, write_err, CsvTable};

/// Raw observations per sensor from `sensor_id,timestamp,count`.
///
/// The timestamp column may also be named `timestamp_iso8601`.
pub fn read_counts_csv(path: &Path) -> Result<BTreeMap<String, BTreeMap<i64, u32>>> {
    let mut table = CsvTable::open(
        path,
        &[
            &["sensor_id"],
            &["timestamp", "timestamp_iso8601"],
            &["count"],
        ],
        &[],
    )?;
    let mut out: BTreeMap<String, BTreeMap<i64, u32>> = BTreeMap::new();
    table.for_each(|row| {
        let id = row.str_at(0);
        if id.is_empty() {
            return Err(row.error(0, "empty sensor_id"));
        }
        let hour = row.hour_at(1)?;
        let count: u32 = row.parse_at(2, "count")?;
        if out
            .entry(id.to_string())
            .or_default()
            .insert(hour, count)
            .is_some()
        {
            return Err(row.error(1, format!("duplicate timestamp for sensor {id:?}")));
        }
        Ok(())
    })?;
    Ok(out)
}

pub fn write_counts_csv(path: &Path, series: &[SensorSeries]) -> Result<()> {
    write_atomic(path, |w: &mut dyn Write| {
        let e = write_err(path);
        let mut out = csv_writer(w);
        out.write_record(["sensor_id", "timestamp", "count"])
            .map_err(&e)?;
        for s in series {
            for (h, c) in s.timestamps().zip(&s.counts) {
                out.write_record([s.sensor_id.as_str(), &format_hour(h), &c.to_string()])
                    .map_err(&e)?;
            }
        }
        out.flush().map_err(|err| Error::io(path, err))
    })
}

pub fn write_forecasts_csv(path: &Path, forecasts: &[ForecastSeries]) -> Result<()> {
    write_atomic(path, |w: &mut dyn Write| {
        let e = write_err(path);
        let mut out = csv_writer(w);
        out.write_record(["sensor_id", "timestamp", "mean", "std", "lower", "upper"])
            .map_err(&e)?;
        for f in forecasts {
            for i in 0..f.len() {
                out.write_record([
                    f.sensor_id.clone(),
                    format_hour(f.start + i as i64),
                    fmt_f64(f.mean[i]),
                    fmt_f64(f.std[i]),
                    fmt_f64(f.lower[i]),
                    fmt_f64(f.upper[i]),
                ])
                .map_err(&e)?;
            }
        }
        out.flush().map_err(|err| Error::io(path, err))
    })
}

/// Reads persisted forecasts; each sensor's rows must be consecutive hours.
pub fn read_forecasts_csv(path: &Path) -> Result<Vec<ForecastSeries>> {
    let mut table = CsvTable::open(
        path,
        &[
            &["sensor_id"],
            &["timestamp"],
            &["mean"],
            &["std"],
            &["lower"],
            &["upper"],
        ],
        &[],
    )?;
    let mut out: Vec<ForecastSeries> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    table.for_each(|row| {
        let id = row.str_at(0).to_string();
        let hour = row.hour_at(1)?;
        let vals = [
            row.f64_at(2, "mean")?,
            row.f64_at(3, "std")?,
            row.f64_at(4, "lower")?,
            row.f64_at(5, "upper")?,
        ];
        if !(vals[2] <= vals[0] && vals[0] <= vals[3] && vals[2] > 0.0 && vals[1] >= 0.0) {
            return Err(row.error(
                2,
                "forecast bounds must satisfy 0 < lower <= mean <= upper and std >= 0",
            ));
        }
        let slot = match index.get(&id) {
            Some(&i) => i,
            None => {
                index.insert(id.clone(), out.len());
                out.push(ForecastSeries {
                    sensor_id: id,
                    start: hour,
                    mean: vec![],
                    std: vec![],
                    lower: vec![],
                    upper: vec![],
                });
                out.len() - 1
            }
        };
        let f = &mut out[slot];
        if hour != f.end() {
            return Err(row.error(
                1,
                format!("expected consecutive hour {}", format_hour(f.end())),
            ));
        }
        f.mean.push(vals[0]);
        f.std.push(vals[1]);
        f.lower.push(vals[2]);
        f.upper.push(vals[3]);
        Ok(())
    })?;
    Ok(out)
}
