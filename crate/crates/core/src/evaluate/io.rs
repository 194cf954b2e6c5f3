use std::io::Write;
use std::path::Path;

use super::{BenchmarkReport, TrialMetrics, TrialResult};
use crate::error::{Error, Result};
use crate::io::{csv_writer, fmt_f64, write_atomic, write_err, write_json, CsvTable};
use crate::scan::ScanType;

const FIXED: [&str; 6] = [
    "trial",
    "scan",
    "forecast",
    "detect_day",
    "precision",
    "recall",
];

/// `trial,scan,forecast,detect_day,precision,recall,score_d1..,forecast_secs,scan_secs`.
/// `detect_day` is `none` when never detected and `failed` for failed
/// trials, whose other fields are left empty.
pub fn write_results_csv(path: &Path, results: &[TrialResult]) -> Result<()> {
    let n_days = results
        .iter()
        .filter_map(|r| r.metrics.as_ref().map(|m| m.scores.len()))
        .max()
        .unwrap_or(3);
    write_atomic(path, |w: &mut dyn Write| {
        let e = write_err(path);
        let mut out = csv_writer(w);
        let mut header: Vec<String> = FIXED.iter().map(|s| s.to_string()).collect();
        header.extend((1..=n_days).map(|d| format!("score_d{d}")));
        header.extend(["forecast_secs".to_string(), "scan_secs".to_string()]);
        out.write_record(&header).map_err(&e)?;
        for r in results {
            let mut rec = vec![
                r.trial.to_string(),
                r.scan.as_str().to_string(),
                r.forecast.clone(),
            ];
            match &r.metrics {
                Some(m) => {
                    rec.push(m.detect_day.map_or("none".to_string(), |d| d.to_string()));
                    rec.push(fmt_f64(m.precision));
                    rec.push(fmt_f64(m.recall));
                    rec.extend(
                        (0..n_days).map(|d| m.scores.get(d).map_or(String::new(), |&s| fmt_f64(s))),
                    );
                    rec.push(fmt_f64(m.forecast_secs));
                    rec.push(fmt_f64(m.scan_secs));
                }
                None => {
                    rec.push("failed".into());
                    rec.extend(std::iter::repeat_n(String::new(), n_days + 4));
                }
            }
            out.write_record(&rec).map_err(&e)?;
        }
        out.flush().map_err(|err| Error::io(path, err))
    })
}

pub fn read_results_csv(path: &Path) -> Result<Vec<TrialResult>> {
    let header = {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| crate::io::csv_err(path, e))?;
        rdr.headers()
            .map_err(|e| crate::io::csv_err(path, e))?
            .clone()
    };
    let n_days = header.iter().filter(|h| h.starts_with("score_d")).count();
    let names: Vec<String> = FIXED
        .iter()
        .map(|s| s.to_string())
        .chain((1..=n_days).map(|d| format!("score_d{d}")))
        .chain(["forecast_secs".to_string(), "scan_secs".to_string()])
        .collect();
    let required: Vec<[&str; 1]> = names.iter().map(|n| [n.as_str()]).collect();
    let required: Vec<&[&str]> = required.iter().map(|r| r.as_slice()).collect();
    let mut table = CsvTable::open(path, &required, &[])?;
    let mut out = Vec::new();
    table.for_each(|row| {
        let trial: usize = row.parse_at(0, "trial")?;
        let scan =
            ScanType::parse(row.str_at(1)).ok_or_else(|| row.error(1, "scan must be PL or NET"))?;
        let forecast = row.str_at(2).to_string();
        let metrics = match row.str_at(3) {
            "failed" => None,
            d => {
                let detect_day = match d {
                    "none" => None,
                    _ => Some(row.parse_at::<usize>(3, "detection day")?),
                };
                let scores = (0..n_days)
                    .map(|i| row.parse_at::<f64>(6 + i, "score"))
                    .collect::<Result<Vec<f64>>>()?;
                Some(TrialMetrics {
                    detect_day,
                    precision: row.parse_at(4, "precision")?,
                    recall: row.parse_at(5, "recall")?,
                    scores,
                    forecast_secs: row.parse_at(6 + n_days, "forecast time")?,
                    scan_secs: row.parse_at(7 + n_days, "scan time")?,
                })
            }
        };
        out.push(TrialResult {
            trial,
            scan,
            forecast,
            metrics,
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn write_report_json(path: &Path, report: &BenchmarkReport) -> Result<()> {
    let v = serde_json::to_value(report).map_err(|e| Error::InvalidInput(e.to_string()))?;
    write_json(path, &v)
}
