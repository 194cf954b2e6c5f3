use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::engine::RegionScore;
use super::metric::{Metric, Score};
use super::space::{Direction, SearchSpace};
use crate::error::{Error, Result};
use crate::io::{csv_writer, fmt_f64, format_hour, write_atomic, write_err, CsvTable};

pub const SCORES_HEADER: [&str; 11] = [
    "region_key",
    "metric",
    "window_start",
    "window_end",
    "direction",
    "B",
    "C",
    "raw",
    "log_raw",
    "corrected",
    "rank",
];

/// One line of a scores file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub region_key: String,
    pub metric: Metric,
    pub window_start: i64,
    pub window_end: i64,
    pub direction: Direction,
    pub b: f64,
    pub c: f64,
    pub score: Score,
    pub corrected: Option<f64>,
    pub rank: usize,
}

impl ScoreRow {
    pub fn from_region(space: &SearchSpace, metric: Metric, s: &RegionScore) -> Self {
        let u = &space.units[s.unit];
        Self {
            region_key: u.key.clone(),
            metric,
            window_start: s.t_start,
            window_end: s.t_end,
            direction: u.direction,
            b: s.b,
            c: s.c,
            score: s.score,
            corrected: s.corrected,
            rank: s.rank,
        }
    }

    fn record(&self) -> [String; 11] {
        [
            self.region_key.clone(),
            self.metric.as_str().to_string(),
            format_hour(self.window_start),
            format_hour(self.window_end),
            self.direction.as_str().to_string(),
            fmt_f64(self.b),
            fmt_f64(self.c),
            fmt_f64(self.score.raw),
            fmt_f64(self.score.log),
            self.corrected.map(fmt_f64).unwrap_or_default(),
            self.rank.to_string(),
        ]
    }
}

pub fn write_scores_csv(
    path: &Path,
    space: &SearchSpace,
    metric: Metric,
    scores: &[RegionScore],
) -> Result<()> {
    write_atomic(path, |w: &mut dyn Write| {
        let e = write_err(path);
        let mut out = csv_writer(w);
        out.write_record(SCORES_HEADER).map_err(&e)?;
        for s in scores {
            out.write_record(ScoreRow::from_region(space, metric, s).record())
                .map_err(&e)?;
        }
        out.flush().map_err(|err| Error::io(path, err))
    })
}

pub fn write_score_rows(path: &Path, rows: &[ScoreRow]) -> Result<()> {
    write_atomic(path, |w: &mut dyn Write| {
        let e = write_err(path);
        let mut out = csv_writer(w);
        out.write_record(SCORES_HEADER).map_err(&e)?;
        for r in rows {
            out.write_record(r.record()).map_err(&e)?;
        }
        out.flush().map_err(|err| Error::io(path, err))
    })
}

pub fn read_scores_csv(path: &Path) -> Result<Vec<ScoreRow>> {
    let required: Vec<&[&str]> = SCORES_HEADER.iter().map(std::slice::from_ref).collect();
    let mut table = CsvTable::open(path, &required, &[])?;
    let mut rows = Vec::new();
    table.for_each(|row| {
        let metric = Metric::parse(row.str_at(1))
            .ok_or_else(|| row.error(1, "metric must be EBP or ASYM"))?;
        let direction =
            Direction::parse(row.str_at(4)).ok_or_else(|| row.error(4, "unknown direction"))?;
        let raw: f64 = row.parse_at(7, "raw score")?;
        let log: f64 = row.parse_at(8, "log score")?;
        if raw.is_nan() || log.is_nan() {
            return Err(row.error(7, "scores must not be NaN"));
        }
        let corrected = match row.str_at(9) {
            "" => None,
            _ => Some(row.parse_at::<f64>(9, "corrected score")?),
        };
        rows.push(ScoreRow {
            region_key: row.str_at(0).to_string(),
            metric,
            window_start: row.hour_at(2)?,
            window_end: row.hour_at(3)?,
            direction,
            b: row.f64_at(5, "B")?,
            c: row.f64_at(6, "C")?,
            score: Score { raw, log },
            corrected,
            rank: row.parse_at(10, "rank")?,
        });
        Ok(())
    })?;
    Ok(rows)
}
