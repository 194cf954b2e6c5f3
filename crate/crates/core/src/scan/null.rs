//! Empirical null distributions of daily maximum scores and the corrected
//! scores measured against them.

use serde::{Deserialize, Serialize};

use super::metric::{Metric, Score};
use super::space::ScanType;
use crate::error::{Error, Result};

pub const MIN_NULL_SAMPLES: usize = 20;
pub const DEFAULT_PERCENTILE: f64 = 99.0;

/// Scale on which thresholds and corrected scores are expressed. The
/// percentile commutes with the monotone map between the two, so alarms
/// are identical; the log scale stays finite for very large surges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreScale {
    #[default]
    Raw,
    Log,
}

impl ScoreScale {
    pub fn pick(self, s: &Score) -> f64 {
        match self {
            ScoreScale::Raw => s.raw,
            ScoreScale::Log => s.log,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "raw" => Some(ScoreScale::Raw),
            "log" => Some(ScoreScale::Log),
            _ => None,
        }
    }
}

/// Rebuilds both scales from a raw score as stored on disk.
pub fn score_from_raw(metric: Metric, raw: f64) -> Score {
    let log = match metric {
        Metric::Ebp => raw.ln().max(0.0),
        Metric::Asym if raw >= 0.0 => raw.ln_1p(),
        Metric::Asym => -(-raw).ln_1p(),
    };
    Score { raw, log }
}

/// Nearest-rank percentile: the smallest sample with at least `p`% of the
/// sample at or below it.
pub fn nearest_rank(samples: &[f64], p: f64) -> Option<f64> {
    if samples.is_empty() || !(0.0..=100.0).contains(&p) {
        return None;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, n) - 1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullDistribution {
    pub scan_type: ScanType,
    pub metric: Metric,
    /// Daily maximum score, one per calibration day.
    pub samples: Vec<Score>,
    /// Evaluation day of each sample, in days from the data start.
    pub days: Vec<usize>,
}

impl NullDistribution {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn threshold(&self, percentile: f64, scale: ScoreScale) -> Result<f64> {
        if self.samples.len() < MIN_NULL_SAMPLES {
            return Err(Error::CalibrationSize {
                required: MIN_NULL_SAMPLES,
                got: self.samples.len(),
            });
        }
        let values: Vec<f64> = self.samples.iter().map(|s| scale.pick(s)).collect();
        nearest_rank(&values, percentile).ok_or_else(|| {
            Error::Config(format!("percentile must lie in [0, 100], got {percentile}"))
        })
    }
}

/// `score - threshold`; non-negative means alarm.
pub fn corrected_score(
    score: &Score,
    null: &NullDistribution,
    percentile: f64,
    scale: ScoreScale,
) -> Result<f64> {
    Ok(scale.pick(score) - null.threshold(percentile, scale)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn null(raws: impl IntoIterator<Item = f64>) -> NullDistribution {
        let samples: Vec<Score> = raws
            .into_iter()
            .map(|r| score_from_raw(Metric::Ebp, r))
            .collect();
        NullDistribution {
            scan_type: ScanType::Pl,
            metric: Metric::Ebp,
            days: (0..samples.len()).collect(),
            samples,
        }
    }

    #[test]
    fn second_largest_of_101_at_99() {
        let n = null((1..=101).map(|i| i as f64));
        assert_eq!(n.threshold(99.0, ScoreScale::Raw).unwrap(), 100.0);
        assert_eq!(n.threshold(100.0, ScoreScale::Raw).unwrap(), 101.0);
    }

    #[test]
    fn corrected_sign() {
        let n = null((1..=101).map(|i| i as f64));
        let at = score_from_raw(Metric::Ebp, 100.0);
        assert_eq!(
            corrected_score(&at, &n, 99.0, ScoreScale::Raw).unwrap(),
            0.0
        );
        let below = score_from_raw(Metric::Ebp, 50.0);
        assert!(corrected_score(&below, &n, 99.0, ScoreScale::Raw).unwrap() < 0.0);
        assert!(corrected_score(&below, &n, 99.0, ScoreScale::Log).unwrap() < 0.0);
    }

    #[test]
    fn small_null_is_refused() {
        let n = null((1..=19).map(|i| i as f64));
        let err = n.threshold(99.0, ScoreScale::Raw).unwrap_err();
        assert_eq!(err.class(), "calibration-size");
    }

    #[test]
    fn scales_agree_on_rank() {
        let n = null([3.0, 1.0, 7.5, 2.0, 9.0, 4.0].repeat(5));
        let raw = n.threshold(90.0, ScoreScale::Raw).unwrap();
        let log = n.threshold(90.0, ScoreScale::Log).unwrap();
        assert_eq!(raw.ln(), log);
    }

    #[test]
    fn raw_round_trip_for_asym() {
        for log in [-3.0, -1e-3, 0.0, 0.5, 40.0] {
            let raw = if log >= 0.0 {
                f64::exp_m1(log)
            } else {
                -f64::exp_m1(-log)
            };
            let s = score_from_raw(Metric::Asym, raw);
            assert!((s.log - log).abs() < 1e-12 * log.abs().max(1.0));
        }
    }
}
