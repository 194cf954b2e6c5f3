//! Expectation-based Poisson likelihood ratio and its signed variant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Busier than expected only; 1 when `C <= B`.
    Ebp,
    /// Positive when busier, negative when quieter than expected.
    Asym,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Ebp => "EBP",
            Metric::Asym => "ASYM",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ebp" => Some(Metric::Ebp),
            "asym" => Some(Metric::Asym),
            _ => None,
        }
    }
}

/// Which baseline aggregate feeds the metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BoundMode {
    #[default]
    Mean,
    Upper,
    Lower,
}

impl BoundMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mean" => Some(BoundMode::Mean),
            "upper" => Some(BoundMode::Upper),
            "lower" => Some(BoundMode::Lower),
            _ => None,
        }
    }
}

/// Summed baselines and counts over one space-time region.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RegionAggregates {
    pub b: f64,
    pub c: f64,
    pub b_upp: f64,
    pub b_low: f64,
}

impl RegionAggregates {
    pub fn baseline(&self, mode: BoundMode) -> f64 {
        match mode {
            BoundMode::Mean => self.b,
            BoundMode::Upper => self.b_upp,
            BoundMode::Lower => self.b_low,
        }
    }
}

/// A score on both scales. `log` is the signed log-likelihood ratio, which
/// orders regions exactly like `raw` but never saturates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub raw: f64,
    pub log: f64,
}

impl Score {
    pub fn saturated(&self) -> bool {
        self.raw.is_infinite()
    }
}

/// `log[(C/B)^C e^(B-C)] = C ln(C/B) + B - C`, the Poisson log-likelihood
/// ratio at the unconstrained maximiser `q = C/B`; always `>= 0`.
pub fn log_likelihood_ratio(b: f64, c: f64) -> f64 {
    if c == 0.0 {
        return b;
    }
    let r = (c - b) / b;
    (b * ((1.0 + r) * r.ln_1p() - r)).max(0.0)
}

fn check(b: f64, c: f64) -> Result<()> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::InvalidInput(format!(
            "baseline must be positive and finite, got {b}"
        )));
    }
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::InvalidInput(format!(
            "count must be non-negative and finite, got {c}"
        )));
    }
    Ok(())
}

#[inline]
pub(crate) fn score_unchecked(metric: Metric, b: f64, c: f64) -> Score {
    match metric {
        Metric::Ebp => {
            if c <= b {
                Score { raw: 1.0, log: 0.0 }
            } else {
                let log = log_likelihood_ratio(b, c);
                Score {
                    raw: log.exp(),
                    log,
                }
            }
        }
        Metric::Asym => {
            let s = log_likelihood_ratio(b, c);
            if c >= b {
                Score {
                    raw: s.exp_m1(),
                    log: s,
                }
            } else {
                Score {
                    raw: -s.exp_m1(),
                    log: -s,
                }
            }
        }
    }
}

pub fn score(metric: Metric, agg: &RegionAggregates, mode: BoundMode) -> Result<Score> {
    let b = agg.baseline(mode);
    check(b, agg.c)?;
    Ok(score_unchecked(metric, b, agg.c))
}

/// `(C/B)^C e^(B-C)` when `C > B`, else 1.
pub fn ebp_score(agg: &RegionAggregates, mode: BoundMode) -> Result<Score> {
    score(Metric::Ebp, agg, mode)
}

/// `F - 1` when `C >= B`, `1 - F` otherwise, with `F` the likelihood ratio
/// at `q = C/B`.
pub fn asym_score(agg: &RegionAggregates, mode: BoundMode) -> Result<Score> {
    score(Metric::Asym, agg, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn agg(b: f64, c: f64) -> RegionAggregates {
        RegionAggregates {
            b,
            c,
            b_upp: b,
            b_low: b,
        }
    }

    #[test]
    fn ebp_examples() {
        assert_eq!(
            ebp_score(&agg(10.0, 10.0), BoundMode::Mean).unwrap().raw,
            1.0
        );
        assert_eq!(
            ebp_score(&agg(10.0, 5.0), BoundMode::Mean).unwrap().raw,
            1.0
        );
        let s = ebp_score(&agg(10.0, 20.0), BoundMode::Mean).unwrap();
        let expected = 2f64.powi(20) * (-10f64).exp();
        assert!((s.raw - expected).abs() < 1e-12 * expected);
        // quoted as ~47.604; the exact value is 47.6052
        assert!((s.raw - 47.604).abs() < 2e-3);
    }

    #[test]
    fn asym_examples() {
        assert_eq!(
            asym_score(&agg(7.0, 7.0), BoundMode::Mean).unwrap().raw,
            0.0
        );
        let busy = asym_score(&agg(10.0, 20.0), BoundMode::Mean).unwrap();
        assert!((busy.raw - (2f64.powi(20) * (-10f64).exp() - 1.0)).abs() < 1e-10);
        let quiet = asym_score(&agg(10.0, 5.0), BoundMode::Mean).unwrap();
        let expected = 1.0 - 0.5f64.powi(5) * 5f64.exp();
        assert!((quiet.raw - expected).abs() < 1e-12);
        // quoted as ~-3.639; the exact value is -3.6379
        assert!((quiet.raw + 3.639).abs() < 2e-3);
        assert!(quiet.log < 0.0);
    }

    #[test]
    fn non_positive_baseline_is_rejected() {
        assert!(ebp_score(&agg(0.0, 3.0), BoundMode::Mean).is_err());
        assert!(asym_score(&agg(-1.0, 3.0), BoundMode::Mean).is_err());
        assert!(ebp_score(&agg(1.0, f64::NAN), BoundMode::Mean).is_err());
    }

    #[test]
    fn bound_mode_selects_baseline() {
        let a = RegionAggregates {
            b: 10.0,
            c: 30.0,
            b_upp: 20.0,
            b_low: 5.0,
        };
        let m = ebp_score(&a, BoundMode::Mean).unwrap().log;
        let u = ebp_score(&a, BoundMode::Upper).unwrap().log;
        let l = ebp_score(&a, BoundMode::Lower).unwrap().log;
        assert!(u < m && m < l);
    }

    #[test]
    fn huge_counts_saturate_raw_but_not_log() {
        let s = ebp_score(&agg(100.0, 5000.0), BoundMode::Mean).unwrap();
        assert!(s.saturated());
        assert!(s.log.is_finite() && s.log > 700.0);
    }

    proptest! {
        #[test]
        fn ebp_monotone_in_counts(b in 0.1f64..100.0, d1 in 0.0f64..200.0, d2 in 0.0f64..200.0) {
            let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
            let s1 = ebp_score(&agg(b, b + lo), BoundMode::Mean).unwrap().log;
            let s2 = ebp_score(&agg(b, b + hi), BoundMode::Mean).unwrap().log;
            prop_assert!(s1 <= s2);
        }

        #[test]
        fn more_data_is_stronger_evidence(b in 0.1f64..100.0, ratio in 1.001f64..5.0, k in 1.0f64..10.0) {
            let c = b * ratio;
            let s1 = ebp_score(&agg(b, c), BoundMode::Mean).unwrap().log;
            let s2 = ebp_score(&agg(k * b, k * c), BoundMode::Mean).unwrap().log;
            prop_assert!(s2 >= s1 * (1.0 - 1e-12));
        }

        #[test]
        fn upper_bound_is_conservative(b in 0.1f64..100.0, widen in 0.0f64..50.0, extra in 0.0f64..200.0) {
            let a = RegionAggregates { b, b_upp: b + widen, b_low: b, c: b + widen + extra };
            let mean = ebp_score(&a, BoundMode::Mean).unwrap().log;
            let upper = ebp_score(&a, BoundMode::Upper).unwrap().log;
            prop_assert!(upper <= mean);
        }

        #[test]
        fn asym_continuous_at_balance(b in 0.1f64..100.0, eps in 1e-9f64..1e-6) {
            let above = asym_score(&agg(b, b * (1.0 + eps)), BoundMode::Mean).unwrap().raw;
            let below = asym_score(&agg(b, b * (1.0 - eps)), BoundMode::Mean).unwrap().raw;
            prop_assert!(above >= 0.0 && above < 1e-9 * b.max(1.0));
            prop_assert!(below <= 0.0 && below > -1e-9 * b.max(1.0));
        }
    }
}
