//! Detection benchmark over repeated simulated surges.

mod io;

use std::collections::BTreeMap;

use log::{info, warn};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{run_days, PipelineSettings};
use crate::scan::{
    corrected_score, nearest_rank, NullDistribution, ScanType, ScoreScale, SearchSpace,
};
use crate::simulate::{stream, trial_data, Scenario, SimConfig, STREAM_TRIAL};

pub use io::{read_results_csv, write_report_json, write_results_csv};

/// `(|top ∩ truth| / |top|, |top ∩ truth| / |truth|)` over sorted sensor
/// indices. Precision is 0 for an empty region; recall is NaN for an empty
/// truth set.
pub fn spatial_precision_recall(members: &[usize], truth: &[usize]) -> (f64, f64) {
    let hits = members
        .iter()
        .filter(|m| truth.binary_search(m).is_ok())
        .count() as f64;
    let precision = if members.is_empty() {
        0.0
    } else {
        hits / members.len() as f64
    };
    let recall = if truth.is_empty() {
        f64::NAN
    } else {
        hits / truth.len() as f64
    };
    (precision, recall)
}

/// First surge day (1-based) whose corrected score is at or above zero.
pub fn detection_day(corrected: &[f64]) -> Option<usize> {
    corrected.iter().position(|&s| s >= 0.0).map(|i| i + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub detect_day: Option<usize>,
    /// Taken on the detection day, or the last surge day without one.
    pub precision: f64,
    /// NaN when no truly surging sensor is visible to the scan type.
    pub recall: f64,
    /// Corrected score of the top region on each surge day.
    pub scores: Vec<f64>,
    pub forecast_secs: f64,
    pub scan_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub scan: ScanType,
    pub forecast: String,
    /// `None` when the trial failed for this configuration.
    pub metrics: Option<TrialMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub n_trials: usize,
    pub percentile: f64,
    pub scale: ScoreScale,
    pub seed: u64,
    pub record_timing: bool,
    pub bootstrap: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            n_trials: 20,
            percentile: 99.0,
            scale: ScoreScale::Log,
            seed: 2020,
            record_timing: true,
            bootstrap: 1000,
        }
    }
}

/// A named forecast configuration with its calibrated nulls.
pub struct Arm<'a> {
    pub name: String,
    pub settings: PipelineSettings,
    /// One per search space, in the same order.
    pub nulls: Vec<&'a NullDistribution>,
}

/// Number of days simulated per trial: training, the lead-in the scan
/// window needs before the first surge day, and the surge itself.
pub fn trial_days(sim: &SimConfig, window_hours: usize) -> usize {
    sim.train_days + window_hours.div_ceil(24) - 1 + sim.surge_days
}

/// Runs `cfg.n_trials` paired trials: each trial's data is generated once
/// and fed to every arm and search space.
pub fn run_benchmark(
    scenario: &Scenario,
    sim: &SimConfig,
    spaces: &[&SearchSpace],
    arms: &[Arm<'_>],
    cfg: &BenchmarkConfig,
) -> Result<Vec<TrialResult>> {
    for arm in arms {
        if arm.nulls.len() != spaces.len() {
            return Err(Error::Config(format!(
                "arm {} needs one null per search space",
                arm.name
            )));
        }
        for (null, space) in arm.nulls.iter().zip(spaces) {
            if null.scan_type != space.scan_type || null.metric != arm.settings.scan.metric {
                return Err(Error::Config(format!(
                    "arm {}: null for {} {} does not match the {} {} scan",
                    arm.name,
                    null.scan_type,
                    null.metric.as_str(),
                    space.scan_type,
                    arm.settings.scan.metric.as_str()
                )));
            }
            null.threshold(cfg.percentile, cfg.scale)?;
        }
    }
    let results: Vec<Vec<TrialResult>> = (0..cfg.n_trials)
        .into_par_iter()
        .map(|t| run_trial(t, scenario, sim, spaces, arms, cfg))
        .collect();
    Ok(results.into_iter().flatten().collect())
}

fn run_trial(
    trial: usize,
    scenario: &Scenario,
    sim: &SimConfig,
    spaces: &[&SearchSpace],
    arms: &[Arm<'_>],
    cfg: &BenchmarkConfig,
) -> Vec<TrialResult> {
    let mut out = Vec::new();
    for arm in arms {
        let w = arm.settings.window_hours();
        let metrics = trial_arm(trial, scenario, sim, spaces, arm, cfg, trial_days(sim, w));
        match metrics {
            Ok(per_space) => {
                for (space, m) in spaces.iter().zip(per_space) {
                    if m.is_none() {
                        warn!(
                            "trial {trial} {} {}: no region could be scored",
                            space.scan_type, arm.name
                        );
                    }
                    out.push(TrialResult {
                        trial,
                        scan: space.scan_type,
                        forecast: arm.name.clone(),
                        metrics: m,
                    });
                }
            }
            Err(e) => {
                warn!("trial {trial} {} failed: {e}", arm.name);
                out.extend(spaces.iter().map(|s| TrialResult {
                    trial,
                    scan: s.scan_type,
                    forecast: arm.name.clone(),
                    metrics: None,
                }));
            }
        }
    }
    out
}

fn trial_arm(
    trial: usize,
    scenario: &Scenario,
    sim: &SimConfig,
    spaces: &[&SearchSpace],
    arm: &Arm<'_>,
    cfg: &BenchmarkConfig,
    days_total: usize,
) -> Result<Vec<Option<TrialMetrics>>> {
    let (spec, surge) = trial_data(scenario, sim, cfg.seed, trial, days_total)?;
    let first_surge_day = spec.first_day;
    let truth_all = surge.affected.clone();
    let truth_net: Vec<usize> = truth_all
        .iter()
        .copied()
        .filter(|&i| scenario.sensors[i].snapped.is_some())
        .collect();

    let days: Vec<usize> = (first_surge_day..days_total).collect();
    let cap = Some(sim.start_hour + 24 * first_surge_day as i64);
    let outcomes = run_days(&surge.series, spaces, &days, &arm.settings, cap)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let forecast_secs: f64 = outcomes.iter().map(|o| o.forecast_secs).sum();

    let mut per_space = Vec::with_capacity(spaces.len());
    for (k, space) in spaces.iter().enumerate() {
        let tops: Option<Vec<_>> = outcomes.iter().map(|o| o.tops[k]).collect();
        let Some(tops) = tops else {
            per_space.push(None);
            continue;
        };
        let scores = tops
            .iter()
            .map(|t| corrected_score(&t.score, arm.nulls[k], cfg.percentile, cfg.scale))
            .collect::<Result<Vec<f64>>>()?;
        let detect_day = detection_day(&scores);
        let at = tops[detect_day.unwrap_or(tops.len()) - 1];
        let truth = match space.scan_type {
            ScanType::Pl => &truth_all,
            ScanType::Net => &truth_net,
        };
        if truth.is_empty() {
            warn!("trial {trial}: no surging sensor lies on the network");
        }
        let (precision, recall) = spatial_precision_recall(&space.units[at.unit].members, truth);
        let scan_secs: f64 = outcomes.iter().map(|o| o.scan_secs[k]).sum();
        per_space.push(Some(TrialMetrics {
            detect_day,
            precision,
            recall,
            scores,
            forecast_secs: if cfg.record_timing {
                forecast_secs
            } else {
                0.0
            },
            scan_secs: if cfg.record_timing { scan_secs } else { 0.0 },
        }));
    }
    info!(
        "trial {trial} {}: k={} detect={:?}",
        arm.name,
        spec.k,
        per_space
            .iter()
            .map(|m| m.as_ref().and_then(|m| m.detect_day))
            .collect::<Vec<_>>()
    );
    Ok(per_space)
}

/// Mean with a bootstrap percentile interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// NaN entries are left out; an empty sample gives NaN everywhere.
pub fn bootstrap(values: &[f64], resamples: usize, rng: &mut impl Rng) -> Estimate {
    let xs: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    if xs.is_empty() {
        return Estimate {
            mean: f64::NAN,
            lo: f64::NAN,
            hi: f64::NAN,
            n: 0,
        };
    }
    let means: Vec<f64> = (0..resamples.max(1))
        .map(|_| {
            (0..xs.len())
                .map(|_| xs[rng.random_range(0..xs.len())])
                .sum::<f64>()
                / xs.len() as f64
        })
        .collect();
    Estimate {
        mean: mean(&xs),
        lo: nearest_rank(&means, 2.5).unwrap_or(f64::NAN),
        hi: nearest_rank(&means, 97.5).unwrap_or(f64::NAN),
        n: xs.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub scan: ScanType,
    pub forecast: String,
    pub trials: usize,
    pub failed: usize,
    /// Trials whose recall is undefined (no surging sensor visible).
    pub flagged: usize,
    pub detection_rate: Estimate,
    pub precision: Estimate,
    pub recall: Estimate,
    /// Corrected score per surge day.
    pub scores: Vec<Estimate>,
    pub mean_forecast_secs: f64,
    pub mean_scan_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub trials: usize,
    pub groups: Vec<GroupSummary>,
}

/// Aggregates per (forecast, scan) group; refuses when more than 10% of a
/// group's trials failed. Depends only on `results`, so a report rebuilt
/// from the results file is identical.
pub fn build_report(
    results: &[TrialResult],
    resamples: usize,
    seed: u64,
) -> Result<BenchmarkReport> {
    let mut groups: BTreeMap<(String, ScanType), Vec<&TrialResult>> = BTreeMap::new();
    for r in results {
        groups
            .entry((r.forecast.clone(), r.scan))
            .or_default()
            .push(r);
    }
    let trials = results.iter().map(|r| r.trial + 1).max().unwrap_or(0);
    let mut out = Vec::new();
    for (g, ((forecast, scan), rs)) in groups.into_iter().enumerate() {
        let failed = rs.iter().filter(|r| r.metrics.is_none()).count();
        if failed * 10 > rs.len() {
            return Err(Error::TooManyFailures {
                failed,
                total: rs.len(),
            });
        }
        let ok: Vec<&TrialMetrics> = rs.iter().filter_map(|r| r.metrics.as_ref()).collect();
        let mut rng = stream(seed, STREAM_TRIAL + 1, g as u64);
        let col = |f: &dyn Fn(&TrialMetrics) -> f64| ok.iter().map(|m| f(m)).collect::<Vec<f64>>();
        let n_days = ok.iter().map(|m| m.scores.len()).max().unwrap_or(0);
        let detection_rate = bootstrap(
            &col(&|m| m.detect_day.is_some() as u8 as f64),
            resamples,
            &mut rng,
        );
        let precision = bootstrap(&col(&|m| m.precision), resamples, &mut rng);
        let recall_values = col(&|m| m.recall);
        let recall = bootstrap(&recall_values, resamples, &mut rng);
        let scores = (0..n_days)
            .map(|d| {
                bootstrap(
                    &col(&|m| m.scores.get(d).copied().unwrap_or(f64::NAN)),
                    resamples,
                    &mut rng,
                )
            })
            .collect();
        let avg = |v: Vec<f64>| if v.is_empty() { 0.0 } else { mean(&v) };
        out.push(GroupSummary {
            scan,
            forecast,
            trials: rs.len(),
            failed,
            flagged: recall_values.iter().filter(|r| r.is_nan()).count(),
            detection_rate,
            precision,
            recall,
            scores,
            mean_forecast_secs: avg(col(&|m| m.forecast_secs)),
            mean_scan_secs: avg(col(&|m| m.scan_secs)),
        });
    }
    Ok(BenchmarkReport {
        trials,
        groups: out,
    })
}

impl BenchmarkReport {
    pub fn to_text(&self) -> String {
        if self.groups.is_empty() {
            return format!(
                "benchmark report: {} trials, nothing to aggregate\n",
                self.trials
            );
        }
        let est = |e: &Estimate| format!("{:.3} [{:.3}, {:.3}]", e.mean, e.lo, e.hi);
        let mut s = format!("benchmark report: {} trials\n", self.trials);
        for g in &self.groups {
            s += &format!(
                "{} {}: trials {} failed {} flagged {}\n  detection rate {}\n  precision {}\n  recall {}\n",
                g.forecast,
                g.scan,
                g.trials,
                g.failed,
                g.flagged,
                est(&g.detection_rate),
                est(&g.precision),
                est(&g.recall)
            );
            for (d, e) in g.scores.iter().enumerate() {
                s += &format!("  corrected score day {} {}\n", d + 1, est(e));
            }
            s += &format!(
                "  forecast time {:.3}s, scan time {:.3}s per trial\n",
                g.mean_forecast_secs, g.mean_scan_secs
            );
        }
        s
    }
}
