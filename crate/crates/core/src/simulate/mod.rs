//! Semi-synthetic count generation, surge injection and null calibration.

mod calibrate;
mod scenario;

use std::f64::consts::PI;

use log::warn;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::SensorSeries;
use crate::geo::{Boundary, LonLat};
use crate::scan::nearest_rank;

pub use calibrate::{calibrate_null, read_null_csv, write_null_csv, write_thresholds_csv};
pub use scenario::{assign_profiles, synthetic_network, synthetic_sensors, Scenario};

/// 2020-03-02T00:00:00Z, a Monday.
pub const SIM_START_HOUR: i64 = 439_752;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_sensors: usize,
    /// Share of sensors placed away from the road network.
    pub off_network_fraction: f64,
    pub lattice_cols: usize,
    pub lattice_rows: usize,
    pub spacing_m: f64,
    pub jitter_m: f64,
    pub origin_lon: f64,
    pub origin_lat: f64,
    pub days_total: usize,
    pub train_days: usize,
    /// Synthetic base rates are log-uniform in `[base_min, base_max]`.
    pub base_min: f64,
    pub base_max: f64,
    pub amp_daily: f64,
    pub amp_weekly: f64,
    pub start_hour: i64,
    pub k_min: usize,
    pub k_max: usize,
    pub surge_days: usize,
    pub lambda_cap: f64,
    /// Daily rate of the busiest affected sensor.
    pub max_rate: f64,
    /// Set from the run's global seed rather than the config file.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_sensors: 100,
            off_network_fraction: 0.25,
            lattice_cols: 7,
            lattice_rows: 6,
            spacing_m: 270.0,
            jitter_m: 25.0,
            origin_lon: -0.16,
            origin_lat: 51.50,
            days_total: 122,
            train_days: 21,
            base_min: 5.0,
            base_max: 100.0,
            amp_daily: 0.6,
            amp_weekly: 0.2,
            start_hour: SIM_START_HOUR,
            k_min: 10,
            k_max: 100,
            surge_days: 3,
            lambda_cap: 4.0,
            max_rate: 1.0,
            seed: 2020,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.days_total <= self.train_days {
            return bad(format!(
                "days_total ({}) must exceed train_days ({})",
                self.days_total, self.train_days
            ));
        }
        if self.n_sensors == 0 {
            return bad("n_sensors must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.off_network_fraction) {
            return bad("off_network_fraction must lie in [0, 1]".into());
        }
        if !(self.base_min > 0.0 && self.base_min <= self.base_max) {
            return bad("need 0 < base_min <= base_max".into());
        }
        if !(0.0..1.0).contains(&self.amp_daily) || !(0.0..1.0).contains(&self.amp_weekly) {
            return bad("amplitudes must lie in [0, 1)".into());
        }
        if self.k_min == 0 || self.k_min > self.k_max {
            return bad("need 1 <= k_min <= k_max".into());
        }
        if self.surge_days == 0 || !(self.lambda_cap >= 1.0) || !(self.max_rate >= 0.0) {
            return bad("need surge_days >= 1, lambda_cap >= 1 and max_rate >= 0".into());
        }
        if self.lattice_cols < 2
            || self.lattice_rows < 2
            || !(self.spacing_m > 0.0)
            || !(self.jitter_m >= 0.0)
        {
            return bad("lattice needs at least 2x2 vertices and positive spacing".into());
        }
        Ok(())
    }
}

/// Independent random stream for one purpose and index under a seed.
pub(crate) fn stream(seed: u64, purpose: u32, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 40) | index);
    rng
}

pub(crate) const STREAM_LAYOUT: u32 = 1;
pub(crate) const STREAM_PROFILE: u32 = 2;
pub(crate) const STREAM_NOISE: u32 = 3;
pub(crate) const STREAM_SURGE_NOISE: u32 = 4;
pub(crate) const STREAM_TRIAL: u32 = 5;
const STREAM_SURGE_FREE: u32 = 7;

/// Per-sensor shape of the surge-free mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorProfile {
    pub base: f64,
    pub phase_daily: f64,
    pub phase_weekly: f64,
}

impl SensorProfile {
    /// Hourly mean `t` hours after the simulation start, clipped at 0.1.
    pub fn mean_at(&self, t: i64, amp_daily: f64, amp_weekly: f64) -> f64 {
        let t = t as f64;
        let d = 1.0 + amp_daily * (2.0 * PI * t / 24.0 + self.phase_daily).sin();
        let w = 1.0 + amp_weekly * (2.0 * PI * t / 168.0 + self.phase_weekly).sin();
        (self.base * d * w).max(0.1)
    }
}

/// Base rate from observed amplitudes: their nearest-rank 90th percentile.
pub fn base_from_amplitudes(amplitudes: &[f64]) -> Option<f64> {
    nearest_rank(amplitudes, 90.0)
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u32 {
    let d = Poisson::new(mean).expect("means are clipped positive");
    let v: f64 = d.sample(rng);
    v as u32
}

/// Sinusoidal daily and weekly means with Poisson noise. Each sensor draws
/// from its own stream so results do not depend on evaluation order.
pub fn generate_surge_free(
    ids: &[String],
    profiles: &[SensorProfile],
    cfg: &SimConfig,
    days: usize,
    noise_seed: u64,
) -> Vec<SensorSeries> {
    assert_eq!(ids.len(), profiles.len());
    let hours = days as i64 * 24;
    ids.iter()
        .zip(profiles)
        .enumerate()
        .map(|(i, (id, p))| {
            let mut rng = stream(noise_seed, STREAM_NOISE, i as u64);
            let counts = (0..hours)
                .map(|t| poisson(&mut rng, p.mean_at(t, cfg.amp_daily, cfg.amp_weekly)))
                .collect();
            SensorSeries::new(id.clone(), cfg.start_hour, counts)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurgeSpec {
    pub epicentre: LonLat,
    pub k: usize,
    /// First surge day, counted in days from the series start.
    pub first_day: usize,
    pub days: usize,
    pub lambda_cap: f64,
    pub max_rate: f64,
}

impl SurgeSpec {
    /// `min(1 + ω·t, cap)` for outbreak day `t` (1-based).
    pub fn lambda(&self, omega: f64, day: usize) -> f64 {
        (1.0 + omega * day as f64).min(self.lambda_cap)
    }
}

/// Epicentre uniform over the boundary (rejection inside its bounding box)
/// and `k` uniform in `[k_min, k_max]`, clamped to the sensor count.
pub fn sample_surge(
    boundary: &Boundary,
    n_sensors: usize,
    cfg: &SimConfig,
    first_day: usize,
    rng: &mut impl Rng,
) -> Result<SurgeSpec> {
    let bbox = boundary
        .bbox()
        .ok_or_else(|| Error::InvalidInput("boundary has no vertices".into()))?;
    let mut epicentre = None;
    for _ in 0..100_000 {
        let p = LonLat::new(
            rng.random_range(bbox.min_lon..=bbox.max_lon),
            rng.random_range(bbox.min_lat..=bbox.max_lat),
        );
        if boundary.contains(p) {
            epicentre = Some(p);
            break;
        }
    }
    let epicentre = epicentre.ok_or_else(|| {
        Error::InvalidInput("could not sample a point inside the boundary".into())
    })?;
    let mut k = rng.random_range(cfg.k_min..=cfg.k_max);
    if k > n_sensors {
        warn!("surge size {k} exceeds the {n_sensors} available sensors; clamping");
        k = n_sensors;
    }
    Ok(SurgeSpec {
        epicentre,
        k,
        first_day,
        days: cfg.surge_days,
        lambda_cap: cfg.lambda_cap,
        max_rate: cfg.max_rate,
    })
}

/// Indices of the `k` sensors nearest `p` in degree space, nearest first;
/// equal distances go to the lower index.
pub fn nearest_sensors(positions: &[LonLat], p: LonLat, k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..positions.len()).collect();
    order.sort_by(|&a, &b| {
        positions[a]
            .degree_distance(p)
            .total_cmp(&positions[b].degree_distance(p))
            .then(a.cmp(&b))
    });
    order.truncate(k);
    order
}

/// Noise seed for the `index`-th surge-free data set drawn under `seed`.
pub fn surge_free_seed(seed: u64, index: u64) -> u64 {
    stream(seed, STREAM_SURGE_FREE, index).next_u64()
}

/// Data of one benchmark trial: `days_total` days whose last
/// `cfg.surge_days` carry a surge. The same `(seed, trial)` always gives the
/// same counts, which keeps trials paired across forecast methods.
pub fn trial_data(
    scenario: &Scenario,
    cfg: &SimConfig,
    seed: u64,
    trial: usize,
    days_total: usize,
) -> Result<(SurgeSpec, SurgeOutcome)> {
    if days_total <= cfg.surge_days {
        return Err(Error::Config(format!(
            "{days_total} simulated days leave no room before a {}-day surge",
            cfg.surge_days
        )));
    }
    let mut rng = stream(seed, STREAM_TRIAL, trial as u64);
    let noise_seed = rng.next_u64();
    let first_day = days_total - cfg.surge_days;
    let ids = scenario.ids();
    let base = generate_surge_free(&ids, &scenario.profiles, cfg, days_total, noise_seed);
    let spec = sample_surge(&scenario.boundary, ids.len(), cfg, first_day, &mut rng)?;
    let surge = inject_surge(
        &base,
        &scenario.profiles,
        &scenario.positions(),
        &spec,
        cfg,
        noise_seed,
    )?;
    Ok((spec, surge))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurgeOutcome {
    pub series: Vec<SensorSeries>,
    /// Affected sensor indices, sorted.
    pub affected: Vec<usize>,
    /// Daily rate per affected sensor, aligned with `affected`.
    pub omega: Vec<f64>,
}

/// Redraws the surge days of the `k` sensors nearest the epicentre from
/// means scaled by `λ_i(t)`, with `ω_i ∝ base_i` so the busiest affected
/// sensor has rate `max_rate`. Everything else is left untouched.
pub fn inject_surge(
    series: &[SensorSeries],
    profiles: &[SensorProfile],
    positions: &[LonLat],
    spec: &SurgeSpec,
    cfg: &SimConfig,
    noise_seed: u64,
) -> Result<SurgeOutcome> {
    let hours_needed = (spec.first_day + spec.days) * 24;
    if series.iter().any(|s| s.len() < hours_needed) {
        return Err(Error::InvalidInput(format!(
            "surge days {}..{} do not fit inside the data",
            spec.first_day + 1,
            spec.first_day + spec.days
        )));
    }
    let mut affected = nearest_sensors(positions, spec.epicentre, spec.k.min(series.len()));
    affected.sort_unstable();
    let max_base = affected
        .iter()
        .map(|&i| profiles[i].base)
        .fold(0.0, f64::max);
    let omega: Vec<f64> = affected
        .iter()
        .map(|&i| {
            if max_base > 0.0 {
                spec.max_rate * profiles[i].base / max_base
            } else {
                0.0
            }
        })
        .collect();
    let mut out = series.to_vec();
    for (&i, &w) in affected.iter().zip(&omega) {
        let mut rng = stream(noise_seed, STREAM_SURGE_NOISE, i as u64);
        let offset = series[i].start - cfg.start_hour;
        for day in 1..=spec.days {
            let lambda = spec.lambda(w, day);
            let first = (spec.first_day + day - 1) * 24;
            for h in first..first + 24 {
                let m =
                    profiles[i].mean_at(offset + h as i64, cfg.amp_daily, cfg.amp_weekly) * lambda;
                out[i].counts[h] = poisson(&mut rng, m);
            }
        }
    }
    Ok(SurgeOutcome {
        series: out,
        affected,
        omega,
    })
}
