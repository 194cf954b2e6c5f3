//! Multiplicative Holt-Winters with a 24-hour season.
//!
//! ```text
//! X_t = α c_t / Z_{t-24} + (1 - α)(X_{t-1} + Y_{t-1})
//! Y_t = β (X_t - X_{t-1}) + (1 - β) Y_{t-1}
//! Z_t = γ c_t / X_t + (1 - γ) Z_{t-24}
//! b_t = (X_{t-1} + Y_{t-1}) Z_{t-24}
//! ```

use serde::{Deserialize, Serialize};

use super::BASELINE_FLOOR;

pub const PERIOD: usize = 24;

const PARAM_MIN: f64 = 1e-3;
const PARAM_MAX: f64 = 1.0 - 1e-3;
const GRID_STEP: f64 = 0.05;
const MAX_SWEEPS: usize = 6;
const TINY: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HwParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Level and trend after the first period.
    pub level0: f64,
    pub trend0: f64,
    /// Seasonal factors for the first period.
    pub seasonal0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum HwModel {
    Seasonal(HwParams),
    /// All-zero training data: multiplicative seasonality is undefined.
    Floor,
}

/// State of the recursion after some number of observations.
#[derive(Debug, Clone, PartialEq)]
pub struct HwState {
    pub level: f64,
    pub trend: f64,
    /// Seasonal ring; `seasonal[t % 24]` holds `Z_{t-24}` before step `t`.
    pub seasonal: Vec<f64>,
    pub t: usize,
}

impl HwState {
    pub fn initial(p: &HwParams) -> Self {
        Self {
            level: p.level0,
            trend: p.trend0,
            seasonal: p.seasonal0.clone(),
            t: PERIOD,
        }
    }

    pub fn predict(&self) -> f64 {
        (self.level + self.trend) * self.seasonal[self.t % PERIOD]
    }

    /// Consumes observation `c` and returns the one-step forecast made before seeing it.
    pub fn step(&mut self, p: &HwParams, c: f64) -> f64 {
        let prior = self.level + self.trend;
        let z_old = self.seasonal[self.t % PERIOD];
        let forecast = prior * z_old;
        let deseason = if z_old.abs() > TINY { c / z_old } else { prior };
        let level = p.alpha * deseason + (1.0 - p.alpha) * prior;
        let trend = p.beta * (level - self.level) + (1.0 - p.beta) * self.trend;
        let z = if level.abs() > TINY {
            p.gamma * c / level + (1.0 - p.gamma) * z_old
        } else {
            z_old
        };
        self.level = level;
        self.trend = trend;
        self.seasonal[self.t % PERIOD] = z;
        self.t += 1;
        forecast
    }
}

/// Initial level, trend and seasonal factors from the first two periods.
fn initial_states(train: &[f64]) -> Option<(f64, f64, Vec<f64>)> {
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let first = mean(&train[..PERIOD]);
    let second = mean(&train[PERIOD..2 * PERIOD]);
    if first > TINY {
        let seasonal = train[..PERIOD].iter().map(|c| c / first).collect();
        return Some((first, (second - first) / PERIOD as f64, seasonal));
    }
    // Empty first period: fall back to hour-of-day profiles over all the data.
    let overall = mean(train);
    if overall <= TINY {
        return None;
    }
    let mut profile = vec![0.0; PERIOD];
    let mut n = vec![0usize; PERIOD];
    for (i, c) in train.iter().enumerate() {
        profile[i % PERIOD] += c;
        n[i % PERIOD] += 1;
    }
    let seasonal = profile
        .iter()
        .zip(&n)
        .map(|(s, &k)| s / k as f64 / overall)
        .collect();
    Some((overall, 0.0, seasonal))
}

/// One-step-ahead mean squared error over the observations after the first period.
pub fn one_step_mse(p: &HwParams, train: &[f64]) -> f64 {
    let mut state = HwState::initial(p);
    let mut sse = 0.0;
    for &c in &train[PERIOD..] {
        let f = state.step(p, c);
        sse += (f - c) * (f - c);
    }
    sse / (train.len() - PERIOD) as f64
}

/// Forecasts and states visited while running the recursion over `train`
/// from `p`'s initial state: `(b_t, X_t, Y_t, Z_t)` for `t >= 24`.
pub fn trace(p: &HwParams, train: &[f64]) -> Vec<(f64, f64, f64, f64)> {
    let mut state = HwState::initial(p);
    train[PERIOD..]
        .iter()
        .map(|&c| {
            let slot = state.t % PERIOD;
            let b = state.step(p, c);
            (b, state.level, state.trend, state.seasonal[slot])
        })
        .collect()
}

fn golden_section(mut lo: f64, mut hi: f64, f: &mut impl FnMut(f64) -> f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > 1e-4 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Chooses `α, β, γ` minimising one-step-ahead squared error by coordinate
/// descent: a 0.05 grid per coordinate refined by golden-section search.
///
/// Needs at least two full periods of data.
pub fn fit_holt_winters(train: &[f64]) -> Result<HwModel, String> {
    if train.len() < 2 * PERIOD {
        return Err(format!(
            "Holt-Winters needs at least {} hours of training data, got {}",
            2 * PERIOD,
            train.len()
        ));
    }
    if train.iter().any(|c| !c.is_finite() || *c < 0.0) {
        return Err("training data must be finite and non-negative".into());
    }
    let Some((level0, trend0, seasonal0)) = initial_states(train) else {
        return Ok(HwModel::Floor);
    };
    let mut p = HwParams {
        alpha: 0.2,
        beta: 0.05,
        gamma: 0.2,
        level0,
        trend0,
        seasonal0,
    };
    let mut best = one_step_mse(&p, train);
    for _ in 0..MAX_SWEEPS {
        let before = best;
        for coord in 0..3 {
            let mut objective = |v: f64| {
                let mut q = p.clone();
                *coord_mut(&mut q, coord) = v;
                one_step_mse(&q, train)
            };
            let mut grid_best = (*coord_mut(&mut p.clone(), coord), best);
            let steps = (1.0 / GRID_STEP).round() as usize;
            for k in 1..steps {
                let v = k as f64 * GRID_STEP;
                let f = objective(v);
                if f < grid_best.1 {
                    grid_best = (v, f);
                }
            }
            let lo = (grid_best.0 - GRID_STEP).max(PARAM_MIN);
            let hi = (grid_best.0 + GRID_STEP).min(PARAM_MAX);
            let (v, f) = golden_section(lo, hi, &mut objective);
            let (v, f) = if f < grid_best.1 { (v, f) } else { grid_best };
            if f <= best {
                *coord_mut(&mut p, coord) = v;
                best = f;
            }
        }
        if before - best <= 1e-10 * before.max(TINY) {
            break;
        }
    }
    Ok(HwModel::Seasonal(p))
}

fn coord_mut(p: &mut HwParams, coord: usize) -> &mut f64 {
    match coord {
        0 => &mut p.alpha,
        1 => &mut p.beta,
        _ => &mut p.gamma,
    }
}

/// Runs the recursion over `train`, then iterates `horizon` steps ahead,
/// feeding each forecast back in as the next observation. Outputs are
/// floored at the baseline floor.
pub fn forecast_holt_winters(model: &HwModel, train: &[f64], horizon: usize) -> Vec<f64> {
    let p = match model {
        HwModel::Floor => return vec![BASELINE_FLOOR; horizon],
        HwModel::Seasonal(p) => p,
    };
    let mut state = HwState::initial(p);
    for &c in &train[PERIOD..] {
        state.step(p, c);
    }
    (0..horizon)
        .map(|_| {
            let f = state.predict();
            state.step(p, f);
            f.max(BASELINE_FLOOR)
        })
        .collect()
}
