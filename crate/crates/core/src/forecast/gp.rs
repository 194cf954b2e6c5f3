//! Gaussian-process regression on hourly counts treated as continuous values.
//!
//! The covariance is
//!
//! ```text
//! k(x, y) = k_per(x, y; 24 h) · k_per(x, y; 168 h) + k_rbf(x, y) + σ²_white δ(x, y)
//! k_per(x, y; p) = s² exp(-2 sin²(π |x - y| / p) / ℓ²)
//! k_rbf(x, y)    = s² exp(-(x - y)² / (2 ℓ²))
//! ```
//!
//! Periods stay fixed; variances and lengthscales are fitted by maximising
//! the log marginal likelihood over log-parameters with a projected BFGS
//! search and a few seeded restarts. Targets are standardised internally.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DAILY_PERIOD: f64 = 24.0;
pub const WEEKLY_PERIOD: f64 = 168.0;
pub const MAX_JITTER: f64 = 1e-6;

const N_PARAMS: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelParams {
    pub daily_variance: f64,
    pub daily_lengthscale: f64,
    pub weekly_variance: f64,
    pub weekly_lengthscale: f64,
    pub rbf_variance: f64,
    /// Hours.
    pub rbf_lengthscale: f64,
    pub white_variance: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        Self {
            daily_variance: 1.0,
            daily_lengthscale: 1.0,
            weekly_variance: 1.0,
            weekly_lengthscale: 1.0,
            rbf_variance: 0.1,
            rbf_lengthscale: 168.0,
            white_variance: 0.1,
        }
    }
}

impl KernelParams {
    fn to_log(self) -> [f64; N_PARAMS] {
        [
            self.daily_variance.ln(),
            self.daily_lengthscale.ln(),
            self.weekly_variance.ln(),
            self.weekly_lengthscale.ln(),
            self.rbf_variance.ln(),
            self.rbf_lengthscale.ln(),
            self.white_variance.ln(),
        ]
    }

    fn from_log(v: &[f64; N_PARAMS]) -> Self {
        Self {
            daily_variance: v[0].exp(),
            daily_lengthscale: v[1].exp(),
            weekly_variance: v[2].exp(),
            weekly_lengthscale: v[3].exp(),
            rbf_variance: v[4].exp(),
            rbf_lengthscale: v[5].exp(),
            white_variance: v[6].exp(),
        }
    }

    pub fn is_valid(&self) -> bool {
        self.to_log().iter().all(|v| v.is_finite())
    }

    /// Covariance without the white-noise term.
    pub fn signal(&self, x: f64, y: f64) -> f64 {
        let r = (x - y).abs();
        let sd = (PI * r / DAILY_PERIOD).sin();
        let sw = (PI * r / WEEKLY_PERIOD).sin();
        let daily = self.daily_variance * (-2.0 * sd * sd / self.daily_lengthscale.powi(2)).exp();
        let weekly =
            self.weekly_variance * (-2.0 * sw * sw / self.weekly_lengthscale.powi(2)).exp();
        let rbf = self.rbf_variance * (-r * r / (2.0 * self.rbf_lengthscale.powi(2))).exp();
        daily * weekly + rbf
    }

    /// Full kernel value; the white term only applies at identical inputs.
    pub fn k(&self, x: f64, y: f64) -> f64 {
        self.signal(x, y) + if x == y { self.white_variance } else { 0.0 }
    }

    pub fn gram(&self, xs: &[f64]) -> DMatrix<f64> {
        let n = xs.len();
        DMatrix::from_fn(n, n, |i, j| {
            self.signal(xs[i], xs[j]) + if i == j { self.white_variance } else { 0.0 }
        })
    }

    /// Gram matrix and its derivatives with respect to each log-parameter.
    fn gram_with_grads(&self, xs: &[f64]) -> (DMatrix<f64>, Vec<DMatrix<f64>>) {
        let n = xs.len();
        let mut k = DMatrix::zeros(n, n);
        let mut grads = vec![DMatrix::zeros(n, n); N_PARAMS];
        let (ld2, lw2, lr2) = (
            self.daily_lengthscale.powi(2),
            self.weekly_lengthscale.powi(2),
            self.rbf_lengthscale.powi(2),
        );
        for j in 0..n {
            for i in j..n {
                let r = (xs[i] - xs[j]).abs();
                let sd2 = (PI * r / DAILY_PERIOD).sin().powi(2);
                let sw2 = (PI * r / WEEKLY_PERIOD).sin().powi(2);
                let daily = self.daily_variance * (-2.0 * sd2 / ld2).exp();
                let weekly = self.weekly_variance * (-2.0 * sw2 / lw2).exp();
                let prod = daily * weekly;
                let rbf = self.rbf_variance * (-r * r / (2.0 * lr2)).exp();
                let white = if i == j { self.white_variance } else { 0.0 };
                let vals = [
                    prod,
                    prod * 4.0 * sd2 / ld2,
                    prod,
                    prod * 4.0 * sw2 / lw2,
                    rbf,
                    rbf * r * r / lr2,
                    white,
                ];
                k[(i, j)] = prod + rbf + white;
                k[(j, i)] = k[(i, j)];
                for (g, v) in grads.iter_mut().zip(vals) {
                    g[(i, j)] = v;
                    g[(j, i)] = v;
                }
            }
        }
        (k, grads)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpConfig {
    pub init: KernelParams,
    /// Optimiser starts, the first from `init`, the rest perturbed.
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
    /// Skip hyperparameter optimisation and use `init` as is.
    pub fixed: bool,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            init: KernelParams::default(),
            restarts: 3,
            max_iter: 60,
            seed: 0,
            fixed: false,
        }
    }
}

/// Cholesky factor of `k`, adding diagonal jitter up to [`MAX_JITTER`] if needed.
pub fn cholesky_with_jitter(k: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    for jitter in [0.0, 1e-10, 1e-9, 1e-8, 1e-7, MAX_JITTER] {
        let mut m = k.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(ch) = Cholesky::new(m) {
            return Ok((ch, jitter));
        }
    }
    Err(Error::IllConditioned { jitter: MAX_JITTER })
}

/// Log marginal likelihood of `y` under zero-mean GP with kernel `p`.
pub fn log_marginal_likelihood(p: &KernelParams, xs: &[f64], y: &DVector<f64>) -> Result<f64> {
    let (ch, _) = cholesky_with_jitter(&p.gram(xs))?;
    Ok(lml_from_cholesky(&ch, y))
}

fn lml_from_cholesky(ch: &Cholesky<f64, Dyn>, y: &DVector<f64>) -> f64 {
    let alpha = ch.solve(y);
    let log_det_half: f64 = ch.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
    -0.5 * y.dot(&alpha) - log_det_half - 0.5 * y.len() as f64 * (2.0 * PI).ln()
}

/// Negative log marginal likelihood and its gradient in log-parameter space.
fn objective(
    theta: &[f64; N_PARAMS],
    xs: &[f64],
    y: &DVector<f64>,
) -> Option<(f64, [f64; N_PARAMS])> {
    let p = KernelParams::from_log(theta);
    let (k, grads) = p.gram_with_grads(xs);
    let (ch, _) = cholesky_with_jitter(&k).ok()?;
    let lml = lml_from_cholesky(&ch, y);
    let alpha = ch.solve(y);
    let kinv = ch.inverse();
    let n = xs.len();
    let mut g = [0.0; N_PARAMS];
    for (gi, dk) in g.iter_mut().zip(&grads) {
        // 0.5 tr((αα' - K⁻¹) dK)
        let mut acc = 0.0;
        for j in 0..n {
            for i in 0..n {
                acc += (alpha[i] * alpha[j] - kinv[(i, j)]) * dk[(j, i)];
            }
        }
        *gi = -0.5 * acc;
    }
    lml.is_finite().then_some((-lml, g))
}

/// Box constraints on log-parameters (standardised targets).
fn bounds() -> ([f64; N_PARAMS], [f64; N_PARAMS]) {
    let lo = [1e-4, 1e-2, 1e-4, 1e-2, 1e-4, 1.0, 1e-6].map(f64::ln);
    let hi = [1e2, 1e2, 1e2, 1e2, 1e2, 1e4, 1e1].map(f64::ln);
    (lo, hi)
}

fn project(theta: &mut [f64; N_PARAMS]) {
    let (lo, hi) = bounds();
    for i in 0..N_PARAMS {
        theta[i] = theta[i].clamp(lo[i], hi[i]);
    }
}

/// Projected BFGS with backtracking; returns the best point visited.
fn minimise(
    start: [f64; N_PARAMS],
    xs: &[f64],
    y: &DVector<f64>,
    max_iter: usize,
) -> Option<([f64; N_PARAMS], f64)> {
    let (lo, hi) = bounds();
    let mut x = start;
    project(&mut x);
    let (mut f, mut g) = objective(&x, xs, y)?;
    let mut h = DMatrix::<f64>::identity(N_PARAMS, N_PARAMS);
    for _ in 0..max_iter {
        // components pinned at a bound with the gradient pushing outward stay fixed
        let free: Vec<bool> = (0..N_PARAMS)
            .map(|i| !((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0)))
            .collect();
        let gvec = DVector::from_fn(N_PARAMS, |i, _| if free[i] { g[i] } else { 0.0 });
        if gvec.amax() < 1e-6 {
            break;
        }
        let mut d = -(&h * &gvec);
        for i in 0..N_PARAMS {
            if !free[i] {
                d[i] = 0.0;
            }
        }
        if d.dot(&gvec) >= 0.0 {
            h = DMatrix::identity(N_PARAMS, N_PARAMS);
            d = -gvec.clone();
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let mut cand = x;
            for i in 0..N_PARAMS {
                cand[i] += step * d[i];
            }
            project(&mut cand);
            if let Some((fc, gc)) = objective(&cand, xs, y) {
                let decrease: f64 = (0..N_PARAMS).map(|i| gvec[i] * (cand[i] - x[i])).sum();
                if fc <= f + 1e-4 * decrease {
                    accepted = Some((cand, fc, gc));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fnew, gn)) = accepted else {
            break;
        };
        let s = DVector::from_fn(N_PARAMS, |i, _| xn[i] - x[i]);
        let yv = DVector::from_fn(N_PARAMS, |i, _| gn[i] - g[i]);
        let sy = s.dot(&yv);
        if sy > 1e-10 {
            let rho = 1.0 / sy;
            let eye = DMatrix::<f64>::identity(N_PARAMS, N_PARAMS);
            let a = &eye - rho * &s * yv.transpose();
            let b = &eye - rho * &yv * s.transpose();
            h = &a * &h * &b + rho * &s * s.transpose();
        }
        let converged = (f - fnew).abs() <= 1e-9 * f.abs().max(1.0);
        x = xn;
        f = fnew;
        g = gn;
        if converged {
            break;
        }
    }
    Some((x, f))
}

/// Fitted GP: hyperparameters plus the factorised training system.
#[derive(Debug, Clone)]
pub struct GpState {
    pub params: KernelParams,
    pub t0: i64,
    xs: Vec<f64>,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    y_mean: f64,
    y_scale: f64,
    pub log_marginal_likelihood: f64,
    pub initial_log_marginal_likelihood: f64,
}

/// Fits a GP to `values` observed at consecutive hours starting at `start`.
pub fn fit_gp(start: i64, values: &[f64], config: &GpConfig) -> Result<GpState> {
    if values.len() < 2 {
        return Err(Error::InvalidInput(
            "GP needs at least two training points".into(),
        ));
    }
    if !config.init.is_valid() {
        return Err(Error::Config(
            "GP kernel parameters must be positive".into(),
        ));
    }
    let xs: Vec<f64> = (0..values.len()).map(|i| i as f64).collect();
    let y_mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / values.len() as f64;
    let y_scale = if var > 0.0 { var.sqrt() } else { 1.0 };
    let y = DVector::from_iterator(values.len(), values.iter().map(|v| (v - y_mean) / y_scale));

    let init_theta = config.init.to_log();
    let initial_lml = log_marginal_likelihood(&config.init, &xs, &y)?;
    let mut best = (init_theta, -initial_lml);
    let mut improved = false;
    if !config.fixed {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        for restart in 0..config.restarts.max(1) {
            let mut start_theta = init_theta;
            if restart > 0 {
                for v in start_theta.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v += z;
                }
            }
            if let Some((theta, f)) = minimise(start_theta, &xs, &y, config.max_iter) {
                if f < best.1 {
                    best = (theta, f);
                    improved = true;
                }
            }
        }
    }
    let params = if improved {
        KernelParams::from_log(&best.0)
    } else {
        config.init
    };
    let (chol, _) = cholesky_with_jitter(&params.gram(&xs))?;
    let alpha = chol.solve(&y);
    let lml = lml_from_cholesky(&chol, &y);
    Ok(GpState {
        params,
        t0: start,
        xs,
        chol,
        alpha,
        y_mean,
        y_scale,
        log_marginal_likelihood: lml.max(initial_lml),
        initial_log_marginal_likelihood: initial_lml,
    })
}

impl GpState {
    /// Posterior mean and standard deviation of an observation at each hour.
    pub fn predict(&self, hours: &[i64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.xs.len();
        let mut means = Vec::with_capacity(hours.len());
        let mut stds = Vec::with_capacity(hours.len());
        for &h in hours {
            let x = (h - self.t0) as f64;
            let kstar = DVector::from_fn(n, |i, _| self.params.signal(x, self.xs[i]));
            let mean = kstar.dot(&self.alpha);
            let v = self
                .chol
                .l_dirty()
                .solve_lower_triangular(&kstar)
                .expect("Cholesky factor has a positive diagonal");
            let var = self.params.signal(x, x) + self.params.white_variance - v.dot(&v);
            means.push(mean * self.y_scale + self.y_mean);
            stds.push(var.max(0.0).sqrt() * self.y_scale);
        }
        (means, stds)
    }

    pub fn train_end(&self) -> i64 {
        self.t0 + self.xs.len() as i64
    }
}

/// Posterior moments over the `horizon` hours after the training window.
pub fn forecast_gp(state: &GpState, horizon: usize) -> (Vec<f64>, Vec<f64>) {
    let end = state.train_end();
    let hours: Vec<i64> = (end..end + horizon as i64).collect();
    state.predict(&hours)
}
