//! Declarative run configuration. Every key has a default, and
//! unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use netscan_core::evaluate::BenchmarkConfig;
use netscan_core::forecast::{ForecastMethod, ForecastSettings, GpConfig, KernelParams};
use netscan_core::network::{DEFAULT_PATH_CAP, DEFAULT_SEGMENT_LEN_M, DEFAULT_SNAP_TOLERANCE_DEG};
use netscan_core::pipeline::PipelineSettings;
use netscan_core::scan::{BoundMode, Metric, ScanParams, ScanType, ScoreScale, WindowFamily};
use netscan_core::simulate::SimConfig;
use netscan_core::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub inputs: Inputs,
    pub grid: GridConfig,
    pub network: NetworkConfig,
    pub preprocess: PreprocessConfig,
    pub forecast: ForecastConfig,
    pub scan: ScanConfig,
    pub simulate: SimConfig,
    pub evaluate: EvaluateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 2020,
            inputs: Inputs::default(),
            grid: GridConfig::default(),
            network: NetworkConfig::default(),
            preprocess: PreprocessConfig::default(),
            forecast: ForecastConfig::default(),
            scan: ScanConfig::default(),
            simulate: SimConfig::default(),
            evaluate: EvaluateConfig::default(),
        }
    }
}

/// Input files; command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    pub counts: Option<PathBuf>,
    pub sensors: Option<PathBuf>,
    pub network: Option<PathBuf>,
    pub boundary: Option<PathBuf>,
    pub forecasts: Option<PathBuf>,
    pub null: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub resolution: usize,
    /// Largest rectangle side in cells; all rectangles when absent.
    pub max_rect_size: Option<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            resolution: 8,
            max_rect_size: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub segment_length_m: f64,
    pub snap_tolerance_deg: f64,
    pub min_path_m: f64,
    pub max_path_m: f64,
    pub path_cap: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            segment_length_m: DEFAULT_SEGMENT_LEN_M,
            snap_tolerance_deg: DEFAULT_SNAP_TOLERANCE_DEG,
            min_path_m: 50.0,
            max_path_m: 1000.0,
            path_cap: DEFAULT_PATH_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub max_gap_hours: usize,
    pub min_coverage: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            max_gap_hours: 6,
            min_coverage: 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    Hw,
    Gp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpSection {
    pub restarts: usize,
    pub max_iter: usize,
    pub fixed: bool,
    pub init: KernelParams,
}

impl Default for GpSection {
    fn default() -> Self {
        let d = GpConfig::default();
        Self {
            restarts: d.restarts,
            max_iter: d.max_iter,
            fixed: d.fixed,
            init: d.init,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastConfig {
    pub method: MethodName,
    pub sigma_k: f64,
    pub train_days: usize,
    /// Hours written by the forecast command; at least the scan window.
    pub horizon_hours: usize,
    pub weekday_adjust: bool,
    pub gp: GpSection,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            method: MethodName::Hw,
            sigma_k: 3.0,
            train_days: 21,
            horizon_hours: 48,
            weekday_adjust: true,
            gp: GpSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ScanTypes {
    Pl,
    Net,
    Both,
}

impl ScanTypes {
    pub fn list(self) -> Vec<ScanType> {
        match self {
            ScanTypes::Pl => vec![ScanType::Pl],
            ScanTypes::Net => vec![ScanType::Net],
            ScanTypes::Both => vec![ScanType::Pl, ScanType::Net],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanConfig {
    #[serde(rename = "type")]
    pub scan_type: ScanTypes,
    pub metric: Metric,
    pub bound_mode: BoundMode,
    pub window_hours: usize,
    pub time_window_stride: usize,
    pub all_windows: bool,
    pub percentile: f64,
    pub score_scale: ScoreScale,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            scan_type: ScanTypes::Both,
            metric: Metric::Ebp,
            bound_mode: BoundMode::Mean,
            window_hours: 48,
            time_window_stride: 1,
            all_windows: false,
            percentile: 99.0,
            score_scale: ScoreScale::Raw,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub n_trials: usize,
    pub methods: Vec<MethodName>,
    pub score_scale: ScoreScale,
    pub bootstrap: usize,
    /// Wall-clock columns make results differ between runs, so they stay
    /// zero unless asked for.
    pub record_timing: bool,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            n_trials: 20,
            methods: vec![MethodName::Hw],
            score_scale: ScoreScale::Log,
            bootstrap: 1000,
            record_timing: false,
        }
    }
}

/// Locates a TOML error as 1-based line and column.
fn toml_error(path: &Path, text: &str, e: &toml::de::Error) -> Error {
    let (line, column) = match e.span() {
        Some(span) => {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
            (line as u64, column)
        }
        None => (0, 0),
    };
    Error::Schema {
        path: path.to_path_buf(),
        line,
        column,
        message: e.message().to_string(),
    }
}

impl MethodName {
    pub fn label(self) -> &'static str {
        match self {
            MethodName::Hw => "HW",
            MethodName::Gp => "GP",
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                    path: p.to_path_buf(),
                    source: e,
                })?;
                toml::from_str(&text).map_err(|e| toml_error(p, &text, &e))?
            }
            None => RunConfig::default(),
        };
        cfg.simulate.seed = cfg.seed;
        Ok(cfg)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.simulate.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.grid.resolution == 0 {
            return bad("grid.resolution must be at least 1");
        }
        if !(0.0 <= self.network.min_path_m && self.network.min_path_m < self.network.max_path_m) {
            return bad("need 0 <= network.min_path_m < network.max_path_m");
        }
        if !(self.network.segment_length_m > 0.0) || !(self.network.snap_tolerance_deg >= 0.0) {
            return bad(
                "network.segment_length_m must be positive and snap_tolerance_deg non-negative",
            );
        }
        if self.scan.window_hours == 0 || self.scan.time_window_stride == 0 {
            return bad("scan.window_hours and scan.time_window_stride must be positive");
        }
        if !(0.0..=100.0).contains(&self.scan.percentile) {
            return bad("scan.percentile must lie in [0, 100]");
        }
        if self.forecast.train_days < 2 {
            return bad("forecast.train_days must be at least 2");
        }
        if self.forecast.horizon_hours < self.scan.window_hours {
            return bad("forecast.horizon_hours must cover scan.window_hours");
        }
        if !(self.forecast.sigma_k >= 0.0) {
            return bad("forecast.sigma_k must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.preprocess.min_coverage) {
            return bad("preprocess.min_coverage must lie in [0, 1]");
        }
        self.simulate.validate()
    }

    pub fn forecast_settings(&self, method: MethodName) -> ForecastSettings {
        let f = &self.forecast;
        ForecastSettings {
            method: match method {
                MethodName::Hw => ForecastMethod::HoltWinters,
                MethodName::Gp => ForecastMethod::Gp(GpConfig {
                    init: f.gp.init,
                    restarts: f.gp.restarts,
                    max_iter: f.gp.max_iter,
                    seed: self.seed,
                    fixed: f.gp.fixed,
                }),
            },
            sigma_k: f.sigma_k,
            weekday_adjust: f.weekday_adjust,
        }
    }

    pub fn scan_params(&self) -> ScanParams {
        ScanParams {
            metric: self.scan.metric,
            bound_mode: self.scan.bound_mode,
            windows: WindowFamily {
                max_len: self.scan.window_hours,
                stride: self.scan.time_window_stride,
                all_windows: self.scan.all_windows,
            },
        }
    }

    pub fn pipeline(&self, method: MethodName) -> PipelineSettings {
        PipelineSettings {
            forecast: self.forecast_settings(method),
            train_hours: self.forecast.train_days * 24,
            scan: self.scan_params(),
        }
    }

    pub fn benchmark(&self) -> BenchmarkConfig {
        BenchmarkConfig {
            n_trials: self.evaluate.n_trials,
            percentile: self.scan.percentile,
            scale: self.evaluate.score_scale,
            seed: self.seed,
            record_timing: self.evaluate.record_timing,
            bootstrap: self.evaluate.bootstrap,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_else(|e| format!("<unprintable config: {e}>"))
    }
}
