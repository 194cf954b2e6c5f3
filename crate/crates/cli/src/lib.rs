//! Command-line front end: configuration plus one function per subcommand.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use log::info;

use commands::{
    CalibrateArgs, EvaluateArgs, ForecastArgs, GeoPaths, HeatmapArgs, ScanArgs, SimulateArgs,
};
use config::{RunConfig, ScanTypes};
use netscan_core::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "netscan",
    version,
    about = "Expectation-based space-time scans over grids and road networks"
)]
pub struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, short, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic study area and hourly counts.
    Simulate {
        #[arg(long)]
        out: PathBuf,
        /// Days of counts; defaults to simulate.days_total.
        #[arg(long)]
        days: Option<usize>,
        /// Inject a surge over the final days, as in benchmark trial --trial.
        #[arg(long)]
        surge: bool,
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Forecast the scan window of one day from the days before it.
    Forecast {
        #[arg(long)]
        counts: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Day index from the start of the counts; defaults to the last full day.
        #[arg(long)]
        day: Option<usize>,
    },
    /// Score every region against the forecasts.
    Scan {
        #[arg(long)]
        counts: Option<PathBuf>,
        #[arg(long)]
        forecasts: Option<PathBuf>,
        #[arg(long)]
        sensors: Option<PathBuf>,
        #[arg(long)]
        network: Option<PathBuf>,
        #[arg(long)]
        boundary: Option<PathBuf>,
        /// Null distribution for corrected scores.
        #[arg(long)]
        null: Option<PathBuf>,
        #[arg(long = "type", value_enum)]
        scan_type: Option<ScanTypes>,
        /// Keep only the N best regions.
        #[arg(long)]
        top: Option<usize>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the null distribution of daily maximum scores on surge-free counts.
    Calibrate {
        #[arg(long)]
        counts: Option<PathBuf>,
        #[arg(long)]
        sensors: Option<PathBuf>,
        #[arg(long)]
        network: Option<PathBuf>,
        #[arg(long)]
        boundary: Option<PathBuf>,
        /// First day index; defaults to forecast.train_days.
        #[arg(long)]
        first_day: Option<usize>,
        /// Last day index (inclusive); defaults to the last full day.
        #[arg(long)]
        last_day: Option<usize>,
        #[arg(long = "type", value_enum)]
        scan_type: Option<ScanTypes>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the simulated-surge benchmark, or rebuild its report.
    Evaluate {
        /// Rebuild the report from an existing results file.
        #[arg(long)]
        results: Option<PathBuf>,
        #[arg(long)]
        null: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Average region scores onto grid cells or road segments as GeoJSON.
    Heatmap {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        network: Option<PathBuf>,
        #[arg(long)]
        boundary: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

pub fn init_logging(verbose: bool) {
    let level = if verbose { "debug" } else { "info" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    cfg.validate()?;
    info!("resolved configuration:\n{}", cfg.to_toml());

    let geo = |sensors, network, boundary| GeoPaths {
        sensors,
        network,
        boundary,
    };
    match cli.command {
        Command::Simulate {
            out,
            days,
            surge,
            trial,
        } => commands::simulate(
            &cfg,
            SimulateArgs {
                out,
                days,
                surge,
                trial,
            },
        ),
        Command::Forecast { counts, out, day } => {
            commands::forecast(&cfg, ForecastArgs { counts, out, day })
        }
        Command::Scan {
            counts,
            forecasts,
            sensors,
            network,
            boundary,
            null,
            scan_type,
            top,
            out,
        } => commands::scan_cmd(
            &cfg,
            ScanArgs {
                counts,
                forecasts,
                geo: geo(sensors, network, boundary),
                null,
                scan_type,
                top,
                out,
            },
        ),
        Command::Calibrate {
            counts,
            sensors,
            network,
            boundary,
            first_day,
            last_day,
            scan_type,
            out,
        } => commands::calibrate(
            &cfg,
            CalibrateArgs {
                counts,
                geo: geo(sensors, network, boundary),
                first_day,
                last_day,
                scan_type,
                out,
            },
        ),
        Command::Evaluate { results, null, out } => {
            commands::evaluate(&cfg, EvaluateArgs { results, null, out })
        }
        Command::Heatmap {
            scores,
            network,
            boundary,
            out,
        } => commands::heatmap_cmd(
            &cfg,
            HeatmapArgs {
                scores,
                network,
                boundary,
                out,
            },
        ),
    }
}

/// One line, `error[class] message`, for scripts to parse.
pub fn error_line(e: &Error) -> String {
    let msg = e.to_string().replace('\n', " ");
    format!("error[{}] {}", e.class(), msg)
}
