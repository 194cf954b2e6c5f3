use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde_json::json;

use netscan_core::evaluate::{
    build_report, read_results_csv, run_benchmark, write_report_json, write_results_csv, Arm,
    BenchmarkReport,
};
use netscan_core::forecast::{
    forecast_all, preprocess, read_counts_csv, read_forecasts_csv, write_counts_csv,
    write_forecasts_csv, SensorSeries,
};
use netscan_core::geo::Boundary;
use netscan_core::grid::build_grid;
use netscan_core::io::{read_boundary_geojson, write_atomic, write_boundary_geojson, write_json};
use netscan_core::network::{
    enumerate_paths, read_edge_csv, read_network_geojson, read_sensors_csv, segment_network,
    snap_sensors, write_network_geojson, write_sensors_csv, RoadNetwork, Segment, SensorPlacement,
};
use netscan_core::pipeline::plan_day;
use netscan_core::scan::{
    corrected_score, heatmap, read_scores_csv, scan, write_heatmap_geojson, write_scores_csv,
    Cover, HeatTarget, NullDistribution, ScanData, ScanType, SearchSpace,
};
use netscan_core::simulate::{
    calibrate_null, generate_surge_free, read_null_csv, surge_free_seed, trial_data,
    write_null_csv, write_thresholds_csv, Scenario,
};
use netscan_core::{Error, Result};

use crate::config::{MethodName, RunConfig, ScanTypes};

fn required(flag: Option<PathBuf>, configured: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    flag.or_else(|| configured.clone()).ok_or_else(|| {
        Error::Config(format!(
            "no {name} file given (flag --{name} or inputs.{name})"
        ))
    })
}

fn out_file(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

pub fn read_network(path: &Path) -> Result<RoadNetwork> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => read_edge_csv(path),
        _ => read_network_geojson(path),
    }
}

/// Sensor counts after gap filling, over the hours spanned by all sensors.
/// Rejected sensors are dropped with a warning.
pub fn load_series(cfg: &RunConfig, path: &Path) -> Result<Vec<SensorSeries>> {
    let raw = read_counts_csv(path)?;
    let first = raw.values().filter_map(|o| o.keys().next()).min();
    let last = raw.values().filter_map(|o| o.keys().next_back()).max();
    let (Some(&first), Some(&last)) = (first, last) else {
        return Err(Error::InvalidInput(format!(
            "{}: no observations",
            path.display()
        )));
    };
    let mut out = Vec::with_capacity(raw.len());
    for (id, obs) in &raw {
        match preprocess(
            id,
            obs,
            Some((first, last + 1)),
            cfg.preprocess.max_gap_hours,
            cfg.preprocess.min_coverage,
        ) {
            Ok(s) => out.push(s),
            Err(why) => warn!("sensor {id} dropped: {why}"),
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{}: every sensor was rejected",
            path.display()
        )));
    }
    info!(
        "{} of {} sensors usable, {} hours",
        out.len(),
        raw.len(),
        last + 1 - first
    );
    Ok(out)
}

/// Street network, boundary and sensors as needed by the requested scans.
pub struct Geography {
    pub segments: Option<Vec<Segment>>,
    pub boundary: Option<Boundary>,
    /// Snapped when a network is present.
    pub sensors: Vec<SensorPlacement>,
}

pub struct GeoPaths {
    pub sensors: Option<PathBuf>,
    pub network: Option<PathBuf>,
    pub boundary: Option<PathBuf>,
}

impl Geography {
    pub fn load(cfg: &RunConfig, paths: GeoPaths, types: &[ScanType]) -> Result<Self> {
        let sensors = read_sensors_csv(&required(paths.sensors, &cfg.inputs.sensors, "sensors")?)?;
        let segments = if types.contains(&ScanType::Net) {
            let network = read_network(&required(paths.network, &cfg.inputs.network, "network")?)?;
            Some(segment_network(&network, cfg.network.segment_length_m)?)
        } else {
            None
        };
        let boundary = if types.contains(&ScanType::Pl) {
            Some(read_boundary_geojson(&required(
                paths.boundary,
                &cfg.inputs.boundary,
                "boundary",
            )?)?)
        } else {
            None
        };
        let sensors = match &segments {
            Some(s) => snap_sensors(&sensors, s, cfg.network.snap_tolerance_deg),
            None => sensors,
        };
        Ok(Self {
            segments,
            boundary,
            sensors,
        })
    }
}

pub fn build_space(
    cfg: &RunConfig,
    scan_type: ScanType,
    segments: Option<&[Segment]>,
    boundary: Option<&Boundary>,
    sensors: &[SensorPlacement],
) -> Result<SearchSpace> {
    let ids: Vec<String> = sensors.iter().map(|s| s.id.clone()).collect();
    let space = match scan_type {
        ScanType::Pl => {
            let boundary =
                boundary.ok_or_else(|| Error::Config("a planar scan needs a boundary".into()))?;
            let grid = build_grid(boundary, cfg.grid.resolution)?;
            let positions: Vec<_> = sensors.iter().map(|s| s.pos).collect();
            SearchSpace::planar(&grid, ids, &positions, cfg.grid.max_rect_size)
        }
        ScanType::Net => {
            let segments = segments
                .ok_or_else(|| Error::Config("a network scan needs a road network".into()))?;
            let paths = enumerate_paths(
                segments,
                cfg.network.min_path_m,
                cfg.network.max_path_m,
                cfg.network.path_cap,
            )?;
            SearchSpace::network(&paths, sensors, segments.len())
        }
    };
    info!("{} search space: {} regions", scan_type, space.units.len());
    Ok(space)
}

fn scenario(cfg: &RunConfig) -> Result<Scenario> {
    let i = &cfg.inputs;
    match (&i.network, &i.sensors, &i.boundary) {
        (Some(n), Some(s), Some(b)) => Scenario::from_parts(
            read_network(n)?,
            read_boundary_geojson(b)?,
            read_sensors_csv(s)?,
            &cfg.simulate,
            cfg.network.segment_length_m,
            cfg.network.snap_tolerance_deg,
        ),
        (None, None, None) => Scenario::synthetic(
            &cfg.simulate,
            cfg.network.segment_length_m,
            cfg.network.snap_tolerance_deg,
        ),
        _ => Err(Error::Config(
            "inputs.network, inputs.sensors and inputs.boundary must be given together".into(),
        )),
    }
}

pub struct SimulateArgs {
    pub out: PathBuf,
    pub days: Option<usize>,
    pub surge: bool,
    pub trial: usize,
}

/// Writes `network.geojson`, `boundary.geojson`, `sensors.csv`,
/// `counts.csv` and, for surge runs, `surge.json`.
pub fn simulate(cfg: &RunConfig, args: SimulateArgs) -> Result<()> {
    let sc = scenario(cfg)?;
    let days = args.days.unwrap_or(cfg.simulate.days_total);
    if days == 0 {
        return Err(Error::Config("--days must be positive".into()));
    }
    let (series, surge_doc) = if args.surge {
        let (spec, surge) = trial_data(&sc, &cfg.simulate, cfg.seed, args.trial, days)?;
        let ids = sc.ids();
        let doc = json!({
            "trial": args.trial,
            "epicentre": [spec.epicentre.lon, spec.epicentre.lat],
            "k": spec.k,
            "first_day": spec.first_day,
            "days": spec.days,
            "lambda_cap": spec.lambda_cap,
            "max_rate": spec.max_rate,
            "affected": surge.affected.iter().map(|&i| ids[i].clone()).collect::<Vec<_>>(),
            "omega": surge.omega,
        });
        (surge.series, Some(doc))
    } else {
        (
            generate_surge_free(
                &sc.ids(),
                &sc.profiles,
                &cfg.simulate,
                days,
                surge_free_seed(cfg.seed, 0),
            ),
            None,
        )
    };
    write_network_geojson(&out_file(&args.out, "network.geojson"), &sc.network)?;
    write_boundary_geojson(&out_file(&args.out, "boundary.geojson"), &sc.boundary)?;
    write_sensors_csv(&out_file(&args.out, "sensors.csv"), &sc.sensors)?;
    if let Some(doc) = surge_doc {
        write_json(&out_file(&args.out, "surge.json"), &doc)?;
    }
    write_counts_csv(&out_file(&args.out, "counts.csv"), &series)?;
    info!(
        "simulated {} sensors over {days} days into {}",
        sc.sensors.len(),
        args.out.display()
    );
    Ok(())
}

pub struct ForecastArgs {
    pub counts: Option<PathBuf>,
    pub out: PathBuf,
    pub day: Option<usize>,
}

/// Forecasts the scan window of one day (by default the last complete one)
/// from the days before it.
pub fn forecast(cfg: &RunConfig, args: ForecastArgs) -> Result<()> {
    let series = load_series(cfg, &required(args.counts, &cfg.inputs.counts, "counts")?)?;
    let start = series[0].start;
    let n_days = series[0].len() / 24;
    let day = match args.day {
        Some(d) => d,
        None => n_days
            .checked_sub(1)
            .ok_or_else(|| Error::InvalidInput("counts cover less than one day".into()))?,
    };
    let settings = cfg.pipeline(cfg.forecast.method);
    let plan = plan_day(
        start,
        day,
        settings.window_hours(),
        settings.train_hours,
        None,
    )?;
    info!(
        "day {day}: training hours {}..{}, window {}..{}",
        plan.train_start, plan.train_end, plan.window_start, plan.window_end
    );
    let trains: Vec<SensorSeries> = series
        .iter()
        .map(|s| s.window(plan.train_start, plan.train_end))
        .collect();
    let horizon = cfg.forecast.horizon_hours;
    let forecasts = forecast_all(&trains, horizon, &settings.forecast)?;
    write_forecasts_csv(&args.out, &forecasts)
}

pub struct ScanArgs {
    pub counts: Option<PathBuf>,
    pub forecasts: Option<PathBuf>,
    pub geo: GeoPaths,
    pub null: Option<PathBuf>,
    pub scan_type: Option<ScanTypes>,
    pub top: Option<usize>,
    pub out: PathBuf,
}

fn find_null<'a>(
    nulls: &'a [NullDistribution],
    scan_type: ScanType,
    cfg: &RunConfig,
) -> Result<&'a NullDistribution> {
    nulls
        .iter()
        .find(|n| n.scan_type == scan_type && n.metric == cfg.scan.metric)
        .ok_or_else(|| {
            Error::Config(format!(
                "null file has no {} {} distribution",
                scan_type,
                cfg.scan.metric.as_str()
            ))
        })
}

/// Scores every region over the first `scan.window_hours` forecast hours and writes
/// `scores_pl.csv` and/or `scores_net.csv`.
pub fn scan_cmd(cfg: &RunConfig, args: ScanArgs) -> Result<()> {
    let types = args.scan_type.unwrap_or(cfg.scan.scan_type).list();
    let series = load_series(cfg, &required(args.counts, &cfg.inputs.counts, "counts")?)?;
    let forecasts = read_forecasts_csv(&required(
        args.forecasts,
        &cfg.inputs.forecasts,
        "forecasts",
    )?)?;
    let window_start = forecasts
        .iter()
        .map(|f| f.start)
        .min()
        .ok_or_else(|| Error::InvalidInput("forecast file is empty".into()))?;
    let w = cfg.scan.window_hours;
    let nulls = match args.null.or_else(|| cfg.inputs.null.clone()) {
        Some(p) => Some(read_null_csv(&p)?),
        None => None,
    };
    let geo = Geography::load(cfg, args.geo, &types)?;
    let params = cfg.scan_params();
    let mut outputs = Vec::new();
    for t in types {
        let space = build_space(
            cfg,
            t,
            geo.segments.as_deref(),
            geo.boundary.as_ref(),
            &geo.sensors,
        )?;
        let data = ScanData::new(&space.sensor_ids, &forecasts, &series, window_start, w)?;
        let mut scores = scan(&space, &data, &params);
        if let Some(nulls) = &nulls {
            let null = find_null(nulls, t, cfg)?;
            for s in &mut scores {
                s.corrected = Some(corrected_score(
                    &s.score,
                    null,
                    cfg.scan.percentile,
                    cfg.scan.score_scale,
                )?);
            }
        }
        if let Some(n) = args.top {
            scores.truncate(n);
        }
        if let Some(top) = scores.first() {
            info!(
                "{t}: top region {} score {:.4} (log)",
                space.units[top.unit].key, top.score.log
            );
        }
        outputs.push((t, space, scores));
    }
    for (t, space, scores) in outputs {
        let name = format!("scores_{}.csv", t.as_str().to_ascii_lowercase());
        write_scores_csv(
            &out_file(&args.out, &name),
            &space,
            cfg.scan.metric,
            &scores,
        )?;
    }
    Ok(())
}

pub struct CalibrateArgs {
    pub counts: Option<PathBuf>,
    pub geo: GeoPaths,
    pub first_day: Option<usize>,
    pub last_day: Option<usize>,
    pub scan_type: Option<ScanTypes>,
    pub out: PathBuf,
}

/// Daily maximum scores on surge-free data; writes `null.csv` and
/// `thresholds.csv`.
pub fn calibrate(cfg: &RunConfig, args: CalibrateArgs) -> Result<()> {
    let types = args.scan_type.unwrap_or(cfg.scan.scan_type).list();
    let series = load_series(cfg, &required(args.counts, &cfg.inputs.counts, "counts")?)?;
    let n_days = series[0].len() / 24;
    let first = args.first_day.unwrap_or(cfg.forecast.train_days);
    let last = args.last_day.unwrap_or(n_days.saturating_sub(1));
    if first > last {
        return Err(Error::Config(format!(
            "no calibration days in {first}..={last}"
        )));
    }
    let days: Vec<usize> = (first..=last).collect();
    let geo = Geography::load(cfg, args.geo, &types)?;
    let spaces = types
        .iter()
        .map(|&t| {
            build_space(
                cfg,
                t,
                geo.segments.as_deref(),
                geo.boundary.as_ref(),
                &geo.sensors,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&SearchSpace> = spaces.iter().collect();
    let nulls = calibrate_null(&series, &refs, &cfg.pipeline(cfg.forecast.method), &days)?;
    for n in &nulls {
        n.threshold(cfg.scan.percentile, cfg.scan.score_scale)?;
    }
    write_null_csv(&out_file(&args.out, "null.csv"), &nulls)?;
    write_thresholds_csv(
        &out_file(&args.out, "thresholds.csv"),
        &nulls,
        cfg.scan.percentile,
    )
}

pub struct EvaluateArgs {
    pub results: Option<PathBuf>,
    pub null: Option<PathBuf>,
    pub out: PathBuf,
}

fn write_report(out: &Path, report: &BenchmarkReport) -> Result<()> {
    let text = report.to_text();
    let path = out_file(out, "report.txt");
    write_atomic(&path, |w| {
        w.write_all(text.as_bytes()).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })
    })?;
    write_report_json(&out_file(out, "report.json"), report)?;
    info!("report:\n{text}");
    Ok(())
}

/// The simulated-surge benchmark: calibrates a null per forecast method
/// (unless one is supplied), runs paired trials and writes `results.csv`,
/// `report.txt` and `report.json`. With `--results`, only the report is
/// rebuilt.
pub fn evaluate(cfg: &RunConfig, args: EvaluateArgs) -> Result<()> {
    if let Some(p) = &args.results {
        let results = read_results_csv(p)?;
        return write_report(
            &args.out,
            &build_report(&results, cfg.evaluate.bootstrap, cfg.seed)?,
        );
    }
    let methods = &cfg.evaluate.methods;
    if methods.is_empty() {
        return Err(Error::Config("evaluate.methods is empty".into()));
    }
    let given_null = args.null.or_else(|| cfg.inputs.null.clone());
    if given_null.is_some() && methods.len() > 1 {
        return Err(Error::Config(
            "a supplied null file can only serve a single forecast method".into(),
        ));
    }
    let sc = scenario(cfg)?;
    let types = cfg.scan.scan_type.list();
    let spaces = types
        .iter()
        .map(|&t| build_space(cfg, t, Some(&sc.segments), Some(&sc.boundary), &sc.sensors))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&SearchSpace> = spaces.iter().collect();

    let mut nulls_by_method: BTreeMap<usize, Vec<NullDistribution>> = BTreeMap::new();
    match &given_null {
        Some(p) => {
            let all = read_null_csv(p)?;
            let picked = types
                .iter()
                .map(|&t| find_null(&all, t, cfg).cloned())
                .collect::<Result<Vec<_>>>()?;
            nulls_by_method.insert(0, picked);
        }
        None => {
            let sim = &cfg.simulate;
            let series = generate_surge_free(
                &sc.ids(),
                &sc.profiles,
                sim,
                sim.days_total,
                surge_free_seed(cfg.seed, 0),
            );
            let days: Vec<usize> = (sim.train_days..sim.days_total).collect();
            for (m, &method) in methods.iter().enumerate() {
                info!(
                    "calibrating {} null over {} days",
                    method.label(),
                    days.len()
                );
                let nulls = calibrate_null(&series, &refs, &cfg.pipeline(method), &days)?;
                nulls_by_method.insert(m, nulls);
            }
        }
    }
    let arms: Vec<Arm> = methods
        .iter()
        .enumerate()
        .map(|(m, &method): (usize, &MethodName)| Arm {
            name: method.label().to_string(),
            settings: cfg.pipeline(method),
            nulls: nulls_by_method[&m].iter().collect(),
        })
        .collect();
    let results = run_benchmark(&sc, &cfg.simulate, &refs, &arms, &cfg.benchmark())?;
    let report = build_report(&results, cfg.evaluate.bootstrap, cfg.seed)?;
    if given_null.is_none() {
        for (m, method) in methods.iter().enumerate() {
            let name = format!("null_{}.csv", method.label().to_ascii_lowercase());
            write_null_csv(&out_file(&args.out, &name), &nulls_by_method[&m])?;
        }
    }
    write_results_csv(&out_file(&args.out, "results.csv"), &results)?;
    write_report(&args.out, &report)
}

pub struct HeatmapArgs {
    pub scores: PathBuf,
    pub network: Option<PathBuf>,
    pub boundary: Option<PathBuf>,
    pub out: PathBuf,
}

/// Mean score per grid cell (planar scores) or segment (network scores).
pub fn heatmap_cmd(cfg: &RunConfig, args: HeatmapArgs) -> Result<()> {
    let rows = read_scores_csv(&args.scores)?;
    if rows.is_empty() {
        return write_json(
            &args.out,
            &json!({"type": "FeatureCollection", "features": []}),
        );
    }
    let covers = rows
        .iter()
        .map(|r| {
            Cover::from_key(&r.region_key).ok_or_else(|| {
                Error::InvalidInput(format!("unrecognised region key {:?}", r.region_key))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let planar = matches!(covers[0], Cover::Rect { .. });
    if covers
        .iter()
        .any(|c| matches!(c, Cover::Rect { .. }) != planar)
    {
        return Err(Error::InvalidInput(
            "scores mix planar and network regions".into(),
        ));
    }
    let pairs = covers.iter().zip(rows.iter().map(|r| r.score));
    if planar {
        let boundary =
            read_boundary_geojson(&required(args.boundary, &cfg.inputs.boundary, "boundary")?)?;
        let grid = build_grid(&boundary, cfg.grid.resolution)?;
        let target = HeatTarget::Grid(&grid);
        let cells = heatmap(pairs, &target)?;
        write_heatmap_geojson(&args.out, &cells, &target)
    } else {
        let network = read_network(&required(args.network, &cfg.inputs.network, "network")?)?;
        let segments = segment_network(&network, cfg.network.segment_length_m)?;
        let target = HeatTarget::Segments(&segments);
        let cells = heatmap(pairs, &target)?;
        write_heatmap_geojson(&args.out, &cells, &target)
    }
}
