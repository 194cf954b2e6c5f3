//! Acceptance suite: one PASS/FAIL line per criterion. Run with
//! `cargo test -p netscan-cli --test acceptance`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use netscan_cli::commands::{build_space, evaluate, EvaluateArgs};
use netscan_cli::config::RunConfig;
use netscan_core::evaluate::{read_results_csv, TrialResult};
use netscan_core::forecast::gp::{cholesky_with_jitter, log_marginal_likelihood};
use netscan_core::forecast::holt_winters::trace;
use netscan_core::forecast::{
    fit_gp, fit_holt_winters, forecast_holt_winters, ForecastSeries, GpConfig, HwModel, HwParams,
    KernelParams, SensorSeries,
};
use netscan_core::geo::{BBox, LonLat};
use netscan_core::grid::{enumerate_rectangles, PlanarGrid};
use netscan_core::network::{
    enumerate_paths, segment_network, RoadNetwork, Segment, DEFAULT_PATH_CAP,
};
use netscan_core::scan::{
    asym_score, ebp_score, metric::score, BoundMode, Cover, Direction, Metric, RegionAggregates,
    ScanData, ScanParams, ScanType, SearchSpace, SpatialUnit, WindowFamily,
};
use netscan_core::simulate::{
    calibrate_null, generate_surge_free, read_null_csv, surge_free_seed, Scenario,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn agg(b: f64, c: f64) -> RegionAggregates {
    RegionAggregates {
        b,
        c,
        b_upp: b,
        b_low: b,
    }
}

fn random_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let b = 10f64.powf(rng.random_range(0.0..3.0));
    let ratio: f64 = rng.random_range(0.0..60.0);
    (b, (b * ratio).round())
}

// ---------------------------------------------------------------- 1

const GRID_POINTS: usize = 1_000_000;
const Q_MAX: f64 = 100.0;

/// `ln[e^{(1-q)B} q^C]` at `q = e^u`.
fn log_objective(b: f64, c: f64, u: f64) -> f64 {
    -u.exp_m1() * b + c * u
}

/// Brute-force maximum of the log objective over `q ∈ (1, 100]`: a log-spaced
/// grid locates the best bracket, golden-section search polishes it.
fn brute_force_log(b: f64, c: f64, grid_u: &[f64], grid_q: &[f64]) -> f64 {
    let mut best = (0usize, f64::NEG_INFINITY);
    for (k, (&u, &q)) in grid_u.iter().zip(grid_q).enumerate() {
        let f = (1.0 - q) * b + c * u;
        if f > best.1 {
            best = (k, f);
        }
    }
    let h = grid_u[1] - grid_u[0];
    let mut lo = (grid_u[best.0] - h).max(0.0);
    let mut hi = (grid_u[best.0] + h).min(Q_MAX.ln());
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let x1 = hi - inv_phi * (hi - lo);
        let x2 = lo + inv_phi * (hi - lo);
        if log_objective(b, c, x1) < log_objective(b, c, x2) {
            lo = x1;
        } else {
            hi = x2;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let polished = log_objective(b, c, 0.5 * (lo + hi));
    // q → 1 is the supremum when C <= B
    polished.max(best.1).max(0.0)
}

fn criterion_1() -> Outcome {
    let h = Q_MAX.ln() / GRID_POINTS as f64;
    let grid_u: Vec<f64> = (1..=GRID_POINTS).map(|k| k as f64 * h).collect();
    let grid_q: Vec<f64> = grid_u.iter().map(|u| u.exp()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (b, c) = random_pair(&mut rng);
        let oracle = brute_force_log(b, c, &grid_u, &grid_q);
        let got = ebp_score(&agg(b, c), BoundMode::Mean).unwrap();
        // relative error of the raw score, exact even when it overflows
        let rel = (got.log - oracle).exp_m1().abs();
        if got.raw.is_finite() {
            let direct = (got.raw - oracle.exp()).abs() / oracle.exp();
            worst = worst.max(direct);
        }
        worst = worst.max(rel);
    }
    outcome(
        worst <= 1e-9,
        format!("max relative error {worst:.2e} over 1000 pairs (tol 1e-9)"),
    )
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut bad = Vec::new();
    for _ in 0..1000 {
        let b = 10f64.powf(rng.random_range(-1.0..4.0));
        let c = (b * rng.random_range(0.0..1.0f64)).floor();
        let s = ebp_score(&agg(b, c), BoundMode::Mean).unwrap();
        if s.raw != 1.0 || s.log != 0.0 {
            bad.push(format!("EBP({b}, {c}) = {}", s.raw));
        }
        let c = (b * 10.0).round() / 10.0;
        let s = asym_score(&agg(c, c), BoundMode::Mean).unwrap();
        if s.raw != 0.0 {
            bad.push(format!("ASYM({c}, {c}) = {}", s.raw));
        }
    }
    for _ in 0..1000 {
        let (b, c) = if rng.random_bool(0.5) {
            random_pair(&mut rng)
        } else {
            let b: f64 = rng.random_range(0.5..500.0);
            (b, (b * rng.random_range(0.0..1.0f64)).floor())
        };
        let s = asym_score(&agg(b, c), BoundMode::Mean).unwrap();
        let want = (c - b).partial_cmp(&0.0).unwrap();
        let got = s.raw.partial_cmp(&0.0).unwrap();
        if want != got {
            bad.push(format!("sign ASYM({b}, {c}) = {}", s.raw));
        }
    }
    outcome(
        bad.is_empty(),
        if bad.is_empty() {
            "EBP = 1 for C <= B, ASYM(C = B) = 0, ASYM sign on 1000 pairs".to_string()
        } else {
            format!("{} violations, first {}", bad.len(), bad[0])
        },
    )
}

// ---------------------------------------------------------------- 3

fn point_key(p: LonLat) -> (i64, i64) {
    ((p.lon * 1e9).round() as i64, (p.lat * 1e9).round() as i64)
}

/// Segment sets traversable as one walk: connected, with zero or two odd
/// endpoints, and total length within the bounds.
fn trail_oracle(segments: &[Segment], l_min: f64, l_max: f64) -> BTreeSet<Vec<u32>> {
    let ends: Vec<((i64, i64), (i64, i64))> = segments
        .iter()
        .map(|s| (point_key(s.start()), point_key(s.end())))
        .collect();
    let n = segments.len();
    let mut out = BTreeSet::new();
    for mask in 1u32..(1 << n) {
        let chosen: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let len: f64 = chosen.iter().map(|&i| segments[i].length_m).sum();
        if len < l_min || len > l_max {
            continue;
        }
        let mut degree: HashMap<(i64, i64), usize> = HashMap::new();
        let mut parent: HashMap<(i64, i64), (i64, i64)> = HashMap::new();
        fn root(parent: &mut HashMap<(i64, i64), (i64, i64)>, p: (i64, i64)) -> (i64, i64) {
            let mut r = p;
            while let Some(&q) = parent.get(&r) {
                if q == r {
                    break;
                }
                r = q;
            }
            r
        }
        for &i in &chosen {
            let (a, b) = ends[i];
            *degree.entry(a).or_default() += 1;
            *degree.entry(b).or_default() += 1;
            parent.entry(a).or_insert(a);
            parent.entry(b).or_insert(b);
            let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
            parent.insert(ra, rb);
        }
        let roots: BTreeSet<_> = degree.keys().map(|&p| root(&mut parent, p)).collect();
        let odd = degree.values().filter(|d| *d % 2 == 1).count();
        if roots.len() == 1 && (odd == 0 || odd == 2) {
            out.insert(chosen.iter().map(|&i| i as u32).collect());
        }
    }
    out
}

fn random_network(rng: &mut ChaCha8Rng) -> Vec<Segment> {
    loop {
        let nv = rng.random_range(2..=6);
        let pts: Vec<LonLat> = (0..nv)
            .map(|i| {
                LonLat::new(
                    i as f64 * 1e-3 + rng.random_range(0.0..5e-4),
                    rng.random_range(0.0..3e-3),
                )
            })
            .collect();
        let mut pairs: Vec<(usize, usize)> = (0..nv)
            .flat_map(|a| (a + 1..nv).map(move |b| (a, b)))
            .collect();
        let ne = rng.random_range(1..=pairs.len().min(7));
        let mut lines = Vec::new();
        for e in 0..ne {
            let (a, b) = pairs.swap_remove(rng.random_range(0..pairs.len()));
            let len = rng.random_range(30.0..260.0);
            lines.push((format!("r{e}"), vec![pts[a], pts[b]], Some(len), false));
        }
        let net = RoadNetwork::from_polylines(lines).unwrap();
        let segments = segment_network(&net, 100.0).unwrap();
        if segments.len() <= 8 {
            return segments;
        }
    }
}

fn is_walk(segments: &[Segment], ids: &[u32], reversed: &[bool]) -> bool {
    let oriented = |i: usize| {
        let s = &segments[ids[i] as usize];
        let (a, b) = (point_key(s.start()), point_key(s.end()));
        if reversed[i] {
            (b, a)
        } else {
            (a, b)
        }
    };
    (1..ids.len()).all(|i| oriented(i - 1).1 == oriented(i).0)
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = Vec::new();
    let mut total = 0;
    for g in 0..100 {
        let segments = random_network(&mut rng);
        let l_min = rng.random_range(0.0..150.0);
        let l_max = l_min + rng.random_range(50.0..800.0);
        let expected = trail_oracle(&segments, l_min, l_max);
        let paths = enumerate_paths(&segments, l_min, l_max, DEFAULT_PATH_CAP).unwrap();
        let got: BTreeSet<Vec<u32>> = paths.iter().map(|p| p.key.0.clone()).collect();
        total += expected.len();
        let walks_ok = paths.iter().all(|p| {
            is_walk(&segments, &p.segments, &p.reversed)
                && (p.length_m
                    - p.segments
                        .iter()
                        .map(|&s| segments[s as usize].length_m)
                        .sum::<f64>())
                .abs()
                    < 1e-9
        });
        if got != expected || got.len() != paths.len() || !walks_ok {
            mismatches.push(format!(
                "graph {g}: got {} expected {}",
                got.len(),
                expected.len()
            ));
        }
    }
    let net = RoadNetwork::from_polylines(vec![(
        "chain".into(),
        vec![LonLat::new(0.0, 0.0), LonLat::new(1e-2, 0.0)],
        Some(1000.0),
        false,
    )])
    .unwrap();
    let chain = segment_network(&net, 100.0).unwrap();
    let chain_paths = enumerate_paths(&chain, 50.0, 1000.0, DEFAULT_PATH_CAP)
        .unwrap()
        .len();
    outcome(
        mismatches.is_empty() && chain.len() == 10 && chain_paths == 55,
        format!(
            "100 random graphs ({total} paths) {}; chain of {} segments gives {chain_paths} paths",
            if mismatches.is_empty() {
                "all match".to_string()
            } else {
                format!("{} mismatches, first {}", mismatches.len(), mismatches[0])
            },
            chain.len()
        ),
    )
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut notes = Vec::new();
    let mut pass = true;
    for n in 1..=6usize {
        let grid = PlanarGrid::new(
            BBox {
                min_lon: 0.0,
                min_lat: 0.0,
                max_lon: 1.0,
                max_lat: 1.0,
            },
            n,
        )
        .unwrap();
        let cells: Vec<Option<(usize, usize)>> = (0..15)
            .map(|_| Some((rng.random_range(0..n), rng.random_range(0..n))))
            .collect();
        let rects = enumerate_rectangles(&grid, &cells, None);
        let mut brute = BTreeMap::new();
        for x0 in 0..n {
            for x1 in 0..n {
                for y0 in 0..n {
                    for y1 in 0..n {
                        if x0 <= x1 && y0 <= y1 {
                            let members: Vec<usize> = cells
                                .iter()
                                .enumerate()
                                .filter(|(_, c)| {
                                    let (x, y) = c.unwrap();
                                    (x0..=x1).contains(&x) && (y0..=y1).contains(&y)
                                })
                                .map(|(i, _)| i)
                                .collect();
                            brute.insert((x0, x1, y0, y1), members);
                        }
                    }
                }
            }
        }
        let got: BTreeMap<_, _> = rects
            .iter()
            .map(|r| ((r.x0, r.x1, r.y0, r.y1), r.members.clone()))
            .collect();
        let formula = (n * (n + 1) / 2).pow(2);
        let ok = rects.len() == formula && brute.len() == formula && got == brute;
        pass &= ok;
        notes.push(format!("N={n}:{}", rects.len()));
    }
    outcome(
        pass,
        format!(
            "counts {} match (N(N+1)/2)^2 and brute force",
            notes.join(" ")
        ),
    )
}

// ---------------------------------------------------------------- 5

fn criterion_5() -> Outcome {
    // α = 0.3, β = 0.1, γ = 0.2, X = 10, Y = 0.5, Z_h = 1 + (h - 12)/24,
    // then c = 12, 9, 15 at t = 24, 25, 26.
    let p = HwParams {
        alpha: 0.3,
        beta: 0.1,
        gamma: 0.2,
        level0: 10.0,
        trend0: 0.5,
        seasonal0: (0..24).map(|h| 1.0 + (h as f64 - 12.0) / 24.0).collect(),
    };
    let mut train = vec![10.0; 24];
    train.extend([12.0, 9.0, 15.0]);
    // b_24 = 10.5·0.5; X_24 = 0.3·12/0.5 + 0.7·10.5; Y_24 = 0.1·4.55 + 0.9·0.5;
    // Z_24 = 0.2·12/14.55 + 0.8·0.5; and so on.
    let expected = [
        (5.25, 14.55, 0.905, 0.5649484536082474),
        (
            8.371458333333333,
            15.803115384615385,
            0.9398115384615384,
            0.5472349252784464,
        ),
        (
            9.766707371794872,
            19.43433456043956,
            1.2089523021978021,
            0.621032641517526,
        ),
    ];
    let got = trace(&p, &train);
    let mut trace_err = 0.0f64;
    for (g, e) in got.iter().zip(&expected) {
        for (a, b) in [(g.0, e.0), (g.1, e.1), (g.2, e.2), (g.3, e.3)] {
            trace_err = trace_err.max((a - b).abs());
        }
    }

    let constant = vec![7.0; 21 * 24];
    let model = fit_holt_winters(&constant).unwrap();
    let fc = forecast_holt_winters(&model, &constant, 48);
    let const_err = fc.iter().map(|v| (v - 7.0).abs()).fold(0.0, f64::max);

    let periodic: Vec<f64> = (0..21 * 24)
        .map(|t| 20.0 + 10.0 * (2.0 * std::f64::consts::PI * t as f64 / 24.0).sin())
        .collect();
    let model = fit_holt_winters(&periodic).unwrap();
    let HwModel::Seasonal(fitted) = &model else {
        return outcome(false, "periodic series fell back to the floor model");
    };
    let periodic_err = trace(fitted, &periodic)
        .iter()
        .zip(&periodic[24..])
        .map(|(s, c)| (s.0 - c).abs() / c)
        .fold(0.0, f64::max);

    outcome(
        got.len() == 3 && trace_err <= 1e-12 && const_err <= 1e-9 && periodic_err < 0.01,
        format!(
            "hand trace max error {trace_err:.1e} (tol 1e-12); constant forecast error {const_err:.1e}; \
             periodic one-step error {:.3}% (< 1%)",
            100.0 * periodic_err
        ),
    )
}

// ---------------------------------------------------------------- 6

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut max_jitter = 0.0f64;
    let mut failures = 0;
    for _ in 0..50 {
        let mut hours = BTreeSet::new();
        while hours.len() < 100 {
            hours.insert(rng.random_range(0..24 * 28));
        }
        let xs: Vec<f64> = hours.into_iter().map(|h| h as f64).collect();
        let lu = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| 10f64.powf(rng.random_range(lo..hi));
        let p = KernelParams {
            daily_variance: lu(&mut rng, -1.0, 1.0),
            daily_lengthscale: lu(&mut rng, -0.5, 0.5),
            weekly_variance: lu(&mut rng, -1.0, 1.0),
            weekly_lengthscale: lu(&mut rng, -0.5, 0.5),
            rbf_variance: lu(&mut rng, -2.0, 0.0),
            rbf_lengthscale: lu(&mut rng, 1.0, 3.0),
            white_variance: lu(&mut rng, -6.0, 0.0),
        };
        match cholesky_with_jitter(&p.gram(&xs)) {
            Ok((_, j)) => max_jitter = max_jitter.max(j),
            Err(_) => failures += 1,
        }
    }

    let values: Vec<f64> = (0..72)
        .map(|t| {
            let t = t as f64;
            20.0 + 8.0 * (2.0 * std::f64::consts::PI * t / 24.0).sin() + 0.05 * t
        })
        .collect();
    let mut interp = Vec::new();
    for noise in [1e-2, 1e-4, 1e-6, 1e-8, 1e-10, 1e-12, 1e-14] {
        let config = GpConfig {
            init: KernelParams {
                white_variance: noise,
                rbf_lengthscale: 24.0,
                ..KernelParams::default()
            },
            fixed: true,
            ..GpConfig::default()
        };
        let state = fit_gp(0, &values, &config).unwrap();
        let hours: Vec<i64> = (0..72).collect();
        let (mean, _) = state.predict(&hours);
        interp.push(
            mean.iter()
                .zip(&values)
                .map(|(m, v)| (m - v).abs())
                .fold(0.0, f64::max),
        );
    }
    let interp_final = *interp.last().unwrap();

    let sim = netscan_core::simulate::SimConfig {
        n_sensors: 10,
        ..Default::default()
    };
    let ids: Vec<String> = (0..3).map(|i| format!("g{i}")).collect();
    let profiles = netscan_core::simulate::assign_profiles(3, &sim);
    let series = generate_surge_free(&ids, &profiles, &sim, 5, 66);
    let mut lml_ok = true;
    let mut gains = Vec::new();
    for s in &series {
        let values: Vec<f64> = s.counts.iter().map(|&c| c as f64).collect();
        let state = fit_gp(s.start, &values, &GpConfig::default()).unwrap();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let sd =
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64).sqrt();
        let y = DVector::from_iterator(values.len(), values.iter().map(|v| (v - mean) / sd));
        let xs: Vec<f64> = (0..values.len()).map(|i| i as f64).collect();
        let before = log_marginal_likelihood(&GpConfig::default().init, &xs, &y).unwrap();
        let after = log_marginal_likelihood(&state.params, &xs, &y).unwrap();
        lml_ok &= after >= before;
        gains.push(after - before);
    }
    outcome(
        failures == 0 && max_jitter <= 1e-6 && interp_final < 1e-6 && lml_ok,
        format!(
            "50 Gram matrices factorised, max jitter {max_jitter:.0e}, {failures} failures; interpolation error \
             {} as noise 1e-2 -> 1e-14; LML gain {}",
            interp.iter().map(|e| format!("{e:.1e}")).collect::<Vec<_>>().join(" > "),
            gains.iter().map(|g| format!("{g:+.2}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

// ---------------------------------------------------------------- 7

/// Exact sum of doubles that are multiples of 2^-72.
fn exact_sum(values: impl Iterator<Item = f64>) -> f64 {
    let scale = 2f64.powi(72);
    let total: i128 = values
        .map(|v| {
            let s = v * scale;
            assert_eq!(s.fract(), 0.0);
            s as i128
        })
        .sum();
    total as f64 / scale
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut compared = 0usize;
    let mut mismatches = 0usize;
    for instance in 0..40 {
        let n = rng.random_range(1..=20);
        let hours = 72;
        let ids: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
        let start = 1000;
        let forecasts: Vec<ForecastSeries> = ids
            .iter()
            .map(|id| {
                let mean: Vec<f64> = (0..hours).map(|_| rng.random_range(0.5..60.0)).collect();
                let std: Vec<f64> = (0..hours).map(|_| rng.random_range(0.0..5.0)).collect();
                ForecastSeries::from_moments(id.clone(), start, mean, std, 3.0)
            })
            .collect();
        let actuals: Vec<SensorSeries> = ids
            .iter()
            .map(|id| {
                SensorSeries::new(
                    id.clone(),
                    start,
                    (0..hours).map(|_| rng.random_range(0..90)).collect(),
                )
            })
            .collect();
        let n_units = rng.random_range(1..=50);
        let units: Vec<SpatialUnit> = (0..n_units)
            .map(|u| {
                let mut members: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.3)).collect();
                if members.is_empty() {
                    members.push(rng.random_range(0..n));
                }
                SpatialUnit {
                    key: format!("rect:{u}-{u}:0-0"),
                    extent: 1.0,
                    direction: Direction::Undirected,
                    members,
                    cover: Cover::Rect {
                        x0: u,
                        x1: u,
                        y0: 0,
                        y1: 0,
                    },
                }
            })
            .collect();
        let space = SearchSpace {
            scan_type: ScanType::Pl,
            sensor_ids: ids.clone(),
            units,
        };
        let mode = [BoundMode::Mean, BoundMode::Upper, BoundMode::Lower][instance % 3];
        let metric = [Metric::Ebp, Metric::Asym][instance % 2];
        let params = ScanParams {
            metric,
            bound_mode: mode,
            windows: WindowFamily {
                max_len: hours,
                stride: 1,
                all_windows: true,
            },
        };
        let data = ScanData::new(&ids, &forecasts, &actuals, start, hours).unwrap();
        let scores = netscan_core::scan::scan(&space, &data, &params);
        let by_region: HashMap<(usize, i64, i64), _> = scores
            .iter()
            .map(|s| ((s.unit, s.t_start, s.t_end), s))
            .collect();

        let baseline = |f: &ForecastSeries, t: usize| match mode {
            BoundMode::Mean => f.mean[t],
            BoundMode::Upper => f.upper[t],
            BoundMode::Lower => f.lower[t],
        };
        let mut naive_count = 0;
        for (u, unit) in space.units.iter().enumerate() {
            for first in 0..hours {
                for last in first..hours {
                    naive_count += 1;
                    let b = exact_sum(
                        unit.members
                            .iter()
                            .flat_map(|&m| (first..=last).map(move |t| (m, t)))
                            .map(|(m, t)| baseline(&forecasts[m], t)),
                    );
                    let c: u32 = unit
                        .members
                        .iter()
                        .map(|&m| actuals[m].counts[first..=last].iter().sum::<u32>())
                        .sum();
                    let expected = score(metric, &agg(b, c as f64), BoundMode::Mean).unwrap();
                    compared += 1;
                    match by_region.get(&(u, start + first as i64, start + last as i64)) {
                        Some(s)
                            if s.b.to_bits() == b.to_bits()
                                && s.c == c as f64
                                && s.score.raw.to_bits() == expected.raw.to_bits()
                                && s.score.log.to_bits() == expected.log.to_bits() => {}
                        _ => mismatches += 1,
                    }
                }
            }
        }
        if naive_count != scores.len() {
            mismatches += 1;
        }
    }
    outcome(
        mismatches == 0,
        format!(
            "{compared} regions over 40 instances, {mismatches} differ bitwise from the naive loop"
        ),
    )
}

// ---------------------------------------------------------------- 8 & 9

struct Means {
    detection: f64,
    precision: f64,
    recall: f64,
    scores: Vec<f64>,
}

fn group_means(results: &[TrialResult], scan: ScanType) -> Means {
    let ms: Vec<_> = results
        .iter()
        .filter(|r| r.scan == scan)
        .filter_map(|r| r.metrics.as_ref())
        .collect();
    let n = ms.len() as f64;
    let mean = |f: &dyn Fn(&netscan_core::evaluate::TrialMetrics) -> f64| {
        let vals: Vec<f64> = ms.iter().map(|m| f(m)).filter(|v| v.is_finite()).collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    };
    Means {
        detection: ms.iter().filter(|m| m.detect_day.is_some()).count() as f64 / n,
        precision: mean(&|m| m.precision),
        recall: mean(&|m| m.recall),
        scores: (0..3).map(|d| mean(&|m| m.scores[d])).collect(),
    }
}

fn criterion_8(out: &Path) -> (Outcome, RunConfig) {
    let t = Instant::now();
    let cfg = RunConfig::default();
    let res = evaluate(
        &cfg,
        EvaluateArgs {
            results: None,
            null: None,
            out: out.to_path_buf(),
        },
    );
    if let Err(e) = res {
        return (outcome(false, format!("benchmark failed: {e}")), cfg);
    }
    let results = read_results_csv(&out.join("results.csv")).unwrap();
    let failed = results.iter().filter(|r| r.metrics.is_none()).count();
    let pl = group_means(&results, ScanType::Pl);
    let net = group_means(&results, ScanType::Net);
    let a = pl.detection >= 0.8 && net.detection >= 0.8;
    let b = net.precision > pl.precision;
    let c = pl.recall > net.recall;
    let d = [&pl, &net]
        .iter()
        .all(|m| m.scores.windows(2).all(|w| w[1] >= w[0]));
    let secs = t.elapsed().as_secs_f64();
    let detail = format!(
        "(a) detection PL {:.2} NET {:.2}; (b) precision NET {:.3} > PL {:.3}; (c) recall PL {:.3} > NET {:.3}; \
         (d) corrected PL {} NET {}; {failed} failed trials; {secs:.0} s",
        pl.detection,
        net.detection,
        net.precision,
        pl.precision,
        pl.recall,
        net.recall,
        pl.scores.iter().map(|s| format!("{s:.0}")).collect::<Vec<_>>().join("/"),
        net.scores.iter().map(|s| format!("{s:.0}")).collect::<Vec<_>>().join("/"),
    );
    (outcome(a && b && c && d && secs < 1800.0, detail), cfg)
}

fn criterion_9(cfg: &RunConfig, benchmark_dir: &Path) -> Outcome {
    let nulls = match read_null_csv(&benchmark_dir.join("null_hw.csv")) {
        Ok(n) => n,
        Err(e) => return outcome(false, format!("no calibrated null: {e}")),
    };
    let sim = &cfg.simulate;
    let sc = Scenario::synthetic(
        sim,
        cfg.network.segment_length_m,
        cfg.network.snap_tolerance_deg,
    )
    .unwrap();
    let spaces: Vec<SearchSpace> = [ScanType::Pl, ScanType::Net]
        .iter()
        .map(|&t| build_space(cfg, t, Some(&sc.segments), Some(&sc.boundary), &sc.sensors).unwrap())
        .collect();
    let refs: Vec<&SearchSpace> = spaces.iter().collect();
    let fresh_days = 201;
    let total = sim.train_days + fresh_days;
    // index 0 is the calibration data; 1 has never been seen
    let series = generate_surge_free(
        &sc.ids(),
        &sc.profiles,
        sim,
        total,
        surge_free_seed(cfg.seed, 1),
    );
    let days: Vec<usize> = (sim.train_days..total).collect();
    let fresh = match calibrate_null(&series, &refs, &cfg.pipeline(cfg.forecast.method), &days) {
        Ok(f) => f,
        Err(e) => return outcome(false, format!("fresh days failed: {e}")),
    };
    let scale = cfg.evaluate.score_scale;
    let mut pass = true;
    let mut notes = Vec::new();
    for f in &fresh {
        let null = nulls.iter().find(|n| n.scan_type == f.scan_type).unwrap();
        let threshold = null.threshold(cfg.scan.percentile, scale).unwrap();
        let alarms = f
            .samples
            .iter()
            .filter(|s| scale.pick(s) >= threshold)
            .count();
        let rate = alarms as f64 / f.samples.len() as f64;
        pass &= (rate - 0.01).abs() <= 0.02 + 1e-12;
        notes.push(format!(
            "{} {alarms}/{} = {:.1}%",
            f.scan_type,
            f.samples.len(),
            100.0 * rate
        ));
    }
    outcome(
        pass,
        format!("alarm rates {} (target 1% ± 2 pp)", notes.join(", ")),
    )
}

// ---------------------------------------------------------------- 10

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_netscan"))
        .env("RUST_LOG", "error")
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

fn hash_tree(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let digest = Sha256::digest(std::fs::read(&p).unwrap());
                let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), hex);
            }
        }
    }
    out
}

fn pipeline(dir: &Path, extra: &[&str]) -> Result<(), String> {
    let cfg = dir.join("run.toml");
    std::fs::write(
        &cfg,
        "seed = 99\n\n[scan]\nwindow_hours = 24\n\n[simulate]\nn_sensors = 20\nlattice_cols = 4\nlattice_rows = 3\n\
         days_total = 45\nk_min = 3\nk_max = 8\n\n[evaluate]\nn_trials = 5\nbootstrap = 200\n",
    )
    .unwrap();
    let s = |p: PathBuf| p.to_str().unwrap().to_string();
    let (c, sim, run) = (s(cfg), s(dir.join("sim")), s(dir.join("run")));
    let f = |name: &str| format!("{sim}/{name}");
    let mut base = vec!["--config", c.as_str()];
    base.extend_from_slice(extra);
    let with =
        |args: &[&str]| -> Vec<String> { base.iter().chain(args).map(|a| a.to_string()).collect() };
    let go = |args: Vec<String>| run_cli(&args.iter().map(String::as_str).collect::<Vec<_>>());
    let geo = |cmd: &str| {
        with(&[
            cmd,
            "--sensors",
            &f("sensors.csv"),
            "--network",
            &f("network.geojson"),
            "--boundary",
            &f("boundary.geojson"),
        ])
    };
    go(with(&["simulate", "--out", &sim]))?;
    let mut cal = geo("calibrate");
    cal.extend([
        "--counts".into(),
        f("counts.csv"),
        "--out".into(),
        format!("{run}/cal"),
    ]);
    go(cal)?;
    go(with(&[
        "simulate",
        "--surge",
        "--trial",
        "2",
        "--out",
        &format!("{sim}/surge"),
    ]))?;
    let surge_counts = format!("{sim}/surge/counts.csv");
    go(with(&[
        "forecast",
        "--counts",
        &surge_counts,
        "--out",
        &format!("{run}/forecasts.csv"),
    ]))?;
    let mut sc = geo("scan");
    sc.extend([
        "--counts".into(),
        surge_counts.clone(),
        "--forecasts".into(),
        format!("{run}/forecasts.csv"),
        "--null".into(),
        format!("{run}/cal/null.csv"),
        "--out".into(),
        format!("{run}/scan"),
    ]);
    go(sc)?;
    for (kind, flag, geo_file) in [
        ("pl", "--boundary", "boundary.geojson"),
        ("net", "--network", "network.geojson"),
    ] {
        go(with(&[
            "heatmap",
            "--scores",
            &format!("{run}/scan/scores_{kind}.csv"),
            flag,
            &f(geo_file),
            "--out",
            &format!("{run}/heat_{kind}.geojson"),
        ]))?;
    }
    go(with(&["evaluate", "--out", &format!("{run}/eval")]))?;
    go(with(&[
        "evaluate",
        "--results",
        &format!("{run}/eval/results.csv"),
        "--out",
        &format!("{run}/report"),
    ]))?;
    Ok(())
}

fn criterion_10() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    if let Err(e) = pipeline(a.path(), &[]).and_then(|_| pipeline(b.path(), &["--threads", "3"])) {
        return outcome(false, format!("pipeline failed: {e}"));
    }
    let ha = hash_tree(a.path());
    let hb = hash_tree(b.path());
    let differing: Vec<&String> = ha.keys().filter(|k| ha.get(*k) != hb.get(*k)).collect();
    let report_same = ha.get("run/eval/report.json") == ha.get("run/report/report.json");
    outcome(
        differing.is_empty() && ha.len() == hb.len() && ha.len() >= 20 && report_same,
        format!(
            "{} artifacts hashed across two runs (second with --threads 3): {} differ; rebuilt report {}",
            ha.len(),
            differing.len(),
            if report_same { "identical" } else { "differs" }
        ),
    )
}

// ----------------------------------------------------------------

fn main() {
    // libtest flags such as --nocapture may be passed; nothing to parse
    let mut failed = 0;
    let mut report = |n: usize, name: &str, run: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = run();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failed += 1;
        }
        println!(
            "{verdict} {n:>2} {name}: {} [{:.1} s]",
            o.detail,
            t.elapsed().as_secs_f64()
        );
    };
    report(1, "metric oracle", &mut criterion_1);
    report(2, "metric edge cases", &mut criterion_2);
    report(3, "path enumeration oracle", &mut criterion_3);
    report(4, "grid rectangle count", &mut criterion_4);
    report(5, "Holt-Winters", &mut criterion_5);
    report(6, "GP validity", &mut criterion_6);
    report(7, "scan oracle", &mut criterion_7);
    let bench = tempfile::tempdir().unwrap();
    let mut cfg = None;
    report(8, "detection benchmark", &mut || {
        let (o, c) = criterion_8(bench.path());
        cfg = Some(c);
        o
    });
    let cfg = cfg.unwrap();
    report(9, "false-alarm calibration", &mut || {
        criterion_9(&cfg, bench.path())
    });
    report(10, "determinism", &mut criterion_10);
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all 10 criteria passed");
}
