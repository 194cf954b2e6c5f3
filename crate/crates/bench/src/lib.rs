//! Shared inputs for the criterion benchmarks.

use netscan_core::forecast::{ForecastSeries, SensorSeries};
use netscan_core::geo::LonLat;
use netscan_core::network::{segment_network, RoadNetwork, Segment};

/// A `cols × rows` lattice of two-way streets, 300 m blocks split into 100 m segments.
pub fn lattice(cols: usize, rows: usize) -> Vec<Segment> {
    let step = 2.7e-3;
    let mut lines = Vec::new();
    for r in 0..=rows {
        for c in 0..cols {
            let y = r as f64 * step;
            let a = LonLat::new(c as f64 * step, y);
            let b = LonLat::new((c + 1) as f64 * step, y);
            lines.push((format!("h{r}-{c}"), vec![a, b], Some(300.0), false));
        }
    }
    for c in 0..=cols {
        for r in 0..rows {
            let x = c as f64 * step;
            let a = LonLat::new(x, r as f64 * step);
            let b = LonLat::new(x, (r + 1) as f64 * step);
            lines.push((format!("v{c}-{r}"), vec![a, b], Some(300.0), false));
        }
    }
    segment_network(
        &RoadNetwork::from_polylines(lines).expect("valid lattice"),
        100.0,
    )
    .expect("segments")
}

/// Deterministic forecasts and counts for `n` sensors over `hours`.
pub fn series(n: usize, hours: usize) -> (Vec<String>, Vec<ForecastSeries>, Vec<SensorSeries>) {
    let ids: Vec<String> = (0..n).map(|i| format!("s{i:03}")).collect();
    let mut forecasts = Vec::new();
    let mut actuals = Vec::new();
    for (i, id) in ids.iter().enumerate() {
        let mean: Vec<f64> = (0..hours)
            .map(|t| 20.0 + ((i * 7 + t * 3) % 11) as f64)
            .collect();
        let std = vec![2.0; hours];
        let counts = mean
            .iter()
            .enumerate()
            .map(|(t, m)| (*m as u32 + (t % 5) as u32).saturating_sub(2))
            .collect();
        forecasts.push(ForecastSeries::from_moments(id.clone(), 0, mean, std, 3.0));
        actuals.push(SensorSeries::new(id.clone(), 0, counts));
    }
    (ids, forecasts, actuals)
}

/// Three weeks of a noisy daily cycle.
pub fn hourly_counts(days: usize) -> Vec<f64> {
    (0..days * 24)
        .map(|t| {
            30.0 + 15.0 * (2.0 * std::f64::consts::PI * t as f64 / 24.0).sin()
                + ((t * 37) % 7) as f64
        })
        .collect()
}
