use rand::Rng;

use super::{stream, SensorProfile, SimConfig, STREAM_LAYOUT, STREAM_PROFILE};
use crate::error::{Error, Result};
use crate::geo::{point_polyline_distance, BBox, Boundary, LonLat, Polygon};
use crate::network::{segment_network, snap_sensors, RoadNetwork, Segment, SensorPlacement};

const METRES_PER_DEG_LAT: f64 = 111_320.0;

/// Everything about a synthetic study area that does not change between
/// trials: streets, sensors and per-sensor rate profiles.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub network: RoadNetwork,
    pub segments: Vec<Segment>,
    pub boundary: Boundary,
    /// Snapped against `segments`.
    pub sensors: Vec<SensorPlacement>,
    pub profiles: Vec<SensorProfile>,
}

struct Offsets {
    dlon: f64,
    dlat: f64,
}

fn offsets(lat: f64) -> Offsets {
    Offsets {
        dlat: 1.0 / METRES_PER_DEG_LAT,
        dlon: 1.0 / (METRES_PER_DEG_LAT * lat.to_radians().cos()),
    }
}

impl Scenario {
    pub fn synthetic(cfg: &SimConfig, segment_len_m: f64, snap_tolerance: f64) -> Result<Self> {
        cfg.validate()?;
        let (network, boundary) = synthetic_network(cfg)?;
        let segments = segment_network(&network, segment_len_m)?;
        let sensors = synthetic_sensors(cfg, &segments, &boundary, snap_tolerance)?;
        let sensors = snap_sensors(&sensors, &segments, snap_tolerance);
        let profiles = assign_profiles(sensors.len(), cfg);
        Ok(Self {
            network,
            segments,
            boundary,
            sensors,
            profiles,
        })
    }

    /// Scenario over user-supplied streets and sensors; only the rate
    /// profiles are synthetic.
    pub fn from_parts(
        network: RoadNetwork,
        boundary: Boundary,
        sensors: Vec<SensorPlacement>,
        cfg: &SimConfig,
        segment_len_m: f64,
        snap_tolerance: f64,
    ) -> Result<Self> {
        let segments = segment_network(&network, segment_len_m)?;
        let sensors = snap_sensors(&sensors, &segments, snap_tolerance);
        let profiles = assign_profiles(sensors.len(), cfg);
        Ok(Self {
            network,
            segments,
            boundary,
            sensors,
            profiles,
        })
    }

    pub fn ids(&self) -> Vec<String> {
        self.sensors.iter().map(|s| s.id.clone()).collect()
    }

    pub fn positions(&self) -> Vec<LonLat> {
        self.sensors.iter().map(|s| s.pos).collect()
    }
}

/// Jittered street lattice plus a boundary polygon with clipped corners
/// around it.
pub fn synthetic_network(cfg: &SimConfig) -> Result<(RoadNetwork, Boundary)> {
    let mut rng = stream(cfg.seed, STREAM_LAYOUT, 0);
    let o = offsets(cfg.origin_lat);
    let (cols, rows) = (cfg.lattice_cols, cfg.lattice_rows);
    let mut vertex = vec![LonLat::new(0.0, 0.0); cols * rows];
    for r in 0..rows {
        for c in 0..cols {
            let jx = rng.random_range(-cfg.jitter_m..=cfg.jitter_m);
            let jy = rng.random_range(-cfg.jitter_m..=cfg.jitter_m);
            vertex[r * cols + c] = LonLat::new(
                cfg.origin_lon + (c as f64 * cfg.spacing_m + jx) * o.dlon,
                cfg.origin_lat + (r as f64 * cfg.spacing_m + jy) * o.dlat,
            );
        }
    }
    let mut lines = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let v = r * cols + c;
            if c + 1 < cols {
                lines.push((
                    format!("e{}", lines.len()),
                    vec![vertex[v], vertex[v + 1]],
                    None,
                    false,
                ));
            }
            if r + 1 < rows {
                lines.push((
                    format!("e{}", lines.len()),
                    vec![vertex[v], vertex[v + cols]],
                    None,
                    false,
                ));
            }
        }
    }
    let network = RoadNetwork::from_polylines(lines)?;

    let bb = BBox::from_points(&vertex).expect("lattice has vertices");
    let margin_lon = 100.0 * o.dlon;
    let margin_lat = 100.0 * o.dlat;
    let (x0, x1) = (bb.min_lon - margin_lon, bb.max_lon + margin_lon);
    let (y0, y1) = (bb.min_lat - margin_lat, bb.max_lat + margin_lat);
    let (cx, cy) = (0.15 * (x1 - x0), 0.15 * (y1 - y0));
    let ring = vec![
        LonLat::new(x0 + cx, y0),
        LonLat::new(x1 - cx, y0),
        LonLat::new(x1, y0 + cy),
        LonLat::new(x1, y1 - cy),
        LonLat::new(x1 - cx, y1),
        LonLat::new(x0 + cx, y1),
        LonLat::new(x0, y1 - cy),
        LonLat::new(x0, y0 + cy),
        LonLat::new(x0 + cx, y0),
    ];
    let boundary = Boundary {
        polygons: vec![Polygon {
            exterior: ring,
            holes: Vec::new(),
        }],
    };
    Ok((network, boundary))
}

/// Places `(1 - off_network_fraction)·n` sensors on random segments and
/// the rest at least 1.5 snap tolerances away from every segment.
pub fn synthetic_sensors(
    cfg: &SimConfig,
    segments: &[Segment],
    boundary: &Boundary,
    snap_tolerance: f64,
) -> Result<Vec<SensorPlacement>> {
    let mut rng = stream(cfg.seed, STREAM_LAYOUT, 1);
    let n = cfg.n_sensors;
    let n_off = (n as f64 * cfg.off_network_fraction).round() as usize;
    let bbox = boundary
        .bbox()
        .ok_or_else(|| Error::InvalidInput("boundary has no vertices".into()))?;
    let mut out = Vec::with_capacity(n);
    for i in 0..n - n_off {
        let seg = &segments[rng.random_range(0..segments.len())];
        let t: f64 = rng.random_range(0.05..0.95);
        let k = ((seg.geometry.len() - 1) as f64 * t).floor() as usize;
        let local = (seg.geometry.len() - 1) as f64 * t - k as f64;
        let p = seg.geometry[k].lerp(seg.geometry[k + 1], local);
        let wobble = rng.random_range(-0.2..0.2) * snap_tolerance;
        out.push((i, LonLat::new(p.lon, p.lat + wobble)));
    }
    let min_gap = 1.5 * snap_tolerance;
    let mut attempts = 0;
    while out.len() < n {
        attempts += 1;
        if attempts > 1_000_000 {
            return Err(Error::InvalidInput(
                "could not place off-network sensors".into(),
            ));
        }
        let p = LonLat::new(
            rng.random_range(bbox.min_lon..=bbox.max_lon),
            rng.random_range(bbox.min_lat..=bbox.max_lat),
        );
        if boundary.contains(p)
            && segments
                .iter()
                .all(|s| point_polyline_distance(p, &s.geometry) > min_gap)
        {
            out.push((out.len(), p));
        }
    }
    Ok(out
        .into_iter()
        .map(|(i, p)| SensorPlacement::new(format!("s{i:03}"), p, None))
        .collect())
}

/// Log-uniform base rates in `[base_min, base_max]` and uniform phases,
/// all fixed by the scenario seed.
pub fn assign_profiles(n: usize, cfg: &SimConfig) -> Vec<SensorProfile> {
    let (lo, hi) = (cfg.base_min.ln(), cfg.base_max.ln());
    (0..n)
        .map(|i| {
            let mut rng = stream(cfg.seed, STREAM_PROFILE, i as u64);
            let u: f64 = rng.random();
            SensorProfile {
                base: (lo + (hi - lo) * u).exp(),
                phase_daily: rng.random_range(0.0..std::f64::consts::TAU),
                phase_weekly: rng.random_range(0.0..std::f64::consts::TAU),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{DEFAULT_SEGMENT_LEN_M, DEFAULT_SNAP_TOLERANCE_DEG};

    #[test]
    fn desk_scale_scenario() {
        let cfg = SimConfig::default();
        let s =
            Scenario::synthetic(&cfg, DEFAULT_SEGMENT_LEN_M, DEFAULT_SNAP_TOLERANCE_DEG).unwrap();
        assert_eq!(s.network.edges().len(), 71);
        assert!(
            (180..=260).contains(&s.segments.len()),
            "{} segments",
            s.segments.len()
        );
        assert_eq!(s.sensors.len(), 100);
        let snapped = s.sensors.iter().filter(|p| p.snapped.is_some()).count();
        assert_eq!(snapped, 75);
        assert!(s
            .sensors
            .iter()
            .all(|p| s.boundary.bbox().unwrap().contains(p.pos)));
        assert!(s.profiles.iter().all(|p| (5.0..=100.0).contains(&p.base)));
    }

    #[test]
    fn scenario_is_seeded() {
        let cfg = SimConfig::default();
        let a = Scenario::synthetic(&cfg, 100.0, 5e-4).unwrap();
        let b = Scenario::synthetic(&cfg, 100.0, 5e-4).unwrap();
        assert_eq!(a.sensors, b.sensors);
        assert_eq!(a.profiles, b.profiles);
        let c = Scenario::synthetic(&SimConfig { seed: 9, ..cfg }, 100.0, 5e-4).unwrap();
        assert_ne!(a.sensors, c.sensors);
    }
}
