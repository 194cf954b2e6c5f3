//! Planar and geodesic helpers shared by the network and grid modules.

use serde::{Deserialize, Serialize};

const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Vertex coordinates are snapped to this lattice (degrees) before
/// endpoint matching.
pub const LATTICE_DEG: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LonLat {
    pub lon: f64,
    pub lat: f64,
}

impl LonLat {
    pub const fn new(lon: f64, lat: f64) -> Self {
        Self { lon, lat }
    }

    /// Integer key of the nearest lattice point, used for exact endpoint matching.
    pub fn lattice_key(self) -> (i64, i64) {
        (
            (self.lon / LATTICE_DEG).round() as i64,
            (self.lat / LATTICE_DEG).round() as i64,
        )
    }

    /// Euclidean distance in raw degree space.
    pub fn degree_distance(self, other: LonLat) -> f64 {
        (self.lon - other.lon).hypot(self.lat - other.lat)
    }

    pub fn lerp(self, other: LonLat, t: f64) -> LonLat {
        LonLat::new(
            self.lon + (other.lon - self.lon) * t,
            self.lat + (other.lat - self.lat) * t,
        )
    }
}

/// Great-circle distance in metres.
pub fn haversine_m(a: LonLat, b: LonLat) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

pub fn polyline_length_m(points: &[LonLat]) -> f64 {
    points.windows(2).map(|w| haversine_m(w[0], w[1])).sum()
}

/// Distance in degree space from `p` to the segment `a`-`b`.
pub fn point_segment_distance(p: LonLat, a: LonLat, b: LonLat) -> f64 {
    let (dx, dy) = (b.lon - a.lon, b.lat - a.lat);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.degree_distance(a);
    }
    let t = (((p.lon - a.lon) * dx + (p.lat - a.lat) * dy) / len2).clamp(0.0, 1.0);
    p.degree_distance(a.lerp(b, t))
}

pub fn point_polyline_distance(p: LonLat, line: &[LonLat]) -> f64 {
    match line {
        [] => f64::INFINITY,
        [only] => p.degree_distance(*only),
        _ => line
            .windows(2)
            .map(|w| point_segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

/// Axis-aligned bounding box in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl BBox {
    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a LonLat>) -> Option<BBox> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut bb = BBox {
            min_lon: first.lon,
            min_lat: first.lat,
            max_lon: first.lon,
            max_lat: first.lat,
        };
        for p in it {
            bb.min_lon = bb.min_lon.min(p.lon);
            bb.min_lat = bb.min_lat.min(p.lat);
            bb.max_lon = bb.max_lon.max(p.lon);
            bb.max_lat = bb.max_lat.max(p.lat);
        }
        Some(bb)
    }

    pub fn width(&self) -> f64 {
        self.max_lon - self.min_lon
    }

    pub fn height(&self) -> f64 {
        self.max_lat - self.min_lat
    }

    pub fn contains(&self, p: LonLat) -> bool {
        p.lon >= self.min_lon
            && p.lon <= self.max_lon
            && p.lat >= self.min_lat
            && p.lat <= self.max_lat
    }
}

/// A polygon with optional holes; rings are closed or open lists of vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub exterior: Vec<LonLat>,
    pub holes: Vec<Vec<LonLat>>,
}

/// Boundary of the study area, possibly made of several parts.
#[derive(Debug, Clone, PartialEq)]
pub struct Boundary {
    pub polygons: Vec<Polygon>,
}

impl Boundary {
    pub fn rectangle(bbox: BBox) -> Self {
        let ring = vec![
            LonLat::new(bbox.min_lon, bbox.min_lat),
            LonLat::new(bbox.max_lon, bbox.min_lat),
            LonLat::new(bbox.max_lon, bbox.max_lat),
            LonLat::new(bbox.min_lon, bbox.max_lat),
            LonLat::new(bbox.min_lon, bbox.min_lat),
        ];
        Boundary {
            polygons: vec![Polygon {
                exterior: ring,
                holes: Vec::new(),
            }],
        }
    }

    pub fn bbox(&self) -> Option<BBox> {
        BBox::from_points(self.polygons.iter().flat_map(|p| p.exterior.iter()))
    }

    pub fn contains(&self, p: LonLat) -> bool {
        self.polygons.iter().any(|poly| {
            ring_contains(&poly.exterior, p) && !poly.holes.iter().any(|h| ring_contains(h, p))
        })
    }
}

/// Even-odd ray casting.
fn ring_contains(ring: &[LonLat], p: LonLat) -> bool {
    let n = ring.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (ring[i], ring[j]);
        if (a.lat > p.lat) != (b.lat > p.lat) {
            let x = (b.lon - a.lon) * (p.lat - a.lat) / (b.lat - a.lat) + a.lon;
            if p.lon < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}
