//! Segmented road networks and the network-constrained search regions built
//! on top of them.
//!
//! A [`RoadNetwork`] is cut into roughly equal-length [`Segment`]s, sensors are
//! snapped onto the nearest segment and every simple walk along the segment
//! graph whose length lies within the configured bounds becomes a
//! [`SegmentPath`], the spatial part of a network search region.

mod io;
mod paths;
mod snap;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{haversine_m, polyline_length_m, LonLat};

pub use io::{
    read_edge_csv, read_network_geojson, read_sensors_csv, write_network_geojson, write_sensors_csv,
};
pub use paths::{enumerate_paths, CanonicalKey, SegmentPath, DEFAULT_PATH_CAP};
pub use snap::{
    path_members, snap_sensors, PathMembers, SensorIndex, SensorPlacement, TravelDirection,
};

/// Default target segment length in metres.
pub const DEFAULT_SEGMENT_LEN_M: f64 = 100.0;

/// Default snapping tolerance in degrees.
pub const DEFAULT_SNAP_TOLERANCE_DEG: f64 = 5e-4;

pub type SegmentId = u32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: usize,
    pub pos: LonLat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub id: String,
    pub from: usize,
    pub to: usize,
    pub geometry: Vec<LonLat>,
    pub length_m: f64,
    pub oneway: bool,
}

/// Street graph with polyline edges.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetwork {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
}

impl RoadNetwork {
    pub fn new(vertices: Vec<Vertex>, edges: Vec<Edge>) -> Result<Self> {
        for (i, v) in vertices.iter().enumerate() {
            if v.id != i {
                return Err(Error::Network(format!(
                    "vertex at position {i} has id {}",
                    v.id
                )));
            }
        }
        let mut seen = HashMap::new();
        for e in &edges {
            if seen.insert(e.id.as_str(), ()).is_some() {
                return Err(Error::Network(format!("duplicate edge id {:?}", e.id)));
            }
            if e.from >= vertices.len() || e.to >= vertices.len() {
                return Err(Error::Network(format!(
                    "edge {:?} references a missing vertex",
                    e.id
                )));
            }
            if !(e.length_m > 0.0) || !e.length_m.is_finite() {
                return Err(Error::Network(format!(
                    "edge {:?} has non-positive length {}",
                    e.id, e.length_m
                )));
            }
            if e.geometry.len() < 2 {
                return Err(Error::Network(format!(
                    "edge {:?} has fewer than two points",
                    e.id
                )));
            }
        }
        Ok(Self { vertices, edges })
    }

    /// Builds a network from edge polylines, creating vertices at endpoints
    /// that coincide on the coordinate lattice.
    ///
    /// Missing lengths are measured along the polyline.
    pub fn from_polylines(lines: Vec<(String, Vec<LonLat>, Option<f64>, bool)>) -> Result<Self> {
        let mut index: BTreeMap<(i64, i64), usize> = BTreeMap::new();
        let mut vertices = Vec::new();
        let mut vertex_for = |p: LonLat, vertices: &mut Vec<Vertex>| -> usize {
            *index.entry(p.lattice_key()).or_insert_with(|| {
                vertices.push(Vertex {
                    id: vertices.len(),
                    pos: p,
                });
                vertices.len() - 1
            })
        };
        let mut edges = Vec::with_capacity(lines.len());
        for (id, geometry, length, oneway) in lines {
            if geometry.len() < 2 {
                return Err(Error::Network(format!(
                    "edge {id:?} has fewer than two points"
                )));
            }
            let from = vertex_for(geometry[0], &mut vertices);
            let to = vertex_for(*geometry.last().unwrap(), &mut vertices);
            let length_m = length.unwrap_or_else(|| polyline_length_m(&geometry));
            edges.push(Edge {
                id,
                from,
                to,
                geometry,
                length_m,
                oneway,
            });
        }
        Self::new(vertices, edges)
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn total_length_m(&self) -> f64 {
        self.edges.iter().map(|e| e.length_m).sum()
    }
}

/// Piece of an edge; the unit from which network paths are assembled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub id: SegmentId,
    pub edge_id: String,
    pub geometry: Vec<LonLat>,
    pub length_m: f64,
    pub adjacent: Vec<SegmentId>,
}

impl Segment {
    pub fn start(&self) -> LonLat {
        self.geometry[0]
    }

    pub fn end(&self) -> LonLat {
        *self
            .geometry
            .last()
            .expect("segment geometry is never empty")
    }

    pub(crate) fn start_key(&self) -> (i64, i64) {
        self.start().lattice_key()
    }

    pub(crate) fn end_key(&self) -> (i64, i64) {
        self.end().lattice_key()
    }
}

/// Splits every edge into `ceil(len / target_len)` equal pieces and derives
/// segment adjacency from shared endpoints.
pub fn segment_network(network: &RoadNetwork, target_len: f64) -> Result<Vec<Segment>> {
    if !(target_len > 0.0) {
        return Err(Error::Network(format!(
            "target segment length must be positive, got {target_len}"
        )));
    }
    if network.edges.is_empty() {
        return Err(Error::Network("network has no edges".into()));
    }
    let mut segments = Vec::new();
    for edge in &network.edges {
        let geo_len = polyline_length_m(&edge.geometry);
        if !(geo_len > 0.0) {
            return Err(Error::Network(format!(
                "edge {:?} has zero-length geometry",
                edge.id
            )));
        }
        let pieces = ((edge.length_m / target_len) - 1e-9).ceil().max(1.0) as usize;
        let piece_len = edge.length_m / pieces as f64;
        for k in 0..pieces {
            let a = k as f64 / pieces as f64;
            let b = (k + 1) as f64 / pieces as f64;
            segments.push(Segment {
                id: segments.len() as SegmentId,
                edge_id: edge.id.clone(),
                geometry: sub_polyline(&edge.geometry, geo_len, a, b),
                length_m: piece_len,
                adjacent: Vec::new(),
            });
        }
    }

    let mut by_endpoint: HashMap<(i64, i64), Vec<SegmentId>> = HashMap::new();
    for s in &segments {
        by_endpoint.entry(s.start_key()).or_default().push(s.id);
        if s.end_key() != s.start_key() {
            by_endpoint.entry(s.end_key()).or_default().push(s.id);
        }
    }
    for s in segments.iter_mut() {
        let mut adj: Vec<SegmentId> = by_endpoint[&s.start_key()]
            .iter()
            .chain(by_endpoint[&s.end_key()].iter())
            .copied()
            .filter(|&o| o != s.id)
            .collect();
        adj.sort_unstable();
        adj.dedup();
        s.adjacent = adj;
    }
    Ok(segments)
}

/// Portion of a polyline between fractions `a` and `b` of its length.
fn sub_polyline(line: &[LonLat], total: f64, a: f64, b: f64) -> Vec<LonLat> {
    let at = |frac: f64| -> (usize, LonLat) {
        if frac <= 0.0 {
            return (0, line[0]);
        }
        if frac >= 1.0 {
            return (line.len() - 2, line[line.len() - 1]);
        }
        let target = frac * total;
        let mut acc = 0.0;
        for i in 0..line.len() - 1 {
            let d = haversine_m(line[i], line[i + 1]);
            if acc + d >= target && d > 0.0 {
                return (i, line[i].lerp(line[i + 1], (target - acc) / d));
            }
            acc += d;
        }
        (line.len() - 2, line[line.len() - 1])
    };
    let (ia, pa) = at(a);
    let (ib, pb) = at(b);
    let mut out = vec![pa];
    out.extend_from_slice(&line[ia + 1..=ib]);
    out.push(pb);
    out.dedup_by(|x, y| x.lattice_key() == y.lattice_key());
    if out.len() < 2 {
        out.push(pb);
    }
    out
}
