use serde::{Deserialize, Serialize};

use super::{Segment, SegmentId, SegmentPath};
use crate::geo::{point_polyline_distance, LonLat};

/// Travel direction of a sensor relative to the digitised direction of the
/// segment it is snapped to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TravelDirection {
    Along,
    Against,
}

impl TravelDirection {
    pub fn parse(s: &str) -> Option<Option<Self>> {
        match s.trim().to_ascii_lowercase().as_str() {
            "" | "none" => Some(None),
            "along" | "forward" | "+" => Some(Some(Self::Along)),
            "against" | "reverse" | "-" => Some(Some(Self::Against)),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Along => "forward",
            Self::Against => "reverse",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorPlacement {
    pub id: String,
    pub pos: LonLat,
    pub snapped: Option<SegmentId>,
    /// Distance in degrees to the nearest segment, `inf` before snapping.
    pub snap_distance: f64,
    pub direction: Option<TravelDirection>,
}

impl SensorPlacement {
    pub fn new(id: impl Into<String>, pos: LonLat, direction: Option<TravelDirection>) -> Self {
        Self {
            id: id.into(),
            pos,
            snapped: None,
            snap_distance: f64::INFINITY,
            direction,
        }
    }
}

/// Assigns each sensor to its nearest segment (ties go to the smaller
/// segment id). Sensors further than `tolerance` degrees stay unsnapped.
pub fn snap_sensors(
    sensors: &[SensorPlacement],
    segments: &[Segment],
    tolerance: f64,
) -> Vec<SensorPlacement> {
    sensors
        .iter()
        .map(|s| {
            let mut best: Option<(f64, SegmentId)> = None;
            for seg in segments {
                let d = point_polyline_distance(s.pos, &seg.geometry);
                best = match best {
                    Some((bd, bid)) if bd < d || (bd == d && bid < seg.id) => Some((bd, bid)),
                    _ => Some((d, seg.id)),
                };
            }
            let (dist, seg) = best.unwrap_or((f64::INFINITY, 0));
            SensorPlacement {
                snapped: (dist <= tolerance).then_some(seg),
                snap_distance: dist,
                ..s.clone()
            }
        })
        .collect()
}

/// Sensors grouped by the segment they are snapped to.
#[derive(Debug, Clone)]
pub struct SensorIndex {
    by_segment: Vec<Vec<usize>>,
    directions: Vec<Option<TravelDirection>>,
}

impl SensorIndex {
    pub fn new(sensors: &[SensorPlacement], n_segments: usize) -> Self {
        let mut by_segment = vec![Vec::new(); n_segments];
        for (i, s) in sensors.iter().enumerate() {
            if let Some(seg) = s.snapped {
                if let Some(v) = by_segment.get_mut(seg as usize) {
                    v.push(i);
                }
            }
        }
        Self {
            by_segment,
            directions: sensors.iter().map(|s| s.direction).collect(),
        }
    }

    pub fn on_segment(&self, seg: SegmentId) -> &[usize] {
        self.by_segment
            .get(seg as usize)
            .map_or(&[], |v| v.as_slice())
    }

    pub fn has_directions(&self) -> bool {
        self.directions.iter().any(Option::is_some)
    }
}

/// Sensor indices covered by a path, overall and per traversal direction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PathMembers {
    pub all: Vec<usize>,
    pub forward: Vec<usize>,
    pub reverse: Vec<usize>,
}

/// Direction-less sensors land in both directional sets.
pub fn path_members(path: &SegmentPath, index: &SensorIndex) -> PathMembers {
    let mut m = PathMembers::default();
    for (&seg, &against_geometry) in path.segments.iter().zip(&path.reversed) {
        for &i in index.on_segment(seg) {
            m.all.push(i);
            match index.directions[i] {
                None => {
                    m.forward.push(i);
                    m.reverse.push(i);
                }
                Some(dir) => {
                    if (dir == TravelDirection::Along) != against_geometry {
                        m.forward.push(i);
                    } else {
                        m.reverse.push(i);
                    }
                }
            }
        }
    }
    for v in [&mut m.all, &mut m.forward, &mut m.reverse] {
        v.sort_unstable();
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{segment_network, RoadNetwork};

    fn two_parallel() -> Vec<Segment> {
        let net = RoadNetwork::from_polylines(vec![
            (
                "lo".into(),
                vec![LonLat::new(0.0, 0.0), LonLat::new(1e-3, 0.0)],
                Some(100.0),
                false,
            ),
            (
                "hi".into(),
                vec![LonLat::new(0.0, 2e-3), LonLat::new(1e-3, 2e-3)],
                Some(100.0),
                false,
            ),
        ])
        .unwrap();
        segment_network(&net, 100.0).unwrap()
    }

    #[test]
    fn on_segment_snaps_at_zero() {
        let segs = two_parallel();
        let s = snap_sensors(
            &[SensorPlacement::new("a", LonLat::new(5e-4, 0.0), None)],
            &segs,
            5e-4,
        );
        assert_eq!(s[0].snapped, Some(0));
        assert_eq!(s[0].snap_distance, 0.0);
    }

    #[test]
    fn beyond_tolerance_is_unsnapped() {
        let segs = two_parallel();
        let s = snap_sensors(
            &[SensorPlacement::new("a", LonLat::new(5e-4, -1e-3), None)],
            &segs,
            5e-4,
        );
        assert_eq!(s[0].snapped, None);
        assert!((s[0].snap_distance - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn equidistant_tie_goes_to_smaller_id() {
        let segs = two_parallel();
        // exactly half-way between the two parallel segments
        let p = LonLat::new(5e-4, 1e-3);
        assert_eq!(
            point_polyline_distance(p, &segs[0].geometry),
            point_polyline_distance(p, &segs[1].geometry)
        );
        let s = snap_sensors(&[SensorPlacement::new("a", p, None)], &segs, 1.0);
        assert_eq!(s[0].snapped, Some(0));
        let mut rev = segs.clone();
        rev.reverse();
        let s = snap_sensors(&[SensorPlacement::new("a", p, None)], &rev, 1.0);
        assert_eq!(s[0].snapped, Some(0));
    }

    #[test]
    fn snapping_is_idempotent_and_order_free() {
        let segs = two_parallel();
        let sensors: Vec<_> = (0..6)
            .map(|i| {
                SensorPlacement::new(
                    format!("s{i}"),
                    LonLat::new(i as f64 * 2e-4, i as f64 * 4e-4),
                    None,
                )
            })
            .collect();
        let once = snap_sensors(&sensors, &segs, 5e-4);
        assert_eq!(snap_sensors(&once, &segs, 5e-4), once);
        let mut shuffled = sensors.clone();
        shuffled.reverse();
        let mut again = snap_sensors(&shuffled, &segs, 5e-4);
        again.reverse();
        assert_eq!(again, once);
    }

    #[test]
    fn direction_parsing() {
        assert_eq!(
            TravelDirection::parse("forward"),
            Some(Some(TravelDirection::Along))
        );
        assert_eq!(
            TravelDirection::parse("-"),
            Some(Some(TravelDirection::Against))
        );
        assert_eq!(TravelDirection::parse(""), Some(None));
        assert_eq!(TravelDirection::parse("sideways"), None);
    }
}
