//! Spatial search units and time-window families.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geo::LonLat;
use crate::grid::{enumerate_rectangles, GridRectangle, PlanarGrid};
use crate::network::{
    path_members, CanonicalKey, SegmentId, SegmentPath, SensorIndex, SensorPlacement,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScanType {
    #[serde(rename = "PL")]
    Pl,
    #[serde(rename = "NET")]
    Net,
}

impl ScanType {
    pub fn as_str(self) -> &'static str {
        match self {
            ScanType::Pl => "PL",
            ScanType::Net => "NET",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "PL" | "PLANAR" => Some(ScanType::Pl),
            "NET" | "NETWORK" => Some(ScanType::Net),
            _ => None,
        }
    }
}

impl fmt::Display for ScanType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Traversal direction a score refers to. Grid rectangles are always
/// undirected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Undirected,
    Forward,
    Reverse,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Undirected => "undirected",
            Direction::Forward => "forward",
            Direction::Reverse => "reverse",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "undirected" | "" => Some(Direction::Undirected),
            "forward" => Some(Direction::Forward),
            "reverse" => Some(Direction::Reverse),
            _ => None,
        }
    }
}

/// Cells or segments a spatial unit is drawn over.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cover {
    Rect {
        x0: usize,
        x1: usize,
        y0: usize,
        y1: usize,
    },
    Segments(Vec<SegmentId>),
}

impl Cover {
    /// Recovers the cover from a region key as written in score files.
    pub fn from_key(key: &str) -> Option<Cover> {
        if let Some((x0, x1, y0, y1)) = GridRectangle::parse_key(key) {
            return (x0 <= x1 && y0 <= y1).then_some(Cover::Rect { x0, x1, y0, y1 });
        }
        let ids: CanonicalKey = key.strip_prefix("path:")?.parse().ok()?;
        Some(Cover::Segments(ids.0))
    }
}

/// Spatial part of a search region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialUnit {
    pub key: String,
    /// Cell count for rectangles, metres for paths.
    pub extent: f64,
    pub direction: Direction,
    /// Indices into [`SearchSpace::sensor_ids`], sorted.
    pub members: Vec<usize>,
    pub cover: Cover,
}

pub fn path_key(key: &CanonicalKey) -> String {
    format!("path:{key}")
}

/// Every spatial unit of one scan type over a fixed sensor list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub scan_type: ScanType,
    pub sensor_ids: Vec<String>,
    pub units: Vec<SpatialUnit>,
}

impl SearchSpace {
    /// All whole-cell rectangles holding at least one sensor. Sensors
    /// outside the grid are dropped (and counted in the log by
    /// [`PlanarGrid::assign`]).
    pub fn planar(
        grid: &PlanarGrid,
        sensor_ids: Vec<String>,
        positions: &[LonLat],
        max_side: Option<usize>,
    ) -> Self {
        assert_eq!(sensor_ids.len(), positions.len());
        let cells = grid.assign(positions);
        let units = enumerate_rectangles(grid, &cells, max_side)
            .into_iter()
            .filter(|r| !r.members.is_empty())
            .map(|r| SpatialUnit {
                key: r.key(),
                extent: r.cell_count() as f64,
                direction: Direction::Undirected,
                cover: Cover::Rect {
                    x0: r.x0,
                    x1: r.x1,
                    y0: r.y0,
                    y1: r.y1,
                },
                members: r.members,
            })
            .collect();
        Self {
            scan_type: ScanType::Pl,
            sensor_ids,
            units,
        }
    }

    /// One undirected unit per path with snapped sensors; when any sensor
    /// carries a travel direction, forward and reverse units are added too.
    pub fn network(paths: &[SegmentPath], sensors: &[SensorPlacement], n_segments: usize) -> Self {
        let index = SensorIndex::new(sensors, n_segments);
        let directed = index.has_directions();
        let mut units = Vec::new();
        for p in paths {
            let m = path_members(p, &index);
            if m.all.is_empty() {
                continue;
            }
            let key = path_key(&p.key);
            let cover = Cover::Segments(p.key.0.clone());
            let mut push = |direction, members: Vec<usize>| {
                if !members.is_empty() {
                    units.push(SpatialUnit {
                        key: key.clone(),
                        extent: p.length_m,
                        direction,
                        members,
                        cover: cover.clone(),
                    });
                }
            };
            push(Direction::Undirected, m.all);
            if directed {
                push(Direction::Forward, m.forward);
                push(Direction::Reverse, m.reverse);
            }
        }
        Self {
            scan_type: ScanType::Net,
            sensor_ids: sensors.iter().map(|s| s.id.clone()).collect(),
            units,
        }
    }
}

/// Time windows, as inclusive hour offsets `(first, last)` into a scan
/// interval of `max_len` hours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowFamily {
    pub max_len: usize,
    /// Keep only lengths `max_len - j·stride`.
    pub stride: usize,
    /// Also score windows that end before the latest hour.
    pub all_windows: bool,
}

impl WindowFamily {
    pub fn trailing(max_len: usize) -> Self {
        Self {
            max_len,
            stride: 1,
            all_windows: false,
        }
    }

    pub fn windows(&self) -> Vec<(usize, usize)> {
        let w = self.max_len;
        let stride = self.stride.max(1);
        let lengths: Vec<usize> = (1..=w).filter(|l| (w - l) % stride == 0).collect();
        let ends: Vec<usize> = if self.all_windows {
            (0..w).rev().collect()
        } else {
            w.checked_sub(1).into_iter().collect()
        };
        let mut out = Vec::new();
        for &end in &ends {
            for &len in &lengths {
                if len <= end + 1 {
                    out.push((end + 1 - len, end));
                }
            }
        }
        out.sort_unstable();
        out
    }
}
