//! Regular planar grid over the bounding box of a study area, and the
//! rectangular search regions made of whole grid cells.

use std::io::Write;
use std::path::Path;

use log::info;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{BBox, Boundary, LonLat};
use crate::io::{csv_writer, fmt_f64, write_atomic, write_err};

pub const DEFAULT_RESOLUTION: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanarGrid {
    pub bbox: BBox,
    pub n: usize,
    pub lon_edges: Vec<f64>,
    pub lat_edges: Vec<f64>,
}

/// Grid of `n × n` equal cells over the boundary's bounding box.
pub fn build_grid(boundary: &Boundary, n: usize) -> Result<PlanarGrid> {
    let bbox = boundary
        .bbox()
        .ok_or_else(|| Error::Grid("boundary has no vertices".into()))?;
    PlanarGrid::new(bbox, n)
}

impl PlanarGrid {
    pub fn new(bbox: BBox, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Grid("resolution must be at least 1".into()));
        }
        if !(bbox.width() > 0.0 && bbox.height() > 0.0) {
            return Err(Error::Grid(format!(
                "degenerate bounding box {:.6}x{:.6} degrees",
                bbox.width(),
                bbox.height()
            )));
        }
        let edges = |lo: f64, hi: f64| -> Vec<f64> {
            (0..=n)
                .map(|i| {
                    if i == n {
                        hi
                    } else {
                        lo + (hi - lo) * i as f64 / n as f64
                    }
                })
                .collect()
        };
        Ok(Self {
            lon_edges: edges(bbox.min_lon, bbox.max_lon),
            lat_edges: edges(bbox.min_lat, bbox.max_lat),
            bbox,
            n,
        })
    }

    pub fn cell_count(&self) -> usize {
        self.n * self.n
    }

    /// Cell containing `p`: cells are half-open `[lo, hi)` except the last
    /// one along each axis, which is closed.
    pub fn cell_of(&self, p: LonLat) -> Option<(usize, usize)> {
        Some((
            axis_cell(&self.lon_edges, p.lon)?,
            axis_cell(&self.lat_edges, p.lat)?,
        ))
    }

    pub fn cell_bounds(&self, x: usize, y: usize) -> BBox {
        BBox {
            min_lon: self.lon_edges[x],
            max_lon: self.lon_edges[x + 1],
            min_lat: self.lat_edges[y],
            max_lat: self.lat_edges[y + 1],
        }
    }

    /// Cell per sensor; sensors outside the box map to `None` and are counted in the log.
    pub fn assign<'a>(
        &self,
        positions: impl IntoIterator<Item = &'a LonLat>,
    ) -> Vec<Option<(usize, usize)>> {
        let cells: Vec<_> = positions.into_iter().map(|p| self.cell_of(*p)).collect();
        let outside = cells.iter().filter(|c| c.is_none()).count();
        if outside > 0 {
            info!("{outside} sensors lie outside the grid bounding box and are excluded from planar scans");
        }
        cells
    }

    /// CSV of cell boundaries: `cell_x,cell_y,min_lon,min_lat,max_lon,max_lat`.
    pub fn write_cells_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, |w: &mut dyn Write| {
            let e = write_err(path);
            let mut out = csv_writer(w);
            out.write_record([
                "cell_x", "cell_y", "min_lon", "min_lat", "max_lon", "max_lat",
            ])
            .map_err(&e)?;
            for y in 0..self.n {
                for x in 0..self.n {
                    let b = self.cell_bounds(x, y);
                    out.write_record([
                        x.to_string(),
                        y.to_string(),
                        fmt_f64(b.min_lon),
                        fmt_f64(b.min_lat),
                        fmt_f64(b.max_lon),
                        fmt_f64(b.max_lat),
                    ])
                    .map_err(&e)?;
                }
            }
            out.flush().map_err(|err| Error::io(path, err))
        })
    }
}

fn axis_cell(edges: &[f64], v: f64) -> Option<usize> {
    let n = edges.len() - 1;
    if !(v >= edges[0] && v <= edges[n]) {
        return None;
    }
    // number of interior edges <= v
    let i = edges[1..n].partition_point(|&e| e <= v);
    Some(i)
}

/// Inclusive cell-index rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridRectangle {
    pub x0: usize,
    pub x1: usize,
    pub y0: usize,
    pub y1: usize,
    pub members: Vec<usize>,
}

impl GridRectangle {
    pub fn key(&self) -> String {
        format!("rect:{}-{}:{}-{}", self.x0, self.x1, self.y0, self.y1)
    }

    pub fn parse_key(key: &str) -> Option<(usize, usize, usize, usize)> {
        let rest = key.strip_prefix("rect:")?;
        let (xs, ys) = rest.split_once(':')?;
        let (x0, x1) = xs.split_once('-')?;
        let (y0, y1) = ys.split_once('-')?;
        Some((
            x0.parse().ok()?,
            x1.parse().ok()?,
            y0.parse().ok()?,
            y1.parse().ok()?,
        ))
    }

    pub fn cell_count(&self) -> usize {
        (self.x1 - self.x0 + 1) * (self.y1 - self.y0 + 1)
    }

    pub fn covers(&self, x: usize, y: usize) -> bool {
        (self.x0..=self.x1).contains(&x) && (self.y0..=self.y1).contains(&y)
    }
}

/// All `(N(N+1)/2)²` whole-cell rectangles with their member sensors, in
/// `(x0, x1, y0, y1)` order. `max_side` limits the width and height in cells.
pub fn enumerate_rectangles(
    grid: &PlanarGrid,
    cells: &[Option<(usize, usize)>],
    max_side: Option<usize>,
) -> Vec<GridRectangle> {
    let n = grid.n;
    let max_side = max_side.unwrap_or(n).max(1);
    let mut per_cell: Vec<Vec<usize>> = vec![Vec::new(); n * n];
    for (i, c) in cells.iter().enumerate() {
        if let Some((x, y)) = c {
            per_cell[y * n + x].push(i);
        }
    }
    let mut rects = Vec::new();
    for x0 in 0..n {
        for x1 in x0..n.min(x0 + max_side) {
            for y0 in 0..n {
                for y1 in y0..n.min(y0 + max_side) {
                    let mut members: Vec<usize> = (x0..=x1)
                        .flat_map(|x| (y0..=y1).map(move |y| (x, y)))
                        .flat_map(|(x, y)| per_cell[y * n + x].iter().copied())
                        .collect();
                    members.sort_unstable();
                    rects.push(GridRectangle {
                        x0,
                        x1,
                        y0,
                        y1,
                        members,
                    });
                }
            }
        }
    }
    rects
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(n: usize) -> PlanarGrid {
        PlanarGrid::new(
            BBox {
                min_lon: 0.0,
                min_lat: 0.0,
                max_lon: 1.0,
                max_lat: 1.0,
            },
            n,
        )
        .unwrap()
    }

    #[test]
    fn unit_square_halves() {
        let g = unit(2);
        assert_eq!(g.lon_edges, vec![0.0, 0.5, 1.0]);
        assert_eq!(g.lat_edges, vec![0.0, 0.5, 1.0]);
        assert_eq!(g.cell_count(), 4);
    }

    #[test]
    fn shared_corner_goes_to_larger_indices() {
        let g = unit(2);
        assert_eq!(g.cell_of(LonLat::new(0.5, 0.5)), Some((1, 1)));
        assert_eq!(g.cell_of(LonLat::new(1.0, 1.0)), Some((1, 1)));
        assert_eq!(g.cell_of(LonLat::new(0.0, 0.0)), Some((0, 0)));
        assert_eq!(g.cell_of(LonLat::new(1.0001, 0.5)), None);
    }

    #[test]
    fn westminster_box_has_64_cells() {
        let boundary = Boundary::rectangle(BBox {
            min_lon: -0.2160,
            min_lat: 51.4838,
            max_lon: -0.1115,
            max_lat: 51.5397,
        });
        let g = build_grid(&boundary, 8).unwrap();
        assert_eq!(g.cell_count(), 64);
        assert_eq!(enumerate_rectangles(&g, &[], None).len(), 1296);
    }

    #[test]
    fn degenerate_boundary_rejected() {
        let b = Boundary::rectangle(BBox {
            min_lon: 0.0,
            min_lat: 0.0,
            max_lon: 1.0,
            max_lat: 0.0,
        });
        assert!(build_grid(&b, 4).is_err());
        assert!(PlanarGrid::new(unit(1).bbox, 0).is_err());
    }

    #[test]
    fn counts_match_brute_force() {
        for n in 1..=6 {
            let g = unit(n);
            let rects = enumerate_rectangles(&g, &[], None);
            let mut brute = 0;
            for x0 in 0..n {
                for x1 in 0..n {
                    for y0 in 0..n {
                        for y1 in 0..n {
                            if x0 <= x1 && y0 <= y1 {
                                brute += 1;
                            }
                        }
                    }
                }
            }
            assert_eq!(rects.len(), brute);
            assert_eq!(rects.len(), (n * (n + 1) / 2).pow(2));
        }
        assert_eq!(enumerate_rectangles(&unit(2), &[], None).len(), 9);
    }

    #[test]
    fn single_cell_grid_holds_everything_inside() {
        let g = unit(1);
        let pts = [
            LonLat::new(0.2, 0.3),
            LonLat::new(2.0, 0.0),
            LonLat::new(1.0, 1.0),
        ];
        let rects = enumerate_rectangles(&g, &g.assign(&pts), None);
        assert_eq!(rects.len(), 1);
        assert_eq!(rects[0].members, vec![0, 2]);
    }

    #[test]
    fn max_side_limits_rectangles() {
        let g = unit(4);
        let rects = enumerate_rectangles(&g, &[], Some(1));
        assert_eq!(rects.len(), 16);
        assert!(rects.iter().all(|r| r.cell_count() == 1));
    }

    #[test]
    fn key_round_trip() {
        let r = GridRectangle {
            x0: 1,
            x1: 3,
            y0: 0,
            y1: 7,
            members: vec![],
        };
        assert_eq!(GridRectangle::parse_key(&r.key()), Some((1, 3, 0, 7)));
    }

    proptest! {
        #[test]
        fn membership_is_consistent(n in 1usize..6, pts in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 0..25)) {
            let g = unit(n);
            let pts: Vec<_> = pts.into_iter().map(|(x, y)| LonLat::new(x, y)).collect();
            let rects = enumerate_rectangles(&g, &g.assign(&pts), None);
            let full = rects.iter().find(|r| r.x0 == 0 && r.y0 == 0 && r.x1 == n - 1 && r.y1 == n - 1).unwrap();
            prop_assert_eq!(&full.members, &(0..pts.len()).collect::<Vec<_>>());
            for i in 0..pts.len() {
                let singles = rects.iter().filter(|r| r.cell_count() == 1 && r.members.contains(&i)).count();
                prop_assert_eq!(singles, 1);
            }
            for a in &rects {
                for b in &rects {
                    if b.x0 <= a.x0 && a.x1 <= b.x1 && b.y0 <= a.y0 && a.y1 <= b.y1 {
                        prop_assert!(a.members.iter().all(|m| b.members.contains(m)));
                    }
                }
            }
        }
    }
}
