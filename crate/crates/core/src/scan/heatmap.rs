//! Mean region score per grid cell or network segment.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{json, Value};

use super::metric::Score;
use super::space::Cover;
use crate::error::{Error, Result};
use crate::grid::PlanarGrid;
use crate::io::write_json;
use crate::network::{Segment, SegmentId};

pub enum HeatTarget<'a> {
    Grid(&'a PlanarGrid),
    Segments(&'a [Segment]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum HeatId {
    Cell { x: usize, y: usize },
    Segment(SegmentId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatCell {
    pub id: HeatId,
    pub mean_raw: f64,
    pub mean_log: f64,
    pub regions: usize,
}

#[derive(Default)]
struct Acc {
    raw: f64,
    log: f64,
    n: usize,
}

/// Averages scores over every region covering each cell or segment. Only
/// covered cells appear in the output; everything else is no-data.
pub fn heatmap<'a>(
    scores: impl IntoIterator<Item = (&'a Cover, Score)>,
    target: &HeatTarget<'_>,
) -> Result<Vec<HeatCell>> {
    let mut acc: BTreeMap<HeatId, Acc> = BTreeMap::new();
    let mut add = |id: HeatId, s: &Score| {
        let a = acc.entry(id).or_default();
        a.raw += s.raw;
        a.log += s.log;
        a.n += 1;
    };
    for (cover, s) in scores {
        match (cover, target) {
            (Cover::Rect { x0, x1, y0, y1 }, HeatTarget::Grid(g)) => {
                if *x1 >= g.n || *y1 >= g.n {
                    return Err(Error::InvalidInput(format!(
                        "rectangle {x0}-{x1}:{y0}-{y1} lies outside an {n}x{n} grid",
                        n = g.n
                    )));
                }
                for x in *x0..=*x1 {
                    for y in *y0..=*y1 {
                        add(HeatId::Cell { x, y }, &s);
                    }
                }
            }
            (Cover::Segments(ids), HeatTarget::Segments(segs)) => {
                for &id in ids {
                    if id as usize >= segs.len() {
                        return Err(Error::InvalidInput(format!("segment {id} is not part of the network")));
                    }
                    add(HeatId::Segment(id), &s);
                }
            }
            _ => {
                return Err(Error::InvalidInput(
                    "score regions do not match the heatmap target (grid rectangles need a grid, paths a network)".into(),
                ))
            }
        }
    }
    Ok(acc
        .into_iter()
        .map(|(id, a)| HeatCell {
            id,
            mean_raw: a.raw / a.n as f64,
            mean_log: a.log / a.n as f64,
            regions: a.n,
        })
        .collect())
}

fn number(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

/// Cell polygons or segment polylines with `mean_score` (null when the
/// mean saturates) and the always-finite `mean_log_score`.
pub fn heatmap_geojson(cells: &[HeatCell], target: &HeatTarget<'_>) -> Value {
    let features: Vec<Value> = cells
        .iter()
        .map(|c| {
            let (geometry, mut props) = match (c.id, target) {
                (HeatId::Cell { x, y }, HeatTarget::Grid(g)) => {
                    let b = g.cell_bounds(x, y);
                    (
                        json!({
                            "type": "Polygon",
                            "coordinates": [[
                                [b.min_lon, b.min_lat], [b.max_lon, b.min_lat],
                                [b.max_lon, b.max_lat], [b.min_lon, b.max_lat],
                                [b.min_lon, b.min_lat],
                            ]],
                        }),
                        json!({"cell_x": x, "cell_y": y}),
                    )
                }
                (HeatId::Segment(id), HeatTarget::Segments(segs)) => {
                    let s = &segs[id as usize];
                    let coords: Vec<Value> =
                        s.geometry.iter().map(|p| json!([p.lon, p.lat])).collect();
                    (
                        json!({"type": "LineString", "coordinates": coords}),
                        json!({"segment_id": id, "edge_id": s.edge_id}),
                    )
                }
                _ => unreachable!("heat cells are built against the same target"),
            };
            props["mean_score"] = number(c.mean_raw);
            props["mean_log_score"] = number(c.mean_log);
            props["regions"] = json!(c.regions);
            json!({"type": "Feature", "geometry": geometry, "properties": props})
        })
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}

pub fn write_heatmap_geojson(
    path: &Path,
    cells: &[HeatCell],
    target: &HeatTarget<'_>,
) -> Result<()> {
    write_json(path, &heatmap_geojson(cells, target))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::BBox;

    fn grid() -> PlanarGrid {
        PlanarGrid::new(
            BBox {
                min_lon: 0.0,
                min_lat: 0.0,
                max_lon: 1.0,
                max_lat: 1.0,
            },
            2,
        )
        .unwrap()
    }

    fn s(raw: f64) -> Score {
        Score { raw, log: raw.ln() }
    }

    #[test]
    fn single_cell_region() {
        let g = grid();
        let cover = Cover::Rect {
            x0: 1,
            x1: 1,
            y0: 0,
            y1: 0,
        };
        let cells = heatmap([(&cover, s(5.0))], &HeatTarget::Grid(&g)).unwrap();
        assert_eq!(cells.len(), 1);
        assert_eq!(cells[0].id, HeatId::Cell { x: 1, y: 0 });
        assert_eq!(cells[0].mean_raw, 5.0);
    }

    #[test]
    fn overlapping_regions_average() {
        let g = grid();
        let a = Cover::Rect {
            x0: 0,
            x1: 0,
            y0: 0,
            y1: 0,
        };
        let b = Cover::Rect {
            x0: 0,
            x1: 1,
            y0: 0,
            y1: 1,
        };
        let cells = heatmap([(&a, s(1.0)), (&b, s(3.0))], &HeatTarget::Grid(&g)).unwrap();
        assert_eq!(cells.len(), 4);
        assert_eq!(cells[0].mean_raw, 2.0);
        assert!(cells[1..].iter().all(|c| c.mean_raw == 3.0));
    }

    #[test]
    fn empty_scores_give_empty_collection() {
        let g = grid();
        let target = HeatTarget::Grid(&g);
        let cells = heatmap(std::iter::empty(), &target).unwrap();
        let v = heatmap_geojson(&cells, &target);
        assert_eq!(v["features"].as_array().unwrap().len(), 0);
    }

    #[test]
    fn saturated_mean_written_as_null() {
        let g = grid();
        let target = HeatTarget::Grid(&g);
        let a = Cover::Rect {
            x0: 0,
            x1: 0,
            y0: 0,
            y1: 0,
        };
        let cells = heatmap(
            [(
                &a,
                Score {
                    raw: f64::INFINITY,
                    log: 900.0,
                },
            )],
            &target,
        )
        .unwrap();
        let v = heatmap_geojson(&cells, &target);
        assert!(v["features"][0]["properties"]["mean_score"].is_null());
        assert_eq!(v["features"][0]["properties"]["mean_log_score"], 900.0);
    }

    #[test]
    fn mismatched_target_is_rejected() {
        let g = grid();
        let p = Cover::Segments(vec![0]);
        assert!(heatmap([(&p, s(2.0))], &HeatTarget::Grid(&g)).is_err());
    }
}
