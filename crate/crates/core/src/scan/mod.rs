//! Scan statistics over space-time regions: scoring, ranking, null
//! calibration and heatmaps.

mod engine;
mod heatmap;
mod io;
pub mod metric;
mod null;
mod space;

pub use engine::{
    compare_scores, from_fixed, scan, scan_top, to_fixed, top_region, RegionScore, ScanData,
    ScanParams,
};
pub use heatmap::{heatmap, heatmap_geojson, write_heatmap_geojson, HeatCell, HeatId, HeatTarget};
pub use io::{read_scores_csv, write_score_rows, write_scores_csv, ScoreRow, SCORES_HEADER};
pub use metric::{
    asym_score, ebp_score, log_likelihood_ratio, BoundMode, Metric, RegionAggregates, Score,
};
pub use null::{
    corrected_score, nearest_rank, score_from_raw, NullDistribution, ScoreScale,
    DEFAULT_PERCENTILE, MIN_NULL_SAMPLES,
};
pub use space::{path_key, Cover, Direction, ScanType, SearchSpace, SpatialUnit, WindowFamily};
