use std::io::Write;
use std::path::Path;

use serde_json::{json, Value};

use super::snap::{SensorPlacement, TravelDirection};
use super::RoadNetwork;
use crate::error::{Error, Result};
use crate::geo::LonLat;
use crate::io::{
    csv_writer, fmt_f64, geojson_features, json_line, read_json, write_atomic, write_err,
    write_json, CsvTable,
};

fn edge_id(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn oneway(v: Option<&Value>) -> bool {
    match v {
        Some(Value::Bool(b)) => *b,
        Some(Value::Number(n)) => n.as_f64().is_some_and(|x| x != 0.0),
        Some(Value::String(s)) => matches!(s.to_ascii_lowercase().as_str(), "yes" | "true" | "1"),
        _ => false,
    }
}

/// Reads a FeatureCollection of LineString features carrying `edge_id`
/// (and optionally `oneway`, `length_m`).
pub fn read_network_geojson(path: &Path) -> Result<RoadNetwork> {
    let root = read_json(path)?;
    let mut lines = Vec::new();
    for (i, (geom, props)) in geojson_features(path, &root)?.into_iter().enumerate() {
        if geom.get("type").and_then(Value::as_str) != Some("LineString") {
            return Err(Error::schema(
                path,
                0,
                0,
                format!("feature {i}: expected LineString geometry"),
            ));
        }
        let id = props.get("edge_id").and_then(edge_id).ok_or_else(|| {
            Error::schema(path, 0, 0, format!("feature {i}: missing edge_id property"))
        })?;
        let coords = json_line(path, geom.get("coordinates").unwrap_or(&Value::Null))?;
        let length = props.get("length_m").and_then(Value::as_f64);
        lines.push((id, coords, length, oneway(props.get("oneway"))));
    }
    RoadNetwork::from_polylines(lines)
}

/// Reads `edge_id,from_lon,from_lat,to_lon,to_lat,length_m`.
pub fn read_edge_csv(path: &Path) -> Result<RoadNetwork> {
    let mut table = CsvTable::open(
        path,
        &[
            &["edge_id"],
            &["from_lon"],
            &["from_lat"],
            &["to_lon"],
            &["to_lat"],
            &["length_m"],
        ],
        &[],
    )?;
    let mut lines = Vec::new();
    table.for_each(|row| {
        let a = LonLat::new(row.f64_at(1, "longitude")?, row.f64_at(2, "latitude")?);
        let b = LonLat::new(row.f64_at(3, "longitude")?, row.f64_at(4, "latitude")?);
        let len = row.f64_at(5, "length")?;
        if !(len > 0.0) {
            return Err(row.error(
                5,
                format!("edge {:?} has non-positive length", row.str_at(0)),
            ));
        }
        lines.push((row.str_at(0).to_string(), vec![a, b], Some(len), false));
        Ok(())
    })?;
    RoadNetwork::from_polylines(lines)
}

pub fn network_to_geojson(network: &RoadNetwork) -> Value {
    let features: Vec<Value> = network
        .edges()
        .iter()
        .map(|e| {
            json!({
                "type": "Feature",
                "properties": {"edge_id": e.id, "oneway": e.oneway, "length_m": e.length_m},
                "geometry": {
                    "type": "LineString",
                    "coordinates": e.geometry.iter().map(|p| json!([p.lon, p.lat])).collect::<Vec<_>>(),
                },
            })
        })
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}

pub fn write_network_geojson(path: &Path, network: &RoadNetwork) -> Result<()> {
    write_json(path, &network_to_geojson(network))
}

/// Reads `sensor_id,lon,lat[,direction]`.
pub fn read_sensors_csv(path: &Path) -> Result<Vec<SensorPlacement>> {
    let mut table = CsvTable::open(path, &[&["sensor_id"], &["lon"], &["lat"]], &["direction"])?;
    let mut sensors = Vec::new();
    let mut seen = std::collections::HashSet::new();
    table.for_each(|row| {
        let id = row.str_at(0).to_string();
        if id.is_empty() {
            return Err(row.error(0, "empty sensor_id"));
        }
        if !seen.insert(id.clone()) {
            return Err(row.error(0, format!("duplicate sensor_id {id:?}")));
        }
        let pos = LonLat::new(row.f64_at(1, "longitude")?, row.f64_at(2, "latitude")?);
        let direction = match row.opt_str("direction") {
            None => None,
            Some(s) => TravelDirection::parse(s)
                .ok_or_else(|| row.error(3, format!("invalid direction {s:?}")))?,
        };
        sensors.push(SensorPlacement::new(id, pos, direction));
        Ok(())
    })?;
    Ok(sensors)
}

pub fn write_sensors_csv(path: &Path, sensors: &[SensorPlacement]) -> Result<()> {
    let with_dir = sensors.iter().any(|s| s.direction.is_some());
    write_atomic(path, |w: &mut dyn Write| {
        let mut out = csv_writer(w);
        let e = write_err(path);
        if with_dir {
            out.write_record(["sensor_id", "lon", "lat", "direction"])
                .map_err(&e)?;
        } else {
            out.write_record(["sensor_id", "lon", "lat"]).map_err(&e)?;
        }
        for s in sensors {
            let mut rec = vec![s.id.clone(), fmt_f64(s.pos.lon), fmt_f64(s.pos.lat)];
            if with_dir {
                rec.push(s.direction.map_or("", TravelDirection::as_str).to_string());
            }
            out.write_record(&rec).map_err(&e)?;
        }
        out.flush().map_err(|err| Error::io(path, err))
    })
}
