//! File plumbing shared by every artifact reader and writer.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, TimeZone, Utc};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geo::{Boundary, LonLat, Polygon};

/// Writes `path` via a temporary sibling file that is renamed into place
/// only once `body` succeeds.
pub fn write_atomic<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let file_name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{file_name}.{}.tmp", std::process::id()));
    let result = (|| {
        let file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        let mut w = BufWriter::new(file);
        body(&mut w)?;
        w.flush().map_err(|e| Error::io(&tmp, e))?;
        w.into_inner()
            .map_err(|e| Error::io(&tmp, e.into_error()))?
            .sync_all()
            .map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

pub(crate) fn csv_writer(w: &mut dyn Write) -> csv::Writer<&mut dyn Write> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> Error {
    let (line, column) = e.position().map_or((0, 0), |p| (p.line(), 0));
    Error::schema(path, line, column, e.to_string())
}

pub(crate) fn write_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::InvalidInput(format!("{other:?}")),
    }
}

/// Row-oriented CSV reader that checks the header and reports schema
/// violations with file, line and column.
pub(crate) struct CsvTable {
    path: std::path::PathBuf,
    reader: csv::Reader<fs::File>,
    columns: Vec<String>,
}

pub(crate) struct Row<'a> {
    path: &'a Path,
    line: u64,
    record: csv::StringRecord,
    columns: &'a [String],
}

impl CsvTable {
    /// Opens `path` and requires the header to start with `required` columns;
    /// `optional` columns may follow in order.
    pub fn open(path: &Path, required: &[&[&str]], optional: &[&str]) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .flexible(false)
            .trim(csv::Trim::All)
            .from_reader(file);
        let header = reader.headers().map_err(|e| csv_err(path, e))?.clone();
        let columns: Vec<String> = header.iter().map(str::to_string).collect();
        for (i, names) in required.iter().enumerate() {
            match columns.get(i) {
                Some(c) if names.contains(&c.as_str()) => {}
                found => {
                    return Err(Error::schema(
                        path,
                        1,
                        i + 1,
                        format!(
                            "expected column {:?}, found {:?}",
                            names[0],
                            found.map(String::as_str).unwrap_or("")
                        ),
                    ))
                }
            }
        }
        for (j, c) in columns.iter().enumerate().skip(required.len()) {
            if optional.get(j - required.len()) != Some(&c.as_str()) {
                return Err(Error::schema(
                    path,
                    1,
                    j + 1,
                    format!("unexpected column {c:?}"),
                ));
            }
        }
        Ok(Self {
            path: path.to_path_buf(),
            reader,
            columns,
        })
    }

    pub fn for_each<F>(&mut self, mut f: F) -> Result<()>
    where
        F: FnMut(&Row<'_>) -> Result<()>,
    {
        let mut record = csv::StringRecord::new();
        loop {
            match self.reader.read_record(&mut record) {
                Ok(false) => return Ok(()),
                Ok(true) => {
                    let line = record.position().map_or(0, |p| p.line());
                    let row = Row {
                        path: &self.path,
                        line,
                        record: record.clone(),
                        columns: &self.columns,
                    };
                    f(&row)?;
                }
                Err(e) => return Err(csv_err(&self.path, e)),
            }
        }
    }
}

impl Row<'_> {
    fn index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn error(&self, column: usize, msg: impl Into<String>) -> Error {
        Error::schema(self.path, self.line, column + 1, msg)
    }

    pub fn str_at(&self, column: usize) -> &str {
        self.record.get(column).unwrap_or("")
    }

    pub fn opt_str(&self, name: &str) -> Option<&str> {
        self.index(name).and_then(|i| self.record.get(i))
    }

    pub fn parse_at<T: std::str::FromStr>(&self, column: usize, what: &str) -> Result<T> {
        let s = self.str_at(column);
        s.parse()
            .map_err(|_| self.error(column, format!("invalid {what} {s:?}")))
    }

    pub fn f64_at(&self, column: usize, what: &str) -> Result<f64> {
        let v: f64 = self.parse_at(column, what)?;
        if !v.is_finite() {
            return Err(self.error(column, format!("non-finite {what}")));
        }
        Ok(v)
    }

    pub fn hour_at(&self, column: usize) -> Result<i64> {
        parse_hour(self.str_at(column)).ok_or_else(|| {
            self.error(
                column,
                format!("invalid timestamp {:?}", self.str_at(column)),
            )
        })
    }
}

/// Parses an ISO-8601 timestamp into whole hours since the Unix epoch.
/// Minutes and seconds must be zero.
pub fn parse_hour(s: &str) -> Option<i64> {
    let dt: DateTime<Utc> = DateTime::parse_from_rfc3339(s)
        .map(|d| d.with_timezone(&Utc))
        .or_else(|_| {
            NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S").map(|n| Utc.from_utc_datetime(&n))
        })
        .or_else(|_| {
            NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S").map(|n| Utc.from_utc_datetime(&n))
        })
        .ok()?;
    let secs = dt.timestamp();
    (secs.rem_euclid(3600) == 0).then(|| secs.div_euclid(3600))
}

pub fn format_hour(hour: i64) -> String {
    Utc.timestamp_opt(hour * 3600, 0)
        .single()
        .map(|d| d.format("%Y-%m-%dT%H:%M:%SZ").to_string())
        .unwrap_or_default()
}

/// Shortest decimal that round-trips to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        let mut s = format!("{v:?}");
        if s.ends_with(".0") {
            s.truncate(s.len() - 2);
        }
        s
    }
}

pub fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::schema(path, e.line() as u64, e.column(), e.to_string()))
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))
    })
}

/// Flattens a FeatureCollection, Feature or bare geometry into
/// `(geometry, properties)` pairs.
pub(crate) fn geojson_features(path: &Path, root: &Value) -> Result<Vec<(Value, Value)>> {
    let kind = root.get("type").and_then(Value::as_str).unwrap_or("");
    match kind {
        "FeatureCollection" => root
            .get("features")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::schema(path, 0, 0, "FeatureCollection without features array"))?
            .iter()
            .map(|f| {
                let g = f.get("geometry").cloned().unwrap_or(Value::Null);
                let p = f.get("properties").cloned().unwrap_or(Value::Null);
                Ok((g, p))
            })
            .collect(),
        "Feature" => Ok(vec![(
            root.get("geometry").cloned().unwrap_or(Value::Null),
            root.get("properties").cloned().unwrap_or(Value::Null),
        )]),
        "" => Err(Error::schema(path, 0, 0, "GeoJSON object without type")),
        _ => Ok(vec![(root.clone(), Value::Null)]),
    }
}

pub(crate) fn json_position(path: &Path, v: &Value) -> Result<LonLat> {
    match v.as_array().map(Vec::as_slice) {
        Some([lon, lat, ..]) => match (lon.as_f64(), lat.as_f64()) {
            (Some(lon), Some(lat)) => Ok(LonLat::new(lon, lat)),
            _ => Err(Error::schema(path, 0, 0, format!("invalid position {v}"))),
        },
        _ => Err(Error::schema(path, 0, 0, format!("invalid position {v}"))),
    }
}

pub(crate) fn json_line(path: &Path, v: &Value) -> Result<Vec<LonLat>> {
    v.as_array()
        .ok_or_else(|| Error::schema(path, 0, 0, "coordinates must be an array"))?
        .iter()
        .map(|p| json_position(path, p))
        .collect()
}

fn json_polygon(path: &Path, v: &Value) -> Result<Polygon> {
    let rings = v.as_array().ok_or_else(|| {
        Error::schema(path, 0, 0, "polygon coordinates must be an array of rings")
    })?;
    let mut rings = rings.iter().map(|r| json_line(path, r));
    let exterior = rings
        .next()
        .ok_or_else(|| Error::schema(path, 0, 0, "polygon without exterior ring"))??;
    Ok(Polygon {
        exterior,
        holes: rings.collect::<Result<_>>()?,
    })
}

/// Reads a boundary from GeoJSON Polygon / MultiPolygon geometries.
pub fn read_boundary_geojson(path: &Path) -> Result<Boundary> {
    let root = read_json(path)?;
    let mut polygons = Vec::new();
    for (geom, _) in geojson_features(path, &root)? {
        let coords = geom.get("coordinates").cloned().unwrap_or(Value::Null);
        match geom.get("type").and_then(Value::as_str) {
            Some("Polygon") => polygons.push(json_polygon(path, &coords)?),
            Some("MultiPolygon") => {
                for p in coords.as_array().into_iter().flatten() {
                    polygons.push(json_polygon(path, p)?);
                }
            }
            other => {
                return Err(Error::schema(
                    path,
                    0,
                    0,
                    format!("expected Polygon or MultiPolygon geometry, found {other:?}"),
                ))
            }
        }
    }
    if polygons.is_empty() {
        return Err(Error::schema(path, 0, 0, "boundary contains no polygons"));
    }
    Ok(Boundary { polygons })
}

pub fn boundary_to_geojson(boundary: &Boundary) -> Value {
    let ring = |r: &[LonLat]| {
        Value::Array(
            r.iter()
                .map(|p| serde_json::json!([p.lon, p.lat]))
                .collect(),
        )
    };
    let polys: Vec<Value> = boundary
        .polygons
        .iter()
        .map(|p| {
            let mut rings = vec![ring(&p.exterior)];
            rings.extend(p.holes.iter().map(|h| ring(h)));
            Value::Array(rings)
        })
        .collect();
    serde_json::json!({
        "type": "FeatureCollection",
        "features": [{
            "type": "Feature",
            "properties": {},
            "geometry": {"type": "MultiPolygon", "coordinates": polys},
        }],
    })
}

pub fn write_boundary_geojson(path: &Path, boundary: &Boundary) -> Result<()> {
    write_json(path, &boundary_to_geojson(boundary))
}
