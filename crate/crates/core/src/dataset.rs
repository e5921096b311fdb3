//! Observation tables and their CSV form.
//!
//! Input files need a header with `lat`, `lon`, `x`, `y` columns (any order);
//! an `id` column is carried through when present. Lines starting with `#`
//! are comments.

use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{GimbalError, Result};
use crate::geo::GeoPoint;

pub const DATASET_SCHEMA: &str = "gimbal.dataset.v1";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    pub points: Vec<GeoPoint>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub ids: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(points: Vec<GeoPoint>, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if points.len() != x.len() || points.len() != y.len() {
            return Err(GimbalError::DimensionMismatch(format!(
                "{} points, {} covariates, {} responses",
                points.len(),
                x.len(),
                y.len()
            )));
        }
        Ok(Self { points, x, y, ids: None })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn id(&self, i: usize) -> String {
        self.ids.as_ref().map_or_else(|| i.to_string(), |ids| ids[i].clone())
    }

    /// Rows selected by `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            x: indices.iter().map(|&i| self.x[i]).collect(),
            y: indices.iter().map(|&i| self.y[i]).collect(),
            ids: self.ids.as_ref().map(|ids| indices.iter().map(|&i| ids[i].clone()).collect()),
        }
    }

    pub fn read_csv(path: &Path) -> Result<Dataset> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(file, path)
    }

    pub fn from_reader<R: Read>(reader: R, path: &Path) -> Result<Dataset> {
        Self::parse(reader, path, true)
    }

    /// Read a table of prediction targets; the `y` column may be absent, in
    /// which case responses are NaN.
    pub fn read_targets_csv(path: &Path) -> Result<Dataset> {
        let file = std::fs::File::open(path)?;
        Self::parse(file, path, false)
    }

    fn parse<R: Read>(reader: R, path: &Path, require_y: bool) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let column = |name: &str| -> Result<usize> {
            headers.iter().position(|h| h == name).ok_or_else(|| GimbalError::MissingColumn {
                path: path.to_path_buf(),
                column: name.to_string(),
            })
        };
        let (c_lat, c_lon, c_x) = (column("lat")?, column("lon")?, column("x")?);
        let c_y = if require_y { Some(column("y")?) } else { headers.iter().position(|h| h == "y") };
        let c_id = headers.iter().position(|h| h == "id");

        let mut ds = Dataset {
            points: Vec::new(),
            x: Vec::new(),
            y: Vec::new(),
            ids: c_id.map(|_| Vec::new()),
        };
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            // 1-based data row number, header excluded
            let row = row + 1;
            let bad = |message: String| GimbalError::Dataset { path: path.to_path_buf(), row, message };
            let num = |c: usize, name: &str| -> Result<f64> {
                let raw = rec.get(c).unwrap_or("");
                match raw.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(bad(format!("column `{name}` is not a finite number: `{raw}`"))),
                }
            };
            let (lat, lon) = (num(c_lat, "lat")?, num(c_lon, "lon")?);
            let point = GeoPoint::new(lat, lon).map_err(|e| bad(e.to_string()))?;
            ds.points.push(point);
            ds.x.push(num(c_x, "x")?);
            ds.y.push(match c_y {
                Some(c) => num(c, "y")?,
                None => f64::NAN,
            });
            if let (Some(ids), Some(c)) = (ds.ids.as_mut(), c_id) {
                ids.push(rec.get(c).unwrap_or("").to_string());
            }
        }
        Ok(ds)
    }

    /// Write the table with an optional extra column (e.g. the true coefficient).
    pub fn write_csv<W: Write>(&self, writer: W, extra: Option<(&str, &[f64])>) -> Result<()> {
        let mut w = writer;
        writeln!(w, "# schema: {DATASET_SCHEMA}")?;
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["id", "lat", "lon", "x", "y"];
        if let Some((name, _)) = extra {
            header.push(name);
        }
        out.write_record(&header)?;
        for i in 0..self.len() {
            let mut row = vec![
                self.id(i),
                self.points[i].lat.to_string(),
                self.points[i].lon.to_string(),
                self.x[i].to_string(),
                self.y[i].to_string(),
            ];
            if let Some((_, values)) = extra {
                row.push(values[i].to_string());
            }
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}
