//! CSV input and output.
//!
//! Inputs are UTF-8 CSV with a header row and `.` decimal separators.
//! Numbers are written with Rust's shortest round-trip formatting, and
//! undefined values as `NA`, so identical runs produce identical bytes.

use std::fs::File;
use std::path::Path;

use palmpat::detections::{DetectionSet, TileBox, TileLayout};
use palmpat::{BBox, Point, PointPattern, Window};

use crate::error::{data, CliError, Result};

fn open(path: &Path) -> Result<csv::Reader<File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case(name))
        .ok_or_else(|| CliError::Data(format!("{}: missing column '{name}'", path.display())))
}

fn field(record: &csv::StringRecord, idx: usize, path: &Path) -> Result<f64> {
    let line = record.position().map_or(0, |p| p.line());
    let raw = record.get(idx).unwrap_or("");
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => data(format!(
            "{}: line {line}: '{raw}' is not a finite number",
            path.display()
        )),
    }
}

/// Reads an `x,y` file and divides every coordinate by `units_per_meter`.
pub fn read_points(path: &Path, units_per_meter: f64) -> Result<Vec<Point>> {
    let mut reader = open(path)?;
    let headers = reader.headers()?.clone();
    let (xi, yi) = (column(&headers, "x", path)?, column(&headers, "y", path)?);
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        points.push(Point::new(
            field(&record, xi, path)? / units_per_meter,
            field(&record, yi, path)? / units_per_meter,
        ));
    }
    if points.is_empty() {
        return data(format!("{}: no points", path.display()));
    }
    Ok(points)
}

/// Reads a points file into a pattern. Without an explicit window the
/// points' bounding box is used and a notice goes to standard error.
pub fn read_pattern(
    path: &Path,
    units_per_meter: f64,
    window: Option<Window>,
) -> Result<PointPattern> {
    let points = read_points(path, units_per_meter)?;
    let window = match window {
        Some(w) => Window::new(
            w.x_min() / units_per_meter,
            w.y_min() / units_per_meter,
            w.x_max() / units_per_meter,
            w.y_max() / units_per_meter,
        )?,
        None => {
            let w = Window::bounding(&points)?;
            eprintln!(
                "notice: no --window given, using the bounding box [{}, {}] x [{}, {}]",
                w.x_min(),
                w.x_max(),
                w.y_min(),
                w.y_max()
            );
            w
        }
    };
    Ok(PointPattern::new(window, points)?)
}

/// Reads detections. Tiled files carry `tile_row,tile_col` ahead of the box
/// columns; with `layout == None` the boxes are taken as global and tile
/// columns, if present, are ignored.
pub fn read_detections(path: &Path, layout: Option<TileLayout>) -> Result<DetectionSet> {
    let mut reader = open(path)?;
    let headers = reader.headers()?.clone();
    let box_cols = ["x_min", "y_min", "x_max", "y_max", "confidence"]
        .iter()
        .map(|c| column(&headers, c, path))
        .collect::<Result<Vec<_>>>()?;
    let tile_cols = match layout {
        Some(_) => Some((
            column(&headers, "tile_row", path)?,
            column(&headers, "tile_col", path)?,
        )),
        None => None,
    };
    let mut boxes = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        let v = box_cols
            .iter()
            .map(|&i| field(&record, i, path))
            .collect::<Result<Vec<_>>>()?;
        let bbox = BBox::new(v[0], v[1], v[2], v[3], v[4])
            .map_err(|e| CliError::Data(format!("{}: line {line}: {e}", path.display())))?;
        let (tile_row, tile_col) = match tile_cols {
            Some((ri, ci)) => {
                let index = |i: usize| {
                    record.get(i).unwrap_or("").parse::<u32>().map_err(|_| {
                        CliError::Data(format!(
                            "{}: line {line}: tile index must be a nonnegative integer",
                            path.display()
                        ))
                    })
                };
                (index(ri)?, index(ci)?)
            }
            None => (0, 0),
        };
        boxes.push(TileBox {
            tile_row,
            tile_col,
            bbox,
        });
    }
    Ok(match layout {
        Some(layout) => DetectionSet::tiled(layout, boxes)?,
        None => DetectionSet::global(boxes.into_iter().map(|b| b.bbox).collect()),
    })
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// Writes a header plus rows of already-formatted fields.
pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_points(path: &Path, points: &[Point]) -> Result<()> {
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| vec![p.x.to_string(), p.y.to_string()])
        .collect();
    write_csv(path, &["x".into(), "y".into()], &rows)
}
