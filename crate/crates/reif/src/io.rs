//! Point-cloud, form and report files.
//!
//! Clouds are read from CSV (one point per row, optional header, `#`
//! comments) or JSON (an array of points, or `{"points": [...], "k": k}`).

use std::fs;
use std::path::Path;

use reif_core::calibration::CalibrationForm;
use reif_core::Point;
use serde::Serialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone)]
pub struct LoadedCloud {
    pub points: Vec<Point>,
    /// Target dimension stored alongside the points, if any.
    pub k: Option<usize>,
}

pub fn read_cloud(path: &Path) -> Result<LoadedCloud> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) || text.trim_start().starts_with(['[', '{']);
    let cloud = if is_json { parse_json_cloud(&text) } else { parse_csv_cloud(&text) }.map_err(|e| CliError::input(path, e))?;
    if cloud.points.is_empty() {
        return Err(CliError::input(path, "no points"));
    }
    let n = cloud.points[0].dim();
    if let Some(i) = cloud.points.iter().position(|p| p.dim() != n) {
        return Err(CliError::input(path, format!("point {i} has {} coordinates, expected {n}", cloud.points[i].dim())));
    }
    Ok(cloud)
}

fn parse_csv_cloud(text: &str) -> std::result::Result<LoadedCloud, String> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).comment(Some(b'#')).trim(csv::Trim::All).flexible(true).from_reader(text.as_bytes());
    let mut points = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) => points.push(Point::new(v)),
            Err(_) if row == 0 => continue,
            Err(e) => return Err(format!("row {}: {e}", row + 1)),
        }
    }
    Ok(LoadedCloud { points, k: None })
}

#[derive(serde::Deserialize)]
#[serde(untagged)]
enum JsonCloud {
    Bare(Vec<Vec<f64>>),
    Tagged { points: Vec<Vec<f64>>, k: Option<usize> },
}

fn parse_json_cloud(text: &str) -> std::result::Result<LoadedCloud, String> {
    let parsed: JsonCloud = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let (raw, k) = match parsed {
        JsonCloud::Bare(p) => (p, None),
        JsonCloud::Tagged { points, k } => (points, k),
    };
    Ok(LoadedCloud { points: raw.into_iter().map(Point::new).collect(), k })
}

pub fn write_cloud_csv(path: &Path, points: &[Point]) -> Result<()> {
    let rows = points.iter().map(|p| p.iter().map(|x| x.to_string()).collect());
    let n = points.first().map_or(0, |p| p.dim());
    let header: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    write_csv(path, &header, rows)
}

/// Calibration form from JSON, normalized.
pub fn read_form(path: &Path) -> Result<CalibrationForm> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(path, e))?;
    let mut form: CalibrationForm = serde_json::from_str(&text).map_err(|e| CliError::input(path, e))?;
    form.normalize().map_err(|e| CliError::input(path, e))?;
    Ok(form)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Failed(e.to_string()))?;
    s.push('\n');
    fs::write(path, s).map_err(|source| CliError::Output { path: path.to_path_buf(), source })
}

pub fn write_csv<I>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let out = |source: std::io::Error| CliError::Output { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(|e| out(e.into()))?;
    w.write_record(header).map_err(|e| out(e.into()))?;
    for row in rows {
        w.write_record(&row).map_err(|e| out(e.into()))?;
    }
    w.flush().map_err(out)
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| CliError::Output { path: path.to_path_buf(), source })
}

/// Shortest round-trip decimal; empty for missing values.
pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}
