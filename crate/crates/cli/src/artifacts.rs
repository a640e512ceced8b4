//! Artifact writers. Artifact bodies depend only on the inputs; wall-clock
//! data goes to a separate `run_info.json`.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use truncfit_core::density::density_curve;
use truncfit_core::{TruncatedDensity, SCHEMA_VERSION};

use crate::error::CliResult;

/// Shortest round-trip decimal, switching to exponent form for very small or large magnitudes.
pub fn fmt_num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || v.is_nan() || v.is_infinite() || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut body = serde_json::to_string_pretty(value).expect("artifact types serialize");
    body.push('\n');
    std::fs::write(path, body)?;
    Ok(())
}

pub fn coordinate_names(d: usize) -> Vec<String> {
    if d == 1 {
        vec!["x".into()]
    } else {
        (1..=d).map(|i| format!("x{i}")).collect()
    }
}

pub const CURVE_COLUMNS: [&str; 4] = ["pdf", "logpdf", "pdf_on_s", "logpdf_on_s"];

/// Writes one density on a grid, normalized on the cube (`pdf`) and on the
/// survival set (`pdf_on_s`, zero outside the set).
pub fn write_curve(
    path: &Path,
    on_cube: &TruncatedDensity,
    on_set: &TruncatedDensity,
    resolution: usize,
) -> CliResult<()> {
    let cube = density_curve(on_cube, resolution);
    let set = density_curve(on_set, resolution);
    let mut w = csv::Writer::from_path(path)?;
    let mut header = coordinate_names(on_cube.dim());
    header.extend(CURVE_COLUMNS.iter().map(|c| c.to_string()));
    w.write_record(&header)?;
    for (c, s) in cube.iter().zip(&set) {
        let mut row: Vec<String> = c.x.iter().map(|&v| fmt_num(v)).collect();
        row.extend([c.pdf, c.log_pdf, s.pdf, s.log_pdf].map(fmt_num));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
pub struct Series {
    pub file: String,
    pub column: String,
    pub label: String,
}

#[derive(Serialize)]
pub struct Plot {
    pub id: String,
    pub title: String,
    /// `line` for 1D curves, `heatmap` for 2D grids, `table` otherwise.
    pub kind: &'static str,
    pub x_columns: Vec<String>,
    pub y_label: String,
    pub series: Vec<Series>,
}

#[derive(Serialize)]
pub struct PlotManifest {
    pub schema_version: &'static str,
    pub plots: Vec<Plot>,
}

impl PlotManifest {
    pub fn new(plots: Vec<Plot>) -> Self {
        PlotManifest {
            schema_version: SCHEMA_VERSION,
            plots,
        }
    }
}

pub fn plot_kind(d: usize) -> &'static str {
    match d {
        1 => "line",
        2 => "heatmap",
        _ => "table",
    }
}

/// Non-reproducible facts about a run.
#[derive(Serialize)]
pub struct RunInfo {
    pub schema_version: &'static str,
    pub tool: &'static str,
    pub version: &'static str,
    pub command: Vec<String>,
    pub started_unix_ms: u128,
    pub elapsed_ms: u128,
    pub threads: usize,
    pub parallel: bool,
}

pub struct Clock {
    start: SystemTime,
}

impl Clock {
    pub fn start() -> Self {
        Clock {
            start: SystemTime::now(),
        }
    }

    pub fn finish(&self) -> RunInfo {
        let started = self
            .start
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0);
        RunInfo {
            schema_version: SCHEMA_VERSION,
            tool: env!("CARGO_BIN_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: std::env::args().collect(),
            started_unix_ms: started,
            elapsed_ms: self.start.elapsed().map(|d| d.as_millis()).unwrap_or(0),
            threads: truncfit_core::par::threads(),
            parallel: cfg!(feature = "parallel"),
        }
    }
}
