//! CSV and JSON serialization. Every writer renders into a string first and
//! writes the file in one call, so output order never depends on scheduling.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use dpd_core::analysis::ExperimentReport;
use dpd_core::{MeanFieldModel, MeanFieldState, Scale, Snapshot, Wealth};
use serde::Serialize;

pub const SNAPSHOT_HEADER: &str = "time,particle_id,position,wealth_num,wealth_den,strategy,alive";
pub const MEANFIELD_HEADER: &str = "time,wealth_num,wealth_den,strategy,mass";

/// An IO failure on a named file.
#[derive(Debug, thiserror::Error)]
#[error("{path}: {source}")]
pub struct IoError {
    pub path: PathBuf,
    #[source]
    pub source: std::io::Error,
}

fn reduced(scale: Scale, w: Wealth) -> (i64, i64) {
    let r = scale.to_ratio(w);
    (*r.numer(), *r.denom())
}

pub fn snapshots_csv(snapshots: &[Snapshot], scale: Scale) -> String {
    let mut out = String::from(SNAPSHOT_HEADER);
    out.push('\n');
    for snap in snapshots {
        for (id, p) in snap.particles.iter().enumerate() {
            let (num, den) = reduced(scale, p.wealth);
            writeln!(out, "{},{id},{},{num},{den},{},{}", snap.time, p.position, p.strategy, p.alive).unwrap();
        }
    }
    out
}

/// One row per lattice state with nonzero mass; dead mass goes in a row
/// whose wealth numerator is `dead` and whose denominator is empty.
pub fn meanfield_csv(model: &MeanFieldModel, states: &[MeanFieldState], scale: Scale) -> String {
    let mut out = String::from(MEANFIELD_HEADER);
    out.push('\n');
    let layout = model.layout();
    let lattice = model.lattice();
    for state in states {
        for z in 0..lattice.strategy_count() {
            for (k, &w) in lattice.levels(z).iter().enumerate() {
                let mass = state.mass[layout.alive(z, k)];
                if mass != 0.0 {
                    let (num, den) = reduced(scale, w);
                    writeln!(out, "{},{num},{den},{z},{mass}", state.time).unwrap();
                }
            }
            let dead = state.mass[layout.dead(z)];
            if dead != 0.0 {
                writeln!(out, "{},dead,,{z},{dead}", state.time).unwrap();
            }
        }
    }
    out
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Grid columns, then `statistic,stderr,replicas,verdict`, one row per cell.
pub fn report_csv(report: &ExperimentReport) -> String {
    let mut columns: Vec<String> = report.grid_columns.iter().map(|c| csv_field(c)).collect();
    columns.extend(["statistic", "stderr", "replicas", "verdict"].map(String::from));
    let mut out = columns.join(",");
    out.push('\n');
    for cell in &report.cells {
        let mut row: Vec<String> = cell.grid.iter().map(|g| csv_field(g)).collect();
        row.extend([
            opt(cell.statistic),
            opt(cell.stderr),
            cell.replicas.to_string(),
            cell.verdict.as_str().to_string(),
        ]);
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, IoError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| IoError { path: path.clone(), source })?;
    Ok(path)
}

pub fn create_dir(dir: &Path) -> Result<(), IoError> {
    fs::create_dir_all(dir).map_err(|source| IoError { path: dir.to_path_buf(), source })
}
