//! CSV and JSON writers. Floats are written with 17 significant digits;
//! undefined values are written as `nan`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rcnfem::{Complex64, ConvergenceRow, DiagnosticsRecord};
use serde_json::Value;

use crate::CliError;

pub const DIAGNOSTICS_HEADER: &str =
    "n,t,mass,mass_change,energy_mod,energy_mod_change,energy_orig,energy_orig_change,wall_ms";

pub fn fmt_f(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.16e}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    fmt_f(x.unwrap_or(f64::NAN))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write_lines(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> Result<(), CliError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{header}").map_err(io_err(path))?;
    for row in rows {
        writeln!(w, "{row}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn diagnostics_row(r: &DiagnosticsRecord) -> String {
    [
        r.n.to_string(),
        fmt_f(r.t),
        fmt_f(r.mass),
        fmt_f(r.mass_change),
        fmt_opt(r.energy_mod),
        fmt_opt(r.energy_mod_change),
        fmt_opt(r.energy_orig),
        fmt_opt(r.energy_orig_change),
        fmt_f(r.wall_ms),
    ]
    .join(",")
}

pub fn write_diagnostics(path: &Path, records: &[DiagnosticsRecord]) -> Result<(), CliError> {
    write_lines(path, DIAGNOSTICS_HEADER, records.iter().map(diagnostics_row))
}

/// One sampled point of a snapshot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotPoint {
    pub x: f64,
    pub y: f64,
    pub u: Complex64,
}

pub fn write_snapshot(path: &Path, points: &[SnapshotPoint]) -> Result<(), CliError> {
    write_lines(
        path,
        "x,y,abs_u,re_u,im_u",
        points.iter().map(|p| {
            format!("{},{},{},{},{}", fmt_f(p.x), fmt_f(p.y), fmt_f(p.u.norm()), fmt_f(p.u.re), fmt_f(p.u.im))
        }),
    )
}

pub fn snapshot_file_name(t: f64) -> String {
    format!("snapshot_t{t}.csv")
}

/// Writes the convergence table. Integer levels (cell counts) are written
/// as integers. A single-row table has no order column.
pub fn write_convergence(path: &Path, rows: &[ConvergenceRow], integer_levels: bool) -> Result<(), CliError> {
    let level = |l: f64| if integer_levels { format!("{}", l.round() as u64) } else { fmt_f(l) };
    if rows.len() <= 1 {
        write_lines(path, "level,error", rows.iter().map(|r| format!("{},{}", level(r.level), fmt_f(r.error))))
    } else {
        write_lines(
            path,
            "level,error,order",
            rows.iter().map(|r| format!("{},{},{}", level(r.level), fmt_f(r.error), fmt_opt(r.order))),
        )
    }
}

pub fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(io_err(path))
}
