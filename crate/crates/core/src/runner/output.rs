//! CSV writers. Headers are fixed; missing values are empty cells.

use std::fs;
use std::path::{Path, PathBuf};

use super::RunnerError;
use crate::measures::RunSummary;

pub const TIMESERIES_HEADER: [&str; 6] = ["iter", "flow", "depth", "n_active", "n_flux", "failed"];
pub const PROFILE_HEADER: [&str; 5] = [
    "level",
    "mean_sq_width",
    "max_J",
    "mean_charge",
    "active_fraction",
];

/// Shortest round-trip text, in exponent form for very small or large magnitudes.
pub fn number(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-5..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

pub(crate) fn cell(value: Option<f64>) -> String {
    value.map_or_else(String::new, number)
}

pub(crate) fn create_dir(path: &Path) -> Result<(), RunnerError> {
    fs::create_dir_all(path).map_err(|source| RunnerError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_rows<I>(path: &Path, header: &[String], rows: I) -> Result<PathBuf, RunnerError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let fail = |source| RunnerError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(fail)?;
    w.write_record(header).map_err(fail)?;
    for row in rows {
        w.write_record(&row).map_err(fail)?;
    }
    w.flush().map_err(|source| RunnerError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(path.to_path_buf())
}

fn strings(header: &[&str]) -> Vec<String> {
    header.iter().map(|s| s.to_string()).collect()
}

/// One row per iteration, numbered from 1.
pub fn write_timeseries(path: &Path, summary: &RunSummary) -> Result<PathBuf, RunnerError> {
    let rows = (0..summary.iterations()).map(|t| {
        vec![
            (t + 1).to_string(),
            number(summary.flow[t]),
            summary.depth[t].to_string(),
            summary.n_active[t].to_string(),
            summary.n_flux[t].to_string(),
            u8::from(summary.failed[t]).to_string(),
        ]
    });
    write_rows(path, &strings(&TIMESERIES_HEADER), rows)
}

pub fn write_profile(path: &Path, summary: &RunSummary) -> Result<PathBuf, RunnerError> {
    let rows = summary.profile.levels.iter().enumerate().map(|(z, l)| {
        vec![
            z.to_string(),
            cell(l.mean_sq_width),
            cell(l.max_preference),
            cell(l.mean_charge),
            number(l.active_fraction),
        ]
    });
    write_rows(path, &strings(&PROFILE_HEADER), rows)
}

pub fn snapshot_header(dim: usize) -> Vec<String> {
    let mut header = strings(&["level", "site", "q"]);
    header.extend((0..=2 * dim).map(|k| format!("J_slot{k}")));
    header
}

/// Sites touched in the final iteration with their outgoing preferences.
pub fn write_snapshot(path: &Path, summary: &RunSummary) -> Result<PathBuf, RunnerError> {
    let rows = summary.snapshot.iter().map(|r| {
        let mut row = vec![r.level.to_string(), r.site.to_string(), r.q.to_string()];
        row.extend(r.preferences.iter().map(|&j| number(j)));
        row
    });
    write_rows(path, &snapshot_header(summary.config.dim), rows)
}
