use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;

use super::output::{
    cell, create_dir, number, write_profile, write_rows, write_snapshot, write_timeseries,
};
use super::sweep::{AxisValue, GridPoint, Observable, Param, PlannedRun, SweepSpec};
use super::RunnerError;
use crate::engine::{self, ConfigError, SimConfig};
use crate::measures::{estimate_beta50, mean, rescale_curve, sample_sd, RunSummary};

#[derive(Debug, Clone)]
pub struct ExecOptions {
    pub out_dir: PathBuf,
    /// Concurrent grid points; `0` uses one per core.
    pub workers: usize,
}

impl ExecOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            out_dir: out_dir.into(),
            workers: 0,
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Error { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub run: PlannedRun,
    pub status: RunStatus,
    /// One entry per requested observable.
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointStats {
    pub observable: Observable,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointRow {
    pub point: GridPoint,
    pub stats: Vec<PointStats>,
    /// Runs that finished.
    pub n_seeds: usize,
    pub n_errors: usize,
}

impl PointRow {
    pub fn mean(&self, observable: Observable) -> Option<f64> {
        self.stats.iter().find(|s| s.observable == observable)?.mean
    }

    pub fn value(&self, param: Param) -> AxisValue {
        param.get(&self.point.config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Beta50Row {
    /// Swept values other than β shared by the curve.
    pub group: Vec<(Param, AxisValue)>,
    pub beta50: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ExecReport {
    pub rows: Vec<PointRow>,
    pub runs: Vec<RunRecord>,
    pub beta50: Vec<Beta50Row>,
    pub files: Vec<PathBuf>,
    pub wall_time: Duration,
}

impl ExecReport {
    pub fn n_errors(&self) -> usize {
        self.rows.iter().map(|r| r.n_errors).sum()
    }
}

#[derive(Serialize)]
struct ManifestRun<'a> {
    id: String,
    point: usize,
    seed: u64,
    run_seed: u64,
    #[serde(flatten)]
    status: &'a RunStatus,
}

#[derive(Serialize)]
struct Manifest<'a> {
    program: &'static str,
    version: &'static str,
    kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    config: Option<&'a SimConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    spec: Option<&'a SweepSpec>,
    runs: Vec<ManifestRun<'a>>,
    files: Vec<String>,
    workers: usize,
    wall_time_seconds: f64,
    finished_unix_seconds: u64,
}

pub const MANIFEST: &str = "manifest.json";

fn write_manifest(dir: &Path, manifest: &Manifest<'_>) -> Result<PathBuf, RunnerError> {
    let path = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(manifest).map_err(|source| RunnerError::Json {
        path: path.clone(),
        source,
    })?;
    fs::write(&path, text + "\n").map_err(|source| RunnerError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn file_names(dir: &Path, files: &[PathBuf]) -> Vec<String> {
    files
        .iter()
        .map(|f| f.strip_prefix(dir).unwrap_or(f).display().to_string())
        .collect()
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        format!("panicked: {s}")
    } else if let Some(s) = payload.downcast_ref::<String>() {
        format!("panicked: {s}")
    } else {
        "panicked".to_string()
    }
}

/// Runs `config` once and writes `timeseries.csv`, `profile.csv`,
/// `snapshot.csv` and the manifest into `out_dir`. The seed is used as given.
pub fn run_single(config: &SimConfig, out_dir: &Path) -> Result<RunSummary, RunnerError> {
    let started = Instant::now();
    config.validate()?;
    let summary = panic::catch_unwind(AssertUnwindSafe(|| engine::run(config)))
        .map_err(|p| RunnerError::Failed(panic_message(p)))??;
    create_dir(out_dir)?;
    let files = vec![
        write_timeseries(&out_dir.join("timeseries.csv"), &summary)?,
        write_profile(&out_dir.join("profile.csv"), &summary)?,
        write_snapshot(&out_dir.join("snapshot.csv"), &summary)?,
    ];
    write_manifest(
        out_dir,
        &Manifest {
            program: "worknet",
            version: env!("CARGO_PKG_VERSION"),
            kind: "run",
            config: Some(config),
            spec: None,
            runs: Vec::new(),
            files: file_names(out_dir, &files),
            workers: 1,
            wall_time_seconds: started.elapsed().as_secs_f64(),
            finished_unix_seconds: unix_now(),
        },
    )?;
    Ok(summary)
}

pub fn execute(spec: &SweepSpec, options: &ExecOptions) -> Result<ExecReport, RunnerError> {
    execute_with(spec, options, engine::run)
}

/// [`execute`] with a custom simulation, e.g. one that fails on purpose.
/// A panic or error inside `simulate` marks that run as errored.
pub fn execute_with<F>(
    spec: &SweepSpec,
    options: &ExecOptions,
    simulate: F,
) -> Result<ExecReport, RunnerError>
where
    F: Fn(&SimConfig) -> Result<RunSummary, ConfigError> + Sync,
{
    let started = Instant::now();
    check_outputs(spec)?;
    let runs = spec.plan()?;
    let points = spec.points()?;
    let dir = options.out_dir.as_path();
    create_dir(dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers)
        .build()?;

    let results: Vec<Result<(RunRecord, Vec<PathBuf>), RunnerError>> = pool.install(|| {
        runs.into_par_iter()
            .map(|run| perform(spec, run, dir, &simulate))
            .collect()
    });
    let mut records = Vec::with_capacity(results.len());
    let mut files = Vec::new();
    for result in results {
        let (record, written) = result?;
        records.push(record);
        files.extend(written);
    }

    let rows = aggregate(spec, points, &records);
    let beta50 = if spec.beta50 {
        beta50_rows(spec, &rows)
    } else {
        Vec::new()
    };
    if !rows.is_empty() {
        files.push(write_sweep(&dir.join("sweep.csv"), spec, &rows)?);
        files.push(write_runs(&dir.join("runs.csv"), spec, &records)?);
        if spec.beta50 {
            files.push(write_beta50(&dir.join("beta50.csv"), spec, &beta50)?);
        }
        if spec.rescale.is_some() {
            files.push(write_rescaled(&dir.join("rescaled.csv"), spec, &rows)?);
        }
    }

    let wall_time = started.elapsed();
    let manifest_runs = records
        .iter()
        .map(|r| ManifestRun {
            id: r.run.id(),
            point: r.run.point,
            seed: r.run.seed,
            run_seed: r.run.run_seed,
            status: &r.status,
        })
        .collect();
    write_manifest(
        dir,
        &Manifest {
            program: "worknet",
            version: env!("CARGO_PKG_VERSION"),
            kind: "sweep",
            config: None,
            spec: Some(spec),
            runs: manifest_runs,
            files: file_names(dir, &files),
            workers: pool.current_num_threads(),
            wall_time_seconds: wall_time.as_secs_f64(),
            finished_unix_seconds: unix_now(),
        },
    )?;
    Ok(ExecReport {
        rows,
        runs: records,
        beta50,
        files,
        wall_time,
    })
}

fn check_outputs(spec: &SweepSpec) -> Result<(), RunnerError> {
    let needs = |flag: bool, observable: Observable, what: &str| {
        if flag && !spec.observables.contains(&observable) {
            Err(RunnerError::Value {
                key: what.to_string(),
                message: format!("needs the `{}` observable", observable.name()),
            })
        } else {
            Ok(())
        }
    };
    needs(spec.beta50, Observable::FailureFraction, "beta50")?;
    needs(spec.rescale.is_some(), Observable::Depth, "rescale")?;
    let sweeps_beta = spec.swept().contains(&Param::Beta);
    if (spec.beta50 || spec.rescale.is_some()) && !sweeps_beta {
        return Err(RunnerError::Value {
            key: "beta".into(),
            message: "beta50 and rescale need a beta axis".into(),
        });
    }
    Ok(())
}

fn perform<F>(
    spec: &SweepSpec,
    run: PlannedRun,
    dir: &Path,
    simulate: &F,
) -> Result<(RunRecord, Vec<PathBuf>), RunnerError>
where
    F: Fn(&SimConfig) -> Result<RunSummary, ConfigError> + Sync,
{
    let outcome = panic::catch_unwind(AssertUnwindSafe(|| simulate(&run.config)));
    let summary = match outcome {
        Ok(Ok(summary)) => summary,
        Ok(Err(e)) => return Ok((errored(spec, run, e.to_string()), Vec::new())),
        Err(payload) => return Ok((errored(spec, run, panic_message(payload)), Vec::new())),
    };
    let mut files = Vec::new();
    if spec.per_run.any() {
        let run_dir = dir.join("runs").join(run.id());
        create_dir(&run_dir)?;
        if spec.per_run.timeseries {
            files.push(write_timeseries(&run_dir.join("timeseries.csv"), &summary)?);
        }
        if spec.per_run.profile {
            files.push(write_profile(&run_dir.join("profile.csv"), &summary)?);
        }
        if spec.per_run.snapshot {
            files.push(write_snapshot(&run_dir.join("snapshot.csv"), &summary)?);
        }
    }
    let values = spec.observables.iter().map(|o| o.value(&summary)).collect();
    Ok((
        RunRecord {
            run,
            status: RunStatus::Ok,
            values,
        },
        files,
    ))
}

fn errored(spec: &SweepSpec, run: PlannedRun, message: String) -> RunRecord {
    RunRecord {
        run,
        status: RunStatus::Error { message },
        values: vec![None; spec.observables.len()],
    }
}

fn aggregate(spec: &SweepSpec, points: Vec<GridPoint>, records: &[RunRecord]) -> Vec<PointRow> {
    let per_point = spec.seeds.len();
    points
        .into_iter()
        .map(|point| {
            let runs = &records[point.index * per_point..(point.index + 1) * per_point];
            let n_errors = runs.iter().filter(|r| r.status != RunStatus::Ok).count();
            let stats = spec
                .observables
                .iter()
                .enumerate()
                .map(|(k, &observable)| {
                    let values: Vec<f64> = runs.iter().filter_map(|r| r.values[k]).collect();
                    let present = !values.is_empty();
                    PointStats {
                        observable,
                        mean: present.then(|| mean(&values)),
                        sd: present.then(|| sample_sd(&values)),
                    }
                })
                .collect();
            PointRow {
                point,
                stats,
                n_seeds: per_point - n_errors,
                n_errors,
            }
        })
        .collect()
}

type Curve<'a> = (Vec<(Param, AxisValue)>, Vec<&'a PointRow>);

/// Rows grouped by every swept value except β, in first-seen order, each
/// curve sorted by β.
fn curves<'a>(spec: &SweepSpec, rows: &'a [PointRow]) -> Vec<Curve<'a>> {
    let others: Vec<Param> = spec
        .swept()
        .into_iter()
        .filter(|&p| p != Param::Beta)
        .collect();
    let mut groups: Vec<Curve> = Vec::new();
    for row in rows {
        let key: Vec<(Param, AxisValue)> = others.iter().map(|&p| (p, row.value(p))).collect();
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push(row),
            None => groups.push((key, vec![row])),
        }
    }
    for (_, members) in &mut groups {
        members.sort_by(|a, b| a.point.config.beta.total_cmp(&b.point.config.beta));
    }
    groups
}

fn beta50_rows(spec: &SweepSpec, rows: &[PointRow]) -> Vec<Beta50Row> {
    curves(spec, rows)
        .into_iter()
        .map(|(group, members)| {
            let curve: Vec<(f64, f64)> = members
                .iter()
                .filter_map(|r| Some((r.point.config.beta, r.mean(Observable::FailureFraction)?)))
                .collect();
            Beta50Row {
                group,
                beta50: estimate_beta50(&curve),
            }
        })
        .collect()
}

fn value_cells(values: impl IntoIterator<Item = AxisValue>) -> Vec<String> {
    values.into_iter().map(|v| v.to_string()).collect()
}

fn write_sweep(path: &Path, spec: &SweepSpec, rows: &[PointRow]) -> Result<PathBuf, RunnerError> {
    let swept = spec.swept();
    let mut header: Vec<String> = swept.iter().map(|p| p.name().to_string()).collect();
    for o in &spec.observables {
        header.push(format!("{}_mean", o.name()));
        header.push(format!("{}_sd", o.name()));
    }
    header.push("n_seeds".into());
    header.push("n_errors".into());
    let lines = rows.iter().map(|row| {
        let mut line = value_cells(row.point.values.iter().map(|(_, v)| *v));
        for s in &row.stats {
            line.push(cell(s.mean));
            line.push(cell(s.sd));
        }
        line.push(row.n_seeds.to_string());
        line.push(row.n_errors.to_string());
        line
    });
    write_rows(path, &header, lines)
}

fn write_runs(
    path: &Path,
    spec: &SweepSpec,
    records: &[RunRecord],
) -> Result<PathBuf, RunnerError> {
    let swept = spec.swept();
    let mut header: Vec<String> = ["run_id", "point", "seed", "run_seed"]
        .map(String::from)
        .to_vec();
    header.extend(swept.iter().map(|p| p.name().to_string()));
    header.push("status".into());
    header.extend(spec.observables.iter().map(|o| o.name().to_string()));
    header.push("message".into());
    let lines = records.iter().map(|r| {
        let mut line = vec![
            r.run.id(),
            r.run.point.to_string(),
            r.run.seed.to_string(),
            r.run.run_seed.to_string(),
        ];
        line.extend(value_cells(swept.iter().map(|p| p.get(&r.run.config))));
        let message = match &r.status {
            RunStatus::Ok => {
                line.push("ok".into());
                String::new()
            }
            RunStatus::Error { message } => {
                line.push("error".into());
                message.clone()
            }
        };
        line.extend(r.values.iter().map(|&v| cell(v)));
        line.push(message);
        line
    });
    write_rows(path, &header, lines)
}

fn write_beta50(path: &Path, spec: &SweepSpec, rows: &[Beta50Row]) -> Result<PathBuf, RunnerError> {
    let mut header: Vec<String> = spec
        .swept()
        .into_iter()
        .filter(|&p| p != Param::Beta)
        .map(|p| p.name().to_string())
        .collect();
    header.push("beta50".into());
    let lines = rows.iter().map(|r| {
        let mut line = value_cells(r.group.iter().map(|(_, v)| *v));
        line.push(cell(r.beta50));
        line
    });
    write_rows(path, &header, lines)
}

fn write_rescaled(
    path: &Path,
    spec: &SweepSpec,
    rows: &[PointRow],
) -> Result<PathBuf, RunnerError> {
    let exps = spec.rescale.unwrap_or_default();
    let mut header: Vec<String> = spec
        .swept()
        .into_iter()
        .filter(|&p| p != Param::Beta)
        .map(|p| p.name().to_string())
        .collect();
    header.extend(["beta", "depth_mean", "x", "y"].map(String::from));
    let mut lines = Vec::new();
    for (group, members) in curves(spec, rows) {
        for row in members {
            let Some(depth) = row.mean(Observable::Depth) else {
                continue;
            };
            let c = &row.point.config;
            let (x, y) = rescale_curve(
                &[(c.beta, depth)],
                f64::from(c.workload),
                c.levels as f64,
                exps,
            )[0];
            let mut line = value_cells(group.iter().map(|(_, v)| *v));
            line.extend([number(c.beta), number(depth), number(x), number(y)]);
            lines.push(line);
        }
    }
    write_rows(path, &header, lines)
}
