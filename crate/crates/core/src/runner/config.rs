//! Flat `key = value` configuration.
//!
//! ```text
//! # one run
//! d = 1
//! L = 30
//! Lz = 60
//! Q = 60
//! beta = 0.1
//! gamma = 0.3
//! iters = 10000
//! seed = 1
//! ```
//!
//! Any model parameter may hold a list instead, which turns the file into a
//! sweep: `beta = logspace(0.01, 1, 20)`, `gamma = 0.1, 0.3`,
//! `variant = [working, non-working]`, `seeds = 1..10`. Joining keys with `+`
//! sweeps them together: `Q+Lz = 40, 100, 400` sets both to each value, and
//! `d+L = 1:30, 4:9` pairs values entry by entry.

use std::fs;
use std::path::Path;

use super::sweep::{Axis, AxisValue, Observable, Param, PerRun, SweepSpec};
use super::RunnerError;
use crate::engine::{ConfigError, FieldIssue, MeasureWindow, SimConfig, UpdateMode};
use crate::measures::Rescale;

/// What a configuration describes.
#[derive(Debug, Clone, PartialEq)]
pub enum Parsed {
    Run(SimConfig),
    Sweep(SweepSpec),
}

impl Parsed {
    pub fn into_sweep(self) -> SweepSpec {
        match self {
            Parsed::Run(config) => SweepSpec::new(config),
            Parsed::Sweep(spec) => spec,
        }
    }
}

const REQUIRED: [Param; 6] = [
    Param::Dim,
    Param::Side,
    Param::Levels,
    Param::Workload,
    Param::Beta,
    Param::Gamma,
];

const SETTINGS: [&str; 10] = [
    "iters",
    "seed",
    "seeds",
    "update_mode",
    "window",
    "workforce_window",
    "observables",
    "per_run",
    "beta50",
    "rescale",
];

fn canonical(key: &str) -> Result<String, RunnerError> {
    let key = key.trim();
    if key.contains('+') {
        let parts: Result<Vec<_>, _> = key
            .split('+')
            .map(|k| Param::from_key(k.trim()).ok_or_else(|| unknown(k.trim())))
            .collect();
        let names: Vec<_> = parts?.iter().map(|p| p.name()).collect();
        return Ok(names.join("+"));
    }
    if let Some(p) = Param::from_key(key) {
        return Ok(p.name().to_string());
    }
    let setting = match key {
        "iterations" => "iters",
        "update-mode" => "update_mode",
        "workforce-window" => "workforce_window",
        "per-run" => "per_run",
        other => other,
    };
    if SETTINGS.contains(&setting) {
        Ok(setting.to_string())
    } else {
        Err(unknown(key))
    }
}

fn unknown(key: &str) -> RunnerError {
    RunnerError::Value {
        key: key.to_string(),
        message: "unknown key".into(),
    }
}

fn bad(key: &str, message: impl Into<String>) -> RunnerError {
    RunnerError::Value {
        key: key.to_string(),
        message: message.into(),
    }
}

/// Splits `text` into `(key, value)` pairs. Later duplicates are errors.
fn parse_lines(text: &str, origin: &str) -> Result<Vec<(String, String)>, RunnerError> {
    let mut entries: Vec<(String, String)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let syntax = |message: String| RunnerError::Syntax {
            origin: origin.to_string(),
            line: n + 1,
            message,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| syntax(format!("expected `key = value`, got `{line}`")))?;
        let key = canonical(key)?;
        if entries.iter().any(|(k, _)| *k == key) {
            return Err(syntax(format!("`{key}` is set twice")));
        }
        entries.push((key, value.trim().to_string()));
    }
    Ok(entries)
}

/// Reads an optional config file, then applies `overrides` on top.
pub fn parse_config(
    path: Option<&Path>,
    overrides: &[(String, String)],
) -> Result<Parsed, RunnerError> {
    let text = match path {
        Some(p) => fs::read_to_string(p).map_err(|source| RunnerError::Io {
            path: p.to_path_buf(),
            source,
        })?,
        None => String::new(),
    };
    let origin = path.map_or_else(|| "<flags>".to_string(), |p| p.display().to_string());
    parse_entries(parse_lines(&text, &origin)?, overrides)
}

pub fn parse_config_str(text: &str, overrides: &[(String, String)]) -> Result<Parsed, RunnerError> {
    parse_entries(parse_lines(text, "<config>")?, overrides)
}

fn parse_entries(
    mut entries: Vec<(String, String)>,
    overrides: &[(String, String)],
) -> Result<Parsed, RunnerError> {
    for (key, value) in overrides {
        let key = canonical(key)?;
        match entries.iter_mut().find(|(k, _)| *k == key) {
            Some(entry) => entry.1 = value.trim().to_string(),
            None => entries.push((key, value.trim().to_string())),
        }
    }

    let mut config = SimConfig::new(0, 0, 0, 0, f64::NAN, f64::NAN);
    let mut set: Vec<Param> = Vec::new();
    let mut axes: Vec<Axis> = Vec::new();
    let mut seeds: Option<Vec<u64>> = None;
    let mut observables: Option<Vec<Observable>> = None;
    let mut per_run = PerRun::default();
    let mut beta50 = false;
    let mut rescale = None;
    let mut window = MeasureWindow::default();
    let mut iterations = None;

    for (key, value) in &entries {
        let key = key.as_str();
        if let Some(params) = param_list(key) {
            for &p in &params {
                if set.contains(&p) {
                    return Err(bad(p.name(), "set by more than one key"));
                }
                set.push(p);
            }
            let (items, listed) = parse_values(value).map_err(|m| bad(key, m))?;
            if !listed && params.len() == 1 && items.len() == 1 {
                let v = params[0].parse_value(&items[0]).map_err(|m| bad(key, m))?;
                params[0].apply(&mut config, &v).map_err(|m| bad(key, m))?;
                continue;
            }
            let axis = parse_axis(key, &params, &items)?;
            if let Some(first) = axis.values.first() {
                for (p, v) in params.iter().zip(first) {
                    p.apply(&mut config, v).map_err(|m| bad(key, m))?;
                }
            }
            axes.push(axis);
            continue;
        }
        match key {
            "iters" => iterations = Some(integer(key, value)?),
            "seed" | "seeds" => {
                let (items, listed) = parse_values(value).map_err(|m| bad(key, m))?;
                let list: Result<Vec<u64>, _> = items.iter().map(|s| integer(key, s)).collect();
                let list = list?;
                if key == "seed" && !listed {
                    config.seed = list[0];
                } else if seeds.replace(list).is_some() {
                    return Err(bad(key, "seed lists given twice"));
                }
            }
            "update_mode" => {
                config.update_mode = value
                    .parse::<UpdateMode>()
                    .map_err(|e| bad(key, e.to_string()))?
            }
            "window" => window.profile = Some(integer(key, value)?),
            "workforce_window" => window.workforce = Some(integer(key, value)?),
            "observables" => {
                let (items, _) = parse_values(value).map_err(|m| bad(key, m))?;
                let list: Result<Vec<_>, _> = items
                    .iter()
                    .map(|s| {
                        Observable::from_name(s)
                            .ok_or_else(|| bad(key, format!("unknown observable `{s}`")))
                    })
                    .collect();
                observables = Some(list?);
            }
            "per_run" => {
                let (items, _) = parse_values(value).map_err(|m| bad(key, m))?;
                for item in items {
                    match item.as_str() {
                        "timeseries" => per_run.timeseries = true,
                        "profile" => per_run.profile = true,
                        "snapshot" => per_run.snapshot = true,
                        other => return Err(bad(key, format!("unknown output `{other}`"))),
                    }
                }
            }
            "beta50" => {
                beta50 = value
                    .parse::<bool>()
                    .map_err(|_| bad(key, format!("expected true or false, got `{value}`")))?
            }
            "rescale" => rescale = Some(parse_rescale(value).map_err(|m| bad(key, m))?),
            _ => unreachable!("canonical() admits only known keys"),
        }
    }

    let missing: Vec<FieldIssue> = REQUIRED
        .iter()
        .filter(|p| !set.contains(p))
        .map(|p| FieldIssue {
            field: p.name(),
            message: "missing".into(),
        })
        .chain(iterations.is_none().then(|| FieldIssue {
            field: "iters",
            message: "missing".into(),
        }))
        .collect();
    if !missing.is_empty() {
        return Err(ConfigError { issues: missing }.into());
    }
    config.iterations = iterations.unwrap_or_default();
    config.window = window;

    let one_seed = seeds.is_none();
    let extras = observables.is_some() || per_run.any() || beta50 || rescale.is_some();
    if axes.is_empty() && one_seed && !extras {
        config.validate()?;
        return Ok(Parsed::Run(config));
    }

    let mut spec = SweepSpec::new(config);
    spec.axes = axes;
    if let Some(seeds) = seeds {
        spec.seeds = seeds;
    }
    if let Some(observables) = observables {
        spec.observables = observables;
    }
    spec.per_run = per_run;
    spec.beta50 = beta50;
    spec.rescale = rescale;
    spec.plan()?;
    Ok(Parsed::Sweep(spec))
}

fn param_list(key: &str) -> Option<Vec<Param>> {
    key.split('+').map(Param::from_key).collect()
}

fn integer(key: &str, text: &str) -> Result<u64, RunnerError> {
    text.trim().parse().map_err(|_| {
        bad(
            key,
            format!("expected a non-negative integer, got `{}`", text.trim()),
        )
    })
}

fn parse_axis(key: &str, params: &[Param], items: &[String]) -> Result<Axis, RunnerError> {
    let mut values = Vec::with_capacity(items.len());
    for item in items {
        let parts: Vec<&str> = item.split(':').collect();
        let row: Vec<AxisValue> = match parts.len() {
            1 => {
                let mut row = Vec::with_capacity(params.len());
                for p in params {
                    row.push(p.parse_value(parts[0]).map_err(|m| bad(key, m))?);
                }
                row
            }
            n if n == params.len() => {
                let mut row = Vec::with_capacity(n);
                for (p, part) in params.iter().zip(&parts) {
                    row.push(p.parse_value(part).map_err(|m| bad(key, m))?);
                }
                row
            }
            n => {
                return Err(bad(
                    key,
                    format!("`{item}` has {n} values for {} parameters", params.len()),
                ))
            }
        };
        values.push(row);
    }
    Ok(Axis {
        params: params.to_vec(),
        values,
    })
}

fn parse_rescale(text: &str) -> Result<Rescale, String> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad exponent `{}`", s.trim()))
        })
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [a, b, c] => Ok(Rescale { a, b, c }),
        _ => Err(format!(
            "expected three exponents a,b,c, got {}",
            parts.len()
        )),
    }
}

/// Expands a value list. The flag is `true` when the text used list syntax
/// (brackets, commas, a range or a spacing function) rather than one bare value.
///
/// * `0.1, 0.2` and `[0.1, 0.2]`
/// * `logspace(a, b, n)`: `n` geometrically spaced points from `a` to `b`
/// * `linspace(a, b, n)`
/// * `a..b`: the integers `a` to `b` inclusive
pub fn parse_values(text: &str) -> Result<(Vec<String>, bool), String> {
    let mut body = text.trim();
    let mut listed = false;
    if let Some(inner) = body.strip_prefix('[').and_then(|b| b.strip_suffix(']')) {
        body = inner.trim();
        listed = true;
    }
    if body.is_empty() {
        return if listed {
            Ok((Vec::new(), true))
        } else {
            Err("empty value".into())
        };
    }
    for (name, geometric) in [("logspace", true), ("linspace", false)] {
        if let Some(args) = body
            .strip_prefix(name)
            .map(str::trim_start)
            .and_then(|r| r.strip_prefix('('))
            .and_then(|r| r.strip_suffix(')'))
        {
            return spaced(args, geometric).map(|v| (v, true));
        }
    }
    if !body.contains(',') {
        if let Some((a, b)) = body.split_once("..") {
            let a: i64 = a
                .trim()
                .parse()
                .map_err(|_| format!("bad range start `{}`", a.trim()))?;
            let b: i64 = b
                .trim()
                .parse()
                .map_err(|_| format!("bad range end `{}`", b.trim()))?;
            if b < a {
                return Err(format!("range {a}..{b} is empty"));
            }
            return Ok(((a..=b).map(|i| i.to_string()).collect(), true));
        }
    }
    let items: Vec<String> = body.split(',').map(|s| s.trim().to_string()).collect();
    if items.iter().any(String::is_empty) {
        return Err(format!("empty entry in `{body}`"));
    }
    listed |= items.len() > 1;
    Ok((items, listed))
}

fn spaced(args: &str, geometric: bool) -> Result<Vec<String>, String> {
    let parts: Vec<&str> = args.split(',').map(str::trim).collect();
    let [a, b, n] = parts[..] else {
        return Err(format!("expected (start, end, count), got ({args})"));
    };
    let a: f64 = a.parse().map_err(|_| format!("bad start `{a}`"))?;
    let b: f64 = b.parse().map_err(|_| format!("bad end `{b}`"))?;
    let n: usize = n.parse().map_err(|_| format!("bad count `{n}`"))?;
    if geometric && !(a > 0.0 && b > 0.0) {
        return Err("logspace needs positive end points".into());
    }
    Ok(spacing(a, b, n, geometric)
        .iter()
        .map(|x| x.to_string())
        .collect())
}

/// `n` points from `a` to `b` inclusive, evenly spaced in value or in log.
pub fn spacing(a: f64, b: f64, n: usize, geometric: bool) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                if i == n - 1 {
                    b
                } else if geometric {
                    a * (b / a).powf(t)
                } else {
                    a + (b - a) * t
                }
            })
            .collect(),
    }
}
