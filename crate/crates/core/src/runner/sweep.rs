use std::fmt;

use serde::{Deserialize, Serialize};

use super::RunnerError;
use crate::engine::{SimConfig, Variant};
use crate::measures::{Rescale, RunSummary};

/// A model parameter that can be swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Param {
    #[serde(rename = "d")]
    Dim,
    #[serde(rename = "L")]
    Side,
    #[serde(rename = "Lz")]
    Levels,
    #[serde(rename = "Q")]
    Workload,
    #[serde(rename = "beta")]
    Beta,
    #[serde(rename = "gamma")]
    Gamma,
    #[serde(rename = "variant")]
    Variant,
}

impl Param {
    pub const ALL: [Param; 7] = [
        Param::Dim,
        Param::Side,
        Param::Levels,
        Param::Workload,
        Param::Beta,
        Param::Gamma,
        Param::Variant,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::Dim => "d",
            Param::Side => "L",
            Param::Levels => "Lz",
            Param::Workload => "Q",
            Param::Beta => "beta",
            Param::Gamma => "gamma",
            Param::Variant => "variant",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Some(match key {
            "d" => Param::Dim,
            "L" => Param::Side,
            "Lz" | "L_z" | "lz" => Param::Levels,
            "Q" => Param::Workload,
            "beta" => Param::Beta,
            "gamma" => Param::Gamma,
            "variant" => Param::Variant,
            _ => return None,
        })
    }

    /// Reads a value written the way config files and CSV cells write it.
    pub fn parse_value(self, text: &str) -> Result<AxisValue, String> {
        let text = text.trim();
        if self == Param::Variant {
            return text
                .parse()
                .map(AxisValue::Variant)
                .map_err(|e| e.to_string());
        }
        let x: f64 = text
            .parse()
            .map_err(|_| format!("expected a number, got `{text}`"))?;
        Ok(AxisValue::Number(x))
    }

    pub fn get(self, config: &SimConfig) -> AxisValue {
        match self {
            Param::Dim => AxisValue::Number(config.dim as f64),
            Param::Side => AxisValue::Number(config.side as f64),
            Param::Levels => AxisValue::Number(config.levels as f64),
            Param::Workload => AxisValue::Number(f64::from(config.workload)),
            Param::Beta => AxisValue::Number(config.beta),
            Param::Gamma => AxisValue::Number(config.gamma),
            Param::Variant => AxisValue::Variant(config.variant),
        }
    }

    pub fn apply(self, config: &mut SimConfig, value: &AxisValue) -> Result<(), String> {
        match (self, value) {
            (Param::Variant, AxisValue::Variant(v)) => config.variant = *v,
            (Param::Variant, AxisValue::Number(x)) => {
                return Err(format!("expected a variant name, got {x}"))
            }
            (_, AxisValue::Variant(v)) => return Err(format!("expected a number, got `{v}`")),
            (Param::Beta, AxisValue::Number(x)) => config.beta = *x,
            (Param::Gamma, AxisValue::Number(x)) => config.gamma = *x,
            (Param::Dim, AxisValue::Number(x)) => config.dim = whole(*x)?,
            (Param::Side, AxisValue::Number(x)) => config.side = whole(*x)?,
            (Param::Levels, AxisValue::Number(x)) => config.levels = whole(*x)?,
            (Param::Workload, AxisValue::Number(x)) => {
                config.workload =
                    u32::try_from(whole(*x)?).map_err(|_| format!("{x} is too large"))?
            }
        }
        Ok(())
    }
}

fn whole(x: f64) -> Result<usize, String> {
    if x >= 0.0 && x.fract() == 0.0 && x <= u32::MAX as f64 {
        Ok(x as usize)
    } else {
        Err(format!("expected a non-negative integer, got {x}"))
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisValue {
    Number(f64),
    Variant(Variant),
}

impl AxisValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            AxisValue::Number(x) => Some(*x),
            AxisValue::Variant(_) => None,
        }
    }
}

impl fmt::Display for AxisValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AxisValue::Number(x) => f.write_str(&super::output::number(*x)),
            AxisValue::Variant(v) => write!(f, "{v}"),
        }
    }
}

/// One sweep dimension. Several parameters on one axis move together:
/// entry `i` of `values` holds one value per parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub params: Vec<Param>,
    pub values: Vec<Vec<AxisValue>>,
}

impl Axis {
    pub fn new(param: Param, values: impl IntoIterator<Item = AxisValue>) -> Self {
        Self {
            params: vec![param],
            values: values.into_iter().map(|v| vec![v]).collect(),
        }
    }

    pub fn numbers(param: Param, values: impl IntoIterator<Item = f64>) -> Self {
        Self::new(param, values.into_iter().map(AxisValue::Number))
    }

    /// All `params` take the same value, e.g. `Q = L_z`.
    pub fn tied(params: &[Param], values: impl IntoIterator<Item = AxisValue>) -> Self {
        Self {
            params: params.to_vec(),
            values: values.into_iter().map(|v| vec![v; params.len()]).collect(),
        }
    }

    /// Paired values, e.g. `(d, L)` = `(1, 30), (4, 9)`.
    pub fn zipped(params: &[Param], rows: impl IntoIterator<Item = Vec<f64>>) -> Self {
        Self {
            params: params.to_vec(),
            values: rows
                .into_iter()
                .map(|r| r.into_iter().map(AxisValue::Number).collect())
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Per-run quantities aggregated over seeds in `sweep.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Observable {
    /// Mean lowest working level over the profile window.
    #[serde(rename = "depth")]
    Depth,
    #[serde(rename = "failure_fraction")]
    FailureFraction,
    /// Mean flow over the profile window.
    #[serde(rename = "flow")]
    Flow,
    /// Mean packets handed down per iteration over the profile window.
    #[serde(rename = "transferred")]
    Transferred,
    /// Active sites in the final iteration.
    #[serde(rename = "n_active")]
    NActive,
    /// Distinct sites ever active (`N_t`).
    #[serde(rename = "n_t")]
    WorkforceTotal,
    /// Mean churn over the workforce window (`N_f`).
    #[serde(rename = "n_f")]
    Churn,
    /// `Q` minus the typical first level with non-zero width.
    #[serde(rename = "interface_charge")]
    InterfaceCharge,
}

impl Observable {
    pub const ALL: [Observable; 8] = [
        Observable::Depth,
        Observable::FailureFraction,
        Observable::Flow,
        Observable::Transferred,
        Observable::NActive,
        Observable::WorkforceTotal,
        Observable::Churn,
        Observable::InterfaceCharge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Observable::Depth => "depth",
            Observable::FailureFraction => "failure_fraction",
            Observable::Flow => "flow",
            Observable::Transferred => "transferred",
            Observable::NActive => "n_active",
            Observable::WorkforceTotal => "n_t",
            Observable::Churn => "n_f",
            Observable::InterfaceCharge => "interface_charge",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|o| o.name() == name.trim())
    }

    /// `None` when the run has nothing to report, e.g. no iterations.
    pub fn value(self, summary: &RunSummary) -> Option<f64> {
        if summary.iterations() == 0 {
            return None;
        }
        Some(match self {
            Observable::Depth => summary.depth_stats().mean_depth,
            Observable::FailureFraction => summary.depth_stats().failure_fraction,
            Observable::Flow => summary.mean_flow(),
            Observable::Transferred => summary.mean_transferred(),
            Observable::NActive => *summary.n_active.last()? as f64,
            Observable::WorkforceTotal => summary.workforce_total as f64,
            Observable::Churn => summary.mean_churn(),
            Observable::InterfaceCharge => summary.interface().measured_interface_charge?,
        })
    }
}

/// Per-run CSV files written next to the sweep tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PerRun {
    pub timeseries: bool,
    pub profile: bool,
    pub snapshot: bool,
}

impl PerRun {
    pub fn any(&self) -> bool {
        self.timeseries || self.profile || self.snapshot
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Values for every parameter that no axis overrides. Its seed is unused.
    pub base: SimConfig,
    /// Grid axes; the first one varies slowest.
    pub axes: Vec<Axis>,
    pub seeds: Vec<u64>,
    pub observables: Vec<Observable>,
    pub per_run: PerRun,
    /// Write `beta50.csv` from the failure-fraction curves.
    pub beta50: bool,
    /// Write `rescaled.csv` from the depth curves.
    pub rescale: Option<Rescale>,
}

pub const DEFAULT_OBSERVABLES: [Observable; 6] = [
    Observable::Depth,
    Observable::FailureFraction,
    Observable::Flow,
    Observable::NActive,
    Observable::WorkforceTotal,
    Observable::Churn,
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPoint {
    pub index: usize,
    pub values: Vec<(Param, AxisValue)>,
    /// Configuration at this point, still carrying the base seed.
    pub config: SimConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlannedRun {
    pub point: usize,
    /// Seed as listed in the spec.
    pub seed: u64,
    /// Seed actually handed to the simulation.
    pub run_seed: u64,
    pub config: SimConfig,
}

impl PlannedRun {
    pub fn id(&self) -> String {
        format!("p{:04}-s{}", self.point, self.seed)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Simulation seed for `seed` at grid point `point`.
pub fn derive_seed(seed: u64, point: usize) -> u64 {
    splitmix64(seed ^ splitmix64(point as u64))
}

impl SweepSpec {
    /// No axes, one seed (the base seed), the default observables.
    pub fn new(base: SimConfig) -> Self {
        Self {
            seeds: vec![base.seed],
            base,
            axes: Vec::new(),
            observables: DEFAULT_OBSERVABLES.to_vec(),
            per_run: PerRun::default(),
            beta50: false,
            rescale: None,
        }
    }

    pub fn with_axis(mut self, axis: Axis) -> Self {
        self.axes.push(axis);
        self
    }

    pub fn with_seeds(mut self, seeds: impl IntoIterator<Item = u64>) -> Self {
        self.seeds = seeds.into_iter().collect();
        self
    }

    pub fn with_observables(mut self, observables: &[Observable]) -> Self {
        self.observables = observables.to_vec();
        self
    }

    pub fn grid_size(&self) -> usize {
        self.axes.iter().map(Axis::len).product()
    }

    pub fn run_count(&self) -> usize {
        self.grid_size() * self.seeds.len()
    }

    /// Swept parameters in column order.
    pub fn swept(&self) -> Vec<Param> {
        self.axes
            .iter()
            .flat_map(|a| a.params.iter().copied())
            .collect()
    }

    /// Every grid point, validated.
    pub fn points(&self) -> Result<Vec<GridPoint>, RunnerError> {
        let n = self.grid_size();
        let mut points = Vec::with_capacity(n);
        for index in 0..n {
            let mut config = self.base.clone();
            let mut values = Vec::new();
            let mut rest = index;
            let mut picks = vec![0; self.axes.len()];
            for (k, axis) in self.axes.iter().enumerate().rev() {
                picks[k] = rest % axis.len();
                rest /= axis.len();
            }
            for (axis, &pick) in self.axes.iter().zip(&picks) {
                for (&param, value) in axis.params.iter().zip(&axis.values[pick]) {
                    param
                        .apply(&mut config, value)
                        .map_err(|message| RunnerError::Value {
                            key: param.name().to_string(),
                            message,
                        })?;
                    values.push((param, *value));
                }
            }
            config.validate()?;
            points.push(GridPoint {
                index,
                values,
                config,
            });
        }
        Ok(points)
    }

    /// One run per grid point and seed, point-major.
    pub fn plan(&self) -> Result<Vec<PlannedRun>, RunnerError> {
        self.check_axes()?;
        let mut runs = Vec::with_capacity(self.run_count());
        for point in self.points()? {
            for &seed in &self.seeds {
                let run_seed = derive_seed(seed, point.index);
                runs.push(PlannedRun {
                    point: point.index,
                    seed,
                    run_seed,
                    config: point.config.clone().with_seed(run_seed),
                });
            }
        }
        Ok(runs)
    }

    fn check_axes(&self) -> Result<(), RunnerError> {
        let mut seen = Vec::new();
        for axis in &self.axes {
            if axis.params.is_empty() {
                return Err(RunnerError::Value {
                    key: "axis".into(),
                    message: "an axis needs at least one parameter".into(),
                });
            }
            for &p in &axis.params {
                if seen.contains(&p) {
                    return Err(RunnerError::Value {
                        key: p.name().into(),
                        message: "swept on more than one axis".into(),
                    });
                }
                seen.push(p);
            }
            if let Some(row) = axis.values.iter().find(|r| r.len() != axis.params.len()) {
                return Err(RunnerError::Value {
                    key: axis
                        .params
                        .iter()
                        .map(|p| p.name())
                        .collect::<Vec<_>>()
                        .join("+"),
                    message: format!(
                        "each entry needs {} values, got {}",
                        axis.params.len(),
                        row.len()
                    ),
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> SimConfig {
        SimConfig::new(1, 30, 60, 60, 0.1, 0.3).with_iterations(10)
    }

    #[test]
    fn grid_is_the_product_of_axes() {
        let spec = SweepSpec::new(base())
            .with_axis(Axis::numbers(Param::Beta, [0.1, 0.2, 0.3]))
            .with_axis(Axis::tied(
                &[Param::Workload, Param::Levels],
                [40.0, 100.0].map(AxisValue::Number),
            ))
            .with_seeds(1..=4);
        assert_eq!(spec.grid_size(), 6);
        let runs = spec.plan().unwrap();
        assert_eq!(runs.len(), 24);
        let points = spec.points().unwrap();
        // last axis varies fastest
        assert_eq!(points[1].config.beta, 0.1);
        assert_eq!(points[1].config.workload, 100);
        assert_eq!(points[1].config.levels, 100);
        assert_eq!(points[2].config.beta, 0.2);
        assert_eq!(
            spec.swept(),
            vec![Param::Beta, Param::Workload, Param::Levels]
        );
    }

    #[test]
    fn no_axes_is_one_point() {
        let spec = SweepSpec::new(base());
        assert_eq!(spec.grid_size(), 1);
        assert_eq!(spec.plan().unwrap().len(), 1);
    }

    #[test]
    fn empty_axis_empties_the_grid() {
        let spec = SweepSpec::new(base()).with_axis(Axis::numbers(Param::Beta, []));
        assert_eq!(spec.grid_size(), 0);
        assert!(spec.plan().unwrap().is_empty());
    }

    #[test]
    fn derived_seeds_differ_per_point() {
        let spec = SweepSpec::new(base())
            .with_axis(Axis::numbers(Param::Beta, [0.1, 0.2]))
            .with_seeds([7]);
        let runs = spec.plan().unwrap();
        assert_ne!(runs[0].run_seed, runs[1].run_seed);
        assert_eq!(runs[1].run_seed, derive_seed(7, 1));
        assert_eq!(runs[1].config.seed, runs[1].run_seed);
        assert_eq!(runs[1].id(), "p0001-s7");
    }

    #[test]
    fn invalid_points_are_rejected() {
        let spec = SweepSpec::new(base()).with_axis(Axis::numbers(Param::Gamma, [0.3, 1.5]));
        let err = spec.plan().unwrap_err();
        assert!(err.to_string().contains("gamma"), "{err}");
        let spec = SweepSpec::new(base()).with_axis(Axis::numbers(Param::Dim, [1.5]));
        assert!(spec.plan().is_err());
    }

    #[test]
    fn a_parameter_sweeps_once() {
        let spec = SweepSpec::new(base())
            .with_axis(Axis::numbers(Param::Beta, [0.1]))
            .with_axis(Axis::numbers(Param::Beta, [0.2]));
        assert!(spec.plan().is_err());
    }

    #[test]
    fn variant_axis() {
        let spec = SweepSpec::new(base()).with_axis(Axis::new(
            Param::Variant,
            [
                AxisValue::Variant(Variant::WorkingManagers),
                AxisValue::Variant(Variant::NonWorkingManagers),
            ],
        ));
        let points = spec.points().unwrap();
        assert_eq!(points[1].config.variant, Variant::NonWorkingManagers);
        assert_eq!(points[1].values[0].1.to_string(), "non-working-managers");
    }

    #[test]
    fn observable_names_round_trip() {
        for o in Observable::ALL {
            assert_eq!(Observable::from_name(o.name()), Some(o));
        }
        assert_eq!(Observable::from_name("nope"), None);
    }
}
