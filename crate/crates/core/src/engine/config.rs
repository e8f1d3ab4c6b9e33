use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::LatticeGeometry;

/// What a site does with the load it receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Every site keeps one unit and passes the surplus on.
    WorkingManagers,
    /// A site holding two or more units passes all of them on.
    NonWorkingManagers,
}

/// When transferred packets feed back into the preferences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateMode {
    /// Each packet reinforces its link before the next packet is drawn.
    PerUnit,
    /// A site's packets are all drawn first, then added to the links at once.
    Batch,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown {kind} `{value}`")]
pub struct UnknownName {
    pub kind: &'static str,
    pub value: String,
}

impl FromStr for Variant {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "working" | "working-managers" | "wm" => Ok(Self::WorkingManagers),
            "non-working" | "non-working-managers" | "nonworking" | "nwm" => {
                Ok(Self::NonWorkingManagers)
            }
            _ => Err(UnknownName {
                kind: "variant",
                value: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::WorkingManagers => "working-managers",
            Self::NonWorkingManagers => "non-working-managers",
        })
    }
}

impl FromStr for UpdateMode {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "per-unit" | "unit" => Ok(Self::PerUnit),
            "batch" => Ok(Self::Batch),
            _ => Err(UnknownName {
                kind: "update mode",
                value: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for UpdateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::PerUnit => "per-unit",
            Self::Batch => "batch",
        })
    }
}

/// Trailing windows for averaged observables. `None` picks the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MeasureWindow {
    /// Profiles, depth and failure statistics. Defaults to the last half of the run.
    pub profile: Option<u64>,
    /// Workforce churn. Defaults to the last 1000 iterations.
    pub workforce: Option<u64>,
}

pub const DEFAULT_WORKFORCE_WINDOW: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Dimension `d` of each hyper-plane.
    pub dim: usize,
    /// Side length `L` of each hyper-plane.
    pub side: usize,
    /// Number of levels `L_z`.
    pub levels: usize,
    /// Workload `Q` injected at the top each iteration.
    pub workload: u32,
    pub beta: f64,
    pub gamma: f64,
    pub variant: Variant,
    pub update_mode: UpdateMode,
    pub iterations: u64,
    pub seed: u64,
    #[serde(default)]
    pub window: MeasureWindow,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldIssue {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for FieldIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ConfigError {
    pub issues: Vec<FieldIssue>,
}

impl ConfigError {
    pub fn fields(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.issues.iter().map(|i| i.field)
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("invalid configuration: ")?;
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

impl SimConfig {
    /// Working managers, per-unit reinforcement, seed 0, one iteration.
    pub fn new(
        dim: usize,
        side: usize,
        levels: usize,
        workload: u32,
        beta: f64,
        gamma: f64,
    ) -> Self {
        Self {
            dim,
            side,
            levels,
            workload,
            beta,
            gamma,
            variant: Variant::WorkingManagers,
            update_mode: UpdateMode::PerUnit,
            iterations: 1,
            seed: 0,
            window: MeasureWindow::default(),
        }
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_update_mode(mut self, mode: UpdateMode) -> Self {
        self.update_mode = mode;
        self
    }

    pub fn with_iterations(mut self, iterations: u64) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_window(mut self, window: MeasureWindow) -> Self {
        self.window = window;
        self
    }

    /// Checks every field and returns the lattice geometry on success.
    pub fn validate(&self) -> Result<LatticeGeometry, ConfigError> {
        let mut issues = Vec::new();
        let mut push = |field, message: String| issues.push(FieldIssue { field, message });

        if self.dim == 0 {
            push("d", "must be at least 1".into());
        }
        if self.side < 2 {
            push("L", format!("must be at least 2, got {}", self.side));
        }
        if self.levels == 0 {
            push("Lz", "must be at least 1".into());
        }
        if self.workload == 0 {
            push("Q", "must be at least 1".into());
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            push(
                "beta",
                format!("must be finite and non-negative, got {}", self.beta),
            );
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            push("gamma", format!("must lie in [0, 1], got {}", self.gamma));
        }
        if self.window.profile == Some(0) {
            push("window", "must be at least 1".into());
        }
        if self.window.workforce == Some(0) {
            push("workforce_window", "must be at least 1".into());
        }

        let geometry = if self.dim > 0 && self.side >= 2 && self.levels > 0 {
            match LatticeGeometry::new(self.dim, self.side, self.levels) {
                Ok(g) => Some(g),
                Err(e) => {
                    push("L", e.to_string());
                    None
                }
            }
        } else {
            None
        };

        match geometry {
            Some(g) if issues.is_empty() => Ok(g),
            _ => Err(ConfigError { issues }),
        }
    }

    /// Length of the trailing window for profiles and depth statistics.
    pub fn profile_window(&self) -> u64 {
        let default = (self.iterations / 2).max(1);
        self.window.profile.unwrap_or(default).min(self.iterations)
    }

    pub fn workforce_window(&self) -> u64 {
        self.window
            .workforce
            .unwrap_or(DEFAULT_WORKFORCE_WINDOW)
            .min(self.iterations)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig1() -> SimConfig {
        SimConfig::new(1, 30, 60, 60, 0.1, 0.3)
            .with_iterations(10_000)
            .with_seed(1)
    }

    #[test]
    fn valid_config() {
        let g = fig1().validate().unwrap();
        assert_eq!(g.sites_per_level(), 30);
        assert_eq!(g.levels(), 60);
    }

    #[test]
    fn reports_every_offending_field() {
        let mut c = fig1();
        c.gamma = 1.5;
        c.beta = -1.0;
        c.workload = 0;
        let err = c.validate().unwrap_err();
        let fields: Vec<_> = err.fields().collect();
        assert_eq!(fields, vec!["Q", "beta", "gamma"]);
        assert!(err.to_string().contains("gamma"));
    }

    #[test]
    fn oversized_lattice_is_a_field_error() {
        let c = SimConfig::new(6, 100, 10, 10, 0.1, 0.3);
        let err = c.validate().unwrap_err();
        assert_eq!(err.fields().collect::<Vec<_>>(), vec!["L"]);
    }

    #[test]
    fn names_parse() {
        assert_eq!(
            "non-working".parse::<Variant>(),
            Ok(Variant::NonWorkingManagers)
        );
        assert_eq!(
            "Working_Managers".parse::<Variant>(),
            Ok(Variant::WorkingManagers)
        );
        assert!("bosses".parse::<Variant>().is_err());
        assert_eq!("batch".parse::<UpdateMode>(), Ok(UpdateMode::Batch));
        assert_eq!(
            Variant::NonWorkingManagers.to_string().parse::<Variant>(),
            Ok(Variant::NonWorkingManagers)
        );
    }

    #[test]
    fn window_defaults() {
        let c = fig1();
        assert_eq!(c.profile_window(), 5000);
        assert_eq!(c.workforce_window(), 1000);
        let c = c.with_iterations(10);
        assert_eq!(c.workforce_window(), 10);
        assert_eq!(c.with_iterations(0).profile_window(), 0);
    }
}
