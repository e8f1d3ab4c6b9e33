//! Where the snake hands over to the blob: measured from profiles and
//! predicted by the mean-field balance `β(q−1)/γ = 2d+1`.

use serde::Serialize;
use thiserror::Error;

use super::LevelProfile;

/// Squared widths above this mark the blob.
pub const WIDTH_EPSILON: f64 = 1e-9;

/// A level leaves the snake once its strongest link falls below this fraction
/// of the snake value `(1−γ)(q−1)/γ`.
pub const SNAKE_PREFERENCE_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("beta = 0 never selects a single link, so there is no snake/blob interface")]
pub struct NoTransition;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanFieldInterface {
    /// Charge `q*` at which `β(q*−1)/γ = 2d+1`.
    pub charge: f64,
    /// Depth `z*` at which the snake charge `Q − z` reaches `q*`.
    pub snake_length: f64,
}

pub fn meanfield_interface(
    workload: u32,
    beta: f64,
    gamma: f64,
    dim: usize,
) -> Result<MeanFieldInterface, NoTransition> {
    if beta <= 0.0 {
        return Err(NoTransition);
    }
    let charge = 1.0 + (2 * dim + 1) as f64 * gamma / beta;
    let snake_length = (f64::from(workload) - charge).max(0.0);
    Ok(MeanFieldInterface {
        charge,
        snake_length,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterfaceReport {
    /// Typical first level whose squared width exceeds [`WIDTH_EPSILON`],
    /// taken per iteration (median over the window).
    pub measured_interface_level: Option<usize>,
    /// `Q` minus the width-based interface level.
    pub measured_interface_charge: Option<f64>,
    /// First level whose window-averaged squared width exceeds [`WIDTH_EPSILON`].
    /// A single split anywhere in the window is enough to move it up.
    pub profile_interface_level: Option<usize>,
    /// First level whose strongest link drops out of the snake regime.
    pub preference_interface_level: Option<usize>,
    pub preference_interface_charge: Option<f64>,
    pub predicted: Option<MeanFieldInterface>,
}

impl InterfaceReport {
    /// Levels above the width-based interface, i.e. the snake.
    pub fn snake_length(&self) -> Option<usize> {
        self.measured_interface_level
    }

    /// `split_level` is the typical per-iteration interface level, see
    /// [`RunSummary::median_split_level`](super::RunSummary::median_split_level).
    pub fn from_profile(
        profile: &LevelProfile,
        split_level: Option<usize>,
        workload: u32,
        beta: f64,
        gamma: f64,
        dim: usize,
    ) -> Self {
        let q = f64::from(workload);
        let pref_level = preference_interface(profile, workload, gamma);
        Self {
            measured_interface_level: split_level,
            measured_interface_charge: split_level.map(|z| q - z as f64),
            profile_interface_level: width_interface(profile),
            preference_interface_level: pref_level,
            preference_interface_charge: pref_level.map(|z| q - z as f64),
            predicted: meanfield_interface(workload, beta, gamma, dim).ok(),
        }
    }
}

pub fn width_interface(profile: &LevelProfile) -> Option<usize> {
    profile
        .levels
        .iter()
        .position(|l| l.mean_sq_width.is_some_and(|w| w > WIDTH_EPSILON))
}

/// Stationary weight of the single link used by a snake site of charge `q`,
/// read after the iteration's forgetting step.
pub fn snake_preference(charge: f64, gamma: f64) -> f64 {
    (1.0 - gamma) * (charge - 1.0) / gamma
}

pub fn preference_interface(profile: &LevelProfile, workload: u32, gamma: f64) -> Option<usize> {
    if gamma <= 0.0 {
        return None;
    }
    profile.levels.iter().enumerate().position(|(z, l)| {
        let charge = f64::from(workload) - z as f64;
        if charge < 2.0 {
            return true;
        }
        let expected = snake_preference(charge, gamma);
        l.max_preference
            .is_none_or(|j| j < SNAKE_PREFERENCE_FRACTION * expected)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::LevelStats;

    #[test]
    fn meanfield_examples() {
        let m = meanfield_interface(20, 0.3, 0.3, 1).unwrap();
        assert_eq!(m.charge, 4.0);
        assert_eq!(m.snake_length, 16.0);
        let m = meanfield_interface(20, 0.03, 0.03, 3).unwrap();
        assert!((m.charge - 8.0).abs() < 1e-12);
        let m = meanfield_interface(20, 0.5, 1e-9, 2).unwrap();
        assert!((m.charge - 1.0).abs() < 1e-6);
        assert!((m.snake_length - 19.0).abs() < 1e-6);
        assert_eq!(meanfield_interface(20, 0.0, 0.3, 1), Err(NoTransition));
    }

    #[test]
    fn meanfield_snake_length_never_negative() {
        let m = meanfield_interface(3, 0.01, 0.3, 1).unwrap();
        assert_eq!(m.snake_length, 0.0);
    }

    fn level(width: Option<f64>, max_j: Option<f64>) -> LevelStats {
        LevelStats {
            mean_sq_width: width,
            max_preference: max_j,
            mean_charge: None,
            active_fraction: 1.0,
        }
    }

    #[test]
    fn interfaces_from_profile() {
        let gamma = 0.5;
        // Q = 6: snake preferences (1−γ)(q−1)/γ = 5, 4, 3, ...
        let profile = LevelProfile {
            levels: vec![
                level(Some(0.0), Some(5.0)),
                level(Some(0.0), Some(4.0)),
                level(Some(0.0), Some(1.0)),
                level(Some(0.5), Some(0.4)),
                level(None, None),
            ],
        };
        let r = InterfaceReport::from_profile(&profile, Some(3), 6, 0.5, gamma, 1);
        assert_eq!(r.measured_interface_level, Some(3));
        assert_eq!(r.measured_interface_charge, Some(3.0));
        assert_eq!(r.profile_interface_level, Some(3));
        assert_eq!(r.preference_interface_level, Some(2));
        assert_eq!(r.snake_length(), Some(3));
        assert_eq!(r.predicted.unwrap().charge, 4.0);
    }

    #[test]
    fn pure_snake_has_no_width_interface() {
        let profile = LevelProfile {
            levels: vec![level(Some(0.0), None); 3],
        };
        assert_eq!(width_interface(&profile), None);
    }
}
