//! Ready-made sweeps producing the data behind each figure at desk scale.

use std::ops::RangeInclusive;

use super::config::spacing;
use super::sweep::{Axis, AxisValue, Observable, Param, PerRun, SweepSpec};
use super::RunnerError;
use crate::engine::{SimConfig, Variant};
use crate::measures::Rescale;

pub const FIGURES: RangeInclusive<u32> = 1..=8;

/// β grid shared by the width-profile and workforce figures.
pub const PROFILE_BETAS: [f64; 5] = [0.02, 0.04, 0.08, 0.16, 0.32];

/// Workloads (equal to the lattice depth) of the manager-variant sweeps.
pub const MANAGER_WORKLOADS: [f64; 4] = [40.0, 100.0, 200.0, 400.0];

/// Iterations per run in the manager-variant sweeps.
pub const MANAGER_ITERATIONS: u64 = 2000;

pub fn depth_betas() -> Vec<f64> {
    spacing(0.01, 1.0, 10, true)
}

pub fn manager_betas() -> Vec<f64> {
    spacing(0.001, 1.0, 20, true)
}

fn dims_side_30() -> Axis {
    Axis::zipped(
        &[Param::Dim, Param::Side],
        [vec![1.0, 30.0], vec![2.0, 30.0], vec![3.0, 30.0]],
    )
}

fn manager_sweep() -> SweepSpec {
    let base = SimConfig::new(1, 30, 40, 40, 0.1, 0.3)
        .with_variant(Variant::NonWorkingManagers)
        .with_iterations(MANAGER_ITERATIONS);
    let mut spec = SweepSpec::new(base)
        .with_axis(Axis::tied(
            &[Param::Workload, Param::Levels],
            MANAGER_WORKLOADS.map(AxisValue::Number),
        ))
        .with_axis(Axis::numbers(Param::Beta, manager_betas()))
        .with_seeds(1..=10)
        .with_observables(&[Observable::Depth, Observable::FailureFraction]);
    spec.beta50 = true;
    spec
}

pub fn figure_preset(n: u32) -> Result<SweepSpec, RunnerError> {
    let spec = match n {
        1 => {
            let base = SimConfig::new(1, 30, 60, 60, 0.1, 0.3).with_iterations(10_000);
            let mut spec = SweepSpec::new(base)
                .with_axis(Axis::zipped(
                    &[Param::Dim, Param::Side],
                    [vec![1.0, 30.0], vec![4.0, 9.0]],
                ))
                .with_seeds([1])
                .with_observables(&[Observable::Flow, Observable::Transferred, Observable::Depth]);
            spec.per_run.timeseries = true;
            spec
        }
        2 => {
            let base = SimConfig::new(1, 30, 60, 20, 0.3, 0.3).with_iterations(2000);
            let mut spec = SweepSpec::new(base)
                .with_seeds([1])
                .with_observables(&[Observable::InterfaceCharge, Observable::Depth]);
            spec.per_run = PerRun {
                timeseries: false,
                profile: true,
                snapshot: true,
            };
            spec
        }
        3 => {
            let base = SimConfig::new(1, 30, 30, 20, 0.03, 0.03).with_iterations(5000);
            let mut spec = SweepSpec::new(base)
                .with_axis(dims_side_30())
                .with_seeds([1])
                .with_observables(&[Observable::InterfaceCharge, Observable::Depth]);
            spec.per_run.profile = true;
            spec
        }
        4 => {
            let base = SimConfig::new(1, 30, 60, 60, 0.1, 0.3).with_iterations(10_000);
            let mut spec = SweepSpec::new(base)
                .with_axis(Axis::numbers(Param::Beta, PROFILE_BETAS))
                .with_seeds(1..=10)
                .with_observables(&[Observable::Depth, Observable::InterfaceCharge]);
            spec.per_run.profile = true;
            spec
        }
        5 => {
            let base = SimConfig::new(1, 30, 60, 60, 0.1, 0.3).with_iterations(10_000);
            SweepSpec::new(base)
                .with_axis(dims_side_30())
                .with_axis(Axis::numbers(Param::Beta, depth_betas()))
                .with_seeds(1..=10)
                .with_observables(&[Observable::Depth])
        }
        6 => {
            let base = SimConfig::new(1, 30, 60, 60, 0.1, 0.3).with_iterations(10_000);
            SweepSpec::new(base)
                .with_axis(dims_side_30())
                .with_axis(Axis::numbers(Param::Beta, PROFILE_BETAS))
                .with_seeds([1])
                .with_observables(&[Observable::WorkforceTotal, Observable::Churn])
        }
        7 => manager_sweep(),
        8 => {
            let mut spec = manager_sweep();
            spec.rescale = Some(Rescale {
                a: 0.0,
                b: 0.0,
                c: 1.0,
            });
            spec
        }
        other => return Err(RunnerError::UnknownFigure(other)),
    };
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_plans() {
        for n in FIGURES {
            let spec = figure_preset(n).unwrap();
            assert!(spec.run_count() > 0, "figure {n}");
            spec.plan().unwrap();
        }
    }

    #[test]
    fn figure_one_is_the_equilibration_run() {
        let spec = figure_preset(1).unwrap();
        let points = spec.points().unwrap();
        let c = &points[0].config;
        assert_eq!(
            (c.iterations, c.beta, c.gamma, c.workload),
            (10_000, 0.1, 0.3, 60)
        );
        assert_eq!((points[1].config.dim, points[1].config.side), (4, 9));
        assert!(spec.per_run.timeseries);
    }

    #[test]
    fn figure_seven_sweeps_managers() {
        let spec = figure_preset(7).unwrap();
        assert_eq!(spec.seeds.len(), 10);
        assert_eq!(spec.grid_size(), 4 * 20);
        assert_eq!(spec.base.variant, Variant::NonWorkingManagers);
        for p in spec.points().unwrap() {
            assert_eq!(p.config.workload as usize, p.config.levels);
        }
        assert!(spec.beta50);
    }

    #[test]
    fn figure_nine_does_not_exist() {
        assert!(matches!(
            figure_preset(9),
            Err(RunnerError::UnknownFigure(9))
        ));
        assert!(figure_preset(0).is_err());
    }
}
