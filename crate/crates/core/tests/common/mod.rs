//! Helpers shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use worknet::engine::{Simulation, UpdateMode, Variant};
use worknet::SimConfig;

/// Small configurations: d ≤ 3, L ≤ 10, Q ≤ 20.
pub fn random_config(rng: &mut impl Rng) -> SimConfig {
    let dim = rng.random_range(1..=3);
    let side = rng.random_range(2..=10);
    let levels = rng.random_range(1..=12);
    let workload = rng.random_range(1..=20);
    let beta = match rng.random_range(0..4) {
        0 => 0.0,
        1 => rng.random_range(0.0..0.1),
        2 => rng.random_range(0.1..1.0),
        _ => rng.random_range(1.0..20.0),
    };
    let gamma = match rng.random_range(0..5) {
        0 => 0.0,
        1 => 1.0,
        _ => rng.random_range(0.0..1.0),
    };
    let variant = if rng.random_bool(0.5) {
        Variant::WorkingManagers
    } else {
        Variant::NonWorkingManagers
    };
    let mode = if rng.random_bool(0.5) {
        UpdateMode::PerUnit
    } else {
        UpdateMode::Batch
    };
    SimConfig::new(dim, side, levels, workload, beta, gamma)
        .with_variant(variant)
        .with_update_mode(mode)
        .with_iterations(rng.random_range(1..=40))
        .with_seed(rng.random())
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Units on the lattice equal `Q` after every site visit, every unit ends up
/// kept somewhere, and the flow follows `flow_t = (1−γ)(flow_{t−1} + T_t)`.
pub fn check_conservation(config: &SimConfig, rel: f64) -> Result<(), String> {
    let mut sim = Simulation::new(config.clone()).map_err(|e| e.to_string())?;
    let q = u64::from(config.workload);
    let mut expected_flow = 0.0;
    for t in 0..config.iterations {
        let mut broken = None;
        let outcome = sim.step_observed(
            &mut |state: &worknet::LatticeState, level: usize, site: usize| {
                if broken.is_none() && state.total_load() != q {
                    broken = Some((level, site, state.total_load()));
                }
            },
        );
        if let Some((level, site, total)) = broken {
            return Err(format!(
                "{config:?}: iteration {t}: {total} units after ({level}, {site})"
            ));
        }
        let kept: u64 = outcome.sites.iter().map(|s| u64::from(s.kept)).sum();
        if kept != q {
            return Err(format!("{config:?}: iteration {t}: {kept} units kept"));
        }
        if !sim.state().all_loads_zero() {
            return Err(format!("{config:?}: iteration {t}: loads left behind"));
        }
        expected_flow = (1.0 - config.gamma) * (expected_flow + outcome.units_transferred as f64);
        let flow = sim.state().preferences().summed_total();
        if !close(flow, expected_flow, rel) {
            return Err(format!(
                "{config:?}: iteration {t}: flow {flow} but recursion gives {expected_flow}"
            ));
        }
    }
    Ok(())
}

pub fn conservation_suite(configs: usize, seed: u64, rel: f64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..configs {
        check_conservation(&random_config(&mut rng), rel)?;
    }
    Ok(())
}

/// Chi-square p-value, merging the sparsest cells until each expects ≥ 5.
pub fn chi_square_p(
    observed: &HashMap<Vec<u32>, u64>,
    expected: &HashMap<Vec<u32>, f64>,
    n: u64,
) -> f64 {
    let mut cells: Vec<(f64, f64)> = expected
        .iter()
        .map(|(key, &p)| (p * n as f64, *observed.get(key).unwrap_or(&0) as f64))
        .collect();
    let stray: u64 = observed
        .iter()
        .filter(|(k, _)| !expected.contains_key(*k))
        .map(|(_, &c)| c)
        .sum();
    if stray > 0 {
        return 0.0;
    }
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for (e, o) in cells {
        acc = (acc.0 + e, acc.1 + o);
        if acc.0 >= 5.0 {
            bins.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if let Some(last) = bins.last_mut() {
        last.0 += acc.0;
        last.1 += acc.1;
    }
    let stat: f64 = bins.iter().map(|(e, o)| (o - e).powi(2) / e).sum();
    let dof = (bins.len() - 1) as f64;
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

/// Every way of putting `n` units into `k` slots, with its uniform
/// multinomial probability `n! / Π c_i! · k^−n`.
pub fn uniform_multinomial(n: u32, k: usize) -> HashMap<Vec<u32>, f64> {
    fn walk(left: u32, slot: usize, counts: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if slot + 1 == counts.len() {
            counts[slot] = left;
            out.push(counts.clone());
            return;
        }
        for c in 0..=left {
            counts[slot] = c;
            walk(left - c, slot + 1, counts, out);
        }
    }
    let mut all = Vec::new();
    walk(n, 0, &mut vec![0; k], &mut all);
    let ln_fact = |m: u32| (1..=m).map(|i| (i as f64).ln()).sum::<f64>();
    all.into_iter()
        .map(|c| {
            let ln_p = ln_fact(n)
                - c.iter().map(|&x| ln_fact(x)).sum::<f64>()
                - n as f64 * (k as f64).ln();
            (c, ln_p.exp())
        })
        .collect()
}

/// p-value of the per-slot counts of the first hand-off at `β = 0` against
/// the uniform multinomial, over `trials` iterations.
pub fn beta_zero_p(dim: usize, workload: u32, trials: u64, seed: u64) -> f64 {
    let config = SimConfig::new(dim, 5, 2, workload, 0.0, 0.3)
        .with_iterations(trials)
        .with_seed(seed);
    let mut sim = Simulation::new(config).unwrap();
    let geometry = sim.state().geometry().clone();
    let centre = geometry.center_site();
    let fan = geometry.fan_out();
    let slot_of: HashMap<usize, usize> = (0..fan)
        .map(|k| (geometry.neighbor(centre, k), k))
        .collect();
    let mut observed: HashMap<Vec<u32>, u64> = HashMap::new();
    for _ in 0..trials {
        let outcome = sim.step();
        let mut counts = vec![0u32; fan];
        for s in outcome.level(1) {
            counts[slot_of[&s.site]] += s.received;
        }
        *observed.entry(counts).or_insert(0) += 1;
    }
    chi_square_p(&observed, &uniform_multinomial(workload - 1, fan), trials)
}
