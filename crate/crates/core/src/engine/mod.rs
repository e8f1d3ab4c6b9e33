//! One iteration pushes a workload `Q` from the centre of the top level down
//! the lattice; a run repeats that against the preferences left behind by
//! earlier iterations.

mod choice;
mod config;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::lattice::LatticeState;
use crate::measures::{Recorder, RunSummary};

pub use choice::choice_probabilities;
use choice::{sample_batch, sample_per_unit, SamplerScratch};
pub use config::{
    ConfigError, FieldIssue, MeasureWindow, SimConfig, UnknownName, UpdateMode, Variant,
    DEFAULT_WORKFORCE_WINDOW,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("a site needs at least one downstream link")]
    NoChoices,
    #[error("beta must be finite and non-negative, got {0}")]
    Beta(f64),
    #[error("preference in slot {slot} is not finite ({value})")]
    NonFinitePreference { slot: usize, value: f64 },
}

/// A loaded site on the bottom level cannot pass work on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("site {site} on the bottom level still holds {load} units")]
pub struct FailureAtBottom {
    pub site: usize,
    pub load: u32,
}

/// Parameters that steer a single site visit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rules {
    pub variant: Variant,
    pub update_mode: UpdateMode,
    pub beta: f64,
}

impl From<&SimConfig> for Rules {
    fn from(c: &SimConfig) -> Self {
        Self {
            variant: c.variant,
            update_mode: c.update_mode,
            beta: c.beta,
        }
    }
}

/// Load held by one site during an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SiteLoad {
    pub level: usize,
    pub site: usize,
    /// Units that arrived at the site.
    pub received: u32,
    /// Units left once the site had passed its share on.
    pub kept: u32,
}

impl SiteLoad {
    pub fn is_active(&self) -> bool {
        self.kept >= 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IterationOutcome {
    /// Deepest level that received any work.
    pub depth: usize,
    /// Some bottom-level site was left holding two or more units.
    pub failed: bool,
    pub units_transferred: u64,
    /// Every site that received work, ordered by `(level, site)`.
    pub sites: Vec<SiteLoad>,
}

impl IterationOutcome {
    /// Sites still holding work when distribution ended.
    pub fn active(&self) -> impl Iterator<Item = &SiteLoad> + '_ {
        self.sites.iter().filter(|s| s.is_active())
    }

    pub fn n_active(&self) -> usize {
        self.active().count()
    }

    /// Sites of one level, in site order.
    pub fn level(&self, level: usize) -> &[SiteLoad] {
        let start = self.sites.partition_point(|s| s.level < level);
        let end = self.sites.partition_point(|s| s.level <= level);
        &self.sites[start..end]
    }
}

/// Hook called after every site visit inside an iteration.
pub trait StepObserver {
    fn after_site(&mut self, state: &LatticeState, level: usize, site: usize);
}

impl StepObserver for () {
    #[inline]
    fn after_site(&mut self, _: &LatticeState, _: usize, _: usize) {}
}

impl<F: FnMut(&LatticeState, usize, usize)> StepObserver for F {
    fn after_site(&mut self, state: &LatticeState, level: usize, site: usize) {
        self(state, level, site)
    }
}

/// Reusable buffers for iterations on one lattice.
#[derive(Debug, Clone)]
pub struct Workspace {
    frontier: Vec<Vec<usize>>,
    prefs: Vec<f64>,
    counts: Vec<u32>,
    fresh: Vec<bool>,
    sampler: SamplerScratch,
}

impl Workspace {
    pub fn new(state: &LatticeState) -> Self {
        let fan = state.geometry().fan_out();
        Self {
            frontier: vec![Vec::new(); state.geometry().levels()],
            prefs: vec![0.0; fan],
            counts: vec![0; fan],
            fresh: vec![false; fan],
            sampler: SamplerScratch::new(fan),
        }
    }
}

/// Passes the surplus of `(level, site)` to the level below and returns the
/// number of packets sent. Sites without surplus send nothing.
pub fn distribute_site<R: Rng + ?Sized>(
    state: &mut LatticeState,
    level: usize,
    site: usize,
    rules: &Rules,
    rng: &mut R,
) -> Result<u32, FailureAtBottom> {
    let mut ws = Workspace::new(state);
    distribute_with(state, level, site, rules, rng, &mut ws)
}

fn distribute_with<R: Rng + ?Sized>(
    state: &mut LatticeState,
    level: usize,
    site: usize,
    rules: &Rules,
    rng: &mut R,
    ws: &mut Workspace,
) -> Result<u32, FailureAtBottom> {
    let load = state.load(level, site);
    if load < 2 {
        return Ok(0);
    }
    if level + 1 >= state.geometry().levels() {
        return Err(FailureAtBottom { site, load });
    }
    let units = match rules.variant {
        Variant::WorkingManagers => load - 1,
        Variant::NonWorkingManagers => load,
    };

    state.slot_preferences(level, site, &mut ws.prefs);
    ws.counts.fill(0);
    match rules.update_mode {
        UpdateMode::PerUnit => sample_per_unit(
            &ws.prefs,
            rules.beta,
            units,
            rng,
            &mut ws.counts,
            &mut ws.sampler,
        ),
        UpdateMode::Batch => sample_batch(
            &ws.prefs,
            rules.beta,
            units,
            rng,
            &mut ws.counts,
            &mut ws.sampler,
        ),
    }
    debug_assert_eq!(ws.counts.iter().sum::<u32>(), units);

    *state.load_mut(level, site) -= units;
    for (slot, &count) in ws.counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let target = state.geometry().neighbor(site, slot);
        *state.load_mut(level + 1, target) += count;
        let link = state.geometry().link(level, site, slot);
        state.preferences_mut().reinforce(link, f64::from(count));
    }
    Ok(units)
}

/// One full iteration: distribute, record, forget, clear.
pub fn run_iteration<R: Rng + ?Sized>(
    state: &mut LatticeState,
    config: &SimConfig,
    rng: &mut R,
) -> IterationOutcome {
    let mut ws = Workspace::new(state);
    run_iteration_observed(state, config, rng, &mut ws, &mut ())
}

/// [`run_iteration`] with caller-owned buffers and a per-site hook.
pub fn run_iteration_observed<R: Rng + ?Sized, O: StepObserver>(
    state: &mut LatticeState,
    config: &SimConfig,
    rng: &mut R,
    ws: &mut Workspace,
    observer: &mut O,
) -> IterationOutcome {
    debug_assert!(state.geometry().total_sites() > 1 << 16 || state.all_loads_zero());
    let rules = Rules::from(config);
    let levels = state.geometry().levels();
    let fan = state.geometry().fan_out();
    let start = state.geometry().center_site();

    let mut outcome = IterationOutcome::default();
    *state.load_mut(0, start) = config.workload;
    ws.frontier[0].push(start);
    observer.after_site(state, 0, start);

    let mut last_level = 0;
    for level in 0..levels {
        if ws.frontier[level].is_empty() {
            break;
        }
        last_level = level;
        let mut sites = std::mem::take(&mut ws.frontier[level]);
        sites.sort_unstable();

        for &site in &sites {
            let received = state.load(level, site);
            if received >= 2 {
                let has_next = level + 1 < levels;
                if has_next {
                    for slot in 0..fan {
                        let target = state.geometry().neighbor(site, slot);
                        ws.fresh[slot] = state.load(level + 1, target) == 0;
                    }
                }
                match distribute_with(state, level, site, &rules, rng, ws) {
                    Ok(sent) => {
                        outcome.units_transferred += u64::from(sent);
                        for slot in 0..fan {
                            let target = state.geometry().neighbor(site, slot);
                            // L = 2 maps several slots onto one site
                            let repeat =
                                (0..slot).any(|k| state.geometry().neighbor(site, k) == target);
                            if ws.fresh[slot] && !repeat && state.load(level + 1, target) > 0 {
                                ws.frontier[level + 1].push(target);
                            }
                        }
                    }
                    Err(FailureAtBottom { .. }) => outcome.failed = true,
                }
                observer.after_site(state, level, site);
            }
            outcome.sites.push(SiteLoad {
                level,
                site,
                received,
                kept: state.load(level, site),
            });
        }
        ws.frontier[level] = sites;
    }
    outcome.depth = last_level;

    state.preferences_mut().decay(1.0 - config.gamma);
    for level in 0..=last_level {
        for &site in &ws.frontier[level] {
            *state.load_mut(level, site) = 0;
        }
        ws.frontier[level].clear();
    }
    outcome
}

/// A seeded simulation that can be stepped one iteration at a time.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: SimConfig,
    state: LatticeState,
    rng: ChaCha8Rng,
    workspace: Workspace,
    completed: u64,
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self, ConfigError> {
        let geometry = config.validate()?;
        let state = LatticeState::new(geometry);
        let workspace = Workspace::new(&state);
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(Self {
            config,
            state,
            rng,
            workspace,
            completed: 0,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn state(&self) -> &LatticeState {
        &self.state
    }

    /// Iterations run so far.
    pub fn completed(&self) -> u64 {
        self.completed
    }

    pub fn step(&mut self) -> IterationOutcome {
        self.step_observed(&mut ())
    }

    pub fn step_observed<O: StepObserver>(&mut self, observer: &mut O) -> IterationOutcome {
        let outcome = run_iteration_observed(
            &mut self.state,
            &self.config,
            &mut self.rng,
            &mut self.workspace,
            observer,
        );
        self.completed += 1;
        outcome
    }
}

/// Runs `config.iterations` iterations from a fresh lattice.
pub fn run(config: &SimConfig) -> Result<RunSummary, ConfigError> {
    run_with(config, |_, _, _| {})
}

/// Like [`run`], also handing each outcome and the post-iteration state to `inspect`.
pub fn run_with<F>(config: &SimConfig, mut inspect: F) -> Result<RunSummary, ConfigError>
where
    F: FnMut(u64, &IterationOutcome, &LatticeState),
{
    let mut sim = Simulation::new(config.clone())?;
    let mut recorder = Recorder::new(config, sim.state().geometry().clone());
    for t in 0..config.iterations {
        let outcome = sim.step();
        recorder.record(&outcome, sim.state());
        inspect(t, &outcome, sim.state());
    }
    Ok(recorder.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeGeometry;

    fn state(d: usize, l: usize, lz: usize) -> LatticeState {
        LatticeState::new(LatticeGeometry::new(d, l, lz).unwrap())
    }

    fn rules(variant: Variant, beta: f64) -> Rules {
        Rules {
            variant,
            update_mode: UpdateMode::PerUnit,
            beta,
        }
    }

    #[test]
    fn no_surplus_no_push() {
        let mut s = state(1, 30, 5);
        *s.load_mut(0, 3) = 1;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let sent = distribute_site(
            &mut s,
            0,
            3,
            &rules(Variant::WorkingManagers, 1.0),
            &mut rng,
        );
        assert_eq!(sent, Ok(0));
        assert_eq!(s.load(0, 3), 1);
    }

    #[test]
    fn strong_preference_takes_the_unit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let mut s = state(1, 30, 5);
            *s.load_mut(0, 15) = 2;
            let link = s.geometry().link(0, 15, 0);
            s.preferences_mut().reinforce(link, 10.0);
            let sent = distribute_site(
                &mut s,
                0,
                15,
                &rules(Variant::WorkingManagers, 10.0),
                &mut rng,
            );
            assert_eq!(sent, Ok(1));
            assert_eq!(s.load(0, 15), 1);
            assert_eq!(s.load(1, 15), 1);
            assert_eq!(s.preference(0, 15, 0), 11.0);
        }
    }

    #[test]
    fn non_working_manager_passes_everything() {
        let mut s = state(1, 30, 5);
        *s.load_mut(2, 7) = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sent = distribute_site(
            &mut s,
            2,
            7,
            &rules(Variant::NonWorkingManagers, 0.0),
            &mut rng,
        );
        assert_eq!(sent, Ok(3));
        assert_eq!(s.load(2, 7), 0);
        assert_eq!(s.load(3, 6) + s.load(3, 7) + s.load(3, 8), 3);
        let j: f64 = (0..3).map(|k| s.preference(2, 7, k)).sum();
        assert_eq!(j, 3.0);
    }

    #[test]
    fn bottom_surplus_is_a_failure() {
        let mut s = state(1, 30, 3);
        *s.load_mut(2, 7) = 2;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let res = distribute_site(
            &mut s,
            2,
            7,
            &rules(Variant::WorkingManagers, 0.0),
            &mut rng,
        );
        assert_eq!(res, Err(FailureAtBottom { site: 7, load: 2 }));
        assert_eq!(s.load(2, 7), 2);
    }

    #[test]
    fn single_unit_stays_put() {
        let cfg = SimConfig::new(1, 30, 10, 1, 0.3, 0.3);
        let mut s = state(1, 30, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let out = run_iteration(&mut s, &cfg, &mut rng);
        assert_eq!(out.depth, 0);
        assert_eq!(out.units_transferred, 0);
        assert!(!out.failed);
        assert_eq!(
            out.sites,
            vec![SiteLoad {
                level: 0,
                site: 15,
                received: 1,
                kept: 1
            }]
        );
        assert!(s.all_loads_zero());
    }

    #[test]
    fn two_units_make_one_step() {
        let mut hits = [0u32; 3];
        for seed in 0..3000 {
            let cfg = SimConfig::new(1, 30, 10, 2, 0.7, 0.3);
            let mut s = state(1, 30, 10);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let out = run_iteration(&mut s, &cfg, &mut rng);
            assert_eq!(out.depth, 1);
            assert_eq!(out.units_transferred, 1);
            let below = out.level(1);
            assert_eq!(below.len(), 1);
            let slot = (0..3)
                .find(|&k| s.geometry().neighbor(15, k) == below[0].site)
                .unwrap();
            hits[slot] += 1;
            for k in 0..3 {
                let expected = if k == slot { 0.7 } else { 0.0 };
                assert!((s.preference(0, 15, k) - expected).abs() < 1e-15);
            }
            assert!((s.preferences().summed_total() - 0.7).abs() < 1e-15);
        }
        // uniform over three slots: each near 1000, sd ≈ 26
        for h in hits {
            assert!((h as f64 - 1000.0).abs() < 130.0, "{hits:?}");
        }
    }

    #[test]
    fn bottom_level_failure_flags_iteration() {
        let cfg = SimConfig::new(1, 30, 3, 10, 0.0, 0.3);
        let mut s = state(1, 30, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let out = run_iteration(&mut s, &cfg, &mut rng);
        // 10 units cannot settle within three levels (at most 1 + 3 + 5 sites)
        assert!(out.failed);
        assert_eq!(out.depth, 2);
        let held: u32 = out.sites.iter().map(|s| s.kept).sum();
        assert_eq!(held, 10);
        assert!(s.all_loads_zero());
    }

    #[test]
    fn single_level_lattice() {
        let cfg = SimConfig::new(1, 5, 1, 3, 0.1, 0.1);
        let mut s = state(1, 5, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let out = run_iteration(&mut s, &cfg, &mut rng);
        assert!(out.failed);
        assert_eq!(out.depth, 0);
        assert_eq!(out.units_transferred, 0);
    }

    #[test]
    fn working_managers_end_with_unit_loads() {
        let cfg = SimConfig::new(2, 10, 40, 30, 0.2, 0.2);
        let mut sim = Simulation::new(cfg).unwrap();
        for _ in 0..200 {
            let out = sim.step();
            assert!(!out.failed);
            assert!(out.sites.iter().all(|s| s.kept == 1));
            assert_eq!(out.sites.len(), 30);
            for (z, level) in (0..=out.depth).map(|z| (z, out.level(z))) {
                assert!(!level.is_empty(), "level {z} empty");
            }
        }
    }

    #[test]
    fn non_working_managers_employ_exactly_q_workers() {
        let cfg =
            SimConfig::new(1, 30, 60, 25, 0.05, 0.3).with_variant(Variant::NonWorkingManagers);
        let mut sim = Simulation::new(cfg).unwrap();
        for _ in 0..200 {
            let out = sim.step();
            if !out.failed {
                assert_eq!(out.n_active(), 25);
                assert!(out.active().all(|s| s.kept == 1));
                assert!(out.sites.iter().all(|s| s.kept == 0 || s.received == 1));
            }
        }
    }

    #[test]
    fn untouched_links_decay_geometrically() {
        let cfg = SimConfig::new(1, 30, 10, 2, 0.5, 0.25).with_seed(7);
        let mut sim = Simulation::new(cfg.clone()).unwrap();
        sim.step();
        let mut s = sim.state().clone();
        let j0: Vec<f64> = (0..3).map(|k| s.preference(0, 15, k)).collect();
        // Q = 1 never reinforces anything.
        let quiet = SimConfig { workload: 1, ..cfg };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut expected = j0.clone();
        for _ in 0..40 {
            run_iteration(&mut s, &quiet, &mut rng);
            for e in &mut expected {
                *e *= 0.75;
            }
        }
        for (k, want) in expected.iter().enumerate() {
            let got = s.preference(0, 15, k);
            assert!((got - want).abs() <= 1e-14 * want.abs().max(1e-300));
        }
    }

    #[test]
    fn same_seed_same_stream() {
        let cfg = SimConfig::new(2, 7, 20, 25, 0.2, 0.3).with_seed(42);
        let mut a = Simulation::new(cfg.clone()).unwrap();
        let mut b = Simulation::new(cfg).unwrap();
        for _ in 0..100 {
            assert_eq!(a.step(), b.step());
        }
    }
}
