//! Observables computed from iteration outcomes and the lattice state.
//!
//! All state-derived values (flow, link preferences) are read between
//! iterations, i.e. after the iteration's forgetting step.

mod interface;
mod stats;
mod width;
mod workforce;

use serde::Serialize;

use crate::engine::{IterationOutcome, SimConfig};
use crate::lattice::{LatticeGeometry, LatticeState};

pub use interface::{
    meanfield_interface, preference_interface, snake_preference, width_interface, InterfaceReport,
    MeanFieldInterface, NoTransition, SNAKE_PREFERENCE_FRACTION, WIDTH_EPSILON,
};
pub use stats::{
    crossing, estimate_beta50, linear_slope, mean, ranks, rescale_curve, sample_sd, spearman,
    Rescale,
};
pub use width::{level_widths, squared_width, squared_width_profile};
pub use workforce::{
    active_cells, symmetric_difference, trailing_mean, workforce_stats, WorkforceStats,
};

/// Sum of every stored link preference.
pub fn flow(state: &LatticeState) -> f64 {
    state.preferences().summed_total()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DepthStats {
    pub mean_depth: f64,
    pub failure_fraction: f64,
}

/// Mean depth and failure fraction over the last `window` outcomes.
pub fn depth_stats(outcomes: &[IterationOutcome], window: usize) -> DepthStats {
    let tail = &outcomes[outcomes.len().saturating_sub(window)..];
    let n = tail.len() as f64;
    DepthStats {
        mean_depth: tail.iter().map(|o| o.depth as f64).sum::<f64>() / n,
        failure_fraction: tail.iter().filter(|o| o.failed).count() as f64 / n,
    }
}

/// Window-averaged statistics of one level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelStats {
    /// Mean squared width of the active sites, over iterations where the level had any.
    pub mean_sq_width: Option<f64>,
    /// Mean of the strongest link leaving the level's working sites.
    pub max_preference: Option<f64>,
    /// Mean total load received by the level, over iterations that reached it.
    pub mean_charge: Option<f64>,
    /// Fraction of window iterations in which the level had active sites.
    pub active_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct LevelProfile {
    pub levels: Vec<LevelStats>,
}

#[derive(Debug, Clone, Default)]
struct LevelAccumulator {
    width_sum: f64,
    width_n: u64,
    pref_sum: f64,
    pref_n: u64,
    charge_sum: f64,
    charge_n: u64,
}

/// Loads and outgoing preferences of the sites that worked in the final iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotRow {
    pub level: usize,
    pub site: usize,
    /// Load received by the site.
    pub q: u32,
    pub preferences: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub config: SimConfig,
    pub flow: Vec<f64>,
    pub depth: Vec<usize>,
    pub n_active: Vec<usize>,
    pub n_flux: Vec<usize>,
    pub failed: Vec<bool>,
    pub units_transferred: Vec<u64>,
    /// Distinct sites active at least once (`N_t`).
    pub workforce_total: usize,
    pub profile: LevelProfile,
    /// First level with two or more active sites, averaged over the profile
    /// window iterations that had one.
    pub mean_split_level: Option<f64>,
    /// Median over all profile window iterations of that first split level;
    /// `None` when at most half of them split at all.
    pub median_split_level: Option<usize>,
    pub snapshot: Vec<SnapshotRow>,
}

impl RunSummary {
    pub fn iterations(&self) -> usize {
        self.flow.len()
    }

    pub fn depth_stats(&self) -> DepthStats {
        let window = self.config.profile_window() as usize;
        let tail = self.depth.len().saturating_sub(window);
        let n = (self.depth.len() - tail) as f64;
        DepthStats {
            mean_depth: self.depth[tail..].iter().map(|&d| d as f64).sum::<f64>() / n,
            failure_fraction: self.failed[tail..].iter().filter(|&&f| f).count() as f64 / n,
        }
    }

    /// Mean churn `N_f` over the workforce window.
    pub fn mean_churn(&self) -> f64 {
        let churn: Vec<f64> = self.n_flux.iter().map(|&c| c as f64).collect();
        trailing_mean(&churn, self.config.workforce_window() as usize)
    }

    pub fn mean_flow(&self) -> f64 {
        trailing_mean(&self.flow, self.config.profile_window() as usize)
    }

    pub fn mean_transferred(&self) -> f64 {
        let units: Vec<f64> = self.units_transferred.iter().map(|&u| u as f64).collect();
        trailing_mean(&units, self.config.profile_window() as usize)
    }

    pub fn interface(&self) -> InterfaceReport {
        InterfaceReport::from_profile(
            &self.profile,
            self.median_split_level,
            self.config.workload,
            self.config.beta,
            self.config.gamma,
            self.config.dim,
        )
    }
}

/// Folds iteration outcomes into a [`RunSummary`] without keeping them.
#[derive(Debug, Clone)]
pub struct Recorder {
    config: SimConfig,
    geometry: LatticeGeometry,
    window_start: u64,
    seen: u64,
    flow: Vec<f64>,
    depth: Vec<usize>,
    n_active: Vec<usize>,
    n_flux: Vec<usize>,
    failed: Vec<bool>,
    units: Vec<u64>,
    previous: Vec<usize>,
    ever_active: Vec<bool>,
    workforce_total: usize,
    levels: Vec<LevelAccumulator>,
    level_active: Vec<u64>,
    split_counts: Vec<u64>,
    window_len: u64,
    snapshot: Vec<SnapshotRow>,
    site_buf: Vec<usize>,
}

impl Recorder {
    pub fn new(config: &SimConfig, geometry: LatticeGeometry) -> Self {
        let n = config.iterations as usize;
        let levels = geometry.levels();
        Self {
            window_start: config.iterations - config.profile_window(),
            seen: 0,
            flow: Vec::with_capacity(n),
            depth: Vec::with_capacity(n),
            n_active: Vec::with_capacity(n),
            n_flux: Vec::with_capacity(n),
            failed: Vec::with_capacity(n),
            units: Vec::with_capacity(n),
            previous: Vec::new(),
            ever_active: vec![false; geometry.total_sites()],
            workforce_total: 0,
            levels: vec![LevelAccumulator::default(); levels],
            level_active: vec![0; levels],
            split_counts: vec![0; levels],
            window_len: 0,
            snapshot: Vec::new(),
            site_buf: Vec::new(),
            config: config.clone(),
            geometry,
        }
    }

    /// Adds one iteration; `state` is the lattice right after that iteration.
    pub fn record(&mut self, outcome: &IterationOutcome, state: &LatticeState) {
        self.flow.push(state.preferences().tracked_total());
        self.depth.push(outcome.depth);
        self.failed.push(outcome.failed);
        self.units.push(outcome.units_transferred);

        let current = active_cells(&self.geometry, outcome);
        self.n_active.push(current.len());
        self.n_flux
            .push(symmetric_difference(&self.previous, &current));
        for &cell in &current {
            if !self.ever_active[cell] {
                self.ever_active[cell] = true;
                self.workforce_total += 1;
            }
        }
        self.previous = current;

        if self.seen >= self.window_start {
            self.accumulate(outcome, state);
        }
        self.seen += 1;
        if self.seen == self.config.iterations {
            let fan = self.geometry.fan_out();
            self.snapshot = outcome
                .sites
                .iter()
                .map(|s| {
                    let mut prefs = vec![0.0; fan];
                    state.slot_preferences(s.level, s.site, &mut prefs);
                    SnapshotRow {
                        level: s.level,
                        site: s.site,
                        q: s.received,
                        preferences: prefs,
                    }
                })
                .collect();
        }
    }

    fn accumulate(&mut self, outcome: &IterationOutcome, state: &LatticeState) {
        self.window_len += 1;
        let fan = self.geometry.fan_out();
        let mut split = None;
        for level in 0..=outcome.depth {
            let sites = outcome.level(level);
            if sites.is_empty() {
                continue;
            }
            let acc = &mut self.levels[level];
            acc.charge_sum += sites.iter().map(|s| f64::from(s.received)).sum::<f64>();
            acc.charge_n += 1;

            let mut best = f64::NEG_INFINITY;
            for s in sites {
                for slot in 0..fan {
                    best = best.max(state.preference(s.level, s.site, slot));
                }
            }
            acc.pref_sum += best;
            acc.pref_n += 1;

            self.site_buf.clear();
            self.site_buf
                .extend(sites.iter().filter(|s| s.is_active()).map(|s| s.site));
            if let Some(w) = squared_width(&self.geometry, &self.site_buf) {
                acc.width_sum += w;
                acc.width_n += 1;
                self.level_active[level] += 1;
            }
            if split.is_none() && self.site_buf.len() >= 2 {
                split = Some(level);
            }
        }
        if let Some(level) = split {
            self.split_counts[level] += 1;
        }
    }

    pub fn finish(self) -> RunSummary {
        let window = self.window_len;
        let ratio = |sum: f64, n: u64| (n > 0).then(|| sum / n as f64);
        let levels = self
            .levels
            .iter()
            .zip(&self.level_active)
            .map(|(acc, &active)| LevelStats {
                mean_sq_width: ratio(acc.width_sum, acc.width_n),
                max_preference: ratio(acc.pref_sum, acc.pref_n),
                mean_charge: ratio(acc.charge_sum, acc.charge_n),
                active_fraction: if window > 0 {
                    active as f64 / window as f64
                } else {
                    0.0
                },
            })
            .collect();
        let split_n: u64 = self.split_counts.iter().sum();
        let split_sum: f64 = self
            .split_counts
            .iter()
            .enumerate()
            .map(|(z, &c)| z as f64 * c as f64)
            .sum();
        let mut cumulative = 0;
        let median_split_level = self.split_counts.iter().position(|&c| {
            cumulative += c;
            2 * cumulative > window
        });
        RunSummary {
            config: self.config,
            flow: self.flow,
            depth: self.depth,
            n_active: self.n_active,
            n_flux: self.n_flux,
            failed: self.failed,
            units_transferred: self.units,
            workforce_total: self.workforce_total,
            profile: LevelProfile { levels },
            mean_split_level: ratio(split_sum, split_n),
            median_split_level,
            snapshot: self.snapshot,
        }
    }
}
