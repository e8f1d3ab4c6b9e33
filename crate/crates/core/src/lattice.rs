//! Geometry and storage for the stacked hyper-cubic work lattice.
//!
//! The lattice is a stack of `levels` hyper-planes, each a `d`-dimensional
//! hyper-cube of side `L` holding `L^d` sites. Within a plane a site is a flat
//! index `s = Σ_k x_k·L^k`, and the plane wraps helically: neighbour offsets are
//! applied to the flat index modulo `L^d`, so every site has the full fan-out.
//!
//! Work only flows downwards. A site on level `z` links to `2d+1` sites on level
//! `z+1`, stored in a fixed slot order:
//!
//! | slot     | offset      |
//! |----------|-------------|
//! | `0`      | `0` (straight down) |
//! | `2k + 1` | `+L^k`      |
//! | `2k + 2` | `-L^k`      |
//!
//! for `k = 0..d`. Preference weights are stored per `(level, site, slot)`.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LatticeError {
    #[error("dimension must be at least 1, got {0}")]
    Dimension(usize),
    #[error("side length must be at least 2, got {0}")]
    Side(usize),
    #[error("lattice needs at least one level, got {0}")]
    Levels(usize),
    #[error("lattice with L={side}, d={dim}, L_z={levels} is too large to store")]
    TooLarge {
        dim: usize,
        side: usize,
        levels: usize,
    },
    #[error("expected {expected} coordinates, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("coordinate {value} in dimension {axis} is outside [0, {side})")]
    Coordinate {
        axis: usize,
        value: usize,
        side: usize,
    },
    #[error("site {site} is outside [0, {sites})")]
    Site { site: usize, sites: usize },
}

/// Upper bound on stored links, keeps dense preference storage within a few GB.
const MAX_LINKS: usize = 1 << 28;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeGeometry {
    dim: usize,
    side: usize,
    levels: usize,
    sites_per_level: usize,
    /// Non-negative representatives of the slot offsets modulo `sites_per_level`.
    offsets: Vec<usize>,
}

impl LatticeGeometry {
    pub fn new(dim: usize, side: usize, levels: usize) -> Result<Self, LatticeError> {
        if dim == 0 {
            return Err(LatticeError::Dimension(dim));
        }
        if side < 2 {
            return Err(LatticeError::Side(side));
        }
        if levels == 0 {
            return Err(LatticeError::Levels(levels));
        }
        let too_large = LatticeError::TooLarge { dim, side, levels };
        let exp = u32::try_from(dim).map_err(|_| too_large.clone())?;
        let sites_per_level = side.checked_pow(exp).ok_or(too_large.clone())?;
        let links = sites_per_level
            .checked_mul(levels)
            .and_then(|n| n.checked_mul(2 * dim + 1))
            .ok_or(too_large.clone())?;
        if links > MAX_LINKS {
            return Err(too_large);
        }

        let mut offsets = Vec::with_capacity(2 * dim + 1);
        offsets.push(0);
        let mut stride = 1;
        for _ in 0..dim {
            offsets.push(stride % sites_per_level);
            offsets.push((sites_per_level - stride % sites_per_level) % sites_per_level);
            stride *= side;
        }

        Ok(Self {
            dim,
            side,
            levels,
            sites_per_level,
            offsets,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn sites_per_level(&self) -> usize {
        self.sites_per_level
    }

    /// Downstream fan-out `2d+1`.
    pub fn fan_out(&self) -> usize {
        self.offsets.len()
    }

    pub fn total_sites(&self) -> usize {
        self.sites_per_level * self.levels
    }

    pub fn total_links(&self) -> usize {
        self.total_sites() * self.fan_out()
    }

    pub fn site_of_coords(&self, coords: &[usize]) -> Result<usize, LatticeError> {
        if coords.len() != self.dim {
            return Err(LatticeError::Arity {
                expected: self.dim,
                got: coords.len(),
            });
        }
        let mut site = 0;
        let mut stride = 1;
        for (axis, &value) in coords.iter().enumerate() {
            if value >= self.side {
                return Err(LatticeError::Coordinate {
                    axis,
                    value,
                    side: self.side,
                });
            }
            site += value * stride;
            stride *= self.side;
        }
        Ok(site)
    }

    pub fn coords_of_site(&self, site: usize) -> Result<Vec<usize>, LatticeError> {
        self.check_site(site)?;
        let mut coords = Vec::with_capacity(self.dim);
        self.fill_coords(site, &mut coords);
        Ok(coords)
    }

    /// Writes the coordinates of an in-range `site` into `out` (cleared first).
    pub(crate) fn fill_coords(&self, mut site: usize, out: &mut Vec<usize>) {
        out.clear();
        for _ in 0..self.dim {
            out.push(site % self.side);
            site /= self.side;
        }
    }

    pub fn check_site(&self, site: usize) -> Result<(), LatticeError> {
        if site < self.sites_per_level {
            Ok(())
        } else {
            Err(LatticeError::Site {
                site,
                sites: self.sites_per_level,
            })
        }
    }

    /// Site on the next level reached through `slot`. No range checks.
    #[inline]
    pub fn neighbor(&self, site: usize, slot: usize) -> usize {
        let shifted = site + self.offsets[slot];
        if shifted >= self.sites_per_level {
            shifted - self.sites_per_level
        } else {
            shifted
        }
    }

    /// The `2d+1` downstream sites of `site`, in slot order.
    ///
    /// For `L = 2` the `+L^k` and `-L^k` offsets coincide, so the result holds
    /// duplicates.
    pub fn downstream_neighbors(&self, site: usize) -> Result<Vec<usize>, LatticeError> {
        self.check_site(site)?;
        Ok((0..self.fan_out())
            .map(|slot| self.neighbor(site, slot))
            .collect())
    }

    /// Site with coordinate `⌊L/2⌋` in every dimension.
    pub fn center_site(&self) -> usize {
        let half = self.side / 2;
        let mut site = 0;
        let mut stride = 1;
        for _ in 0..self.dim {
            site += half * stride;
            stride *= self.side;
        }
        site
    }

    /// Flat index of `(level, site)` over the whole lattice.
    #[inline]
    pub fn cell(&self, level: usize, site: usize) -> usize {
        level * self.sites_per_level + site
    }

    /// Flat index of the link leaving `(level, site)` through `slot`.
    #[inline]
    pub fn link(&self, level: usize, site: usize, slot: usize) -> usize {
        self.cell(level, site) * self.fan_out() + slot
    }
}

/// Dense per-link preference weights with lazy global forgetting.
///
/// The true weight of link `i` is `raw[i] * scale`. Forgetting multiplies
/// `scale` instead of touching every link; once `scale` gets small the factor
/// is folded back into `raw`.
#[derive(Debug, Clone)]
pub struct Preferences {
    raw: Vec<f64>,
    scale: f64,
    raw_total: f64,
}

const RENORMALIZE_BELOW: f64 = 1e-120;

impl Preferences {
    pub fn new(links: usize) -> Self {
        Self {
            raw: vec![0.0; links],
            scale: 1.0,
            raw_total: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    #[inline]
    pub fn get(&self, link: usize) -> f64 {
        self.raw[link] * self.scale
    }

    /// Adds `amount` (≥ 0) to the weight of `link`.
    #[inline]
    pub fn reinforce(&mut self, link: usize, amount: f64) {
        debug_assert!(amount >= 0.0);
        let delta = amount / self.scale;
        self.raw[link] += delta;
        self.raw_total += delta;
    }

    /// Multiplies every weight by `retain` (= 1 - γ).
    pub fn decay(&mut self, retain: f64) {
        debug_assert!((0.0..=1.0).contains(&retain));
        self.scale *= retain;
        if self.scale < RENORMALIZE_BELOW {
            self.renormalize();
        }
    }

    fn renormalize(&mut self) {
        let scale = self.scale;
        let mut total = 0.0;
        for value in &mut self.raw {
            *value *= scale;
            total += *value;
        }
        self.raw_total = total;
        self.scale = 1.0;
    }

    /// Sum of all weights, maintained incrementally.
    pub fn tracked_total(&self) -> f64 {
        self.raw_total * self.scale
    }

    /// Sum of all weights by direct summation over every link.
    pub fn summed_total(&self) -> f64 {
        self.raw.iter().sum::<f64>() * self.scale
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.raw.iter().map(move |v| v * self.scale)
    }
}

/// Workloads and preferences of one simulation.
#[derive(Debug, Clone)]
pub struct LatticeState {
    geometry: LatticeGeometry,
    load: Vec<u32>,
    prefs: Preferences,
}

impl LatticeState {
    pub fn new(geometry: LatticeGeometry) -> Self {
        let load = vec![0; geometry.total_sites()];
        let prefs = Preferences::new(geometry.total_links());
        Self {
            geometry,
            load,
            prefs,
        }
    }

    pub fn geometry(&self) -> &LatticeGeometry {
        &self.geometry
    }

    #[inline]
    pub fn load(&self, level: usize, site: usize) -> u32 {
        self.load[self.geometry.cell(level, site)]
    }

    #[inline]
    pub(crate) fn load_mut(&mut self, level: usize, site: usize) -> &mut u32 {
        let cell = self.geometry.cell(level, site);
        &mut self.load[cell]
    }

    /// Total workload currently held anywhere on the lattice.
    pub fn total_load(&self) -> u64 {
        self.load.iter().map(|&q| u64::from(q)).sum()
    }

    pub fn all_loads_zero(&self) -> bool {
        self.load.iter().all(|&q| q == 0)
    }

    #[inline]
    pub fn preference(&self, level: usize, site: usize, slot: usize) -> f64 {
        self.prefs.get(self.geometry.link(level, site, slot))
    }

    /// Writes the `2d+1` outgoing weights of `(level, site)` into `out`.
    pub fn slot_preferences(&self, level: usize, site: usize, out: &mut [f64]) {
        let base = self.geometry.link(level, site, 0);
        for (slot, value) in out.iter_mut().enumerate() {
            *value = self.prefs.get(base + slot);
        }
    }

    pub fn preferences(&self) -> &Preferences {
        &self.prefs
    }

    pub(crate) fn preferences_mut(&mut self) -> &mut Preferences {
        &mut self.prefs
    }
}
