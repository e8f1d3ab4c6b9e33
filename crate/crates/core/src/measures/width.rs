//! Spread of the working region inside one hyper-plane.
//!
//! Positions live on a periodic hyper-cube, so the centre of mass is taken as
//! the circular mean per coordinate and distances use the minimal image.

use std::f64::consts::TAU;

use crate::engine::{IterationOutcome, SiteLoad};
use crate::lattice::LatticeGeometry;

/// Mean squared minimal-image distance of `sites` from their circular centre.
/// `None` for an empty set, exactly `0.0` for a single site.
pub fn squared_width(geometry: &LatticeGeometry, sites: &[usize]) -> Option<f64> {
    match sites.len() {
        0 => return None,
        1 => return Some(0.0),
        _ => {}
    }
    let side = geometry.side() as f64;
    let dim = geometry.dim();
    let mut coords = Vec::with_capacity(dim);
    let mut sums = vec![(0.0f64, 0.0f64); dim];
    for &site in sites {
        geometry.fill_coords(site, &mut coords);
        for (acc, &x) in sums.iter_mut().zip(&coords) {
            let angle = TAU * x as f64 / side;
            acc.0 += angle.sin();
            acc.1 += angle.cos();
        }
    }
    let centers: Vec<f64> = sums
        .iter()
        .map(|&(s, c)| (s.atan2(c) / TAU * side).rem_euclid(side))
        .collect();

    let mut total = 0.0;
    for &site in sites {
        geometry.fill_coords(site, &mut coords);
        for (&x, &center) in coords.iter().zip(&centers) {
            let mut dx = x as f64 - center;
            dx -= side * (dx / side).round();
            total += dx * dx;
        }
    }
    Some(total / sites.len() as f64)
}

/// Squared width of every level of one outcome, over its active sites.
pub fn level_widths(geometry: &LatticeGeometry, outcome: &IterationOutcome) -> Vec<Option<f64>> {
    let mut widths = vec![None; geometry.levels()];
    let mut buf = Vec::new();
    for (level, width) in widths.iter_mut().enumerate().take(outcome.depth + 1) {
        buf.clear();
        buf.extend(
            outcome
                .level(level)
                .iter()
                .filter(|s| s.is_active())
                .map(|s: &SiteLoad| s.site),
        );
        *width = squared_width(geometry, &buf);
    }
    widths
}

/// Per-level squared width averaged over the iterations in `window` where the
/// level had active sites. Levels never active report `None`.
pub fn squared_width_profile(
    geometry: &LatticeGeometry,
    window: &[IterationOutcome],
) -> Vec<Option<f64>> {
    let mut sum = vec![0.0; geometry.levels()];
    let mut seen = vec![0u64; geometry.levels()];
    for outcome in window {
        for (level, w) in level_widths(geometry, outcome).into_iter().enumerate() {
            if let Some(w) = w {
                sum[level] += w;
                seen[level] += 1;
            }
        }
    }
    sum.into_iter()
        .zip(seen)
        .map(|(s, n)| (n > 0).then(|| s / n as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geo(d: usize, l: usize) -> LatticeGeometry {
        LatticeGeometry::new(d, l, 4).unwrap()
    }

    #[test]
    fn point_mass_is_exactly_zero() {
        assert_eq!(squared_width(&geo(1, 30), &[17]), Some(0.0));
        assert_eq!(squared_width(&geo(3, 5), &[99]), Some(0.0));
        assert_eq!(squared_width(&geo(1, 30), &[]), None);
    }

    #[test]
    fn three_adjacent_sites() {
        // centre 15, distances {1, 0, 1}
        let w = squared_width(&geo(1, 30), &[14, 15, 16]).unwrap();
        assert!((w - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn cluster_across_the_seam() {
        let w = squared_width(&geo(1, 30), &[29, 0, 1]).unwrap();
        assert!((w - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn two_dimensional_cluster() {
        let g = geo(2, 10);
        // (4,4), (5,4), (4,5), (5,5): centre (4.5, 4.5), each at 0.5 in both axes
        let sites: Vec<usize> = [(4, 4), (5, 4), (4, 5), (5, 5)]
            .iter()
            .map(|&(x, y)| g.site_of_coords(&[x, y]).unwrap())
            .collect();
        let w = squared_width(&g, &sites).unwrap();
        assert!((w - 0.5).abs() < 1e-12);
    }

    #[test]
    fn translation_invariant() {
        let g = geo(1, 30);
        let base = squared_width(&g, &[3, 4, 7, 8]).unwrap();
        for shift in 0..30 {
            let moved: Vec<usize> = [3, 4, 7, 8].iter().map(|s| (s + shift) % 30).collect();
            assert!((squared_width(&g, &moved).unwrap() - base).abs() < 1e-9);
        }
    }

    #[test]
    fn profile_marks_unused_levels() {
        let g = geo(1, 30);
        let outcome = IterationOutcome {
            depth: 1,
            failed: false,
            units_transferred: 2,
            sites: vec![
                SiteLoad {
                    level: 0,
                    site: 15,
                    received: 3,
                    kept: 1,
                },
                SiteLoad {
                    level: 1,
                    site: 14,
                    received: 1,
                    kept: 1,
                },
                SiteLoad {
                    level: 1,
                    site: 16,
                    received: 1,
                    kept: 1,
                },
            ],
        };
        let profile = squared_width_profile(&g, &[outcome.clone(), outcome]);
        assert_eq!(profile[0], Some(0.0));
        assert!((profile[1].unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(profile[2], None);
        assert_eq!(profile[3], None);
    }
}
