//! Who worked: the union of active sites over a run and the churn between
//! consecutive iterations.

use std::collections::HashSet;

use crate::engine::IterationOutcome;
use crate::lattice::LatticeGeometry;

#[derive(Debug, Clone, PartialEq)]
pub struct WorkforceStats {
    /// Distinct sites active in at least one iteration (`N_t`).
    pub total: usize,
    /// Symmetric difference of consecutive active sets (`N_f`); the first
    /// entry is measured against the empty set.
    pub churn: Vec<usize>,
    /// Mean of `churn` over the trailing window.
    pub mean_churn: f64,
}

/// Active sites of an outcome as sorted lattice cell indices.
pub fn active_cells(geometry: &LatticeGeometry, outcome: &IterationOutcome) -> Vec<usize> {
    outcome
        .active()
        .map(|s| geometry.cell(s.level, s.site))
        .collect()
}

/// Size of the symmetric difference of two sorted, duplicate-free slices.
pub fn symmetric_difference(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut shared) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                shared += 1;
                i += 1;
                j += 1;
            }
        }
    }
    a.len() + b.len() - 2 * shared
}

/// Mean of the last `window` entries (all entries if shorter).
pub fn trailing_mean<T: Copy + Into<f64>>(series: &[T], window: usize) -> f64 {
    let tail = &series[series.len().saturating_sub(window)..];
    if tail.is_empty() {
        return f64::NAN;
    }
    tail.iter().map(|&v| v.into()).sum::<f64>() / tail.len() as f64
}

pub fn workforce_stats(
    geometry: &LatticeGeometry,
    outcomes: &[IterationOutcome],
    window: usize,
) -> WorkforceStats {
    let mut ever = HashSet::new();
    let mut churn = Vec::with_capacity(outcomes.len());
    let mut previous = Vec::new();
    for outcome in outcomes {
        let current = active_cells(geometry, outcome);
        churn.push(symmetric_difference(&previous, &current));
        ever.extend(current.iter().copied());
        previous = current;
    }
    let mean_churn = trailing_mean(&churn.iter().map(|&c| c as f64).collect::<Vec<_>>(), window);
    WorkforceStats {
        total: ever.len(),
        churn,
        mean_churn,
    }
}
