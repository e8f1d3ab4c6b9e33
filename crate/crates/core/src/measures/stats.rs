//! Small statistics used by sweeps and curve post-processing.

use serde::{Deserialize, Serialize};

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n − 1). `0.0` for a single value.
pub fn sample_sd(values: &[f64]) -> f64 {
    match values.len() {
        0 => f64::NAN,
        1 => 0.0,
        n => {
            let m = mean(values);
            let ss: f64 = values.iter().map(|v| (v - m).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt()
        }
    }
}

/// Least-squares slope of `values` against their index.
pub fn linear_slope(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return 0.0;
    }
    let x_mean = (n - 1.0) / 2.0;
    let y_mean = mean(values);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &y) in values.iter().enumerate() {
        let dx = i as f64 - x_mean;
        sxy += dx * (y - y_mean);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// Ranks starting at 1, ties share their average rank.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

/// Spearman rank correlation. `NaN` when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "spearman needs paired samples");
    pearson(&ranks(x), &ranks(y))
}

/// β where `(β, fraction)` rows first cross 0.5 upwards, by linear
/// interpolation between the bracketing rows. Rows must be sorted by β.
pub fn estimate_beta50(rows: &[(f64, f64)]) -> Option<f64> {
    rows.windows(2).find_map(|pair| {
        let ((b0, y0), (b1, y1)) = (pair[0], pair[1]);
        (y0 < 0.5 && y1 >= 0.5).then(|| b0 + (0.5 - y0) / (y1 - y0) * (b1 - b0))
    })
}

/// β where an increasing curve first reaches `level`, interpolated like
/// [`estimate_beta50`].
pub fn crossing(rows: &[(f64, f64)], level: f64) -> Option<f64> {
    if let Some(&(b, y)) = rows.first() {
        if y >= level {
            return Some(b);
        }
    }
    rows.windows(2).find_map(|pair| {
        let ((b0, y0), (b1, y1)) = (pair[0], pair[1]);
        (y0 < level && y1 >= level).then(|| b0 + (level - y0) / (y1 - y0) * (b1 - b0))
    })
}

/// Exponents for collapsing `(β, y)` curves: `x' = β·Q^a·L_z^b`, `y' = y / L_z^c`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Rescale {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

pub fn rescale_curve(
    rows: &[(f64, f64)],
    workload: f64,
    levels: f64,
    exps: Rescale,
) -> Vec<(f64, f64)> {
    let x_factor = workload.powf(exps.a) * levels.powf(exps.b);
    let y_factor = levels.powf(exps.c);
    rows.iter()
        .map(|&(beta, y)| (beta * x_factor, y / y_factor))
        .collect()
}
