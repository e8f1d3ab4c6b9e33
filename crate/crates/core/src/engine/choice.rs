//! Logit choice over a site's downstream links and the unit-packet samplers.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use super::EngineError;

/// Logit choice probabilities `p_k ∝ exp(β·J_k)`, shifted by the largest logit.
pub fn choice_probabilities(prefs: &[f64], beta: f64) -> Result<Vec<f64>, EngineError> {
    if prefs.is_empty() {
        return Err(EngineError::NoChoices);
    }
    if !beta.is_finite() || beta < 0.0 {
        return Err(EngineError::Beta(beta));
    }
    if let Some((slot, &value)) = prefs.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(EngineError::NonFinitePreference { slot, value });
    }
    let mut probs = vec![0.0; prefs.len()];
    fill_probabilities(prefs, beta, &mut probs);
    Ok(probs)
}

pub(crate) fn fill_probabilities(prefs: &[f64], beta: f64, out: &mut [f64]) {
    let max = prefs
        .iter()
        .map(|j| beta * j)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (p, j) in out.iter_mut().zip(prefs) {
        *p = (beta * j - max).exp();
        total += *p;
    }
    for p in out.iter_mut() {
        *p /= total;
    }
}

/// Buffers reused across site visits.
#[derive(Debug, Clone, Default)]
pub(crate) struct SamplerScratch {
    logits: Vec<f64>,
    weights: Vec<f64>,
    probs: Vec<f64>,
}

impl SamplerScratch {
    pub(crate) fn new(fan_out: usize) -> Self {
        Self {
            logits: vec![0.0; fan_out],
            weights: vec![0.0; fan_out],
            probs: vec![0.0; fan_out],
        }
    }
}

/// Take the run-length shortcut when the other slots together weigh less than
/// this fraction of the dominant one.
const DOMINANCE_RATIO: f64 = 0.25;

/// Weights past this are rebuilt from the logits before they can overflow.
const WEIGHT_CEILING: f64 = 1e280;

/// Sends `units` packets one at a time. Each packet raises the logit of its
/// slot by `beta`, so later packets of the same visit see the updated weights.
/// Per-slot packet counts are added into `counts`.
pub(crate) fn sample_per_unit<R: Rng + ?Sized>(
    prefs: &[f64],
    beta: f64,
    units: u32,
    rng: &mut R,
    counts: &mut [u32],
    scratch: &mut SamplerScratch,
) {
    let fan = prefs.len();
    let logits = &mut scratch.logits[..fan];
    let weights = &mut scratch.weights[..fan];
    for (l, j) in logits.iter_mut().zip(prefs) {
        *l = beta * j;
    }
    let boost = beta.exp();
    let shrink = (-beta).exp();

    let mut remaining = units;
    rebuild_weights(logits, weights);
    while remaining > 0 {
        let (top, top_weight) = dominant(weights);
        let total: f64 = weights.iter().sum();
        let others = total - top_weight;
        let ratio = others / top_weight;

        if ratio < DOMINANCE_RATIO && beta > 0.0 {
            // Number of consecutive packets that go to `top`: P(run ≥ i) is the
            // product of the per-packet odds 1/(1 + ratio·e^{-βk}), k < i.
            let u: f64 = rng.random();
            let mut run = 0;
            let mut survive = 1.0;
            let mut rho = ratio;
            while run < remaining {
                let odds = 1.0 / (1.0 + rho);
                if odds == 1.0 {
                    run = remaining;
                    break;
                }
                let next = survive * odds;
                if next <= u {
                    break;
                }
                survive = next;
                run += 1;
                rho *= shrink;
            }
            counts[top] += run;
            remaining -= run;
            logits[top] += beta * f64::from(run);
            rebuild_weights(logits, weights);
            if remaining == 0 {
                break;
            }
            // The run ended on a packet that went elsewhere.
            let others: f64 = weights
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != top)
                .map(|(_, w)| w)
                .sum();
            let target = rng.random::<f64>() * others;
            let slot = pick(weights, target, Some(top));
            counts[slot] += 1;
            remaining -= 1;
            bump(logits, weights, slot, beta, boost);
        } else {
            let target = rng.random::<f64>() * total;
            let slot = pick(weights, target, None);
            counts[slot] += 1;
            remaining -= 1;
            bump(logits, weights, slot, beta, boost);
        }
    }
}

/// Draws all `units` packets from the probabilities fixed at the start of the
/// visit (multinomial via successive binomial splits).
pub(crate) fn sample_batch<R: Rng + ?Sized>(
    prefs: &[f64],
    beta: f64,
    units: u32,
    rng: &mut R,
    counts: &mut [u32],
    scratch: &mut SamplerScratch,
) {
    let fan = prefs.len();
    let probs = &mut scratch.probs[..fan];
    fill_probabilities(prefs, beta, probs);
    let mut remaining = u64::from(units);
    let mut mass = 1.0;
    for slot in 0..fan {
        if remaining == 0 {
            break;
        }
        let drawn = if slot + 1 == fan {
            remaining
        } else {
            let p = (probs[slot] / mass).clamp(0.0, 1.0);
            mass -= probs[slot];
            Binomial::new(remaining, p)
                .expect("probability clamped to [0, 1]")
                .sample(rng)
        };
        counts[slot] += drawn as u32;
        remaining -= drawn;
    }
}

fn rebuild_weights(logits: &[f64], weights: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for (w, l) in weights.iter_mut().zip(logits) {
        *w = (l - max).exp();
    }
}

fn bump(logits: &mut [f64], weights: &mut [f64], slot: usize, beta: f64, boost: f64) {
    logits[slot] += beta;
    let grown = weights[slot] * boost;
    if grown.is_finite() && grown < WEIGHT_CEILING {
        weights[slot] = grown;
    } else {
        rebuild_weights(logits, weights);
    }
}

fn dominant(weights: &[f64]) -> (usize, f64) {
    let mut best = (0, weights[0]);
    for (k, &w) in weights.iter().enumerate().skip(1) {
        if w > best.1 {
            best = (k, w);
        }
    }
    best
}

/// First slot whose cumulative weight exceeds `target`, optionally skipping one.
fn pick(weights: &[f64], target: f64, skip: Option<usize>) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &w) in weights.iter().enumerate() {
        if Some(k) == skip {
            continue;
        }
        acc += w;
        last = k;
        if target < acc {
            return k;
        }
    }
    last
}
