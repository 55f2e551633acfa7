//! Bootstrap percentile intervals for means and stationary regularity.
//!
//! Resamples are independent, so they fan out across the rayon pool; each
//! resample derives its own RNG stream from the master seed and results are
//! merged in stream order. The same seed therefore gives identical intervals
//! whatever the worker count.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::markov::{
    fit_transition_matrix, stationary_distribution, stationary_regularity, FitOptions,
    SolveOptions,
};
use crate::rng;

/// Percentile bootstrap interval around a point estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapResult {
    /// Statistic computed on the full dataset, not a resample aggregate.
    pub point_estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub resamples: u64,
    pub confidence: f64,
    pub seed: u64,
}

/// Bootstrap configuration; defaults follow the reporting conventions used
/// throughout (10^4 resamples, 95% intervals).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BootstrapOptions {
    pub resamples: u64,
    pub confidence: f64,
    pub seed: u64,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self { resamples: 10_000, confidence: 0.95, seed: 0 }
    }
}

fn check_options(options: &BootstrapOptions) -> Result<()> {
    if options.resamples < 1000 {
        return Err(Error::InvalidArgument(format!(
            "bootstrap needs at least 1000 resamples, got {}",
            options.resamples
        )));
    }
    check_confidence(options.confidence)
}

pub(crate) fn check_confidence(confidence: f64) -> Result<()> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "confidence must lie strictly between 0 and 1, got {confidence}"
        )));
    }
    Ok(())
}

/// Linear-interpolation percentile of pre-sorted values (the common
/// "type 7" definition), `p` in [0, 1].
pub(crate) fn percentile_of_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (h - lo as f64)
}

/// Central interval of a set of resampled statistics.
fn percentile_interval(mut stats: Vec<f64>, confidence: f64) -> (f64, f64) {
    stats.sort_by(|a, b| a.partial_cmp(b).expect("statistics are finite"));
    let alpha = 1.0 - confidence;
    (
        percentile_of_sorted(&stats, alpha / 2.0),
        percentile_of_sorted(&stats, 1.0 - alpha / 2.0),
    )
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Percentile bootstrap interval for the mean of `values`.
pub fn bootstrap_mean(values: &[f64], options: &BootstrapOptions) -> Result<BootstrapResult> {
    if values.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_options(options)?;
    let n = values.len();
    let stats: Vec<f64> = (0..options.resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(options.seed, r);
            let total: f64 = (0..n).map(|_| values[rng.random_range(0..n)]).sum();
            total / n as f64
        })
        .collect();
    let (lower, upper) = percentile_interval(stats, options.confidence);
    Ok(BootstrapResult {
        point_estimate: mean(values),
        lower,
        upper,
        resamples: options.resamples,
        confidence: options.confidence,
        seed: options.seed,
    })
}

fn regularity_of(pairs: &[(u32, u32)], fit: &FitOptions, solve: &SolveOptions) -> Result<f64> {
    let matrix = fit_transition_matrix(pairs, fit)?;
    let stationary = stationary_distribution(&matrix, solve)?;
    Ok(stationary_regularity(&stationary))
}

/// Bootstrap interval for the stationary regularity of a transition matrix
/// fitted from (input, output) count pairs; pairs are the resampling unit.
///
/// Any resample whose stationary solve fails aborts the whole bootstrap with
/// that error rather than silently dropping the draw.
pub fn bootstrap_stationary(
    pairs: &[(u32, u32)],
    fit: &FitOptions,
    solve: &SolveOptions,
    options: &BootstrapOptions,
) -> Result<BootstrapResult> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_options(options)?;
    let n = pairs.len();
    let stats: Result<Vec<f64>> = (0..options.resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(options.seed, r);
            let resample: Vec<(u32, u32)> =
                (0..n).map(|_| pairs[rng.random_range(0..n)]).collect();
            regularity_of(&resample, fit, solve)
        })
        .collect();
    let (lower, upper) = percentile_interval(stats?, options.confidence);
    Ok(BootstrapResult {
        point_estimate: regularity_of(pairs, fit, solve)?,
        lower,
        upper,
        resamples: options.resamples,
        confidence: options.confidence,
        seed: options.seed,
    })
}

/// Participant-level variant of [`bootstrap_stationary`]: each group is one
/// participant's pairs, and groups are resampled whole.
pub fn bootstrap_stationary_grouped(
    groups: &[Vec<(u32, u32)>],
    fit: &FitOptions,
    solve: &SolveOptions,
    options: &BootstrapOptions,
) -> Result<BootstrapResult> {
    if groups.is_empty() || groups.iter().all(|g| g.is_empty()) {
        return Err(Error::EmptyDataset);
    }
    check_options(options)?;
    let n = groups.len();
    let stats: Result<Vec<f64>> = (0..options.resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(options.seed, r);
            let resample: Vec<(u32, u32)> = (0..n)
                .flat_map(|_| groups[rng.random_range(0..n)].iter().copied())
                .collect();
            regularity_of(&resample, fit, solve)
        })
        .collect();
    let full: Vec<(u32, u32)> = groups.iter().flatten().copied().collect();
    let (lower, upper) = percentile_interval(stats?, options.confidence);
    Ok(BootstrapResult {
        point_estimate: regularity_of(&full, fit, solve)?,
        lower,
        upper,
        resamples: options.resamples,
        confidence: options.confidence,
        seed: options.seed,
    })
}
