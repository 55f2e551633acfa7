//! Strategy classification: regularizers, probability matchers, variabilizers.
//!
//! Low-load participants produce a single output ratio, judged against the
//! exact binomial confidence interval of probability matching on their input
//! ratio. High-load participants produce six ratios, judged by the
//! conditional entropy of their output set against a Monte Carlo envelope of
//! simulated matchers. Both comparisons ask the same question at different
//! granularities: is this output consistent with sampling from the input?

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::infotheory::ratio_entropy;
use crate::rng;
use crate::stats::{check_confidence, percentile_of_sorted};
use crate::trials::RatioPair;

/// Exact two-sided binomial (Clopper-Pearson) confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinomialInterval {
    pub lower: f64,
    pub upper: f64,
    pub confidence: f64,
    pub successes: u32,
    pub n: u32,
}

/// Clopper-Pearson interval for `successes` out of `n`.
///
/// Endpoints come from bisection on the exact binomial tail sums, accurate
/// to well below 1e-9. Mirrored counts are computed from one canonical side,
/// so `interval(k, n)` is exactly the reflection of `interval(n - k, n)`.
pub fn clopper_pearson(successes: u32, n: u32, confidence: f64) -> Result<BinomialInterval> {
    if n == 0 {
        return Err(Error::InvalidArgument("interval needs at least one trial".into()));
    }
    if successes > n {
        return Err(Error::CountOutOfRange { count: successes, n });
    }
    check_confidence(confidence)?;

    if 2 * successes > n {
        let mirrored = clopper_pearson(n - successes, n, confidence)?;
        return Ok(BinomialInterval {
            lower: 1.0 - mirrored.upper,
            upper: 1.0 - mirrored.lower,
            confidence,
            successes,
            n,
        });
    }

    // Canonical side: successes <= n/2 (so successes < n here).
    let alpha = 1.0 - confidence;
    let tail = alpha / 2.0;
    let table = LnFactorials::up_to(n);
    // Upper limit: the p whose lower tail P(X <= k | p) equals alpha/2;
    // the tail is decreasing in p.
    let upper = mirror_stable(bisect(|p| table.cdf(successes, n, p) - tail, false));
    let lower = if successes == 0 {
        0.0
    } else if 2 * successes == n {
        // Symmetric case: force the exact mirror relation.
        1.0 - upper
    } else {
        // The p whose upper tail P(X >= k | p) equals alpha/2; increasing in p.
        mirror_stable(bisect(|p| table.upper_tail(successes, n, p) - tail, true))
    };
    Ok(BinomialInterval { lower, upper, confidence, successes, n })
}

/// Rounds `x` to the nearest float fixed under `1 - (1 - x)`.
///
/// Reflection `x -> 1 - x` is exact for x in [0.5, 1] but rounds below 0.5,
/// so reflecting an arbitrary endpoint twice can drift an ulp. Snapped
/// endpoints reflect back and forth without changing bits, which keeps
/// mirrored intervals exact complements of each other in both directions.
fn mirror_stable(x: f64) -> f64 {
    1.0 - (1.0 - x)
}

/// Root of a monotone function on (0, 1) by fixed-count bisection.
/// 100 halvings push the bracket far below f64 resolution.
fn bisect(f: impl Fn(f64) -> f64, increasing: bool) -> f64 {
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let value = f(mid);
        let root_is_above = if increasing { value < 0.0 } else { value > 0.0 };
        if root_is_above {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Log-factorial table for exact binomial tail sums in log space.
struct LnFactorials(Vec<f64>);

impl LnFactorials {
    fn up_to(n: u32) -> Self {
        let mut table = Vec::with_capacity(n as usize + 1);
        table.push(0.0);
        for i in 1..=n as u64 {
            table.push(table[i as usize - 1] + (i as f64).ln());
        }
        Self(table)
    }

    fn ln_pmf(&self, k: u32, n: u32, p: f64) -> f64 {
        let ln_choose =
            self.0[n as usize] - self.0[k as usize] - self.0[(n - k) as usize];
        ln_choose + f64::from(k) * p.ln() + f64::from(n - k) * (1.0 - p).ln()
    }

    /// P(X <= k) for X ~ Binomial(n, p), p strictly inside (0, 1).
    fn cdf(&self, k: u32, n: u32, p: f64) -> f64 {
        (0..=k).map(|j| self.ln_pmf(j, n, p).exp()).sum()
    }

    /// P(X >= k).
    fn upper_tail(&self, k: u32, n: u32, p: f64) -> f64 {
        (k..=n).map(|j| self.ln_pmf(j, n, p).exp()).sum()
    }
}

/// Monte Carlo envelope of conditional entropies produced by probability
/// matchers on a fixed input set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyEnvelope {
    pub lower: f64,
    pub upper: f64,
    pub confidence: f64,
    pub runs: u64,
    /// The (majority count, n) input ratios the simulation sampled from.
    pub input_set: Vec<(u32, u32)>,
    /// Set when every simulated run produced the same entropy.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Envelope simulation controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeOptions {
    pub runs: u64,
    pub confidence: f64,
    pub seed: u64,
}

impl Default for EnvelopeOptions {
    fn default() -> Self {
        Self { runs: 100_000, confidence: 0.95, seed: 0 }
    }
}

/// Simulates probability matching on `input_set` and returns the central
/// confidence interval of the resulting conditional entropies.
///
/// Each run resamples every input ratio with replacement (n Bernoulli draws
/// at the input frequency) and scores the mean ratio entropy of the outputs,
/// treating contexts as equiprobable. Runs fan out across the rayon pool on
/// independent RNG streams and merge in stream order, so results depend on
/// the seed but not the worker count.
pub fn matching_envelope(
    input_set: &[(u32, u32)],
    options: &EnvelopeOptions,
) -> Result<EntropyEnvelope> {
    if input_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if options.runs < 10_000 {
        return Err(Error::InvalidArgument(format!(
            "envelope simulation needs at least 10^4 runs, got {}",
            options.runs
        )));
    }
    check_confidence(options.confidence)?;
    for &(x, n) in input_set {
        if n == 0 {
            return Err(Error::InvalidArgument("input ratio with n = 0".into()));
        }
        if x > n {
            return Err(Error::CountOutOfRange { count: x, n });
        }
    }

    let mut entropies: Vec<f64> = (0..options.runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = rng::stream(options.seed, run);
            let total: f64 = input_set
                .iter()
                .map(|&(x, n)| {
                    let p = f64::from(x) / f64::from(n);
                    let hits = (0..n).filter(|_| rng.random::<f64>() < p).count() as u32;
                    ratio_entropy(hits, n).expect("hits cannot exceed n")
                })
                .sum();
            total / input_set.len() as f64
        })
        .collect();

    entropies.sort_by(|a, b| a.partial_cmp(b).expect("entropies are finite"));
    let alpha = 1.0 - options.confidence;
    let lower = percentile_of_sorted(&entropies, alpha / 2.0);
    let upper = percentile_of_sorted(&entropies, 1.0 - alpha / 2.0);
    let warning = (entropies.first() == entropies.last()).then(|| {
        "all simulated runs produced identical entropy; the envelope has zero variance".to_string()
    });
    Ok(EntropyEnvelope {
        lower,
        upper,
        confidence: options.confidence,
        runs: options.runs,
        input_set: input_set.to_vec(),
        warning,
    })
}

/// The three behavioral categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Regularizer,
    Matcher,
    Variabilizer,
}

/// What a classification was judged against.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evidence {
    Frequency { interval: BinomialInterval },
    Entropy { envelope: EntropyEnvelope },
}

/// A classification together with the statistic and evidence behind it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyLabel {
    pub strategy: Strategy,
    /// Output majority frequency (low load) or conditional entropy in bits
    /// (high load).
    pub statistic: f64,
    pub evidence: Evidence,
}

/// Classifies a single-pair participant against the matching interval of
/// their input ratio.
///
/// Outputs inside the interval are matchers. Outside it, the direction of
/// the entropy change decides: drops are regularizers, rises variabilizers.
/// A mirror-image output (same entropy, flipped variants) stays a matcher:
/// it reproduces the input's variability exactly, just with the labels
/// swapped, and the frequency interval was built for the opposite majority.
pub fn classify_low_load(pair: &RatioPair, interval: &BinomialInterval) -> Result<StrategyLabel> {
    if interval.successes != pair.input_majority() || interval.n != pair.n() {
        return Err(Error::InvalidArgument(format!(
            "interval was built for {}:{}, pair input is {}:{}",
            interval.successes,
            interval.n - interval.successes,
            pair.input_majority(),
            pair.n() - pair.input_majority()
        )));
    }
    let statistic = f64::from(pair.effective_output_majority()) / f64::from(pair.n());
    let strategy = if statistic >= interval.lower && statistic <= interval.upper {
        Strategy::Matcher
    } else {
        let input_h = pair.input_entropy();
        let output_h = pair.output_entropy();
        if output_h < input_h {
            Strategy::Regularizer
        } else if output_h > input_h {
            Strategy::Variabilizer
        } else {
            Strategy::Matcher
        }
    };
    Ok(StrategyLabel {
        strategy,
        statistic,
        evidence: Evidence::Frequency { interval: *interval },
    })
}

/// Classifies a six-pair participant by the conditional entropy of their
/// output set against a matching envelope for the same input set.
pub fn classify_high_load(pairs: &[RatioPair], envelope: &EntropyEnvelope) -> Result<StrategyLabel> {
    if pairs.len() != 6 {
        return Err(Error::InvalidArgument(format!(
            "high-load classification needs exactly 6 pairs, got {}",
            pairs.len()
        )));
    }
    let mut inputs: Vec<(u32, u32)> = pairs.iter().map(|p| (p.input_majority(), p.n())).collect();
    let mut expected = envelope.input_set.clone();
    inputs.sort_unstable();
    expected.sort_unstable();
    if inputs != expected {
        return Err(Error::InvalidArgument(
            "envelope input set does not match the participant's input ratios".into(),
        ));
    }
    let statistic = pairs.iter().map(RatioPair::output_entropy).sum::<f64>() / pairs.len() as f64;
    let strategy = if statistic < envelope.lower {
        Strategy::Regularizer
    } else if statistic > envelope.upper {
        Strategy::Variabilizer
    } else {
        Strategy::Matcher
    };
    Ok(StrategyLabel {
        strategy,
        statistic,
        evidence: Evidence::Entropy { envelope: envelope.clone() },
    })
}
