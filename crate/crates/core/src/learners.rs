//! Parametric synthetic learners covering the three strategy categories.
//!
//! A learner is a single exponent gamma applied to the input odds:
//! p' = p^g / (p^g + (1-p)^g). Gamma of 1 reproduces the input probability
//! (a probability matcher), larger gammas sharpen toward the majority
//! (regularizers), smaller ones flatten toward 5:5 (variabilizers). The two
//! degenerate inputs 0:n and n:0 are fixed points for every gamma, and
//! production keeps binomial noise so populations look like samples, not
//! point masses.

use rand::distr::weighted::WeightedIndex;
use rand::prelude::Distribution as RandDistribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::trials::{Condition, Domain, Load, PairRecord, ParticipantRecord, RatioPair};

/// One synthetic learner: a regularization exponent over n-trial ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LearnerModel {
    gamma: f64,
    n: u32,
}

impl LearnerModel {
    pub fn new(gamma: f64, n: u32) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "gamma must be finite and positive, got {gamma}"
            )));
        }
        if n == 0 {
            return Err(Error::InvalidArgument("learner needs at least one trial".into()));
        }
        Ok(Self { gamma, n })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// Probability of producing the focal variant given its input count.
    ///
    /// Computed through the odds form 1 / (1 + ((1-p)/p)^g), which handles
    /// arbitrarily large gamma by saturating instead of overflowing. Inputs
    /// below n/2 reflect the computation for n - input, so
    /// `response_probability(i) = 1 - response_probability(n - i)` holds bit
    /// for bit across the whole state space.
    pub fn response_probability(&self, input: u32) -> f64 {
        assert!(input <= self.n, "input count exceeds n");
        let n = self.n;
        if 2 * input < n {
            return 1.0 - self.response_probability(n - input);
        }
        if input == n {
            return 1.0;
        }
        let p = f64::from(input) / f64::from(n);
        if self.gamma == 1.0 {
            return p;
        }
        let odds = (1.0 - p) / p;
        1.0 / (1.0 + odds.powf(self.gamma))
    }

    /// One production round: n trials at the transformed probability.
    pub fn respond(&self, input: u32, rng: &mut impl Rng) -> u32 {
        let p = self.response_probability(input);
        (0..self.n).filter(|_| rng.random::<f64>() < p).count() as u32
    }
}

/// A mixture component for population simulation; weights are relative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixComponent {
    pub gamma: f64,
    pub weight: f64,
}

/// Population simulation controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PopulationOptions {
    pub participants: usize,
    /// Trials per ratio.
    pub n: u32,
    pub domain: Domain,
    pub seed: u64,
}

/// Simulates a population of learners drawn from a gamma mixture.
///
/// Each participant gets an independent RNG stream keyed by their index, a
/// gamma drawn from the mix, and responds once to every input count. The
/// returned records are majority-coded like ingested data, so they feed the
/// trial analyses, the classifiers, and matrix fitting directly. Input
/// counts refer to one fixed variant and may sit below n/2; the record then
/// names the other variant as the majority.
pub fn simulate_population(
    mix: &[MixComponent],
    inputs: &[u32],
    options: &PopulationOptions,
) -> Result<Vec<ParticipantRecord>> {
    if mix.is_empty() {
        return Err(Error::InvalidArgument("learner mix is empty".into()));
    }
    for component in mix {
        if !(component.gamma > 0.0) || !component.gamma.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "mix gamma must be finite and positive, got {}",
                component.gamma
            )));
        }
        if !(component.weight >= 0.0) || !component.weight.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "mix weight must be finite and non-negative, got {}",
                component.weight
            )));
        }
    }
    if options.participants == 0 {
        return Err(Error::InvalidArgument("population needs at least one participant".into()));
    }
    let load = match inputs.len() {
        1 => Load::Low,
        6 => Load::High,
        other => {
            return Err(Error::InvalidArgument(format!(
                "input set must have 1 or 6 ratios to form a condition, got {other}"
            )));
        }
    };
    let n = options.n;
    for &input in inputs {
        if input > n {
            return Err(Error::CountOutOfRange { count: input, n });
        }
    }
    let weights = WeightedIndex::new(mix.iter().map(|c| c.weight))
        .map_err(|e| Error::InvalidArgument(format!("mix weights: {e}")))?;
    let condition = Condition { domain: options.domain, load };

    (0..options.participants)
        .into_par_iter()
        .map(|idx| {
            let mut rng = rng::stream(options.seed, idx as u64);
            let gamma = mix[weights.sample(&mut rng)].gamma;
            let model = LearnerModel { gamma, n };
            let pairs: Result<Vec<PairRecord>> = inputs
                .iter()
                .enumerate()
                .map(|(slot, &input)| {
                    let output = model.respond(input, &mut rng);
                    // Majority-code the pair the way ingestion stores it.
                    let pair = if 2 * input > n {
                        RatioPair::new(n, input, output)
                    } else if 2 * input < n {
                        RatioPair::new(n, n - input, n - output)
                    } else {
                        RatioPair::new_tied(n, output, rng.random::<bool>())
                    }?;
                    Ok(PairRecord { context_id: format!("c{}", slot + 1), pair })
                })
                .collect();
            ParticipantRecord::new(format!("p{:05}", idx + 1), condition, pairs?)
        })
        .collect()
}
