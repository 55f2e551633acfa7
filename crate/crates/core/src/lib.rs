//! Entropy-based analysis of binary frequency learning.
//!
//! Given input/output ratio pairs from a two-variant learning task (each
//! phase presents a variant ratio like 7:3 over n trials and records what
//! the learner reproduces), this crate measures how much learners regularize
//! or variabilize, classifies response strategies against exact sampling
//! baselines, and projects long-run outcomes with fitted Markov chains.
//!
//! Module map:
//!
//! - [`infotheory`]: Shannon entropy, conditional/joint entropy, and the
//!   six-quantity profile of a variant-by-context table.
//! - [`trials`]: ratio-pair records, the CSV data schema, and entropy-change
//!   measures over datasets.
//! - [`primacy`]: position of minority tokens within input sequences and the
//!   direction of any regularization.
//! - [`classify`]: Clopper-Pearson intervals and Monte Carlo matching
//!   envelopes used to label regularizers, matchers, and variabilizers.
//! - [`markov`]: transition-matrix fitting over majority-count states,
//!   stationary distributions, and chain iteration/sampling.
//! - [`learners`]: synthetic learners with a tunable regularization exponent
//!   for calibration and power studies.
//! - [`stats`]: percentile bootstrap for scalar statistics, including the
//!   stationary-regularity pipeline.
//!
//! Everything randomized takes an explicit seed and produces identical
//! results for identical seeds, independent of worker count.

pub mod classify;
pub mod error;
pub mod infotheory;
pub mod learners;
pub mod markov;
pub mod primacy;
mod rng;
pub mod stats;
pub mod trials;

pub use error::{Error, Result};
