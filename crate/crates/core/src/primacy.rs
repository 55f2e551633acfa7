//! Primacy scoring of minority-variant placement, and regularization tagging.
//!
//! The score treats each minority occurrence as a weight on a lever centered
//! mid-sequence and normalizes the net torque to [-1, 1]: +1 puts every
//! minority token at the very start, -1 at the very end, 0 balances them.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::trials::RatioPair;

/// Primacy score of one observation sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrimacyScore {
    pub value: f64,
    pub minority_count: u32,
    pub length: u32,
}

/// Scores a sequence; `true` marks a minority-variant trial.
///
/// Degenerate sequences (all one symbol) have no minority placement to score
/// and are rejected rather than reported as 0.
pub fn primacy_score(seq: &[bool]) -> Result<PrimacyScore> {
    let n = seq.len();
    if n < 2 {
        return Err(Error::UndefinedScore(format!(
            "sequence of length {n} has no placement to score"
        )));
    }
    let m = seq.iter().filter(|&&b| b).count();
    if m == 0 || m == n {
        return Err(Error::UndefinedScore(
            "sequence has only one symbol; primacy needs both variants".into(),
        ));
    }
    // Positions count from 1; the center (n+1)/2 makes each term a multiple
    // of 0.5, so reversal and complement negate the score bit-exactly.
    let center = (n as f64 + 1.0) / 2.0;
    let torque: f64 = seq
        .iter()
        .enumerate()
        .filter(|&(_, &b)| b)
        .map(|(i, _)| (i + 1) as f64 - center)
        .sum();
    let value = -torque / (m as f64 * (n - m) as f64 / 2.0);
    Ok(PrimacyScore { value, minority_count: m as u32, length: n as u32 })
}

/// Direction of a pair's entropy drop, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularization {
    /// Output entropy did not fall.
    None,
    /// Entropy fell and the majority variant grew.
    Majority,
    /// Entropy fell and the minority variant grew.
    Minority,
}

/// Tags whether a pair regularized and in favor of which variant.
pub fn regularization_type(pair: &RatioPair) -> Regularization {
    if pair.output_entropy() >= pair.input_entropy() {
        return Regularization::None;
    }
    // Entropy strictly fell, so the output majority count cannot equal the
    // input's; the comparison decides which variant absorbed the mass.
    if pair.effective_output_majority() > pair.input_majority() {
        Regularization::Majority
    } else {
        Regularization::Minority
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trials::parse_binary_sequence;

    fn score(s: &str) -> f64 {
        primacy_score(&parse_binary_sequence(s).unwrap()).unwrap().value
    }

    #[test]
    fn worked_sequences() {
        assert_eq!(score("1110000000"), 1.0);
        assert_eq!(score("0000000001"), -1.0);
        assert_eq!(score("0101001000"), 1.0 / 3.0);
        assert_eq!(score("1000000001"), 0.0);
        assert_eq!(score("0000110000"), 0.0);
    }

    #[test]
    fn score_carries_counts() {
        let s = primacy_score(&parse_binary_sequence("0101001000").unwrap()).unwrap();
        assert_eq!(s.minority_count, 3);
        assert_eq!(s.length, 10);
    }

    #[test]
    fn degenerate_sequences_are_errors() {
        assert!(matches!(primacy_score(&[false; 10]), Err(Error::UndefinedScore(_))));
        assert!(matches!(primacy_score(&[true; 10]), Err(Error::UndefinedScore(_))));
        assert!(matches!(primacy_score(&[true]), Err(Error::UndefinedScore(_))));
        assert!(matches!(primacy_score(&[]), Err(Error::UndefinedScore(_))));
    }

    #[test]
    fn permutation_mean_is_zero_for_n_ten() {
        // Every arrangement of m minority tokens among 10 positions; the
        // torques over a full permutation class cancel exactly.
        for m in 1..=5u32 {
            let mut sum = 0.0;
            let mut count = 0u32;
            for mask in 0u32..(1 << 10) {
                if mask.count_ones() != m {
                    continue;
                }
                let seq: Vec<bool> = (0..10).map(|i| mask >> i & 1 == 1).collect();
                sum += primacy_score(&seq).unwrap().value;
                count += 1;
            }
            assert!(count > 0);
            assert!(
                (sum / f64::from(count)).abs() < 1e-12,
                "mean over m = {m} permutations was {}",
                sum / f64::from(count)
            );
        }
    }

    #[test]
    fn regularization_type_examples() {
        let tag = |input, output| {
            let pair = if input == 5 {
                RatioPair::new_tied(10, output, true).unwrap()
            } else {
                RatioPair::new(10, input, output).unwrap()
            };
            regularization_type(&pair)
        };
        assert_eq!(tag(7, 9), Regularization::Majority);
        assert_eq!(tag(7, 1), Regularization::Minority);
        assert_eq!(tag(7, 7), Regularization::None);
        // Mirror output keeps entropy, so no regularization despite the swap.
        assert_eq!(tag(7, 3), Regularization::None);
        assert_eq!(tag(5, 9), Regularization::Majority);
        assert_eq!(tag(5, 1), Regularization::Minority);
        assert_eq!(tag(9, 8), Regularization::None);
    }

    #[test]
    fn tie_flip_swaps_the_regularization_direction() {
        let kept = RatioPair::new_tied(10, 9, true).unwrap();
        let flipped = RatioPair::new_tied(10, 9, false).unwrap();
        assert_eq!(regularization_type(&kept), Regularization::Majority);
        assert_eq!(regularization_type(&flipped), Regularization::Minority);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn mixed_sequence() -> impl Strategy<Value = Vec<bool>> {
            proptest::collection::vec(proptest::bool::ANY, 2..=100)
                .prop_filter("needs both symbols", |s| {
                    s.iter().any(|&b| b) && s.iter().any(|&b| !b)
                })
        }

        proptest! {
            #[test]
            fn reversal_negates_exactly(seq in mixed_sequence()) {
                let forward = primacy_score(&seq).unwrap().value;
                let reversed: Vec<bool> = seq.iter().rev().copied().collect();
                prop_assert_eq!(primacy_score(&reversed).unwrap().value, -forward);
            }

            #[test]
            fn complement_negates_exactly(seq in mixed_sequence()) {
                // Swapping which symbol counts as minority flips the sign and
                // nothing else: the normalizer m(n - m) is symmetric.
                let forward = primacy_score(&seq).unwrap().value;
                let complemented: Vec<bool> = seq.iter().map(|&b| !b).collect();
                prop_assert_eq!(primacy_score(&complemented).unwrap().value, -forward);
            }

            #[test]
            fn score_stays_in_unit_interval(seq in mixed_sequence()) {
                let s = primacy_score(&seq).unwrap();
                prop_assert!(s.value.abs() <= 1.0 + 1e-12);
            }
        }
    }
}
