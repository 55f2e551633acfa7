//! Entropy measures over variant distributions and context tables.
//!
//! All quantities are Shannon entropies in bits (log base 2) with the usual
//! convention that a zero-probability outcome contributes nothing.
//! [`Distribution`] normalizes raw weights once at construction, so the
//! functions here always operate on probabilities that sum to one.

use serde::Serialize;

use crate::error::{Error, Result};

/// A discrete probability distribution over variants.
///
/// Accepts probabilities or raw counts; weights are normalized internally,
/// so callers never pre-normalize.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDistribution("no weights given".into()));
        }
        for (i, w) in weights.iter().enumerate() {
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "weight {i} is {w}; weights must be finite and non-negative"
                )));
            }
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("all weights are zero".into()));
        }
        Ok(Self {
            probs: weights.iter().map(|w| w / total).collect(),
        })
    }

    /// The two-outcome distribution `{x/n, (n-x)/n}`.
    pub fn from_ratio(x: u32, n: u32) -> Result<Self> {
        if n == 0 || x > n {
            return Err(Error::CountOutOfRange { count: x, n });
        }
        let p = f64::from(x) / f64::from(n);
        Self::new(&[p, 1.0 - p])
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Shannon entropy `H = -sum(p * log2 p)` in bits.
pub fn shannon_entropy(dist: &Distribution) -> f64 {
    entropy_bits(dist.probabilities())
}

/// Entropy of the two-outcome split `{x/n, (n-x)/n}`.
///
/// This is the regularity measure for a single ratio: for n = 10 it falls
/// from 1 bit at 5:5 to 0 bits at 10:0. Mirrored counts share one code path
/// so `ratio_entropy(x, n)` equals `ratio_entropy(n - x, n)` bit for bit.
pub fn ratio_entropy(x: u32, n: u32) -> Result<f64> {
    if x > n {
        return Err(Error::CountOutOfRange { count: x, n });
    }
    Ok(shannon_entropy(&Distribution::from_ratio(x.max(n - x), n)?))
}

fn entropy_bits(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

/// Counts of variant (column) by context (row) co-occurrences.
///
/// Cells are non-negative reals so both raw tallies and pre-weighted tables
/// work; only the total has to be positive.
#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceTable {
    counts: Vec<f64>, // row-major
    rows: usize,
    cols: usize,
    row_labels: Vec<String>,
    col_labels: Vec<String>,
    total: f64,
}

impl CooccurrenceTable {
    pub fn new(
        counts: Vec<Vec<f64>>,
        row_labels: Vec<String>,
        col_labels: Vec<String>,
    ) -> Result<Self> {
        if counts.is_empty() || counts[0].is_empty() {
            return Err(Error::InvalidTable("table has no cells".into()));
        }
        let rows = counts.len();
        let cols = counts[0].len();
        if row_labels.len() != rows || col_labels.len() != cols {
            return Err(Error::InvalidTable(format!(
                "label counts ({}, {}) do not match table shape {}x{}",
                row_labels.len(),
                col_labels.len(),
                rows,
                cols
            )));
        }
        let mut flat = Vec::with_capacity(rows * cols);
        for (i, row) in counts.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::InvalidTable(format!(
                    "row {i} has {} cells, expected {cols}",
                    row.len()
                )));
            }
            for (j, &c) in row.iter().enumerate() {
                if !c.is_finite() || c < 0.0 {
                    return Err(Error::InvalidTable(format!("cell ({i}, {j}) is {c}")));
                }
                flat.push(c);
            }
        }
        let total: f64 = flat.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidTable("table total is zero".into()));
        }
        Ok(Self {
            counts: flat,
            rows,
            cols,
            row_labels,
            col_labels,
            total,
        })
    }

    /// Builds a table with generated labels (`c1..`, `v1..`).
    pub fn from_counts(counts: Vec<Vec<f64>>) -> Result<Self> {
        let rows = counts.len();
        let cols = counts.first().map_or(0, Vec::len);
        let row_labels = (1..=rows).map(|i| format!("c{i}")).collect();
        let col_labels = (1..=cols).map(|j| format!("v{j}")).collect();
        Self::new(counts, row_labels, col_labels)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn count(&self, row: usize, col: usize) -> f64 {
        self.counts[row * self.cols + col]
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[String] {
        &self.col_labels
    }

    /// Marginal distribution over contexts (rows).
    pub fn row_marginal(&self) -> Distribution {
        let sums: Vec<f64> = (0..self.rows)
            .map(|i| self.counts[i * self.cols..(i + 1) * self.cols].iter().sum())
            .collect();
        Distribution::new(&sums).expect("validated table has a positive total")
    }

    /// Marginal distribution over variants (columns).
    pub fn column_marginal(&self) -> Distribution {
        let mut sums = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (j, s) in sums.iter_mut().enumerate() {
                *s += self.count(i, j);
            }
        }
        Distribution::new(&sums).expect("validated table has a positive total")
    }

    /// The same table with rows and columns swapped.
    pub fn transpose(&self) -> CooccurrenceTable {
        let mut counts = vec![0.0; self.rows * self.cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                counts[j * self.rows + i] = self.count(i, j);
            }
        }
        CooccurrenceTable {
            counts,
            rows: self.cols,
            cols: self.rows,
            row_labels: self.col_labels.clone(),
            col_labels: self.row_labels.clone(),
            total: self.total,
        }
    }
}

/// Conditional entropy of variants given contexts,
/// `H(V|C) = sum_j p(c_j) H(V|c_j)`.
///
/// Rows with zero mass contribute nothing.
pub fn conditional_entropy(table: &CooccurrenceTable) -> f64 {
    let mut h = 0.0;
    for i in 0..table.rows() {
        let row: Vec<f64> = (0..table.cols()).map(|j| table.count(i, j)).collect();
        let row_total: f64 = row.iter().sum();
        if row_total > 0.0 {
            let conditional: Vec<f64> = row.iter().map(|c| c / row_total).collect();
            h += row_total / table.total() * entropy_bits(&conditional);
        }
    }
    h
}

/// Joint entropy `H(V, C)` over all cells.
pub fn joint_entropy(table: &CooccurrenceTable) -> f64 {
    let probs: Vec<f64> = (0..table.rows())
        .flat_map(|i| (0..table.cols()).map(move |j| (i, j)))
        .map(|(i, j)| table.count(i, j) / table.total())
        .collect();
    entropy_bits(&probs)
}

/// The six standard entropies of a variant-by-context table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyProfile {
    /// Marginal variant entropy H(V).
    pub h_v: f64,
    /// Marginal context entropy H(C).
    pub h_c: f64,
    /// H(V|C), the conditional use of variants within contexts.
    pub h_v_given_c: f64,
    /// H(C|V), zero when every variant is tied to a single context.
    pub h_c_given_v: f64,
    /// Mutual information I(V;C) = H(V) - H(V|C).
    pub mi: f64,
    /// Joint entropy H(V,C).
    pub h_joint: f64,
}

/// Computes all six entropies of a table in one pass.
///
/// Conditional entropies are evaluated directly from the table rows (and
/// transposed rows) rather than by subtraction, so structural zeros come out
/// exact; the chain-rule identities then hold to floating-point accuracy.
pub fn entropy_profile(table: &CooccurrenceTable) -> EntropyProfile {
    let h_v = shannon_entropy(&table.column_marginal());
    let h_c = shannon_entropy(&table.row_marginal());
    let h_v_given_c = conditional_entropy(table);
    let h_c_given_v = conditional_entropy(&table.transpose());
    EntropyProfile {
        h_v,
        h_c,
        h_v_given_c,
        h_c_given_v,
        mi: h_v - h_v_given_c,
        h_joint: joint_entropy(table),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Straight-line reference entropy, written independently of the
    /// implementation above: explicit loop, no filtering helpers.
    fn naive_entropy(probs: &[f64]) -> f64 {
        let mut h = 0.0;
        for &p in probs {
            if p > 0.0 {
                h -= p * p.ln() / std::f64::consts::LN_2;
            }
        }
        h
    }

    /// Six contexts, each pairing two dedicated variants with counts
    /// 5:5, 6:4, 7:3, 8:2, 9:1, 10:0.
    fn six_ratio_table() -> CooccurrenceTable {
        let splits = [(5.0, 5.0), (6.0, 4.0), (7.0, 3.0), (8.0, 2.0), (9.0, 1.0), (10.0, 0.0)];
        let mut counts = vec![vec![0.0; 12]; 6];
        for (i, (a, b)) in splits.iter().enumerate() {
            counts[i][2 * i] = *a;
            counts[i][2 * i + 1] = *b;
        }
        CooccurrenceTable::from_counts(counts).unwrap()
    }

    #[test]
    fn four_variant_entropies() {
        let near = Distribution::new(&[0.3, 0.3, 0.2, 0.2]).unwrap();
        let skewed = Distribution::new(&[0.7, 0.1, 0.1, 0.1]).unwrap();
        assert_abs_diff_eq!(shannon_entropy(&near), 1.9709505944546686, epsilon = 1e-12);
        assert_abs_diff_eq!(shannon_entropy(&skewed), 1.3567796494470397, epsilon = 1e-12);
        assert_abs_diff_eq!(
            shannon_entropy(&near) - shannon_entropy(&skewed),
            0.6141709450076289,
            epsilon = 1e-12
        );
    }

    #[test]
    fn degenerate_and_even_splits() {
        assert_eq!(
            shannon_entropy(&Distribution::new(&[1.0, 0.0]).unwrap()),
            0.0
        );
        assert_eq!(
            shannon_entropy(&Distribution::new(&[0.5, 0.5]).unwrap()),
            1.0
        );
    }

    #[test]
    fn counts_and_probabilities_agree() {
        let from_counts = Distribution::new(&[6.0, 4.0]).unwrap();
        let from_probs = Distribution::new(&[0.6, 0.4]).unwrap();
        assert_abs_diff_eq!(
            shannon_entropy(&from_counts),
            shannon_entropy(&from_probs),
            epsilon = 1e-15
        );
    }

    #[test]
    fn ratio_entropy_table_for_ten_trials() {
        let expected = [
            (5, 1.0),
            (6, 0.9709505944546686),
            (7, 0.8812908992306927),
            (8, 0.7219280948873623),
            (9, 0.4689955935892811),
            (10, 0.0),
        ];
        for (x, h) in expected {
            assert_abs_diff_eq!(ratio_entropy(x, 10).unwrap(), h, epsilon = 1e-12);
            // Reference route: the two-outcome entropy computed directly.
            let p = x as f64 / 10.0;
            assert_abs_diff_eq!(
                ratio_entropy(x, 10).unwrap(),
                naive_entropy(&[p, 1.0 - p]),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn invalid_distributions_are_rejected() {
        assert!(matches!(
            Distribution::new(&[]),
            Err(Error::InvalidDistribution(_))
        ));
        assert!(matches!(
            Distribution::new(&[0.0, 0.0]),
            Err(Error::InvalidDistribution(_))
        ));
        assert!(matches!(
            Distribution::new(&[0.5, -0.1]),
            Err(Error::InvalidDistribution(_))
        ));
        assert!(matches!(
            Distribution::new(&[f64::NAN]),
            Err(Error::InvalidDistribution(_))
        ));
        assert!(matches!(
            Distribution::from_ratio(11, 10),
            Err(Error::CountOutOfRange { count: 11, n: 10 })
        ));
        assert!(matches!(
            Distribution::from_ratio(0, 0),
            Err(Error::CountOutOfRange { .. })
        ));
    }

    #[test]
    fn invalid_tables_are_rejected() {
        assert!(matches!(
            CooccurrenceTable::from_counts(vec![]),
            Err(Error::InvalidTable(_))
        ));
        assert!(matches!(
            CooccurrenceTable::from_counts(vec![vec![0.0, 0.0]]),
            Err(Error::InvalidTable(_))
        ));
        assert!(matches!(
            CooccurrenceTable::from_counts(vec![vec![1.0, 2.0], vec![1.0]]),
            Err(Error::InvalidTable(_))
        ));
        assert!(matches!(
            CooccurrenceTable::new(vec![vec![1.0]], vec![], vec!["v1".into()]),
            Err(Error::InvalidTable(_))
        ));
        assert!(matches!(
            CooccurrenceTable::from_counts(vec![vec![1.0, -2.0]]),
            Err(Error::InvalidTable(_))
        ));
    }

    #[test]
    fn identical_rows_leave_conditional_at_marginal() {
        // Two contexts (60:40 weight) with the same variant distribution:
        // knowing the context tells you nothing.
        let table = CooccurrenceTable::from_counts(vec![
            vec![1.8, 1.8, 1.2, 1.2],
            vec![1.2, 1.2, 0.8, 0.8],
        ])
        .unwrap();
        assert_abs_diff_eq!(conditional_entropy(&table), 1.9709505944546686, epsilon = 1e-12);
        let profile = entropy_profile(&table);
        assert_abs_diff_eq!(profile.mi, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn disjoint_rows_drop_conditional_to_row_entropy() {
        // Same 60:40 context weights, but each context licenses its own
        // variant pair at 50:50.
        let table = CooccurrenceTable::from_counts(vec![
            vec![0.3, 0.3, 0.0, 0.0],
            vec![0.0, 0.0, 0.2, 0.2],
        ])
        .unwrap();
        assert_abs_diff_eq!(conditional_entropy(&table), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn six_ratio_table_profile() {
        let profile = entropy_profile(&six_ratio_table());
        assert_abs_diff_eq!(profile.h_v_given_c, 0.6738608636936675, epsilon = 1e-12);
        assert_abs_diff_eq!(profile.h_c, 6f64.log2(), epsilon = 1e-12);
        assert_abs_diff_eq!(profile.h_joint, 3.2588233644148237, epsilon = 1e-12);
        // Every variant pins down its context, so H(C|V) is structurally zero
        // and H(V) carries all the joint information.
        assert_eq!(profile.h_c_given_v, 0.0);
        assert_abs_diff_eq!(profile.h_v, profile.h_joint, epsilon = 1e-12);
        assert_abs_diff_eq!(profile.mi, profile.h_c, epsilon = 1e-12);
    }

    #[test]
    fn single_context_profile_has_no_information() {
        let table = CooccurrenceTable::from_counts(vec![vec![6.0, 4.0]]).unwrap();
        let profile = entropy_profile(&table);
        assert_abs_diff_eq!(profile.h_v, 0.9709505944546686, epsilon = 1e-12);
        assert_eq!(profile.h_c, 0.0);
        assert_abs_diff_eq!(profile.h_v_given_c, profile.h_v, epsilon = 1e-15);
        assert_eq!(profile.h_c_given_v, 0.0);
        assert_abs_diff_eq!(profile.mi, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(profile.h_joint, profile.h_v, epsilon = 1e-15);
    }

    #[test]
    fn joint_entropy_of_six_ratio_table() {
        let table = six_ratio_table();
        // Reference route: accumulate cell probabilities by hand.
        let mut cells = Vec::new();
        for i in 0..table.rows() {
            for j in 0..table.cols() {
                cells.push(table.count(i, j) / 60.0);
            }
        }
        assert_abs_diff_eq!(joint_entropy(&table), naive_entropy(&cells), epsilon = 1e-12);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_weights() -> impl Strategy<Value = Vec<f64>> {
            proptest::collection::vec(0.0f64..100.0, 1..8)
                .prop_filter("needs positive total", |w| w.iter().sum::<f64>() > 1e-6)
        }

        fn arb_table() -> impl Strategy<Value = Vec<Vec<f64>>> {
            (1usize..5, 1usize..6)
                .prop_flat_map(|(r, c)| {
                    proptest::collection::vec(proptest::collection::vec(0.0f64..50.0, c), r)
                })
                .prop_filter("needs positive total", |t| {
                    t.iter().flatten().sum::<f64>() > 1e-6
                })
        }

        proptest! {
            #[test]
            fn entropy_is_bounded_by_log_cardinality(weights in arb_weights()) {
                let d = Distribution::new(&weights).unwrap();
                let h = shannon_entropy(&d);
                prop_assert!(h >= -1e-12);
                prop_assert!(h <= (d.len() as f64).log2() + 1e-9);
            }

            #[test]
            fn normalization_is_scale_invariant(weights in arb_weights(), scale in 0.01f64..1000.0) {
                let base = shannon_entropy(&Distribution::new(&weights).unwrap());
                let scaled: Vec<f64> = weights.iter().map(|w| w * scale).collect();
                let h = shannon_entropy(&Distribution::new(&scaled).unwrap());
                prop_assert!((base - h).abs() < 1e-9);
            }

            #[test]
            fn ratio_entropy_is_symmetric(x in 0u32..=10, n in proptest::sample::select(vec![10u32])) {
                // Swapping majority and minority is a relabeling; the entropy
                // must not move at all.
                prop_assert_eq!(
                    ratio_entropy(x, n).unwrap(),
                    ratio_entropy(n - x, n).unwrap()
                );
            }

            #[test]
            fn conditioning_never_increases_entropy(counts in arb_table()) {
                let table = CooccurrenceTable::from_counts(counts).unwrap();
                let h_v = shannon_entropy(&table.column_marginal());
                prop_assert!(conditional_entropy(&table) <= h_v + 1e-9);
            }

            #[test]
            fn chain_rule_and_information_identities(counts in arb_table()) {
                let table = CooccurrenceTable::from_counts(counts).unwrap();
                let p = entropy_profile(&table);
                prop_assert!((p.h_joint - (p.h_c + p.h_v_given_c)).abs() < 1e-9);
                prop_assert!((p.h_joint - (p.h_v + p.h_c_given_v)).abs() < 1e-9);
                // Information is symmetric and non-negative.
                prop_assert!(((p.h_v - p.h_v_given_c) - (p.h_c - p.h_c_given_v)).abs() < 1e-9);
                prop_assert!(p.mi >= -1e-12);
            }
        }
    }
}
