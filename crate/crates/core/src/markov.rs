//! Transition matrices over ratio states and their stationary behavior.
//!
//! A chain state is the count of one variant out of n observations, so an
//! n = 10 fit has 11 states (0:10 through 10:0). Fitting tallies
//! (input, output) count pairs, optionally mirrors them so both variant
//! labelings contribute, smooths every cell, and row-normalizes. Smoothing
//! keeps every entry strictly positive, which makes the stationary
//! distribution unique and lets power iteration find it from any start.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infotheory::ratio_entropy;
use crate::trials::ParticipantRecord;

/// Where the smoothing constant is added during a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Smoothing {
    /// Add epsilon to each raw count, then normalize rows.
    Counts,
    /// Normalize rows to frequencies first, then add epsilon and renormalize.
    Probabilities,
}

/// Fit configuration. `epsilon: None` means the default 1/(n+1)^2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitOptions {
    pub n: u32,
    pub mirror: bool,
    pub epsilon: Option<f64>,
    pub smoothing: Smoothing,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { n: 10, mirror: true, epsilon: None, smoothing: Smoothing::Counts }
    }
}

/// Metadata a fit leaves behind; absent on matrices built from raw rows.
#[derive(Debug, Clone, PartialEq)]
struct FitRecord {
    counts: Vec<u64>,
    epsilon: f64,
    mirror: bool,
    smoothing: Smoothing,
}

/// Row-stochastic transition matrix over ratio states.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    states: usize,
    q: Vec<f64>,
    fit: Option<FitRecord>,
}

impl TransitionMatrix {
    /// Builds a matrix from explicit probability rows.
    ///
    /// Rows must be square with the row count, non-negative, finite, and sum
    /// to 1 within 1e-12. No fit metadata is attached.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let states = rows.len();
        if states < 2 {
            return Err(Error::InvalidTable(format!(
                "a transition matrix needs at least 2 states, got {states}"
            )));
        }
        let mut q = Vec::with_capacity(states * states);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != states {
                return Err(Error::InvalidTable(format!(
                    "row {i} has {} entries, expected {states}",
                    row.len()
                )));
            }
            let mut sum = 0.0;
            for (j, &p) in row.iter().enumerate() {
                if !p.is_finite() || p < 0.0 {
                    return Err(Error::InvalidTable(format!(
                        "entry ({i}, {j}) = {p} is not a probability"
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidTable(format!(
                    "row {i} sums to {sum}, expected 1"
                )));
            }
            q.extend_from_slice(row);
        }
        Ok(Self { states, q, fit: None })
    }

    pub fn states(&self) -> usize {
        self.states
    }

    /// The n whose counts index the states (states - 1).
    pub fn max_count(&self) -> u32 {
        (self.states - 1) as u32
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.q[from * self.states + to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.q[from * self.states..(from + 1) * self.states]
    }

    /// Raw tallies behind a fitted matrix (mirrored pairs included).
    pub fn counts(&self) -> Option<&[u64]> {
        self.fit.as_ref().map(|f| f.counts.as_slice())
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.fit.as_ref().map(|f| f.epsilon)
    }

    pub fn mirrored(&self) -> Option<bool> {
        self.fit.as_ref().map(|f| f.mirror)
    }

    pub fn smoothing(&self) -> Option<Smoothing> {
        self.fit.as_ref().map(|f| f.smoothing)
    }

    /// Exact (bit-level) test of q[i][j] = q[n-i][n-j].
    pub fn is_mirror_symmetric(&self) -> bool {
        let k = self.states;
        (0..k).all(|i| {
            (0..k).all(|j| {
                self.get(i, j).to_bits() == self.get(k - 1 - i, k - 1 - j).to_bits()
            })
        })
    }

    fn all_positive(&self) -> bool {
        self.q.iter().all(|&p| p > 0.0)
    }

    /// One step of left multiplication, renormalized to damp rounding drift.
    ///
    /// With `symmetric` set, only the left half of the result is computed and
    /// the rest is reflected, so palindromic vectors stay palindromic bit for
    /// bit through the iteration.
    fn advance(&self, s: &[f64], symmetric: bool) -> Vec<f64> {
        let k = self.states;
        let mut next = vec![0.0; k];
        let computed = if symmetric { k / 2 + 1 } else { k };
        for j in 0..computed {
            next[j] = (0..k).map(|i| s[i] * self.get(i, j)).sum();
        }
        if symmetric {
            for j in 0..computed {
                next[k - 1 - j] = next[j];
            }
        }
        let total: f64 = next.iter().sum();
        for v in &mut next {
            *v /= total;
        }
        next
    }

    fn residual(&self, s: &[f64]) -> f64 {
        let k = self.states;
        (0..k)
            .map(|j| {
                let col: f64 = (0..k).map(|i| s[i] * self.get(i, j)).sum();
                (col - s[j]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Serializes as bare CSV: one row per input state, ascending, 17
    /// significant digits so parsing recovers identical bits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.states {
            let cells: Vec<String> = self.row(i).iter().map(|p| format!("{p:.16e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Parses the CSV form. Fit metadata is not part of the format.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: Result<Vec<f64>> = line
                .split(',')
                .map(|cell| {
                    cell.trim().parse::<f64>().map_err(|_| {
                        Error::InvalidTable(format!(
                            "row {idx}: `{}` is not a number",
                            cell.trim()
                        ))
                    })
                })
                .collect();
            rows.push(row?);
        }
        Self::from_rows(&rows)
    }

    /// Serializes as JSON with counts, smoothing settings, and provenance.
    pub fn to_json(&self, provenance: Option<Provenance>) -> Result<String> {
        let k = self.states;
        let nest_q: Vec<Vec<f64>> = (0..k).map(|i| self.row(i).to_vec()).collect();
        let file = MatrixFile {
            states: k,
            q: nest_q,
            counts: self.fit.as_ref().map(|f| {
                (0..k).map(|i| f.counts[i * k..(i + 1) * k].to_vec()).collect()
            }),
            epsilon: self.fit.as_ref().map(|f| f.epsilon),
            mirror: self.fit.as_ref().map(|f| f.mirror),
            smoothing: self.fit.as_ref().map(|f| f.smoothing),
            provenance,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    /// Parses the JSON form, returning the matrix and any stored provenance.
    pub fn from_json(text: &str) -> Result<(Self, Option<Provenance>)> {
        let file: MatrixFile = serde_json::from_str(text)?;
        let mut matrix = Self::from_rows(&file.q)?;
        let k = matrix.states;
        if file.states != k {
            return Err(Error::InvalidTable(format!(
                "declared {} states but q has {k} rows",
                file.states
            )));
        }
        if let (Some(counts), Some(epsilon), Some(mirror), Some(smoothing)) =
            (file.counts, file.epsilon, file.mirror, file.smoothing)
        {
            let flat: Vec<u64> = counts.iter().flatten().copied().collect();
            if counts.len() != k || flat.len() != k * k {
                return Err(Error::InvalidTable("counts shape does not match q".into()));
            }
            matrix.fit = Some(FitRecord { counts: flat, epsilon, mirror, smoothing });
        }
        Ok((matrix, file.provenance))
    }
}

/// Identifies the tool run and input file a stored matrix came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub source: String,
    pub source_sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixFile {
    states: usize,
    q: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    counts: Option<Vec<Vec<u64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mirror: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    smoothing: Option<Smoothing>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
}

/// Extracts the recorded (input, output) majority-count pairs of a dataset
/// for fitting; every pair must use exactly `n` observations.
pub fn pairs_from_records(records: &[ParticipantRecord], n: u32) -> Result<Vec<(u32, u32)>> {
    let mut pairs = Vec::new();
    for record in records {
        for pr in record.pairs() {
            if pr.pair.n() != n {
                return Err(Error::InvalidArgument(format!(
                    "pair {} of participant {} has n = {}, fit expects {n}",
                    pr.context_id,
                    record.participant_id(),
                    pr.pair.n()
                )));
            }
            pairs.push((pr.pair.input_majority(), pr.pair.output_majority()));
        }
    }
    Ok(pairs)
}

/// Fits a transition matrix from (input count, output count) pairs.
///
/// With `mirror` on, each pair also contributes its complement
/// (n - input, n - output), and mirrored rows are exact reflections of each
/// other: the upper half is computed once and copied, so
/// q[i][j] = q[n-i][n-j] holds bit for bit.
pub fn fit_transition_matrix(pairs: &[(u32, u32)], options: &FitOptions) -> Result<TransitionMatrix> {
    let n = options.n as usize;
    let k = n + 1;
    if n == 0 {
        return Err(Error::InvalidArgument("fit needs n >= 1".into()));
    }
    let epsilon = match options.epsilon {
        Some(e) if e.is_finite() && e > 0.0 => e,
        Some(e) => {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive and finite, got {e}"
            )));
        }
        None => 1.0 / (k * k) as f64,
    };

    let mut counts = vec![0u64; k * k];
    for &(input, output) in pairs {
        if input as usize > n {
            return Err(Error::CountOutOfRange { count: input, n: options.n });
        }
        if output as usize > n {
            return Err(Error::CountOutOfRange { count: output, n: options.n });
        }
        counts[input as usize * k + output as usize] += 1;
        if options.mirror {
            counts[(n - input as usize) * k + (n - output as usize)] += 1;
        }
    }

    let mut q = vec![0.0; k * k];
    for i in 0..k {
        if options.mirror && i > (k - 1) / 2 {
            // Reflection of the already-computed partner row.
            for j in 0..k {
                q[i * k + j] = q[(k - 1 - i) * k + (k - 1 - j)];
            }
            continue;
        }
        let row = smooth_row(&counts[i * k..(i + 1) * k], epsilon, options.smoothing);
        q[i * k..(i + 1) * k].copy_from_slice(&row);
    }

    Ok(TransitionMatrix {
        states: k,
        q,
        fit: Some(FitRecord { counts, epsilon, mirror: options.mirror, smoothing: options.smoothing }),
    })
}

fn smooth_row(counts: &[u64], epsilon: f64, smoothing: Smoothing) -> Vec<f64> {
    let k = counts.len();
    let total: u64 = counts.iter().sum();
    match smoothing {
        Smoothing::Counts => {
            // One shared denominator per row keeps mirrored rows identical.
            let denom = total as f64 + k as f64 * epsilon;
            counts.iter().map(|&c| (c as f64 + epsilon) / denom).collect()
        }
        Smoothing::Probabilities => {
            if total == 0 {
                return vec![1.0 / k as f64; k];
            }
            let freqs: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
            let denom: f64 = freqs.iter().map(|f| f + epsilon).sum();
            freqs.iter().map(|f| (f + epsilon) / denom).collect()
        }
    }
}

/// Stationary distribution found by power iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryDistribution {
    pub probabilities: Vec<f64>,
    /// max |sQ - s| of the returned vector.
    pub residual: f64,
    pub iterations: u64,
}

/// Convergence controls for [`stationary_distribution`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveOptions {
    pub tolerance: f64,
    pub max_iterations: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tolerance: 1e-12, max_iterations: 1_000_000 }
    }
}

/// Solves s = sQ by power iteration from the uniform start.
///
/// Strictly positive entries are required; they make the fixed point unique.
/// On an exactly mirror-symmetric matrix the returned vector is exactly
/// palindromic (s[i] bit-equal to s[n-i]).
pub fn stationary_distribution(
    matrix: &TransitionMatrix,
    options: &SolveOptions,
) -> Result<StationaryDistribution> {
    if !matrix.all_positive() {
        return Err(Error::InvalidArgument(
            "stationary solve needs strictly positive transition probabilities".into(),
        ));
    }
    if !(options.tolerance > 0.0) || !options.tolerance.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive and finite, got {}",
            options.tolerance
        )));
    }
    let k = matrix.states;
    let symmetric = matrix.is_mirror_symmetric();
    let mut s = vec![1.0 / k as f64; k];
    let mut iterations = 0u64;
    loop {
        if iterations >= options.max_iterations {
            return Err(Error::NoConvergence { iterations, residual: matrix.residual(&s) });
        }
        let next = matrix.advance(&s, symmetric);
        iterations += 1;
        let diff = s
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        s = next;
        if diff < options.tolerance {
            let residual = matrix.residual(&s);
            return Ok(StationaryDistribution { probabilities: s, residual, iterations });
        }
    }
}

/// Expected ratio entropy under a stationary distribution, in bits.
///
/// This is the long-run regularity of the chain: 1 bit means variation
/// persists forever, 0 bits means the chain settles at the extremes.
pub fn stationary_regularity(stationary: &StationaryDistribution) -> f64 {
    let n = (stationary.probabilities.len() - 1) as u32;
    stationary
        .probabilities
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            p * ratio_entropy(i as u32, n).expect("state index is within 0..=n")
        })
        .sum()
}

/// Evolves a start distribution `generations` steps; element t of the result
/// is the state distribution after t transmissions (element 0 is the start,
/// normalized).
pub fn iterate_chain(
    matrix: &TransitionMatrix,
    start: &[f64],
    generations: usize,
) -> Result<Vec<Vec<f64>>> {
    let k = matrix.states;
    if start.len() != k {
        return Err(Error::InvalidArgument(format!(
            "start distribution has {} states, matrix has {k}",
            start.len()
        )));
    }
    let first = crate::infotheory::Distribution::new(start)
        .map_err(|e| Error::InvalidArgument(format!("start distribution: {e}")))?;
    let mut trajectory = Vec::with_capacity(generations + 1);
    trajectory.push(first.probabilities().to_vec());
    for t in 0..generations {
        let next = matrix.advance(&trajectory[t], false);
        trajectory.push(next);
    }
    Ok(trajectory)
}

/// Samples one chain trajectory; element t is the state after t
/// transmissions, starting at `start_state`. Fixed seeds give fixed paths.
pub fn sample_chain(
    matrix: &TransitionMatrix,
    start_state: u32,
    generations: usize,
    seed: u64,
) -> Result<Vec<u32>> {
    let k = matrix.states;
    if start_state as usize >= k {
        return Err(Error::InvalidArgument(format!(
            "start state {start_state} out of range for {k} states"
        )));
    }
    let mut rng = crate::rng::stream(seed, 0);
    let mut current = start_state as usize;
    let mut states = Vec::with_capacity(generations + 1);
    states.push(start_state);
    for _ in 0..generations {
        let u: f64 = rng.random();
        let row = matrix.row(current);
        // Cumulative scan; the final state absorbs any rounding tail.
        let mut next = k - 1;
        let mut acc = 0.0;
        for (j, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                next = j;
                break;
            }
        }
        current = next;
        states.push(current as u32);
    }
    Ok(states)
}
