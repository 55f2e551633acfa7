//! Command-line front end: ingestion, entropy analyses, classification,
//! matrix fitting, chain simulation, and bootstrap intervals as one binary.
//!
//! Every run is reproducible: the seed (flag or FREQREG_SEED) drives all
//! randomness, reports embed the resolved configuration plus SHA-256 digests
//! of every input file, and rerunning a command with the same inputs and
//! seed produces byte-identical output. Exit codes: 0 success, 1 invalid
//! input or arguments, 2 internal failure (e.g. solver non-convergence).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use freqreg::classify::{
    classify_high_load, classify_low_load, clopper_pearson, matching_envelope, EntropyEnvelope,
    EnvelopeOptions, StrategyLabel,
};
use freqreg::infotheory::{entropy_profile, CooccurrenceTable, EntropyProfile};
use freqreg::learners::{simulate_population, MixComponent, PopulationOptions};
use freqreg::markov::{
    fit_transition_matrix, iterate_chain, pairs_from_records, sample_chain,
    stationary_distribution, stationary_regularity, FitOptions, Provenance, Smoothing,
    SolveOptions, TransitionMatrix,
};
use freqreg::primacy::{primacy_score, regularization_type, Regularization};
use freqreg::stats::{
    bootstrap_mean, bootstrap_stationary, bootstrap_stationary_grouped, BootstrapOptions,
    BootstrapResult,
};
use freqreg::trials::{
    entropy_change, estimate_entropy_change, ingest_csv, majority_frequency_change,
    mean_entropy_change, percent_regularized, Condition, Domain, IngestOptions,
    ParticipantRecord, RatioPair,
};
use freqreg::{Error, Result};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.workers > 0 {
        // One-shot process: installing the global pool here caps all fan-out.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global();
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

#[derive(Parser)]
#[command(
    name = "freqreg",
    version,
    about = "Entropy, classification, and iterated-learning analyses for binary frequency data"
)]
struct Cli {
    /// Master seed for all randomized steps (tie coding, simulation,
    /// envelopes, bootstrap).
    #[arg(long, global = true, env = "FREQREG_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker-thread cap for parallel sections; 0 keeps the library default.
    /// Results never depend on this.
    #[arg(long, global = true, env = "FREQREG_WORKERS", default_value_t = 0)]
    workers: usize,
    /// Where to write the report or artifact; '-' is stdout.
    #[arg(long, global = true, default_value = "-")]
    output: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Entropy profile of a variant-by-context co-occurrence table.
    Entropy(EntropyArgs),
    /// Per-pair entropy and frequency changes plus per-condition means.
    Change(ChangeArgs),
    /// Primacy scores of minority variants in recorded input sequences.
    Primacy(PrimacyArgs),
    /// Strategy labels per participant (matcher, regularizer, variabilizer).
    Classify(ClassifyArgs),
    /// Fit a smoothed ratio-to-ratio transition matrix.
    FitMatrix(FitMatrixArgs),
    /// Stationary distribution and regularity of a transition matrix.
    Stationary(StationaryArgs),
    /// Evolve a start distribution a fixed number of generations.
    Iterate(IterateArgs),
    /// Sample one stochastic trajectory through the chain.
    SampleChain(SampleChainArgs),
    /// Generate a synthetic population from a learner mix.
    Simulate(SimulateArgs),
    /// Bootstrap percentile intervals for dataset statistics.
    Bootstrap(BootstrapArgs),
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Entropy(args) => run_entropy(cli, args),
        Command::Change(args) => run_change(cli, args),
        Command::Primacy(args) => run_primacy(cli, args),
        Command::Classify(args) => run_classify(cli, args),
        Command::FitMatrix(args) => run_fit_matrix(cli, args),
        Command::Stationary(args) => run_stationary(cli, args),
        Command::Iterate(args) => run_iterate(cli, args),
        Command::SampleChain(args) => run_sample_chain(cli, args),
        Command::Simulate(args) => run_simulate(cli, args),
        Command::Bootstrap(args) => run_bootstrap(cli, args),
    }
}

// ---------------------------------------------------------------------------
// Shared flags

#[derive(Args, Clone)]
struct FitFlags {
    /// Observations per ratio; the chain has n + 1 states.
    #[arg(long, default_value_t = 10)]
    n: u32,
    /// Smoothing constant; defaults to 1/(n+1)^2.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Tally each pair's mirror image too (on by default).
    #[arg(long, action = ArgAction::SetTrue, overrides_with = "no_mirror")]
    mirror: bool,
    /// Fit from raw tallies without mirror completion.
    #[arg(long, action = ArgAction::SetTrue)]
    no_mirror: bool,
    /// Whether epsilon is added to counts or to normalized frequencies.
    #[arg(long, value_enum, default_value_t = SmoothingArg::Counts)]
    smoothing: SmoothingArg,
}

impl FitFlags {
    fn options(&self) -> FitOptions {
        FitOptions {
            n: self.n,
            mirror: !self.no_mirror,
            epsilon: self.epsilon,
            smoothing: self.smoothing.into(),
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SmoothingArg {
    Counts,
    Probabilities,
}

impl From<SmoothingArg> for Smoothing {
    fn from(arg: SmoothingArg) -> Self {
        match arg {
            SmoothingArg::Counts => Smoothing::Counts,
            SmoothingArg::Probabilities => Smoothing::Probabilities,
        }
    }
}

#[derive(Args, Clone)]
struct SolveFlags {
    /// Power-iteration convergence threshold.
    #[arg(long, default_value_t = 1e-12)]
    tolerance: f64,
    /// Iteration cap before reporting non-convergence.
    #[arg(long, default_value_t = 1_000_000)]
    max_iterations: u64,
}

impl SolveFlags {
    fn options(&self) -> SolveOptions {
        SolveOptions { tolerance: self.tolerance, max_iterations: self.max_iterations }
    }
}

/// Resolved fit settings echoed into reports.
#[derive(Serialize)]
struct FitConfig {
    n: u32,
    epsilon: Option<f64>,
    mirror: bool,
    smoothing: Smoothing,
}

impl From<&FitFlags> for FitConfig {
    fn from(flags: &FitFlags) -> Self {
        let options = flags.options();
        Self {
            n: options.n,
            epsilon: options.epsilon,
            mirror: options.mirror,
            smoothing: options.smoothing,
        }
    }
}

#[derive(Serialize)]
struct SolveConfig {
    tolerance: f64,
    max_iterations: u64,
}

impl From<&SolveFlags> for SolveConfig {
    fn from(flags: &SolveFlags) -> Self {
        Self { tolerance: flags.tolerance, max_iterations: flags.max_iterations }
    }
}

/// Dataset input: ingested trial records or bare majority-count pairs.
#[derive(Args, Clone)]
struct DataOrPairs {
    /// Trial records CSV (full schema, tie coding applies).
    #[arg(long, group = "source")]
    data: Option<PathBuf>,
    /// Bare pairs CSV with header `input_majority,output_majority`.
    #[arg(long, group = "source")]
    pairs: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum OutputFormat {
    Json,
    Csv,
}

// ---------------------------------------------------------------------------
// Report plumbing

#[derive(Serialize, Clone)]
struct InputDigest {
    path: String,
    sha256: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut acc, b| {
        let _ = write!(acc, "{b:02x}");
        acc
    })
}

fn annotate(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn digest_file(path: &Path) -> Result<(Vec<u8>, InputDigest)> {
    let bytes = fs::read(path).map_err(|e| annotate(path, e))?;
    let digest = InputDigest { path: path.display().to_string(), sha256: sha256_hex(&bytes) };
    Ok((bytes, digest))
}

fn write_output(target: &str, content: &str) -> Result<()> {
    if target == "-" {
        print!("{content}");
        Ok(())
    } else {
        fs::write(target, content).map_err(|e| annotate(Path::new(target), e))
    }
}

fn emit_report<C: Serialize, R: Serialize>(
    cli: &Cli,
    command: &'static str,
    config: C,
    inputs: Vec<InputDigest>,
    result: R,
) -> Result<()> {
    #[derive(Serialize)]
    struct Report<C, R> {
        tool: &'static str,
        version: &'static str,
        command: &'static str,
        seed: u64,
        workers: usize,
        config: C,
        inputs: Vec<InputDigest>,
        result: R,
    }
    let report = Report {
        tool: "freqreg",
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed: cli.seed,
        workers: cli.workers,
        config,
        inputs,
        result,
    };
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    write_output(&cli.output, &text)
}

// ---------------------------------------------------------------------------
// Input readers

fn schema_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Schema { file: path.display().to_string(), line, message: message.into() }
}

/// Reads a co-occurrence table CSV: header `context,<variant labels...>`,
/// one row per context with non-negative counts.
fn read_table(path: &Path) -> Result<(CooccurrenceTable, InputDigest)> {
    let (bytes, digest) = digest_file(path)?;
    let text = String::from_utf8(bytes).map_err(|_| schema_err(path, 1, "file is not valid UTF-8"))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| schema_err(path, 1, "empty table"))?;
    let mut header_fields = header.split(',');
    if header_fields.next().map(str::trim) != Some("context") {
        return Err(schema_err(path, 1, "first header column must be `context`"));
    }
    let col_labels: Vec<String> = header_fields.map(|f| f.trim().to_string()).collect();
    if col_labels.is_empty() || col_labels.iter().any(String::is_empty) {
        return Err(schema_err(path, 1, "header needs at least one non-empty variant label"));
    }

    let mut row_labels = Vec::new();
    let mut counts = Vec::new();
    for (index, line) in lines {
        let line_no = index as u64 + 1;
        let mut fields = line.split(',');
        let label = fields.next().unwrap_or("").trim();
        if label.is_empty() {
            return Err(schema_err(path, line_no, "missing context label"));
        }
        let row: Vec<f64> = fields
            .map(|f| {
                let value: f64 = f
                    .trim()
                    .parse()
                    .map_err(|_| schema_err(path, line_no, format!("`{}` is not a number", f.trim())))?;
                if !value.is_finite() || value < 0.0 {
                    return Err(schema_err(path, line_no, format!("count {value} is not a non-negative number")));
                }
                Ok(value)
            })
            .collect::<Result<_>>()?;
        if row.len() != col_labels.len() {
            return Err(schema_err(
                path,
                line_no,
                format!("expected {} counts, found {}", col_labels.len(), row.len()),
            ));
        }
        row_labels.push(label.to_string());
        counts.push(row);
    }
    let table = CooccurrenceTable::new(counts, row_labels, col_labels)
        .map_err(|e| schema_err(path, 1, e.to_string()))?;
    Ok((table, digest))
}

const PAIRS_HEADER: &str = "input_majority,output_majority";

/// Reads a bare pairs CSV; a header-only file is a valid empty dataset.
fn read_pairs(path: &Path) -> Result<(Vec<(u32, u32)>, InputDigest)> {
    let (bytes, digest) = digest_file(path)?;
    let text = String::from_utf8(bytes).map_err(|_| schema_err(path, 1, "file is not valid UTF-8"))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == PAIRS_HEADER => {}
        Some((_, header)) => {
            return Err(schema_err(path, 1, format!("header must be `{PAIRS_HEADER}`, found `{header}`")));
        }
        None => return Err(schema_err(path, 1, format!("missing `{PAIRS_HEADER}` header"))),
    }
    let mut pairs = Vec::new();
    for (index, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = index as u64 + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 {
            return Err(schema_err(path, line_no, format!("expected 2 fields, found {}", fields.len())));
        }
        let parse = |f: &str| {
            f.trim()
                .parse::<u32>()
                .map_err(|_| schema_err(path, line_no, format!("`{}` is not a count", f.trim())))
        };
        pairs.push((parse(fields[0])?, parse(fields[1])?));
    }
    Ok((pairs, digest))
}

fn ingest(path: &Path, seed: u64) -> Result<(Vec<ParticipantRecord>, Vec<String>, InputDigest)> {
    let (_, digest) = digest_file(path)?;
    let ingest = ingest_csv(path, &IngestOptions { seed })?;
    Ok((ingest.records, ingest.warnings, digest))
}

/// Obtains a transition matrix from records, bare pairs, or a stored
/// artifact (.json with optional provenance, otherwise probability CSV).
#[derive(Args, Clone)]
struct ChainSource {
    /// Trial records CSV to fit from.
    #[arg(long, group = "source")]
    data: Option<PathBuf>,
    /// Bare pairs CSV to fit from.
    #[arg(long, group = "source")]
    pairs: Option<PathBuf>,
    /// Previously stored matrix (.json or .csv).
    #[arg(long, group = "source")]
    matrix: Option<PathBuf>,
}

impl ChainSource {
    fn load(&self, fit: &FitFlags, seed: u64) -> Result<(TransitionMatrix, Vec<InputDigest>)> {
        if let Some(path) = &self.data {
            let (records, _, digest) = ingest(path, seed)?;
            let pairs = pairs_from_records(&records, fit.n)?;
            return Ok((fit_transition_matrix(&pairs, &fit.options())?, vec![digest]));
        }
        if let Some(path) = &self.pairs {
            let (pairs, digest) = read_pairs(path)?;
            return Ok((fit_transition_matrix(&pairs, &fit.options())?, vec![digest]));
        }
        let path = self.matrix.as_ref().expect("clap enforces one source");
        let (bytes, digest) = digest_file(path)?;
        let text = String::from_utf8(bytes).map_err(|_| schema_err(path, 1, "file is not valid UTF-8"))?;
        let matrix = if path.extension().is_some_and(|e| e == "json") {
            TransitionMatrix::from_json(&text)?.0
        } else {
            TransitionMatrix::from_csv(&text)?
        };
        Ok((matrix, vec![digest]))
    }

    fn paths(&self) -> SourceConfig {
        SourceConfig {
            data: self.data.as_ref().map(|p| p.display().to_string()),
            pairs: self.pairs.as_ref().map(|p| p.display().to_string()),
            matrix: self.matrix.as_ref().map(|p| p.display().to_string()),
        }
    }
}

#[derive(Serialize)]
struct SourceConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    data: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pairs: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    matrix: Option<String>,
}

// ---------------------------------------------------------------------------
// entropy

#[derive(Args)]
struct EntropyArgs {
    /// Co-occurrence table CSV (`context,<variant labels...>` header).
    #[arg(long)]
    table: PathBuf,
}

fn run_entropy(cli: &Cli, args: &EntropyArgs) -> Result<()> {
    let (table, digest) = read_table(&args.table)?;
    let profile: EntropyProfile = entropy_profile(&table);

    #[derive(Serialize)]
    struct Config {
        table: String,
    }
    emit_report(
        cli,
        "entropy",
        Config { table: args.table.display().to_string() },
        vec![digest],
        profile,
    )
}

// ---------------------------------------------------------------------------
// change

#[derive(Args)]
struct ChangeArgs {
    /// Trial records CSV.
    #[arg(long)]
    data: PathBuf,
}

fn run_change(cli: &Cli, args: &ChangeArgs) -> Result<()> {
    let (records, warnings, digest) = ingest(&args.data, cli.seed)?;

    #[derive(Serialize)]
    struct PairRow {
        participant: String,
        condition: String,
        context: String,
        n: u32,
        input_majority: u32,
        output_majority: u32,
        effective_output_majority: u32,
        entropy_change: f64,
        frequency_change: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        percent_regularized: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none")]
        estimate_entropy_change: Option<f64>,
    }
    #[derive(Serialize)]
    struct ChangeResult {
        pairs: Vec<PairRow>,
        condition_means: BTreeMap<String, f64>,
        warnings: Vec<String>,
    }

    let mut rows = Vec::new();
    for record in &records {
        for pr in record.pairs() {
            let pair = &pr.pair;
            rows.push(PairRow {
                participant: record.participant_id().to_string(),
                condition: record.condition().to_string(),
                context: pr.context_id.clone(),
                n: pair.n(),
                input_majority: pair.input_majority(),
                output_majority: pair.output_majority(),
                effective_output_majority: pair.effective_output_majority(),
                entropy_change: entropy_change(pair),
                frequency_change: majority_frequency_change(pair),
                percent_regularized: percent_regularized(entropy_change(pair), pair.input_entropy()).ok(),
                estimate_entropy_change: estimate_entropy_change(pair).ok(),
            });
        }
    }
    let condition_means = if records.is_empty() {
        BTreeMap::new()
    } else {
        mean_entropy_change(&records)?
            .into_iter()
            .map(|(condition, mean)| (condition.to_string(), mean))
            .collect()
    };

    #[derive(Serialize)]
    struct Config {
        data: String,
    }
    emit_report(
        cli,
        "change",
        Config { data: args.data.display().to_string() },
        vec![digest],
        ChangeResult { pairs: rows, condition_means, warnings },
    )
}

// ---------------------------------------------------------------------------
// primacy

#[derive(Args)]
struct PrimacyArgs {
    /// Trial records CSV; pairs need recorded input sequences.
    #[arg(long)]
    data: PathBuf,
}

fn run_primacy(cli: &Cli, args: &PrimacyArgs) -> Result<()> {
    let (records, warnings, digest) = ingest(&args.data, cli.seed)?;

    #[derive(Serialize)]
    struct PrimacyRow {
        participant: String,
        condition: String,
        context: String,
        /// Absent when the input has no minority variant (10:0 sequences).
        #[serde(skip_serializing_if = "Option::is_none")]
        score: Option<f64>,
        minority_count: u32,
        regularization: Regularization,
    }
    #[derive(Serialize)]
    struct PrimacyResult {
        pairs: Vec<PrimacyRow>,
        /// Pairs without a recorded input sequence.
        skipped: usize,
        warnings: Vec<String>,
    }

    let mut rows = Vec::new();
    let mut skipped = 0usize;
    for record in &records {
        for pr in record.pairs() {
            let Some(sequence) = pr.pair.minority_input_sequence() else {
                skipped += 1;
                continue;
            };
            let minority_count = sequence.iter().filter(|&&b| b).count() as u32;
            let score = match primacy_score(&sequence) {
                Ok(s) => Some(s.value),
                Err(Error::UndefinedScore(_)) => None,
                Err(e) => return Err(e),
            };
            rows.push(PrimacyRow {
                participant: record.participant_id().to_string(),
                condition: record.condition().to_string(),
                context: pr.context_id.clone(),
                score,
                minority_count,
                regularization: regularization_type(&pr.pair),
            });
        }
    }

    #[derive(Serialize)]
    struct Config {
        data: String,
    }
    emit_report(
        cli,
        "primacy",
        Config { data: args.data.display().to_string() },
        vec![digest],
        PrimacyResult { pairs: rows, skipped, warnings },
    )
}

// ---------------------------------------------------------------------------
// classify

#[derive(Args)]
struct ClassifyArgs {
    /// Trial records CSV.
    #[arg(long)]
    data: PathBuf,
    /// Monte Carlo runs per matching envelope.
    #[arg(long, default_value_t = 100_000)]
    runs: u64,
    /// Confidence level for intervals and envelopes.
    #[arg(long, default_value_t = 0.95)]
    confidence: f64,
}

fn run_classify(cli: &Cli, args: &ClassifyArgs) -> Result<()> {
    let (records, warnings, digest) = ingest(&args.data, cli.seed)?;

    #[derive(Serialize)]
    struct ParticipantRow {
        participant: String,
        condition: String,
        #[serde(flatten)]
        label: StrategyLabel,
    }
    #[derive(Serialize)]
    struct ClassifyResult {
        participants: Vec<ParticipantRow>,
        warnings: Vec<String>,
    }

    // One envelope per distinct input multiset; keyed sorted so row order
    // in the data file cannot matter.
    let mut envelopes: BTreeMap<Vec<(u32, u32)>, EntropyEnvelope> = BTreeMap::new();
    let mut rows = Vec::new();
    for record in &records {
        let pairs: Vec<RatioPair> = record.pairs().iter().map(|pr| pr.pair.clone()).collect();
        let label = if pairs.len() == 1 {
            let pair = &pairs[0];
            let interval = clopper_pearson(pair.input_majority(), pair.n(), args.confidence)?;
            classify_low_load(pair, &interval)?
        } else {
            let mut input_set: Vec<(u32, u32)> =
                pairs.iter().map(|p| (p.input_majority(), p.n())).collect();
            input_set.sort_unstable();
            let envelope = match envelopes.get(&input_set) {
                Some(e) => e,
                None => {
                    let options = EnvelopeOptions {
                        runs: args.runs,
                        confidence: args.confidence,
                        seed: cli.seed,
                    };
                    let envelope = matching_envelope(&input_set, &options)?;
                    envelopes.entry(input_set.clone()).or_insert(envelope)
                }
            };
            classify_high_load(&pairs, envelope)?
        };
        rows.push(ParticipantRow {
            participant: record.participant_id().to_string(),
            condition: record.condition().to_string(),
            label,
        });
    }

    #[derive(Serialize)]
    struct Config {
        data: String,
        runs: u64,
        confidence: f64,
    }
    emit_report(
        cli,
        "classify",
        Config { data: args.data.display().to_string(), runs: args.runs, confidence: args.confidence },
        vec![digest],
        ClassifyResult { participants: rows, warnings },
    )
}

// ---------------------------------------------------------------------------
// fit-matrix

#[derive(Args)]
#[command(group = clap::ArgGroup::new("source").required(true))]
struct FitMatrixArgs {
    #[command(flatten)]
    source: DataOrPairs,
    #[command(flatten)]
    fit: FitFlags,
    /// `json` stores counts and provenance; `csv` is the bare matrix.
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
}

fn run_fit_matrix(cli: &Cli, args: &FitMatrixArgs) -> Result<()> {
    let (pairs, digest) = match (&args.source.data, &args.source.pairs) {
        (Some(path), _) => {
            let (records, _, digest) = ingest(path, cli.seed)?;
            (pairs_from_records(&records, args.fit.n)?, digest)
        }
        (_, Some(path)) => read_pairs(path)?,
        _ => unreachable!("clap enforces one source"),
    };
    let matrix = fit_transition_matrix(&pairs, &args.fit.options())?;
    match args.format {
        OutputFormat::Csv => write_output(&cli.output, &matrix.to_csv()),
        OutputFormat::Json => {
            // The matrix file is itself the report: provenance carries tool,
            // version, source digest, and seed, and the fit fields carry the
            // resolved configuration.
            let provenance = Provenance {
                tool: "freqreg".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                source: digest.path.clone(),
                source_sha256: digest.sha256.clone(),
                seed: Some(cli.seed),
            };
            let mut text = matrix.to_json(Some(provenance))?;
            text.push('\n');
            write_output(&cli.output, &text)
        }
    }
}

// ---------------------------------------------------------------------------
// stationary

#[derive(Args)]
#[command(group = clap::ArgGroup::new("source").required(true))]
struct StationaryArgs {
    #[command(flatten)]
    source: ChainSource,
    #[command(flatten)]
    fit: FitFlags,
    #[command(flatten)]
    solve: SolveFlags,
    /// `csv` emits tidy state,probability rows for plotting.
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
}

fn run_stationary(cli: &Cli, args: &StationaryArgs) -> Result<()> {
    let (matrix, digests) = args.source.load(&args.fit, cli.seed)?;
    let stationary = stationary_distribution(&matrix, &args.solve.options())?;
    let regularity = stationary_regularity(&stationary);

    if args.format == OutputFormat::Csv {
        let mut csv = String::from("state,probability\n");
        for (state, p) in stationary.probabilities.iter().enumerate() {
            let _ = writeln!(csv, "{state},{p:.16e}");
        }
        return write_output(&cli.output, &csv);
    }

    #[derive(Serialize)]
    struct Config {
        #[serde(flatten)]
        source: SourceConfig,
        fit: FitConfig,
        solve: SolveConfig,
    }
    #[derive(Serialize)]
    struct StationaryResult {
        states: usize,
        probabilities: Vec<f64>,
        residual: f64,
        iterations: u64,
        regularity_bits: f64,
    }
    emit_report(
        cli,
        "stationary",
        Config { source: args.source.paths(), fit: (&args.fit).into(), solve: (&args.solve).into() },
        digests,
        StationaryResult {
            states: stationary.probabilities.len(),
            probabilities: stationary.probabilities,
            residual: stationary.residual,
            iterations: stationary.iterations,
            regularity_bits: regularity,
        },
    )
}

// ---------------------------------------------------------------------------
// iterate

#[derive(Args)]
#[command(group = clap::ArgGroup::new("source").required(true))]
struct IterateArgs {
    #[command(flatten)]
    source: ChainSource,
    #[command(flatten)]
    fit: FitFlags,
    /// Start distribution: `uniform`, `state:K`, or comma-separated weights.
    #[arg(long, default_value = "uniform")]
    start: String,
    /// Number of transmission steps to apply.
    #[arg(long, default_value_t = 50)]
    generations: usize,
    /// `csv` emits tidy generation,state,probability rows.
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
}

fn parse_start(spec: &str, states: usize) -> Result<Vec<f64>> {
    if spec == "uniform" {
        return Ok(vec![1.0; states]);
    }
    if let Some(rest) = spec.strip_prefix("state:") {
        let state: usize = rest
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("`{rest}` is not a state index")))?;
        if state >= states {
            return Err(Error::InvalidArgument(format!(
                "start state {state} out of range for {states} states"
            )));
        }
        let mut start = vec![0.0; states];
        start[state] = 1.0;
        return Ok(start);
    }
    let weights: Vec<f64> = spec
        .split(',')
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("`{}` is not a weight", f.trim())))
        })
        .collect::<Result<_>>()?;
    if weights.len() != states {
        return Err(Error::InvalidArgument(format!(
            "start distribution has {} weights, matrix has {states} states",
            weights.len()
        )));
    }
    Ok(weights)
}

fn run_iterate(cli: &Cli, args: &IterateArgs) -> Result<()> {
    let (matrix, digests) = args.source.load(&args.fit, cli.seed)?;
    let start = parse_start(&args.start, matrix.states())?;
    let trajectory = iterate_chain(&matrix, &start, args.generations)?;

    if args.format == OutputFormat::Csv {
        let mut csv = String::from("generation,state,probability\n");
        for (generation, distribution) in trajectory.iter().enumerate() {
            for (state, p) in distribution.iter().enumerate() {
                let _ = writeln!(csv, "{generation},{state},{p:.16e}");
            }
        }
        return write_output(&cli.output, &csv);
    }

    #[derive(Serialize)]
    struct Config {
        #[serde(flatten)]
        source: SourceConfig,
        fit: FitConfig,
        start: String,
        generations: usize,
    }
    #[derive(Serialize)]
    struct IterateResult {
        generations: Vec<Vec<f64>>,
    }
    emit_report(
        cli,
        "iterate",
        Config {
            source: args.source.paths(),
            fit: (&args.fit).into(),
            start: args.start.clone(),
            generations: args.generations,
        },
        digests,
        IterateResult { generations: trajectory },
    )
}

// ---------------------------------------------------------------------------
// sample-chain

#[derive(Args)]
#[command(group = clap::ArgGroup::new("source").required(true))]
struct SampleChainArgs {
    #[command(flatten)]
    source: ChainSource,
    #[command(flatten)]
    fit: FitFlags,
    /// State the trajectory starts in.
    #[arg(long)]
    start_state: u32,
    /// Number of sampled transmissions.
    #[arg(long)]
    steps: usize,
    /// `csv` emits tidy step,state rows.
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
}

fn run_sample_chain(cli: &Cli, args: &SampleChainArgs) -> Result<()> {
    let (matrix, digests) = args.source.load(&args.fit, cli.seed)?;
    let states = sample_chain(&matrix, args.start_state, args.steps, cli.seed)?;

    if args.format == OutputFormat::Csv {
        let mut csv = String::from("step,state\n");
        for (step, state) in states.iter().enumerate() {
            let _ = writeln!(csv, "{step},{state}");
        }
        return write_output(&cli.output, &csv);
    }

    #[derive(Serialize)]
    struct Config {
        #[serde(flatten)]
        source: SourceConfig,
        fit: FitConfig,
        start_state: u32,
        steps: usize,
    }
    #[derive(Serialize)]
    struct SampleResult {
        states: Vec<u32>,
    }
    emit_report(
        cli,
        "sample-chain",
        Config {
            source: args.source.paths(),
            fit: (&args.fit).into(),
            start_state: args.start_state,
            steps: args.steps,
        },
        digests,
        SampleResult { states },
    )
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Args)]
struct SimulateArgs {
    /// Learner mix JSON: a list of {"gamma": g, "weight": w} components.
    #[arg(long)]
    mix: PathBuf,
    /// Majority counts the population responds to (1 or 6 of them).
    #[arg(long, value_delimiter = ',', required = true)]
    inputs: Vec<u32>,
    /// Population size.
    #[arg(long)]
    participants: usize,
    /// Observations per ratio.
    #[arg(long, default_value_t = 10)]
    n: u32,
    /// Condition domain recorded in the generated data.
    #[arg(long, value_enum, default_value_t = DomainArg::Marbles)]
    domain: DomainArg,
    /// Also write the generated records as a trials CSV.
    #[arg(long)]
    data_out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum DomainArg {
    Marbles,
    Words,
}

impl From<DomainArg> for Domain {
    fn from(arg: DomainArg) -> Self {
        match arg {
            DomainArg::Marbles => Domain::Marbles,
            DomainArg::Words => Domain::Words,
        }
    }
}

fn run_simulate(cli: &Cli, args: &SimulateArgs) -> Result<()> {
    let (bytes, digest) = digest_file(&args.mix)?;
    let mix: Vec<MixComponent> = serde_json::from_slice(&bytes)?;
    let options = PopulationOptions {
        participants: args.participants,
        n: args.n,
        domain: args.domain.into(),
        seed: cli.seed,
    };
    let records = simulate_population(&mix, &args.inputs, &options)?;
    let csv = freqreg::trials::serialize_csv(&records);
    let csv_sha256 = sha256_hex(csv.as_bytes());

    #[derive(Serialize)]
    struct Config {
        mix: String,
        inputs: Vec<u32>,
        participants: usize,
        n: u32,
        domain: DomainArg,
        #[serde(skip_serializing_if = "Option::is_none")]
        data_out: Option<String>,
    }
    #[derive(Serialize)]
    struct SimulateResult {
        participants: usize,
        pairs: usize,
        csv_sha256: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        data_path: Option<String>,
        /// Inline records when no --data-out was given.
        #[serde(skip_serializing_if = "Option::is_none")]
        data: Option<String>,
    }

    let data_path = args.data_out.as_ref().map(|p| p.display().to_string());
    if let Some(path) = &args.data_out {
        fs::write(path, &csv).map_err(|e| annotate(path, e))?;
    }
    let pairs = records.iter().map(|r| r.pairs().len()).sum();
    emit_report(
        cli,
        "simulate",
        Config {
            mix: args.mix.display().to_string(),
            inputs: args.inputs.clone(),
            participants: args.participants,
            n: args.n,
            domain: args.domain,
            data_out: data_path.clone(),
        },
        vec![digest],
        SimulateResult {
            participants: records.len(),
            pairs,
            csv_sha256,
            data_path,
            data: if args.data_out.is_none() { Some(csv) } else { None },
        },
    )
}

// ---------------------------------------------------------------------------
// bootstrap

#[derive(Args)]
#[command(group = clap::ArgGroup::new("source").required(true))]
struct BootstrapArgs {
    #[command(flatten)]
    source: DataOrPairs,
    /// Statistic to resample.
    #[arg(long, value_enum)]
    statistic: StatisticArg,
    /// Resampling unit; `participants` keeps each participant's pairs whole.
    #[arg(long, value_enum, default_value_t = UnitArg::Pairs)]
    unit: UnitArg,
    /// Restrict --data records to one condition label (e.g. `marbles6`).
    #[arg(long)]
    condition: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    resamples: u64,
    #[arg(long, default_value_t = 0.95)]
    confidence: f64,
    #[command(flatten)]
    fit: FitFlags,
    #[command(flatten)]
    solve: SolveFlags,
}

#[derive(Clone, Copy, PartialEq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum StatisticArg {
    /// Mean entropy change across the resampling unit.
    MeanChange,
    /// Stationary regularity of the fitted transition matrix.
    StationaryRegularity,
}

#[derive(Clone, Copy, PartialEq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum UnitArg {
    Pairs,
    Participants,
}

fn run_bootstrap(cli: &Cli, args: &BootstrapArgs) -> Result<()> {
    let options = BootstrapOptions {
        resamples: args.resamples,
        confidence: args.confidence,
        seed: cli.seed,
    };

    // Units of `participants` and condition filters only make sense for
    // ingested records, not bare pairs.
    let mut records: Option<Vec<ParticipantRecord>> = None;
    let (pairs, digest) = match (&args.source.data, &args.source.pairs) {
        (Some(path), _) => {
            let (mut ingested, _, digest) = ingest(path, cli.seed)?;
            if let Some(label) = &args.condition {
                let condition = Condition::parse_label(label).ok_or_else(|| {
                    Error::InvalidArgument(format!("`{label}` is not a condition label"))
                })?;
                ingested.retain(|r| r.condition() == condition);
            }
            let pairs = pairs_from_records(&ingested, args.fit.n)?;
            records = Some(ingested);
            (pairs, digest)
        }
        (_, Some(path)) => {
            if args.unit == UnitArg::Participants {
                return Err(Error::InvalidArgument(
                    "--unit participants needs --data records, not bare pairs".into(),
                ));
            }
            if args.condition.is_some() {
                return Err(Error::InvalidArgument(
                    "--condition filtering needs --data records, not bare pairs".into(),
                ));
            }
            read_pairs(path)?
        }
        _ => unreachable!("clap enforces one source"),
    };

    let delta_h = |&(input, output): &(u32, u32)| -> Result<f64> {
        Ok(freqreg::infotheory::ratio_entropy(output, args.fit.n)?
            - freqreg::infotheory::ratio_entropy(input, args.fit.n)?)
    };
    let result: BootstrapResult = match (args.statistic, args.unit) {
        (StatisticArg::MeanChange, UnitArg::Pairs) => {
            let values: Vec<f64> = pairs.iter().map(delta_h).collect::<Result<_>>()?;
            bootstrap_mean(&values, &options)?
        }
        (StatisticArg::MeanChange, UnitArg::Participants) => {
            let records = records.as_ref().expect("participant unit implies records");
            let values: Vec<f64> = records
                .iter()
                .filter(|r| !r.pairs().is_empty())
                .map(|r| {
                    let total: f64 = r.pairs().iter().map(|pr| entropy_change(&pr.pair)).sum();
                    total / r.pairs().len() as f64
                })
                .collect();
            bootstrap_mean(&values, &options)?
        }
        (StatisticArg::StationaryRegularity, UnitArg::Pairs) => {
            bootstrap_stationary(&pairs, &args.fit.options(), &args.solve.options(), &options)?
        }
        (StatisticArg::StationaryRegularity, UnitArg::Participants) => {
            let records = records.as_ref().expect("participant unit implies records");
            let groups: Vec<Vec<(u32, u32)>> = records
                .iter()
                .map(|r| {
                    r.pairs()
                        .iter()
                        .map(|pr| (pr.pair.input_majority(), pr.pair.output_majority()))
                        .collect()
                })
                .collect();
            bootstrap_stationary_grouped(&groups, &args.fit.options(), &args.solve.options(), &options)?
        }
    };

    #[derive(Serialize)]
    struct Config {
        #[serde(skip_serializing_if = "Option::is_none")]
        data: Option<String>,
        #[serde(skip_serializing_if = "Option::is_none")]
        pairs: Option<String>,
        statistic: StatisticArg,
        unit: UnitArg,
        #[serde(skip_serializing_if = "Option::is_none")]
        condition: Option<String>,
        resamples: u64,
        confidence: f64,
        fit: FitConfig,
        solve: SolveConfig,
    }
    emit_report(
        cli,
        "bootstrap",
        Config {
            data: args.source.data.as_ref().map(|p| p.display().to_string()),
            pairs: args.source.pairs.as_ref().map(|p| p.display().to_string()),
            statistic: args.statistic,
            unit: args.unit,
            condition: args.condition.clone(),
            resamples: args.resamples,
            confidence: args.confidence,
            fit: (&args.fit).into(),
            solve: (&args.solve).into(),
        },
        vec![digest],
        result,
    )
}
