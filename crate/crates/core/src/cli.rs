//! Command-line front end. The binary is a thin wrapper over [`run`], which
//! takes its output streams as arguments so tests can drive it directly.
//!
//! Exit codes: 0 success, 1 self-check or validation failure, 2 invalid
//! arguments or parameters. Every error is one line on stderr starting
//! with `error: <kind>:`.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::codebook::{self, Codebook, OverallDistribution, QueryClass};
use crate::error::DirError;
use crate::params::{self, SchemeParams};
use crate::pmf;
use crate::retrieval::{self, FileStore, PrimeField};
use crate::simulator::{sweep_rates, SimulationConfig, Simulator};

/// Caps the number of worker threads used by `simulate`.
pub const THREADS_ENV: &str = "DIR_LAB_THREADS";

/// Self-check radius for `simulate`, in standard errors.
pub const SELF_CHECK_SIGMAS: f64 = 4.0;

#[derive(Debug, Parser)]
#[command(
    name = "dir-lab",
    version,
    about = "Deceptive information retrieval toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form sweep of rate and cost over deception levels (CSV).
    Theory(TheoryArgs),
    /// Monte Carlo run of the full scheme (JSON report).
    Simulate(SimulateArgs),
    /// Dump a real query table (CSV) and validate the query classification.
    Codebook(CodebookArgs),
    /// Optimal dummy-count pmf, checked against the exhaustive oracle (JSON).
    OptimizePmf(PmfArgs),
}

#[derive(Debug, Args)]
struct TheoryArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    d_min: f64,
    /// Upper end of the grid as a fraction of d_max; must be < 1.
    #[arg(long, default_value_t = 0.99, allow_hyphen_values = true)]
    d_max_frac: f64,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, allow_hyphen_values = true)]
    d: f64,
    #[arg(long, default_value_t = 100_000)]
    retrievals: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = retrieval::DEFAULT_MODULUS)]
    modulus: u32,
    /// Symbols per file; defaults to 2(n-1).
    #[arg(long)]
    file_len: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CodebookArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, allow_hyphen_values = true)]
    d: f64,
    #[arg(long, default_value_t = 1)]
    file: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PmfArgs {
    /// Target E[1/(M+1)]; alternatively give --n, --k and --d.
    #[arg(long, conflicts_with_all = ["n", "k", "d"], allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long, requires_all = ["k", "d"])]
    n: Option<usize>,
    #[arg(long, requires_all = ["n", "d"])]
    k: Option<usize>,
    #[arg(long, requires_all = ["n", "k"], allow_hyphen_values = true)]
    d: Option<f64>,
    /// Oracle search width; defaults to 2 ceil(1/alpha) + 4.
    #[arg(long)]
    max_support: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    /// Bad input: exit 2.
    Usage(String),
    /// Check failed: exit 1.
    Check(String),
}

impl From<DirError> for Failure {
    fn from(e: DirError) -> Self {
        match e {
            DirError::ValidationFailure { .. }
            | DirError::CorrectnessViolation { .. }
            | DirError::DecodingImpossible(_) => Failure::Check(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(format!("io: {e}"))
    }
}

type CmdResult = Result<(), Failure>;

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if !e.use_stderr() {
                // --help and --version.
                let _ = stdout.write_all(e.render().to_string().as_bytes());
                return 0;
            }
            let rendered = e.render().to_string();
            let reason = rendered
                .lines()
                .next()
                .unwrap_or("error: invalid arguments");
            let _ = writeln!(stderr, "{reason}");
            return 2;
        }
    };
    let result = match cli.command {
        Command::Theory(a) => cmd_theory(a, stdout),
        Command::Simulate(a) => cmd_simulate(a, stdout, stderr),
        Command::Codebook(a) => cmd_codebook(a, stdout, stderr),
        Command::OptimizePmf(a) => cmd_optimize_pmf(a, stdout, stderr),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            2
        }
        Err(Failure::Check(msg)) => {
            let _ = writeln!(stderr, "error: {msg}");
            1
        }
    }
}

fn write_output(out: &Option<PathBuf>, stdout: &mut dyn Write, body: &str) -> io::Result<()> {
    match out {
        Some(path) => File::create(path)?.write_all(body.as_bytes()),
        None => stdout.write_all(body.as_bytes()),
    }
}

/// `x` with at most 12 significant digits, '.' decimal point, trailing
/// zeros trimmed; scientific notation outside `[1e-5, 1e15)`.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-5..15).contains(&magnitude) {
        return format!("{x:.11e}");
    }
    let decimals = (11 - magnitude).max(0) as usize;
    let mut s = format!("{x:.decimals$}");
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0').trim_end_matches('.').len();
        s.truncate(trimmed);
    }
    s
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(format!("argument: {}", msg.into()))
}

fn cmd_theory(a: TheoryArgs, stdout: &mut dyn Write) -> CmdResult {
    let d_max = params::deception_capacity(a.n, a.k)?;
    if a.steps < 2 {
        return Err(usage(format!("steps={} violates steps >= 2", a.steps)));
    }
    if !(a.d_max_frac >= 0.0 && a.d_max_frac < 1.0) {
        return Err(usage(format!(
            "d-max-frac={} violates 0 <= d-max-frac < 1",
            a.d_max_frac
        )));
    }
    let hi = a.d_max_frac * d_max;
    if !(a.d_min >= 0.0 && a.d_min <= hi) {
        return Err(usage(format!(
            "d-min={} violates 0 <= d-min <= d-max-frac*d_max={}",
            a.d_min,
            format_number(hi)
        )));
    }
    let mut grid: Vec<f64> = (0..a.steps)
        .map(|i| a.d_min + (hi - a.d_min) * i as f64 / (a.steps - 1) as f64)
        .collect();
    grid.dedup();

    let mut csv = String::from("d,eps,alpha,u,expected_m,download_cost,rate\n");
    for row in sweep_rates(a.n, a.k, &grid)? {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            format_number(row.d),
            format_number(row.eps),
            format_number(row.alpha),
            row.u,
            format_number(row.expected_m),
            format_number(row.download_cost),
            format_number(row.rate),
        ));
    }
    write_output(&a.out, stdout, &csv)?;
    Ok(())
}

fn thread_cap() -> Result<Option<usize>, Failure> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t >= 1 => Ok(Some(t)),
            _ => Err(usage(format!(
                "{THREADS_ENV}={v} is not a positive integer"
            ))),
        },
    }
}

fn cmd_simulate(a: SimulateArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CmdResult {
    let params = SchemeParams::new(a.n, a.k, a.d)?;
    let mut config = SimulationConfig::new(params, a.retrievals, a.seed);
    config.field = PrimeField::new(a.modulus)?;
    if let Some(len) = a.file_len {
        config.file_len = len;
    }
    config.threads = thread_cap()?;
    let report = Simulator::new(config)?.run()?;
    let mut body = serde_json::to_string_pretty(&report)
        .map_err(|e| Failure::Usage(format!("serialize: {e}")))?;
    body.push('\n');
    write_output(&a.out, stdout, &body)?;

    let gap = (report.empirical_pe - report.theory_pe).abs();
    let radius = SELF_CHECK_SIGMAS * report.std_error_pe;
    if gap > radius {
        return Err(Failure::Check(format!(
            "self-check: |empirical_pe - theory_pe| = {} exceeds {SELF_CHECK_SIGMAS} std errors = {}",
            format_number(gap),
            format_number(radius)
        )));
    }
    writeln!(
        stderr,
        "self-check: ok (|empirical_pe - theory_pe| = {} <= {})",
        format_number(gap),
        format_number(radius)
    )?;
    Ok(())
}

fn cmd_codebook(a: CodebookArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CmdResult {
    let params = SchemeParams::new(a.n, a.k, a.d)?;
    let book = Codebook::new(params)?;
    let rows = book.real_table(a.file)?;

    let mut csv = String::from("row_id,prob_class");
    for db in 1..=params.n_databases() {
        csv.push_str(&format!(",db_{db}"));
    }
    csv.push('\n');
    for (id, row) in rows.iter().enumerate() {
        csv.push_str(&format!("{},{}", id + 1, row.prob_class()));
        for q in codebook::QuerySet::per_database(row) {
            csv.push_str(&format!(",{q}"));
        }
        csv.push('\n');
    }
    write_output(&a.out, stdout, &csv)?;

    let base = rows
        .iter()
        .filter(|r| r.prob_class() == codebook::ProbClass::Base)
        .count();
    writeln!(stderr, "base_rows={base}")?;
    writeln!(stderr, "boosted_rows={}", rows.len() - base)?;

    let field = PrimeField::default();
    let contents: Vec<Vec<u32>> = (0..params.n_files())
        .map(|f| {
            (0..2 * params.n_segments())
                .map(|i| ((f * 31 + i * 7 + 1) % field.modulus() as usize) as u32)
                .collect()
        })
        .collect();
    let store = FileStore::new(contents, params.n_segments(), field)?;
    let mut failures = Vec::new();
    for (id, row) in rows.iter().enumerate() {
        let answers = codebook::QuerySet::per_database(row)
            .iter()
            .map(|q| retrieval::answer(&store, q))
            .collect::<Result<Vec<_>, _>>()?;
        match retrieval::decode(row, &answers, a.file, field) {
            Ok(decoded) if decoded == store.file(a.file)? => {}
            Ok(_) => failures.push(format!("row {}: decoded file differs", id + 1)),
            Err(e) => failures.push(format!("row {}: {e}", id + 1)),
        }
    }

    let dist = OverallDistribution::from_codebook(&book, 0)?;
    let (mut deceptive, mut pir) = (0usize, 0usize);
    for q in dist.queries() {
        match codebook::classify_query(&dist, &q) {
            Ok(QueryClass::Deceptive { .. }) => deceptive += 1,
            Ok(QueryClass::Pir) => pir += 1,
            Err(e) => failures.push(e.to_string()),
        }
    }
    for file in 1..=params.n_files() {
        let total = dist.total(file)?;
        if (total - 1.0).abs() > 1e-12 {
            failures.push(format!("file {file}: overall distribution sums to {total}"));
        }
    }
    writeln!(stderr, "deceptive_queries={deceptive}")?;
    writeln!(stderr, "pir_queries={pir}")?;
    writeln!(stderr, "failures={}", failures.len())?;
    if let Some(first) = failures.first() {
        return Err(Failure::Check(format!(
            "validation: {} failure(s), first: {first}",
            failures.len()
        )));
    }
    writeln!(stderr, "validation=ok")?;
    Ok(())
}

fn cmd_optimize_pmf(a: PmfArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CmdResult {
    let alpha = match (a.alpha, a.n, a.k, a.d) {
        (Some(alpha), ..) => alpha,
        (None, Some(n), Some(k), Some(d)) => SchemeParams::new(n, k, d)?.alpha(),
        _ => return Err(usage("give either --alpha or all of --n, --k, --d")),
    };
    let optimum = pmf::optimal_dummy_pmf(alpha)?;
    let max_support = a
        .max_support
        .unwrap_or_else(|| pmf::default_oracle_support(alpha));
    let oracle = pmf::brute_force_min_mean(alpha, max_support)?;
    let body = json!({
        "alpha": alpha,
        "u": params::support_locator(alpha),
        "support": optimum.support().iter().map(|&(m, p)| json!({"m": m, "prob": p})).collect::<Vec<_>>(),
        "mean": optimum.mean(),
        "harmonic": optimum.harmonic(),
        "lemma_mean": pmf::lemma_expected_dummies(alpha),
        "oracle_mean": oracle.mean(),
        "oracle_max_support": max_support,
    });
    let mut text = serde_json::to_string_pretty(&body)
        .map_err(|e| Failure::Usage(format!("serialize: {e}")))?;
    text.push('\n');
    write_output(&a.out, stdout, &text)?;
    let gap = (optimum.mean() - oracle.mean()).abs();
    if gap > 1e-9 {
        return Err(Failure::Check(format!(
            "oracle: closed-form mean {} differs from exhaustive mean {}",
            optimum.mean(),
            oracle.mean()
        )));
    }
    writeln!(stderr, "oracle=ok")?;
    Ok(())
}
