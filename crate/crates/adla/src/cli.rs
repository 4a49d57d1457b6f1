//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/format error, 3 leakage
//! detected under `assess --fail-on-leak`. Machine-readable output goes
//! to stdout, diagnostics to stderr, so the tool composes in CI (for
//! example, gating a firmware build on "no leakage at n traces").

use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::assess::{
    assess_pair, detection_curve, traces_to_detection, write_curve_csv, write_stats_csv, MaxStat,
};
use crate::simulate::{find_scenario, generate_pair, scenario_catalog, ScenarioError};
use crate::stats::qq_points;
use crate::svg::render_panels;
use crate::threshold::{derive_thresholds, ThresholdError};
use crate::trace::{TracePair, TraceSet, TraceError};

#[derive(Parser)]
#[command(
    name = "adla",
    version,
    about = "Side-channel leakage assessment: per-sample TVLA (Welch t) and ADLA (Anderson-Darling) tests",
    term_width = 100
)]
struct Cli {
    /// Cap the worker thread pool (fallback: ADLA_THREADS; default: all cores)
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a fixed-vs-fixed trace pair from a scenario preset
    Simulate(SimulateArgs),
    /// Run both leakage tests per time sample over two trace sets
    Assess(AssessArgs),
    /// Derive the TVLA and ADLA detection thresholds for a significance level
    Threshold(ThresholdArgs),
    /// Emit normal Q-Q data for one time sample of a trace set
    Qq(QqArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario preset name (see --list)
    #[arg(long, required_unless_present = "list")]
    scenario: Option<String>,
    /// Traces per condition (overrides the preset)
    #[arg(long)]
    traces: Option<usize>,
    /// Time samples per trace (overrides the preset)
    #[arg(long)]
    samples: Option<usize>,
    /// Master seed (overrides the preset)
    #[arg(long)]
    seed: Option<u64>,
    /// Gaussian noise level (overrides the preset)
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Output path for the condition-A trace set
    #[arg(long, value_name = "PATH", required_unless_present = "list")]
    out_a: Option<PathBuf>,
    /// Output path for the condition-B trace set
    #[arg(long, value_name = "PATH", required_unless_present = "list")]
    out_b: Option<PathBuf>,
    /// Print the scenario catalog as JSON and exit
    #[arg(long)]
    list: bool,
}

#[derive(Args)]
struct AssessArgs {
    /// Condition-A trace set (ADLA1 container)
    #[arg(long, value_name = "PATH")]
    set_a: PathBuf,
    /// Condition-B trace set (ADLA1 container)
    #[arg(long, value_name = "PATH")]
    set_b: PathBuf,
    /// Significance level in (0, 0.5)
    #[arg(long, default_value_t = 3.4e-6)]
    alpha: f64,
    /// Write per-sample statistics CSV here
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
    /// Write the full JSON report here
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
    /// Drop per-sample detail from the JSON report when the campaign has
    /// more time samples than this
    #[arg(long, value_name = "N")]
    per_sample_cap: Option<usize>,
    /// Comma-separated, strictly increasing trace counts for a detection curve
    #[arg(long, value_delimiter = ',', value_name = "N,N,...", requires = "curve_out")]
    curve: Option<Vec<usize>>,
    /// Write the detection-curve CSV here
    #[arg(long, value_name = "PATH", requires = "curve")]
    curve_out: Option<PathBuf>,
    /// Render the two normalized-statistic panels to this SVG file
    #[arg(long, value_name = "PATH")]
    svg: Option<PathBuf>,
    /// Exit with status 3 when any detection flag is set
    #[arg(long)]
    fail_on_leak: bool,
}

#[derive(Args)]
struct ThresholdArgs {
    /// Significance level in (0, 0.5)
    #[arg(long, default_value_t = 3.4e-6)]
    alpha: f64,
    /// Cross-check tau_a against this many Monte Carlo draws of the
    /// truncated series (needs alpha >= 1e-4)
    #[arg(long, value_name = "N")]
    mc_draws: Option<u64>,
    /// Also write the derivation report as JSON here
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct QqArgs {
    /// Trace set to diagnose (ADLA1 container)
    #[arg(long, value_name = "PATH")]
    set: PathBuf,
    /// Time sample (column) to extract
    #[arg(long)]
    sample_index: usize,
    /// Output CSV path (columns: theoretical,empirical)
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
}

enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) => m,
        }
    }
}

impl From<TraceError> for CliError {
    fn from(e: TraceError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<crate::assess::AssessError> for CliError {
    fn from(e: crate::assess::AssessError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ThresholdError> for CliError {
    fn from(e: ThresholdError) -> Self {
        match e {
            ThresholdError::AlphaOutOfRange(_)
            | ThresholdError::AlphaTooSmallForMonteCarlo(_)
            | ThresholdError::SeriesOrderOutOfRange(_)
            | ThresholdError::NoDraws => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

/// Parses and executes one invocation; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            e.print().ok();
            return code;
        }
    };
    let threads = cli.threads.or_else(|| {
        std::env::var("ADLA_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("adla: cannot build thread pool: {e}");
            return 2;
        }
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("adla: {}", e.message());
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Simulate(args) => simulate(args),
        Command::Assess(args) => assess(args),
        Command::Threshold(args) => threshold(args),
        Command::Qq(args) => qq(args),
    }
}

#[derive(Serialize)]
struct CatalogEntry {
    name: &'static str,
    description: &'static str,
    config: crate::simulate::ScenarioConfig,
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    scenario: &'a str,
    n_traces: usize,
    n_samples: usize,
    seed: u64,
    out_a: &'a str,
    out_b: &'a str,
}

fn simulate(args: SimulateArgs) -> Result<i32, CliError> {
    if args.list {
        let entries: Vec<CatalogEntry> = scenario_catalog()
            .into_iter()
            .map(|p| CatalogEntry {
                name: p.name,
                description: p.description,
                config: p.config,
            })
            .collect();
        println!(
            "{}",
            serde_json::to_string_pretty(&entries).expect("catalog serializes")
        );
        return Ok(0);
    }
    let name = args.scenario.expect("clap enforces scenario without --list");
    let preset = find_scenario(&name)?;
    let mut config = preset.config;
    if let Some(n) = args.traces {
        config.n_traces = n;
    }
    if let Some(s) = args.samples {
        config.n_samples = s;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(sigma) = args.noise_sigma {
        config.noise_sigma = sigma;
    }
    let pair = generate_pair(&config)?;
    let out_a = args.out_a.expect("clap enforces out-a without --list");
    let out_b = args.out_b.expect("clap enforces out-b without --list");
    pair.a().save(&out_a)?;
    pair.b().save(&out_b)?;
    let summary = SimulateSummary {
        scenario: preset.name,
        n_traces: config.n_traces,
        n_samples: config.n_samples,
        seed: config.seed,
        out_a: &out_a.display().to_string(),
        out_b: &out_b.display().to_string(),
    };
    println!(
        "{}",
        serde_json::to_string(&summary).expect("summary serializes")
    );
    Ok(0)
}

#[derive(Serialize)]
struct AssessSummary {
    n_traces: usize,
    n_samples: usize,
    alpha: f64,
    tau_t: f64,
    tau_a: f64,
    max_t_norm: Option<MaxStat>,
    max_a2_norm: Option<MaxStat>,
    tvla_leak_count: usize,
    adla_leak_count: usize,
}

fn assess(args: AssessArgs) -> Result<i32, CliError> {
    let a = TraceSet::load(&args.set_a)?;
    let b = TraceSet::load(&args.set_b)?;
    let pair = TracePair::new(a, b)?;
    let thresholds = derive_thresholds(args.alpha, None)?;
    let report = assess_pair(&pair, &thresholds);

    if let Some(path) = &args.csv {
        let mut file = BufWriter::new(fs::File::create(path)?);
        write_stats_csv(report.per_sample.as_ref().expect("fresh report"), &mut file)?;
        file.flush()?;
    }
    if let Some(grid) = &args.curve {
        let curve = detection_curve(&pair, &thresholds, grid)?;
        let path = args.curve_out.as_ref().expect("clap ties curve-out to curve");
        let mut file = BufWriter::new(fs::File::create(path)?);
        write_curve_csv(&curve, &mut file)?;
        file.flush()?;
        let d = traces_to_detection(&curve);
        eprintln!(
            "traces-to-detection: tvla {:?}, adla {:?}",
            d.tvla, d.adla
        );
    }
    if let Some(path) = &args.svg {
        fs::write(path, render_panels(report.per_sample.as_ref().expect("fresh report")))?;
    }

    let leak = !report.tvla_leaks.is_empty() || !report.adla_leaks.is_empty();
    let summary = AssessSummary {
        n_traces: report.n_traces_used,
        n_samples: report.n_samples,
        alpha: thresholds.alpha,
        tau_t: thresholds.tau_t,
        tau_a: thresholds.tau_a,
        max_t_norm: report.max_t_norm,
        max_a2_norm: report.max_a2_norm,
        tvla_leak_count: report.tvla_leaks.len(),
        adla_leak_count: report.adla_leaks.len(),
    };

    if let Some(path) = &args.json {
        let emitted = match args.per_sample_cap {
            Some(cap) => report.with_per_sample_cap(cap),
            None => report,
        };
        fs::write(path, emitted.to_json())?;
    }

    println!(
        "{}",
        serde_json::to_string(&summary).expect("summary serializes")
    );
    Ok(if leak && args.fail_on_leak { 3 } else { 0 })
}

fn threshold(args: ThresholdArgs) -> Result<i32, CliError> {
    let spec = derive_thresholds(args.alpha, args.mc_draws)?;
    if args.mc_draws.is_some() && spec.mc_check.is_none() {
        eprintln!(
            "adla: monte carlo cross-check skipped (alpha {} below {})",
            args.alpha,
            crate::threshold::MC_MIN_ALPHA
        );
    }
    print!("{}", spec.render_text());
    if let Some(path) = &args.json {
        fs::write(path, serde_json::to_string_pretty(&spec).expect("spec serializes"))?;
    }
    Ok(0)
}

fn qq(args: QqArgs) -> Result<i32, CliError> {
    let set = TraceSet::load(&args.set)?;
    if args.sample_index >= set.n_samples() {
        return Err(CliError::Usage(format!(
            "sample index {} out of range: set has {} samples",
            args.sample_index,
            set.n_samples()
        )));
    }
    if set.n_traces() < 2 {
        return Err(CliError::Usage(
            "q-q diagnostics need at least two traces".to_string(),
        ));
    }
    let mut column = Vec::new();
    set.column_into(args.sample_index, set.n_traces(), &mut column);
    let points = qq_points(&column);
    let mut file = BufWriter::new(fs::File::create(&args.out)?);
    writeln!(file, "theoretical,empirical")?;
    for p in &points {
        writeln!(file, "{},{}", p.theoretical, p.empirical)?;
    }
    file.flush()?;
    Ok(0)
}
