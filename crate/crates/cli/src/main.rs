//! `ustpi` — prediction intervals for power telemetry, from the command line.
//!
//! Subcommands cover the full workflow: `gen` produces synthetic benchmark
//! streams, `train` fits an estimator on a CSV history and saves it as a
//! snapshot, `backtest` replays held-out data and grades the intervals,
//! `sweep` grid-searches configurations, and `stream` turns stdin readings
//! into interval lines on stdout for live piping.
//!
//! Exit codes: 2 for configuration problems (including usage errors), 3 for
//! unreadable or malformed input data, 4 for runtime failures such as I/O
//! or snapshot corruption.

use std::fmt;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ustpi::{
    backtest, default_mu, evaluate, generate, load_snapshot, rank_by_cwc, read_csv,
    save_snapshot, sweep, write_csv, Error, ErrorKind, Estimator, EstimatorConfig, FeatureSpec,
    SweepGrid, SweepParams, SyntheticProfile, Variant,
};

#[derive(Parser)]
#[command(
    name = "ustpi",
    version,
    about = "Streaming prediction intervals for electrical power telemetry",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic benchmark stream as CSV
    Gen(GenArgs),
    /// Fit an estimator on a CSV history and save it as a snapshot
    Train(TrainArgs),
    /// Replay held-out CSV data against a freshly trained estimator
    Backtest(BacktestArgs),
    /// Grade a grid of configurations and rank them by interval quality
    Sweep(SweepArgs),
    /// Read readings from stdin, write prediction intervals to stdout
    Stream(StreamArgs),
}

/// Estimation variant selector.
#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelKind {
    /// Histogram over raw power readings
    #[value(name = "A", alias = "a")]
    A,
    /// Histogram over one-step increments, intervals re-anchored at the
    /// latest reading (usually sharper on slowly varying streams)
    #[value(name = "B", alias = "b")]
    B,
}

impl From<ModelKind> for Variant {
    fn from(kind: ModelKind) -> Self {
        match kind {
            ModelKind::A => Variant::Absolute,
            ModelKind::B => Variant::Differential,
        }
    }
}

/// Which conditioning features drive the regime clustering.
#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FeatureKind {
    /// Instantaneous power only
    #[value(name = "power")]
    Power,
    /// Time of day only (seconds since UTC midnight)
    #[value(name = "tod")]
    Tod,
    /// Both power and time of day
    #[value(name = "power+tod")]
    PowerTod,
}

impl From<FeatureKind> for FeatureSpec {
    fn from(kind: FeatureKind) -> Self {
        match kind {
            FeatureKind::Power => FeatureSpec::POWER,
            FeatureKind::Tod => FeatureSpec {
                use_power: false,
                use_time_of_day: true,
            },
            FeatureKind::PowerTod => FeatureSpec::POWER_AND_TIME,
        }
    }
}

/// Shape parameters shared by every command that builds an estimator.
#[derive(Args)]
struct BaseArgs {
    /// Histogram resolution (bin count; increment models round up to odd)
    #[arg(long, default_value_t = 2_000)]
    bins: usize,

    /// Domain padding beyond the training extremes, as a fraction
    #[arg(long, default_value_t = 0.2)]
    margin: f64,

    /// Clustering features
    #[arg(long, value_enum, default_value_t = FeatureKind::Power)]
    features: FeatureKind,

    /// Train on only the most recent N samples of the history
    #[arg(long, value_name = "N")]
    window: Option<usize>,

    /// Seed for the deterministic cluster fit
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

/// Full single-configuration model selection.
#[derive(Args)]
struct ModelArgs {
    /// Estimation variant
    #[arg(long, value_enum, default_value_t = ModelKind::A)]
    model: ModelKind,

    /// Number of regime clusters
    #[arg(long, default_value_t = 1)]
    clusters: usize,

    /// Forgetting time constant in seconds (memory horizon of the
    /// histograms, independent of the sample rate)
    #[arg(long = "forgetting-seconds", default_value_t = 3_600.0)]
    forgetting_seconds: f64,

    #[command(flatten)]
    base: BaseArgs,
}

impl ModelArgs {
    fn to_config(&self) -> EstimatorConfig {
        config_from(
            self.model,
            self.clusters,
            self.forgetting_seconds,
            &self.base,
        )
    }
}

fn config_from(model: ModelKind, clusters: usize, forgetting_s: f64, base: &BaseArgs) -> EstimatorConfig {
    EstimatorConfig {
        variant: model.into(),
        clusters,
        forgetting_time_s: forgetting_s,
        domain_bins: base.bins,
        domain_margin: base.margin,
        features: base.features.into(),
        training_window: base.window,
        seed: base.seed,
    }
}

/// Confidence levels to estimate.
#[derive(Args)]
struct AlphaArgs {
    /// Confidence level to estimate (repeat the flag for several)
    #[arg(
        long = "alpha",
        value_name = "LEVEL",
        default_values_t = [0.99, 0.999, 0.9999, 0.99999]
    )]
    alphas: Vec<f64>,
}

#[derive(Args)]
struct GenArgs {
    /// Benchmark profile: office, ev-charging, or heat-pump
    #[arg(long)]
    profile: String,

    /// Number of samples to produce
    #[arg(long)]
    samples: usize,

    /// Sample period in milliseconds
    #[arg(long = "period-ms", default_value_t = 20)]
    period_ms: i64,

    /// Timestamp of the first sample, epoch milliseconds
    #[arg(long = "start-ms", default_value_t = 0)]
    start_ms: i64,

    /// Override the profile's built-in noise seed
    #[arg(long)]
    seed: Option<u64>,

    /// Output CSV path
    #[arg(long, env = "USTPI_OUT")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Training history CSV (timestamp_ms,power_w)
    #[arg(long, env = "USTPI_INPUT")]
    input: PathBuf,

    #[command(flatten)]
    model: ModelArgs,

    /// Where to save the trained estimator
    #[arg(long, env = "USTPI_SNAPSHOT")]
    snapshot: PathBuf,
}

#[derive(Args)]
struct BacktestArgs {
    /// Training history CSV
    #[arg(long, env = "USTPI_TRAIN")]
    train: PathBuf,

    /// Held-out test CSV; must share the training sample period and start
    /// after the training data ends
    #[arg(long, env = "USTPI_TEST")]
    test: PathBuf,

    #[command(flatten)]
    model: ModelArgs,

    #[command(flatten)]
    levels: AlphaArgs,

    /// Width normalization constant in watts (defaults to the trained
    /// nominal power)
    #[arg(long)]
    pnom: Option<f64>,

    /// Window length for windowed error rates, in seconds
    #[arg(long = "window-s", default_value_t = 21_600.0)]
    window_s: f64,

    /// Also write the per-level metrics as CSV
    #[arg(long = "report-csv", env = "USTPI_REPORT")]
    report_csv: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Training history CSV
    #[arg(long, env = "USTPI_TRAIN")]
    train: PathBuf,

    /// Held-out test CSV
    #[arg(long, env = "USTPI_TEST")]
    test: PathBuf,

    /// Variant axis (repeat the flag; default tries both A and B)
    #[arg(long = "model", value_enum)]
    models: Vec<ModelKind>,

    /// Cluster-count axis (repeat the flag; default 1)
    #[arg(long = "clusters")]
    cluster_counts: Vec<usize>,

    /// Forgetting-time axis in seconds (repeat the flag; default 3600)
    #[arg(long = "forgetting-seconds")]
    forgetting_seconds: Vec<f64>,

    /// Sample-period axis in milliseconds; coarser entries are produced by
    /// block-averaging the source data (repeat the flag; default keeps the
    /// source period)
    #[arg(long = "period-ms")]
    periods_ms: Vec<i64>,

    #[command(flatten)]
    base: BaseArgs,

    #[command(flatten)]
    levels: AlphaArgs,

    /// Width normalization constant in watts (defaults to each row's
    /// trained nominal power)
    #[arg(long)]
    pnom: Option<f64>,

    /// Window length for windowed error rates, in seconds
    #[arg(long = "window-s", default_value_t = 21_600.0)]
    window_s: f64,

    /// Rank rows by CWC at this level (default: the first --alpha)
    #[arg(long = "rank-alpha", value_name = "LEVEL")]
    rank_alpha: Option<f64>,

    /// How many leading configurations to print
    #[arg(long = "top-k", default_value_t = 5)]
    top_k: usize,

    /// Worker threads for the grid (0 = one per core)
    #[arg(long, default_value_t = 0)]
    jobs: usize,

    /// Also write every graded row as CSV
    #[arg(long = "report-csv", env = "USTPI_REPORT")]
    report_csv: Option<PathBuf>,
}

#[derive(Args)]
struct StreamArgs {
    /// Trained estimator to resume
    #[arg(long, env = "USTPI_SNAPSHOT")]
    snapshot: PathBuf,

    #[command(flatten)]
    levels: AlphaArgs,

    /// Where to save the updated estimator at end of input (defaults to
    /// overwriting --snapshot)
    #[arg(long = "snapshot-out", env = "USTPI_SNAPSHOT_OUT")]
    snapshot_out: Option<PathBuf>,
}

enum CliError {
    Core(Error),
    Io { what: String, source: io::Error },
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io { what, source } => write!(f, "{what}: {source}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Ingestion => 3,
                ErrorKind::Runtime => 4,
            },
            CliError::Io { .. } => 4,
        }
    }

    fn io(what: impl Into<String>, source: io::Error) -> Self {
        CliError::Io {
            what: what.into(),
            source,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Gen(args) => run_gen(args),
        Command::Train(args) => run_train(args),
        Command::Backtest(args) => run_backtest(args),
        Command::Sweep(args) => run_sweep(args),
        Command::Stream(args) => run_stream(args),
    }
}

fn run_gen(args: GenArgs) -> Result<(), CliError> {
    let mut profile = SyntheticProfile::by_name(&args.profile)?;
    if let Some(seed) = args.seed {
        profile = profile.with_seed(seed);
    }
    let series = generate::<f64>(&profile, args.start_ms, args.period_ms, args.samples)?;
    write_csv(&series, &args.out)?;
    println!(
        "wrote {} samples of '{}' at {} ms ({:.1} s of signal) to {}",
        series.len(),
        profile.name,
        series.period_ms(),
        series.len() as f64 * series.period_s(),
        args.out.display()
    );
    Ok(())
}

fn run_train(args: TrainArgs) -> Result<(), CliError> {
    let history = read_csv::<f64>(&args.input)?;
    let config = args.model.to_config();
    let estimator = Estimator::batch_train(&config, &history)?;
    save_snapshot(&estimator, &args.snapshot)?;
    let bytes = fs::metadata(&args.snapshot)
        .map_err(|e| CliError::io(format!("inspecting {}", args.snapshot.display()), e))?
        .len();

    let domain = estimator.domain();
    println!(
        "trained model {} with {} regime cluster(s) on {} samples at {} ms",
        config.variant,
        config.clusters,
        history.len(),
        history.period_ms()
    );
    println!(
        "forgetting factor {:.8} ({} s horizon); domain [{:.3}, {:.3}] W over {} bins",
        estimator.forgetting_factor(),
        config.forgetting_time_s,
        domain.p_min(),
        domain.p_max(),
        domain.n_bins()
    );
    println!(
        "nominal power {:.3} W; snapshot written to {} ({bytes} bytes)",
        estimator.nominal_power(),
        args.snapshot.display()
    );
    Ok(())
}

fn run_backtest(args: BacktestArgs) -> Result<(), CliError> {
    let train = read_csv::<f64>(&args.train)?;
    let test = read_csv::<f64>(&args.test)?;
    let config = args.model.to_config();
    let mut estimator = Estimator::batch_train(&config, &train)?;
    let records = backtest(&mut estimator, &test, &args.levels.alphas)?;
    let nominal = args.pnom.unwrap_or_else(|| estimator.nominal_power());
    let report = evaluate(&records, nominal, args.window_s, default_mu())?;

    println!(
        "backtest: {} steps at {} ms; nominal power {:.3} W; windows of {} s",
        report.n_records,
        test.period_ms(),
        report.nominal_power,
        report.window_s
    );
    for m in &report.per_alpha {
        let worst = m
            .windowed_error_rates
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        println!(
            "alpha {:<7} PICP {:.6}  PINAW {:.6}  CWC {:.6}  ({} windows, worst error rate {:.5})",
            m.alpha,
            m.picp,
            m.pinaw,
            m.cwc,
            m.windowed_error_rates.len(),
            worst
        );
    }

    if let Some(path) = &args.report_csv {
        let mut out = String::from("alpha,picp,pinaw,cwc\n");
        for m in &report.per_alpha {
            out.push_str(&format!("{},{},{},{}\n", m.alpha, m.picp, m.pinaw, m.cwc));
        }
        fs::write(path, out)
            .map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
        println!("per-level metrics written to {}", path.display());
    }
    Ok(())
}

fn run_sweep(args: SweepArgs) -> Result<(), CliError> {
    let train = read_csv::<f64>(&args.train)?;
    let test = read_csv::<f64>(&args.test)?;

    let variants: Vec<Variant> = if args.models.is_empty() {
        vec![Variant::Absolute, Variant::Differential]
    } else {
        args.models.iter().map(|&m| m.into()).collect()
    };
    let cluster_counts = if args.cluster_counts.is_empty() {
        vec![1]
    } else {
        args.cluster_counts.clone()
    };
    let forgetting_times_s = if args.forgetting_seconds.is_empty() {
        vec![3_600.0]
    } else {
        args.forgetting_seconds.clone()
    };
    let periods_ms = if args.periods_ms.is_empty() {
        vec![train.period_ms()]
    } else {
        args.periods_ms.clone()
    };

    let grid = SweepGrid {
        variants,
        cluster_counts,
        forgetting_times_s,
        periods_ms,
    };
    let params = SweepParams {
        base: config_from(ModelKind::A, 1, 3_600.0, &args.base),
        alphas: args.levels.alphas.clone(),
        nominal_power: args.pnom,
        window_s: args.window_s,
        mu: default_mu(),
        parallelism: args.jobs,
    };
    let outcomes = sweep(&grid, &params, &train, &test)?;

    let mut failed = 0usize;
    for outcome in &outcomes {
        if let Err(why) = &outcome.report {
            failed += 1;
            eprintln!("row {} failed: {why}", outcome.key);
        }
    }

    let rank_alpha = args.rank_alpha.unwrap_or(args.levels.alphas[0]);
    let ranked = rank_by_cwc(&outcomes, rank_alpha);
    println!(
        "sweep: {} configurations, {} graded, ranked by CWC at alpha {rank_alpha}",
        outcomes.len(),
        outcomes.len() - failed
    );
    for (i, (key, metrics)) in ranked.iter().take(args.top_k).enumerate() {
        println!(
            "{:>3}. {key}  CWC {:.6}  PICP {:.6}  PINAW {:.6}",
            i + 1,
            metrics.cwc,
            metrics.picp,
            metrics.pinaw
        );
    }

    if let Some(path) = &args.report_csv {
        let mut out = String::from("variant,clusters,forgetting_s,period_ms,alpha,picp,pinaw,cwc\n");
        for outcome in &outcomes {
            if let Ok(report) = &outcome.report {
                let k = &outcome.key;
                for m in &report.per_alpha {
                    out.push_str(&format!(
                        "{},{},{},{},{},{},{},{}\n",
                        k.variant, k.clusters, k.forgetting_time_s, k.period_ms,
                        m.alpha, m.picp, m.pinaw, m.cwc
                    ));
                }
            }
        }
        fs::write(path, out)
            .map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
        println!("graded rows written to {}", path.display());
    }
    Ok(())
}

fn run_stream(args: StreamArgs) -> Result<(), CliError> {
    let mut estimator: Estimator<f64> = load_snapshot(&args.snapshot)?;
    let alphas = &args.levels.alphas;

    let stdin = io::stdin();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut readings = 0usize;
    let mut first_content_line = true;

    for (line_no, line) in stdin.lock().lines().enumerate() {
        let line = line.map_err(|e| CliError::io("reading stdin", e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let is_header = first_content_line
            && trimmed
                .to_ascii_lowercase()
                .starts_with("timestamp");
        first_content_line = false;
        if is_header {
            continue;
        }
        match parse_reading(trimmed) {
            Ok((ts, power)) => match estimator.step(ts, power, alphas) {
                Ok(intervals) => {
                    readings += 1;
                    for pi in &intervals {
                        writeln!(out, "{ts},{},{},{}", pi.alpha, pi.lower, pi.upper)
                            .map_err(|e| CliError::io("writing stdout", e))?;
                    }
                    out.flush().map_err(|e| CliError::io("writing stdout", e))?;
                }
                Err(e) => eprintln!("line {}: {e} — reading skipped", line_no + 1),
            },
            Err(why) => eprintln!("line {}: {why} — reading skipped", line_no + 1),
        }
    }

    let target = args.snapshot_out.as_deref().unwrap_or(&args.snapshot);
    save_snapshot(&estimator, target)?;
    eprintln!(
        "end of input after {readings} readings; snapshot saved to {}",
        target.display()
    );
    Ok(())
}

/// Parses one `timestamp_ms,power_w` line.
fn parse_reading(line: &str) -> Result<(i64, f64), String> {
    let mut fields = line.split(',');
    let (Some(ts), Some(power), None) = (fields.next(), fields.next(), fields.next()) else {
        return Err(format!("expected two comma-separated fields, got {line:?}"));
    };
    let ts: i64 = ts
        .trim()
        .parse()
        .map_err(|_| format!("bad timestamp {:?}", ts.trim()))?;
    let power: f64 = power
        .trim()
        .parse()
        .map_err(|_| format!("bad power value {:?}", power.trim()))?;
    Ok((ts, power))
}
