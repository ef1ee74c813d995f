use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use sensoff_core::harness::{parse_schemes, solve_single, write_csv, SummaryCell};
use sensoff_core::{
    generate_scenario, run_sweep, summarize, Error, ExperimentConfig, Scenario, Scheme, Sweep,
};

#[derive(Parser)]
#[command(name = "sensoff", version, about = "Sensing and offloading allocation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Throughput against the number of devices.
    SweepN(SweepArgs),
    /// Throughput against the upper end of the sensing range.
    SweepSensing(SweepArgs),
    /// Throughput against the server computing capacity.
    SweepCapacity(SweepArgs),
    /// Jain's fairness index against the number of devices.
    Fairness(SweepArgs),
    /// Solve one scenario with every scheme and print the allocations as JSON.
    Single(SingleArgs),
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated scheme names.
    #[arg(long)]
    schemes: Option<String>,
    /// Give every device this sensing rate (bits/s).
    #[arg(long, value_name = "BITS_PER_S")]
    equal_sensing: Option<f64>,
    /// Comma-separated sweep grid replacing the default one.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    /// Device count for sweeps not over N.
    #[arg(long)]
    devices: Option<usize>,
    /// CSV destination; stdout when absent.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// JSON config whose fields override the flags.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Write zero runtimes so the CSV is reproducible byte for byte.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct SingleArgs {
    /// Scenario JSON; a random one is drawn when absent.
    #[arg(long, value_name = "PATH")]
    scenario: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    devices: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    schemes: Option<String>,
    #[arg(long, value_name = "BITS_PER_S")]
    equal_sensing: Option<f64>,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy)]
enum Kind {
    DeviceCount,
    Sensing,
    Capacity,
    Fairness,
}

/// Failures split by exit code: bad input versus a failed run.
enum CliError {
    Config(String),
    Run(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Parameter(_) | Error::Json(_) | Error::Precondition(_) => CliError::Config(e.to_string()),
            other => CliError::Run(other.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Run(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::SweepN(a) => sweep(Kind::DeviceCount, a),
        Command::SweepSensing(a) => sweep(Kind::Sensing, a),
        Command::SweepCapacity(a) => sweep(Kind::Capacity, a),
        Command::Fairness(a) => sweep(Kind::Fairness, a),
        Command::Single(a) => single(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn base_config(kind: Kind, args: &SweepArgs) -> Result<ExperimentConfig, CliError> {
    let mut c = ExperimentConfig::default();
    match kind {
        Kind::DeviceCount | Kind::Fairness => {
            c.sweep = match &args.values {
                Some(v) => Sweep::DeviceCount(v.iter().map(|&x| x as usize).collect()),
                None => Sweep::default_device_counts(),
            };
        }
        Kind::Sensing => {
            c.devices = 8;
            c.sweep = Sweep::SensingMax(args.values.clone().unwrap_or_else(|| Sweep::default_sensing_max().values()));
        }
        Kind::Capacity => {
            c.devices = 12;
            c.sweep = Sweep::Capacity(args.values.clone().unwrap_or_else(|| Sweep::default_capacity().values()));
        }
    }
    if let Kind::Fairness = kind {
        c.schemes = vec![Scheme::Tdma, Scheme::NomaFixed, Scheme::Fdma];
    }
    if let Some(t) = args.trials {
        c.trials = t;
    }
    if let Some(s) = args.seed {
        c.seed = s;
    }
    if let Some(list) = &args.schemes {
        c.schemes = parse_schemes(list)?;
    }
    if let Some(n) = args.devices {
        c.devices = n;
    }
    c.equal_sensing = args.equal_sensing;
    c.timing = !args.no_timing;
    Ok(c)
}

/// Flags first, then every field present in the config file on top.
fn load_config(kind: Kind, args: &SweepArgs) -> Result<ExperimentConfig, CliError> {
    let base = base_config(kind, args)?;
    let Some(path) = &args.config else {
        base.validate()?;
        return Ok(base);
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let file: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let serde_json::Value::Object(overrides) = file else {
        return Err(CliError::Config(format!("{}: expected a JSON object", path.display())));
    };
    let mut merged = serde_json::to_value(&base).map_err(|e| CliError::Run(e.to_string()))?;
    if let serde_json::Value::Object(m) = &mut merged {
        m.extend(overrides);
    }
    let c: ExperimentConfig =
        serde_json::from_value(merged).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    c.validate()?;
    Ok(c)
}

fn sweep(kind: Kind, args: SweepArgs) -> Result<(), CliError> {
    let config = load_config(kind, &args)?;
    if let Some(w) = args.workers {
        if w == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::Run(e.to_string()))?;
    }
    info!("running {} trials over {} sweep values", config.trials, config.sweep.len());
    let rows = run_sweep(&config)?;
    match &args.out {
        Some(path) => write_csv(&rows, BufWriter::new(create(path)?))?,
        None => write_csv(&rows, io::stdout().lock())?,
    }
    print_summary(&summarize(&rows)?)?;
    Ok(())
}

fn create(path: &Path) -> Result<File, CliError> {
    File::create(path).map_err(|e| CliError::Run(format!("{}: {e}", path.display())))
}

fn print_summary(cells: &[SummaryCell]) -> io::Result<()> {
    let mut err = io::stderr().lock();
    writeln!(err, "{:<18} {:>12} {:>16} {:>8} {:>8}", "scheme", "sweep", "mean_bits", "jfi", "failed")?;
    for c in cells {
        let bits = c.mean_throughput.map_or("n/a".to_string(), |v| format!("{v:.1}"));
        let jfi = c.mean_jfi.map_or("n/a".to_string(), |v| format!("{v:.4}"));
        writeln!(err, "{:<18} {:>12} {:>16} {:>8} {:>8}", c.scheme.name(), c.sweep_value, bits, jfi, c.failures)?;
    }
    Ok(())
}

fn single(args: SingleArgs) -> Result<(), CliError> {
    let schemes = match &args.schemes {
        Some(list) => parse_schemes(list)?,
        None => Scheme::ALL.to_vec(),
    };
    if schemes.is_empty() {
        return Err(CliError::Config("no schemes selected".into()));
    }
    let scenario = match &args.scenario {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            Scenario::from_json(&text)?
        }
        None => {
            let range = args.equal_sensing.map_or((1e5, 1e6), |s| (s, s));
            generate_scenario(Default::default(), args.devices, range, args.seed)?
        }
    };
    let report = solve_single(&scenario, &schemes, args.seed)?;
    let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Run(e.to_string()))?;
    match &args.out {
        Some(path) => writeln!(create(path)?, "{text}")?,
        None => println!("{text}"),
    }
    Ok(())
}
