//! Command-line front end: parse arguments, load a config file, run a single
//! simulation or one of the canned sweeps.
//!
//! Results only ever go to files under `--out`; a short summary goes to
//! stdout and every diagnostic to stderr. Exit codes: 0 ok, 2 usage,
//! 3 config, 4 runtime.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use fogbid_core::engine::{parse_entries, write_records, ConfigEntry};
use fogbid_core::experiments::{ExperimentError, SweepSpec};
use fogbid_core::{
    exp1_spec, exp2_spec, run, run_sweep, write_csv, ConfigError, EngineError, EvictionPolicy,
    NodeKind, PaymentRule, SimulationConfig, SimulationResult, SweepOptions, SweepRow,
};
use thiserror::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_CONFIG: u8 = 3;
pub const EXIT_RUNTIME: u8 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "fogbid",
    version,
    about = "Auction-based function placement simulator"
)]
struct Args {
    #[command(subcommand)]
    command: CommandArg,

    /// Configuration file (`key = value` lines).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Seed, or base seed for sweeps.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Directory for result files.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    /// Repetitions per sweep point.
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u32).range(1..))]
    repetitions: Option<u32>,

    /// first | second
    #[arg(long, global = true, value_name = "RULE")]
    payment_rule: Option<PaymentRule>,

    /// absolute | per-size
    #[arg(long, global = true, value_name = "POLICY")]
    eviction: Option<EvictionPolicy>,

    /// Add the 5000 req/s point to exp1.
    #[arg(long = "with-5000", global = true)]
    with_5000: bool,
}

#[derive(Debug, Subcommand, Clone, Copy, PartialEq, Eq)]
enum CommandArg {
    /// Run one simulation and write its records.
    Run,
    /// Sweep the request load.
    Exp1,
    /// Sweep the number of executables.
    Exp2,
    /// Check a configuration and its topology.
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Exp1,
    Exp2,
    Validate,
}

impl From<CommandArg> for Command {
    fn from(c: CommandArg) -> Self {
        match c {
            CommandArg::Run => Command::Run,
            CommandArg::Exp1 => Command::Exp1,
            CommandArg::Exp2 => Command::Exp2,
            CommandArg::Validate => Command::Validate,
        }
    }
}

/// A config file that has already been read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigSource {
    pub path: PathBuf,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliInvocation {
    pub command: Command,
    pub config: Option<ConfigSource>,
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    pub repetitions: Option<u32>,
    pub payment_rule: Option<PaymentRule>,
    pub eviction_policy: Option<EvictionPolicy>,
    pub with_verification_point: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    /// Also covers `--help` and `--version`, which exit successfully.
    #[error("{0}")]
    Usage(#[from] clap::Error),
    #[error("cannot read config {}: {source}", path.display())]
    UnreadableConfig { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Config { path: PathBuf, source: ConfigError },
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("cannot write {}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(e) => {
                if e.use_stderr() {
                    EXIT_USAGE
                } else {
                    EXIT_OK
                }
            }
            CliError::UnreadableConfig { .. } | CliError::Config { .. } => EXIT_CONFIG,
            CliError::Experiment(ExperimentError::Config(_)) => EXIT_CONFIG,
            CliError::Experiment(ExperimentError::InvalidSweep(_)) => EXIT_CONFIG,
            CliError::Engine(EngineError::Config(_)) => EXIT_CONFIG,
            CliError::Experiment(_) | CliError::Io { .. } => EXIT_RUNTIME,
        }
    }
}

pub fn parse_args<I, T>(argv: I) -> Result<CliInvocation, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = Args::try_parse_from(argv)?;
    let config = match args.config {
        Some(path) => match fs::read_to_string(&path) {
            Ok(text) => Some(ConfigSource { path, text }),
            Err(source) => return Err(CliError::UnreadableConfig { path, source }),
        },
        None => None,
    };
    Ok(CliInvocation {
        command: args.command.into(),
        config,
        seed: args.seed,
        out_dir: args.out,
        repetitions: args.repetitions,
        payment_rule: args.payment_rule,
        eviction_policy: args.eviction,
        with_verification_point: args.with_5000,
    })
}

pub fn load_config(path: &Path) -> Result<SimulationConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::UnreadableConfig {
        path: path.to_path_buf(),
        source,
    })?;
    SimulationConfig::from_text(&text).map_err(|source| CliError::Config {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses `argv`, executes it, reports errors on stderr and returns the exit
/// code.
pub fn run_cli<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = io::stdout();
    let result = parse_args(argv).and_then(|inv| execute(&inv, &mut stdout.lock()));
    match result {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(e)) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_USAGE
            } else {
                EXIT_OK
            }
        }
        Err(e) => {
            eprintln!("fogbid: {e}");
            e.exit_code()
        }
    }
}

pub fn execute<W: Write>(inv: &CliInvocation, stdout: &mut W) -> Result<(), CliError> {
    match inv.command {
        Command::Validate => {
            let cfg = single_config(inv)?;
            let t = &cfg.topology;
            let _ = writeln!(
                stdout,
                "valid: {} nodes ({} edge), processing order {:?}",
                t.len(),
                t.edges().count(),
                t.processing_order()
                    .iter()
                    .map(|n| n.index())
                    .collect::<Vec<_>>()
            );
            Ok(())
        }
        Command::Run => {
            let cfg = single_config(inv)?;
            let result = run(&cfg)?;
            let path = inv.out_dir.join(format!("run-{}.records", cfg.seed));
            write_atomically(&path, |w| write_records(&result, w))?;
            print_run_summary(stdout, &result, &path);
            Ok(())
        }
        Command::Exp1 | Command::Exp2 => {
            let options = sweep_options(inv)?;
            let spec = if inv.command == Command::Exp1 {
                exp1_spec(&options)?
            } else {
                exp2_spec(&options)?
            };
            let rows = run_sweep(&spec);
            fs::create_dir_all(&inv.out_dir).map_err(|source| CliError::Io {
                path: inv.out_dir.clone(),
                source,
            })?;
            let path = inv.out_dir.join(spec.csv_file_name());
            write_csv(&rows, &path)?;
            print_sweep_summary(stdout, &spec, &rows, &path);
            Ok(())
        }
    }
}

fn config_error(inv: &CliInvocation, source: ConfigError) -> CliError {
    let path = inv
        .config
        .as_ref()
        .map_or_else(|| PathBuf::from("<defaults>"), |c| c.path.clone());
    CliError::Config { path, source }
}

fn flag_entries(inv: &CliInvocation) -> Vec<ConfigEntry> {
    let mut entries = Vec::new();
    if let Some(rule) = inv.payment_rule {
        entries.push(ConfigEntry::new("payment_rule", rule.to_string()));
    }
    if let Some(policy) = inv.eviction_policy {
        entries.push(ConfigEntry::new("eviction_policy", policy.to_string()));
    }
    entries
}

fn single_config(inv: &CliInvocation) -> Result<SimulationConfig, CliError> {
    let text = inv.config.as_ref().map_or("", |c| c.text.as_str());
    let mut cfg = SimulationConfig::from_text(text)
        .and_then(|cfg| cfg.with_entries(&flag_entries(inv)))
        .map_err(|e| config_error(inv, e))?;
    if let Some(seed) = inv.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

/// For sweeps the config file only overrides the experiment's own settings.
fn sweep_options(inv: &CliInvocation) -> Result<SweepOptions, CliError> {
    let mut overrides = match &inv.config {
        Some(c) => parse_entries(&c.text).map_err(|e| config_error(inv, e))?,
        None => Vec::new(),
    };
    overrides.extend(flag_entries(inv));
    Ok(SweepOptions {
        overrides,
        seed: inv.seed,
        repetitions: inv.repetitions,
        with_verification_point: inv.with_verification_point,
    })
}

/// Writes next to `path` and renames, so a failed run leaves no result file.
fn write_atomically(
    path: &Path,
    body: impl FnOnce(&mut io::BufWriter<fs::File>) -> io::Result<()>,
) -> Result<(), CliError> {
    let io_err = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    let mut partial = path.as_os_str().to_owned();
    partial.push(".partial");
    let partial = PathBuf::from(partial);
    let written = fs::File::create(&partial).and_then(|file| {
        let mut w = io::BufWriter::new(file);
        body(&mut w)?;
        w.flush()
    });
    match written.and_then(|()| fs::rename(&partial, path)) {
        Ok(()) => Ok(()),
        Err(e) => {
            let _ = fs::remove_file(&partial);
            Err(io_err(e))
        }
    }
}

fn print_run_summary<W: Write>(out: &mut W, result: &SimulationResult, path: &Path) {
    let _ = writeln!(out, "wrote {}", path.display());
    let _ = writeln!(
        out,
        "requests {}  avg latency {:.2} ms  p50 {} ms  p95 {} ms",
        result.generated_requests,
        result.latency.avg_ms,
        result.latency.p50_ms,
        result.latency.p95_ms
    );
    for kind in NodeKind::ALL {
        let _ = writeln!(
            out,
            "{kind:<12} served {:>8}  share {:.4}  avg price {:.2}",
            result.served_per_kind.get(kind),
            result.served_share(kind),
            result.avg_execution_price(kind)
        );
    }
}

fn print_sweep_summary<W: Write>(out: &mut W, spec: &SweepSpec, rows: &[SweepRow], path: &Path) {
    let _ = writeln!(
        out,
        "wrote {} ({} points x {} repetitions)",
        path.display(),
        rows.len(),
        spec.repetitions
    );
    let _ = writeln!(
        out,
        "{:>10} {:>9} {:>9} {:>9} {:>8} {:>7} {:>7} {:>7}",
        spec.swept_parameter.split('_').next().unwrap_or("value"),
        "price_e",
        "price_i",
        "price_c",
        "latency",
        "edge",
        "interm",
        "cloud"
    );
    for row in rows {
        if let Some(failure) = &row.failure {
            let _ = writeln!(out, "{:>10} failed: {failure}", row.value);
            continue;
        }
        let _ = writeln!(
            out,
            "{:>10} {:>9.2} {:>9.2} {:>9.2} {:>8.2} {:>7.4} {:>7.4} {:>7.4}",
            row.value,
            row.exec_price.edge,
            row.exec_price.intermediary,
            row.exec_price.cloud,
            row.avg_latency_ms,
            row.served_share.edge,
            row.served_share.intermediary,
            row.served_share.cloud
        );
    }
}
