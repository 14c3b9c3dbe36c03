//! Command-line surface: `encrypt`, `decrypt`, `bench` and the hidden
//! worker mode used by the process-isolated strategy.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage errors.

use std::ffi::OsString;
use std::io::Read;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::aes::{Key128, KEY_LEN};
use crate::bench::{self, BenchConfig, CellOutcome, ReportMeta, SweepInput};
use crate::error::Error;
use crate::exec::{self, Direction, ExecStrategy, JobSpec, WorkerTask, WORKER_SUBCOMMAND};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Key used by `bench` when none is given; the cipher's speed does not
/// depend on the key.
const BENCH_DEFAULT_KEY: [u8; KEY_LEN] = [
    0x00, 0x01, 0x02, 0x03, 0x04, 0x05, 0x06, 0x07, 0x08, 0x09, 0x0a, 0x0b, 0x0c, 0x0d, 0x0e, 0x0f,
];
const DEFAULT_SIZES: &str = "1M,4M,16M,64M";
const DEFAULT_WORKERS: &str = "1,2,4";
const DEFAULT_STRATEGIES: &str = "threads,processes";

#[derive(Debug, Parser)]
#[command(
    name = "parcrypt",
    version,
    about = "AES-128 (ECB) file encryption split across threads or worker processes, with a throughput benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Encrypt a file.
    Encrypt(CryptArgs),
    /// Decrypt a file produced by `encrypt`.
    Decrypt(CryptArgs),
    /// Sweep sizes x workers x strategies and write CSV, summary and SVG reports.
    Bench(BenchArgs),
    #[command(name = WORKER_SUBCOMMAND, hide = true)]
    Worker(WorkerArgs),
}

#[derive(Debug, Args)]
#[group(id = "key", multiple = false)]
struct KeyArgs {
    /// Key as 32 hex digits.
    #[arg(long, value_name = "HEX", group = "key")]
    key_hex: Option<String>,
    /// File holding the key: 16 raw bytes or 32 hex digits.
    #[arg(long, value_name = "PATH", group = "key")]
    keyfile: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CryptArgs {
    /// Input file.
    #[arg(long = "in", value_name = "PATH")]
    input: PathBuf,
    /// Output file; written to a temporary name and renamed on success.
    #[arg(long = "out", value_name = "PATH")]
    output: PathBuf,
    #[command(flatten)]
    key: KeyArgs,
    /// Number of parallel workers (default: logical cores).
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    /// sequential, threads or processes.
    #[arg(long, value_name = "NAME", default_value = "threads")]
    strategy: String,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Comma-separated input sizes to generate, e.g. 1M,64M (K/M/G are powers of 1024).
    #[arg(long, value_name = "LIST")]
    sizes: Option<String>,
    /// Comma-separated existing files to benchmark instead of generated ones.
    #[arg(long, value_name = "LIST")]
    inputs: Option<String>,
    /// Comma-separated worker counts.
    #[arg(long, value_name = "LIST")]
    workers: Option<String>,
    /// Comma-separated strategies: sequential, threads, processes.
    #[arg(long, value_name = "LIST")]
    strategies: Option<String>,
    /// Repetitions per cell (at least 3).
    #[arg(long, value_name = "N")]
    reps: Option<usize>,
    /// Core count used for per-core throughput (default: detected logical cores).
    #[arg(long, value_name = "N")]
    cores: Option<usize>,
    /// Directory receiving report.csv, summary.txt and the SVG charts.
    #[arg(long, value_name = "DIR")]
    report_dir: Option<PathBuf>,
    /// Scratch directory for generated inputs and outputs (default: a fresh temp dir).
    #[arg(long, value_name = "DIR")]
    work_dir: Option<PathBuf>,
    /// Seed for generated input content.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Machine label shown in the summary table.
    #[arg(long, value_name = "NAME")]
    machine: Option<String>,
    /// TOML file with any of the above settings; flags take precedence.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(flatten)]
    key: KeyArgs,
}

#[derive(Debug, Args)]
struct WorkerArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    offset: u64,
    #[arg(long)]
    len: u64,
    #[arg(long, value_parser = ["0", "1"])]
    r#final: String,
    #[arg(long, default_value = "encrypt")]
    direction: String,
    #[arg(long = "out")]
    output: PathBuf,
}

/// Bench settings that may come from a `--config` TOML file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchFile {
    sizes: Option<Vec<String>>,
    inputs: Option<Vec<PathBuf>>,
    workers: Option<Vec<usize>>,
    strategies: Option<Vec<String>>,
    reps: Option<usize>,
    cores: Option<usize>,
    report_dir: Option<PathBuf>,
    work_dir: Option<PathBuf>,
    seed: Option<u64>,
    machine: Option<String>,
    key_hex: Option<String>,
}

#[derive(Debug)]
pub struct BenchSettings {
    pub config: BenchConfig,
    pub report_dir: PathBuf,
    /// `None` means a temporary directory is created for the run.
    pub work_dir: Option<PathBuf>,
    pub machine: String,
}

/// A fully validated command.
#[derive(Debug)]
pub enum CliConfig {
    Crypt(JobSpec),
    Bench(BenchSettings),
    Worker(WorkerTask),
}

#[derive(Debug)]
pub enum CliError {
    /// Produced by clap; includes `--help` and `--version`.
    Clap(clap::Error),
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Clap(e) => e.exit_code(),
            CliError::Usage(_) => EXIT_USAGE,
        }
    }

    pub fn print(&self) {
        match self {
            CliError::Clap(e) => {
                let _ = e.print();
            }
            CliError::Usage(msg) => eprintln!("error: {msg}"),
        }
    }
}

fn usage(e: impl ToString) -> CliError {
    CliError::Usage(e.to_string())
}

pub fn parse_args<I, T>(argv: I) -> Result<CliConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(CliError::Clap)?;
    match cli.command {
        Command::Encrypt(args) => resolve_crypt(args, Direction::Encrypt),
        Command::Decrypt(args) => resolve_crypt(args, Direction::Decrypt),
        Command::Bench(args) => resolve_bench(args),
        Command::Worker(args) => Ok(CliConfig::Worker(WorkerTask {
            input: args.input,
            offset: args.offset,
            raw_len: args.len,
            is_final: args.r#final == "1",
            direction: args.direction.parse().map_err(usage)?,
            output: args.output,
        })),
    }
}

fn resolve_key(args: &KeyArgs) -> Result<Option<Key128>, CliError> {
    if let Some(hex) = &args.key_hex {
        return Key128::from_hex(hex).map(Some).map_err(usage);
    }
    if let Some(path) = &args.keyfile {
        let bytes = std::fs::read(path)
            .map_err(|e| usage(format!("cannot read keyfile {}: {e}", path.display())))?;
        let key = if bytes.len() == KEY_LEN {
            Key128::from_slice(&bytes)
        } else {
            let text = String::from_utf8(bytes)
                .map_err(|_| usage("keyfile is neither 16 raw bytes nor hex text"))?;
            Key128::from_hex(&text)
        };
        return key.map(Some).map_err(usage);
    }
    Ok(None)
}

fn resolve_crypt(args: CryptArgs, direction: Direction) -> Result<CliConfig, CliError> {
    let key = resolve_key(&args.key)?
        .ok_or_else(|| usage("a key is required (--key-hex or --keyfile)"))?;
    let strategy: ExecStrategy = args.strategy.parse().map_err(usage)?;
    let workers = args.workers.unwrap_or_else(bench::detect_cores);
    if workers == 0 {
        return Err(usage("--workers must be at least 1"));
    }
    if !args.input.is_file() {
        return Err(usage(format!(
            "input file {} does not exist",
            args.input.display()
        )));
    }
    Ok(CliConfig::Crypt(JobSpec::new(
        args.input,
        args.output,
        key,
        workers,
        strategy,
        direction,
    )))
}

/// Parses `1M`, `64K`, `2G`, `1000` and the like. Suffixes are binary.
pub fn parse_size(text: &str) -> Result<u64, String> {
    let t = text.trim();
    let upper = t.to_ascii_uppercase();
    let stripped = upper
        .strip_suffix("IB")
        .or_else(|| upper.strip_suffix('B'))
        .unwrap_or(&upper);
    let (digits, scale) = match stripped.chars().last() {
        Some('K') => (&stripped[..stripped.len() - 1], 1u64 << 10),
        Some('M') => (&stripped[..stripped.len() - 1], 1 << 20),
        Some('G') => (&stripped[..stripped.len() - 1], 1 << 30),
        _ => (stripped, 1),
    };
    digits
        .parse::<u64>()
        .ok()
        .and_then(|n| n.checked_mul(scale))
        .ok_or_else(|| format!("invalid size `{t}`"))
}

fn split_list(text: &str) -> Vec<&str> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect()
}

fn nonempty<T>(what: &str, items: Vec<T>) -> Result<Vec<T>, CliError> {
    if items.is_empty() {
        Err(usage(format!("{what} list is empty")))
    } else {
        Ok(items)
    }
}

fn resolve_bench(args: BenchArgs) -> Result<CliConfig, CliError> {
    let file: BenchFile = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
            toml::from_str(&text)
                .map_err(|e| usage(format!("bad config {}: {e}", path.display())))?
        }
        None => BenchFile::default(),
    };

    let inputs: Vec<SweepInput> = match (&args.inputs, &file.inputs, &args.sizes, &file.sizes) {
        (Some(list), ..) => split_list(list)
            .into_iter()
            .map(|p| SweepInput::File(PathBuf::from(p)))
            .collect(),
        (None, _, Some(list), _) => split_list(list)
            .into_iter()
            .map(|s| parse_size(s).map(SweepInput::Generated))
            .collect::<Result<_, _>>()
            .map_err(usage)?,
        (None, Some(paths), None, _) => paths.iter().cloned().map(SweepInput::File).collect(),
        (None, None, None, Some(sizes)) => sizes
            .iter()
            .map(|s| parse_size(s).map(SweepInput::Generated))
            .collect::<Result<_, _>>()
            .map_err(usage)?,
        (None, None, None, None) => split_list(DEFAULT_SIZES)
            .into_iter()
            .map(|s| SweepInput::Generated(parse_size(s).expect("default sizes parse")))
            .collect(),
    };
    let inputs = nonempty("size/input", inputs)?;

    let workers: Vec<usize> = match (&args.workers, &file.workers) {
        (Some(list), _) => split_list(list)
            .into_iter()
            .map(|w| {
                w.parse::<usize>()
                    .map_err(|_| usage(format!("invalid worker count `{w}`")))
            })
            .collect::<Result<_, _>>()?,
        (None, Some(list)) => list.clone(),
        (None, None) => split_list(DEFAULT_WORKERS)
            .into_iter()
            .map(|w| w.parse().unwrap())
            .collect(),
    };
    let workers = nonempty("worker", workers)?;
    if workers.contains(&0) {
        return Err(usage("worker counts must be at least 1"));
    }

    let strategy_names: Vec<String> = match (&args.strategies, &file.strategies) {
        (Some(list), _) => split_list(list).into_iter().map(String::from).collect(),
        (None, Some(list)) => list.clone(),
        (None, None) => split_list(DEFAULT_STRATEGIES)
            .into_iter()
            .map(String::from)
            .collect(),
    };
    let strategies = nonempty(
        "strategy",
        strategy_names
            .iter()
            .map(|s| s.parse::<ExecStrategy>())
            .collect::<Result<Vec<_>, Error>>()
            .map_err(usage)?,
    )?;

    let reps = args
        .reps
        .or(file.reps)
        .unwrap_or(bench::DEFAULT_REPETITIONS);
    if reps < bench::MIN_REPETITIONS {
        return Err(usage(format!(
            "--reps must be at least {}",
            bench::MIN_REPETITIONS
        )));
    }
    let cores = args
        .cores
        .or(file.cores)
        .unwrap_or_else(bench::detect_cores);
    if cores == 0 {
        return Err(usage("--cores must be at least 1"));
    }

    let key = match resolve_key(&args.key)? {
        Some(k) => k,
        None => match &file.key_hex {
            Some(hex) => Key128::from_hex(hex).map_err(usage)?,
            None => Key128::new(BENCH_DEFAULT_KEY),
        },
    };

    let work_dir = args.work_dir.or(file.work_dir);
    Ok(CliConfig::Bench(BenchSettings {
        config: BenchConfig {
            inputs,
            workers,
            strategies,
            reps,
            key,
            cores,
            work_dir: work_dir.clone().unwrap_or_default(),
            seed: args.seed.or(file.seed).unwrap_or(1),
            worker_exe: None,
        },
        report_dir: args
            .report_dir
            .or(file.report_dir)
            .unwrap_or_else(|| PathBuf::from("bench-report")),
        work_dir,
        machine: args
            .machine
            .or(file.machine)
            .unwrap_or_else(default_machine_label),
    }))
}

fn default_machine_label() -> String {
    std::fs::read_to_string("/etc/hostname")
        .ok()
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .or_else(|| std::env::var("HOSTNAME").ok())
        .unwrap_or_else(|| "local".to_string())
}

/// Runs a parsed command and returns the process exit code.
pub fn execute(config: CliConfig) -> i32 {
    let result = match config {
        CliConfig::Crypt(job) => run_crypt(&job),
        CliConfig::Bench(settings) => run_bench(settings),
        CliConfig::Worker(task) => run_worker(&task),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

/// Entry point shared by the binary: parse, run, map to an exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match parse_args(argv) {
        Ok(config) => execute(config),
        Err(e) => {
            e.print();
            e.exit_code()
        }
    }
}

fn run_crypt(job: &JobSpec) -> Result<(), Error> {
    let outcome = exec::run_job(job)?;
    let secs = outcome.elapsed.as_secs_f64();
    println!(
        "{}: {} bytes in, {} bytes out, {} chunk(s), strategy {}, {:.6} s ({:.1} Mb/s)",
        job.direction.name(),
        outcome.bytes_read,
        outcome.bytes_written,
        outcome.chunks,
        job.strategy,
        secs,
        bench::throughput_mbps(outcome.bytes_read, secs.max(1e-9))
    );
    Ok(())
}

fn run_bench(settings: BenchSettings) -> Result<(), Error> {
    let BenchSettings {
        mut config,
        report_dir,
        work_dir,
        machine,
    } = settings;
    let _scratch = match work_dir {
        Some(dir) => {
            config.work_dir = dir;
            None
        }
        None => {
            let tmp = tempfile::Builder::new()
                .prefix("parcrypt-bench-")
                .tempdir()
                .map_err(|e| Error::io(std::env::temp_dir(), e))?;
            config.work_dir = tmp.path().to_path_buf();
            Some(tmp)
        }
    };

    let total = config.cell_count();
    let outcomes = bench::run_sweep_with(&config, |i, outcome: &CellOutcome| match outcome {
        Ok(r) => eprintln!(
            "[{}/{total}] {} bytes, {} workers, {}: {:.6} s avg, {:.1} Mb/s",
            i + 1,
            r.file_size,
            r.workers,
            r.strategy,
            r.avg_seconds,
            r.throughput_mbps
        ),
        Err(f) => eprintln!(
            "[{}/{total}] {} workers, {}: FAILED: {}",
            i + 1,
            f.workers,
            f.strategy,
            f.error
        ),
    })?;

    let report = bench::emit_report(
        &outcomes,
        &ReportMeta {
            machine,
            cores: config.cores,
        },
    )?;
    report.write_to(&report_dir)?;
    print!("{}", report.summary);
    println!("reports written to {}", report_dir.display());
    Ok(())
}

fn run_worker(task: &WorkerTask) -> Result<(), Error> {
    let mut key = [0u8; KEY_LEN];
    std::io::stdin()
        .read_exact(&mut key)
        .map_err(|e| Error::io("<stdin>", e))?;
    exec::run_worker_chunk(task, &Key128::new(key))?;
    Ok(())
}
