//! Throughput measurement: repeat a job, drop samples that deviate too far
//! from the rest, average what remains and convert to megabits per second.

mod report;

pub use report::{emit_report, parse_csv, CsvRow, Report, ReportMeta, CSV_HEADER};

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aes::Key128;
use crate::error::{Error, Result};
use crate::exec::{self, Direction, ExecStrategy, JobSpec};

/// Multiplier on the median absolute deviation beyond which a sample is dropped.
pub const MAD_CUTOFF: f64 = 3.0;
/// Relative distance from the median tolerated when the MAD is zero.
pub const ZERO_MAD_RELATIVE_TOLERANCE: f64 = 0.01;
pub const MIN_REPETITIONS: usize = 3;
pub const DEFAULT_REPETITIONS: usize = 10;

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

fn sorted(values: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.into_iter().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Indices (into `samples`) that survive one median/MAD pass.
fn mad_pass(samples: &[f64], keep: &[usize]) -> Vec<usize> {
    let m = median(&sorted(keep.iter().map(|&i| samples[i])));
    let mad = median(&sorted(keep.iter().map(|&i| (samples[i] - m).abs())));
    let limit = if mad > 0.0 {
        MAD_CUTOFF * mad
    } else {
        ZERO_MAD_RELATIVE_TOLERANCE * m.abs()
    };
    keep.iter()
        .copied()
        .filter(|&i| (samples[i] - m).abs() <= limit)
        .collect()
}

/// Drops samples with large deviations from the rest.
///
/// A sample is kept when it lies within 3×MAD of the median (or within 1% of
/// the median when the MAD is zero). The pass is repeated on the survivors
/// until nothing more is dropped, so the result is a fixed point and
/// filtering it again changes nothing.
///
/// At least ⌈n/2⌉ samples are always kept. If repeated passes would go below
/// that, the largest run of adjacent (in sorted order) samples that is itself
/// a fixed point and holds at least ⌈n/2⌉ samples is kept instead, preferring
/// the run centred nearest the median. When no such run exists the samples
/// are too dispersed to single any out, and all of them are kept. Every
/// branch returns a fixed point of the same rule, so the filter is
/// idempotent. Survivors keep their original order.
pub fn reject_outliers(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::invalid("cannot filter an empty sample list"));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("samples must be finite"));
    }
    let floor = samples.len().div_ceil(2);

    let mut keep: Vec<usize> = (0..samples.len()).collect();
    loop {
        let next = mad_pass(samples, &keep);
        if next.len() == keep.len() {
            break;
        }
        if next.len() < floor {
            keep = stable_window(samples, floor).unwrap_or_else(|| (0..samples.len()).collect());
            break;
        }
        keep = next;
    }
    keep.sort_unstable();
    Ok(keep.into_iter().map(|i| samples[i]).collect())
}

/// Largest window of the sorted samples, at least `min_len` long, that one
/// MAD pass leaves untouched.
fn stable_window(samples: &[f64], min_len: usize) -> Option<Vec<usize>> {
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| samples[a].total_cmp(&samples[b]));
    let m = median(&sorted(samples.iter().copied()));

    for len in (min_len..=samples.len()).rev() {
        let best = (0..=samples.len() - len)
            .map(|start| &order[start..start + len])
            .filter(|w| mad_pass(samples, w).len() == len)
            .min_by(|a, b| {
                let centre =
                    |w: &[usize]| (median(&sorted(w.iter().map(|&i| samples[i]))) - m).abs();
                centre(a).total_cmp(&centre(b))
            });
        if let Some(w) = best {
            return Some(w.to_vec());
        }
    }
    None
}

/// Decimal megabits per second.
pub fn throughput_mbps(bytes: u64, seconds: f64) -> f64 {
    bytes as f64 * 8.0 / (seconds * 1e6)
}

/// Timing summary for one (file size, workers, strategy) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub file_size: u64,
    pub workers: usize,
    pub strategy: ExecStrategy,
    pub samples: Vec<f64>,
    pub retained: Vec<f64>,
    pub avg_seconds: f64,
    pub throughput_mbps: f64,
    pub throughput_per_core_mbps: f64,
    pub cores: usize,
}

impl BenchRecord {
    /// Builds a record from raw wall-clock samples in seconds.
    pub fn from_samples(
        file_size: u64,
        workers: usize,
        strategy: ExecStrategy,
        cores: usize,
        samples: Vec<f64>,
    ) -> Result<Self> {
        if cores == 0 {
            return Err(Error::invalid("core count must be at least 1"));
        }
        let retained = reject_outliers(&samples)?;
        let avg_seconds = retained.iter().sum::<f64>() / retained.len() as f64;
        let throughput = throughput_mbps(file_size, avg_seconds);
        Ok(BenchRecord {
            file_size,
            workers,
            strategy,
            samples,
            retained,
            avg_seconds,
            throughput_mbps: throughput,
            throughput_per_core_mbps: throughput / cores as f64,
            cores,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub file_size: Option<u64>,
    pub input: Option<PathBuf>,
    pub workers: usize,
    pub strategy: ExecStrategy,
    pub error: String,
}

pub type CellOutcome = std::result::Result<BenchRecord, CellFailure>;

/// Runs `trial` `reps` times and summarizes the timings. Each trial returns
/// the wall time of the phase being measured.
pub fn measure_cell<F>(
    mut trial: F,
    reps: usize,
    file_size: u64,
    workers: usize,
    strategy: ExecStrategy,
    cores: usize,
) -> Result<BenchRecord>
where
    F: FnMut() -> Result<Duration>,
{
    if reps < MIN_REPETITIONS {
        return Err(Error::invalid(format!(
            "need at least {MIN_REPETITIONS} repetitions, got {reps}"
        )));
    }
    let samples = (0..reps)
        .map(|_| trial().map(|d| d.as_secs_f64()))
        .collect::<Result<Vec<_>>>()?;
    BenchRecord::from_samples(file_size, workers, strategy, cores, samples)
}

/// Times a real job `reps` times, overwriting the same output each run.
pub fn measure_job(job: &JobSpec, reps: usize, cores: usize) -> Result<BenchRecord> {
    let size = std::fs::metadata(&job.input)
        .map_err(|e| Error::io(&job.input, e))?
        .len();
    measure_cell(
        || exec::run_job(job).map(|o| o.elapsed),
        reps,
        size,
        job.workers,
        job.strategy,
        cores,
    )
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SweepInput {
    /// A pseudorandom file of this many bytes, generated into the work dir.
    Generated(u64),
    /// An existing file, benchmarked at whatever size it has.
    File(PathBuf),
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub inputs: Vec<SweepInput>,
    pub workers: Vec<usize>,
    pub strategies: Vec<ExecStrategy>,
    pub reps: usize,
    pub key: Key128,
    pub cores: usize,
    pub work_dir: PathBuf,
    pub seed: u64,
    pub worker_exe: Option<PathBuf>,
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.inputs.is_empty() {
            return Err(Error::invalid("size/input list is empty"));
        }
        if self.workers.is_empty() {
            return Err(Error::invalid("worker list is empty"));
        }
        if self.workers.contains(&0) {
            return Err(Error::invalid("worker counts must be at least 1"));
        }
        if self.strategies.is_empty() {
            return Err(Error::invalid("strategy list is empty"));
        }
        if self.reps < MIN_REPETITIONS {
            return Err(Error::invalid(format!(
                "need at least {MIN_REPETITIONS} repetitions, got {}",
                self.reps
            )));
        }
        if self.cores == 0 {
            return Err(Error::invalid("core count must be at least 1"));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.inputs.len() * self.workers.len() * self.strategies.len()
    }
}

/// Logical cores visible to this process.
pub fn detect_cores() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Writes `size` bytes from a ChaCha stream seeded with `seed`.
pub fn generate_input(path: &Path, size: u64, seed: u64) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = vec![0u8; 1 << 16];
    let mut left = size;
    while left > 0 {
        let n = left.min(buf.len() as u64) as usize;
        rng.fill_bytes(&mut buf[..n]);
        out.write_all(&buf[..n]).map_err(|e| Error::io(path, e))?;
        left -= n as u64;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Runs every (input, workers, strategy) cell one after another, inputs
/// outermost, then workers, then strategies in config order. A failing cell
/// is recorded and the sweep moves on.
pub fn run_sweep(config: &BenchConfig) -> Result<Vec<CellOutcome>> {
    run_sweep_with(config, |_, _| {})
}

/// Like [`run_sweep`], calling `progress(index, outcome)` after each cell.
pub fn run_sweep_with(
    config: &BenchConfig,
    mut progress: impl FnMut(usize, &CellOutcome),
) -> Result<Vec<CellOutcome>> {
    config.validate()?;
    std::fs::create_dir_all(&config.work_dir).map_err(|e| Error::io(&config.work_dir, e))?;

    let mut outcomes = Vec::with_capacity(config.cell_count());
    for (idx, input) in config.inputs.iter().enumerate() {
        let prepared = prepare_input(config, idx, input);
        for &workers in &config.workers {
            for &strategy in &config.strategies {
                let outcome = match &prepared {
                    Ok((path, size)) => {
                        let output = config
                            .work_dir
                            .join(format!("out-{idx}-{workers}-{strategy}.bin"));
                        let mut job = JobSpec::new(
                            path,
                            &output,
                            config.key.clone(),
                            workers,
                            strategy,
                            Direction::Encrypt,
                        );
                        job.worker_exe = config.worker_exe.clone();
                        let result = measure_job(&job, config.reps, config.cores);
                        let _ = std::fs::remove_file(&output);
                        result.map_err(|e| CellFailure {
                            file_size: Some(*size),
                            input: Some(path.clone()),
                            workers,
                            strategy,
                            error: e.to_string(),
                        })
                    }
                    Err(e) => Err(CellFailure {
                        file_size: match input {
                            SweepInput::Generated(size) => Some(*size),
                            SweepInput::File(_) => None,
                        },
                        input: match input {
                            SweepInput::File(p) => Some(p.clone()),
                            SweepInput::Generated(_) => None,
                        },
                        workers,
                        strategy,
                        error: e.to_string(),
                    }),
                };
                progress(outcomes.len(), &outcome);
                outcomes.push(outcome);
            }
        }
        if let (Ok((path, _)), SweepInput::Generated(_)) = (&prepared, input) {
            let _ = std::fs::remove_file(path);
        }
    }
    Ok(outcomes)
}

fn prepare_input(config: &BenchConfig, idx: usize, input: &SweepInput) -> Result<(PathBuf, u64)> {
    match input {
        SweepInput::Generated(size) => {
            let path = config.work_dir.join(format!("input-{idx}-{size}.bin"));
            generate_input(&path, *size, config.seed.wrapping_add(*size))?;
            Ok((path, *size))
        }
        SweepInput::File(path) => {
            // Open it so unreadable files fail here rather than once per cell.
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            let size = file.metadata().map_err(|e| Error::io(path, e))?.len();
            Ok((path.clone(), size))
        }
    }
}
