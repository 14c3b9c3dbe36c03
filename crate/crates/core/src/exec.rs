//! Running a [`ChunkPlan`] sequentially, on scoped threads sharing one
//! pre-sized output file, or on isolated worker processes that each write a
//! temporary part file for the coordinator to concatenate.
//!
//! All three produce byte-identical output. Output is written to a temporary
//! sibling of the destination and renamed into place only on success.

use std::fmt;
use std::fs::File;
use std::io::{self, Write};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::str::FromStr;
use std::thread;
use std::time::{Duration, Instant};

use tempfile::NamedTempFile;

use crate::aes::{self, Key128, RoundKeySchedule, BLOCK_LEN};
use crate::chunk::{self, Chunk, ChunkPlan};
use crate::error::{Error, Result, WorkerFailure};

/// Name of the hidden subcommand a worker process is started with.
pub const WORKER_SUBCOMMAND: &str = "__worker";

/// Read/transform/write granularity inside one chunk. A multiple of the block size.
const IO_BUF_LEN: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExecStrategy {
    Sequential,
    Threaded,
    ProcessIsolated,
}

impl ExecStrategy {
    pub const ALL: [ExecStrategy; 3] = [
        ExecStrategy::Sequential,
        ExecStrategy::Threaded,
        ExecStrategy::ProcessIsolated,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExecStrategy::Sequential => "sequential",
            ExecStrategy::Threaded => "threads",
            ExecStrategy::ProcessIsolated => "processes",
        }
    }
}

impl fmt::Display for ExecStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExecStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExecStrategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown strategy `{s}` (expected sequential, threads or processes)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Encrypt,
    Decrypt,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::Encrypt => "encrypt",
            Direction::Decrypt => "decrypt",
        }
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "encrypt" => Ok(Direction::Encrypt),
            "decrypt" => Ok(Direction::Decrypt),
            _ => Err(Error::invalid(format!("unknown direction `{s}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct JobSpec {
    pub input: PathBuf,
    pub output: PathBuf,
    pub key: Key128,
    pub workers: usize,
    pub strategy: ExecStrategy,
    pub direction: Direction,
    /// Executable started for process-isolated workers. Defaults to the
    /// current executable, which must then understand [`WORKER_SUBCOMMAND`].
    pub worker_exe: Option<PathBuf>,
}

impl JobSpec {
    pub fn new(
        input: impl Into<PathBuf>,
        output: impl Into<PathBuf>,
        key: Key128,
        workers: usize,
        strategy: ExecStrategy,
        direction: Direction,
    ) -> Self {
        JobSpec {
            input: input.into(),
            output: output.into(),
            key,
            workers,
            strategy,
            direction,
            worker_exe: None,
        }
    }

    pub fn with_worker_exe(mut self, exe: impl Into<PathBuf>) -> Self {
        self.worker_exe = Some(exe.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    pub bytes_read: u64,
    pub bytes_written: u64,
    pub chunks: usize,
    pub elapsed: Duration,
}

pub fn run_job(job: &JobSpec) -> Result<Outcome> {
    match job.strategy {
        ExecStrategy::Sequential => run_sequential(job),
        ExecStrategy::Threaded => run_threaded(job),
        ExecStrategy::ProcessIsolated => run_process_isolated(job),
    }
}

/// Single-instance baseline; `job.workers` is ignored.
pub fn run_sequential(job: &JobSpec) -> Result<Outcome> {
    let start = Instant::now();
    let (input, len) = open_input(&job.input)?;
    let plan = plan_for(job.direction, len, 1)?;
    let ks = RoundKeySchedule::new(&job.key);

    let tmp = output_temp(&job.output)?;
    let out = tmp.as_file();
    let chunk = &plan.chunks()[0];
    transform_chunk(
        &input,
        &job.input,
        chunk,
        job.direction,
        &ks,
        |rel, data| {
            out.write_all_at(data, rel)
                .map_err(|e| Error::io(tmp.path(), e))
        },
    )?;

    let written = finish_output(tmp, &job.output, job.direction)?;
    Ok(Outcome {
        bytes_read: len,
        bytes_written: written,
        chunks: 1,
        elapsed: start.elapsed(),
    })
}

/// One scoped thread per chunk. Threads share the input handle, the key
/// schedule and the output file, and write only inside their own chunk's
/// byte range of the pre-sized output.
pub fn run_threaded(job: &JobSpec) -> Result<Outcome> {
    let start = Instant::now();
    let (input, len) = open_input(&job.input)?;
    let plan = plan_for(job.direction, len, job.workers)?;
    let ks = RoundKeySchedule::new(&job.key);

    let tmp = output_temp(&job.output)?;
    tmp.as_file()
        .set_len(plan.output_len())
        .map_err(|e| Error::io(tmp.path(), e))?;
    let out = tmp.as_file();
    let out_path = tmp.path();

    let results: Vec<Result<()>> = thread::scope(|scope| {
        let handles: Vec<_> = plan
            .chunks()
            .iter()
            .map(|chunk| {
                let (input, ks) = (&input, &ks);
                scope.spawn(move || {
                    transform_chunk(input, &job.input, chunk, job.direction, ks, |rel, data| {
                        out.write_all_at(data, chunk.offset + rel)
                            .map_err(|e| Error::io(out_path, e))
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::invalid("worker thread panicked")))
            })
            .collect()
    });

    let failures: Vec<WorkerFailure> = results
        .into_iter()
        .enumerate()
        .filter_map(|(chunk, r)| {
            r.err().map(|e| WorkerFailure {
                chunk,
                message: e.to_string(),
            })
        })
        .collect();
    if !failures.is_empty() {
        return Err(Error::Workers { failures });
    }

    let written = finish_output(tmp, &job.output, job.direction)?;
    Ok(Outcome {
        bytes_read: len,
        bytes_written: written,
        chunks: plan.len(),
        elapsed: start.elapsed(),
    })
}

/// One worker process per chunk, each re-invoking the worker executable in
/// worker mode. The key travels over the child's stdin, never argv. Part
/// files live in a temporary directory next to the output and are
/// concatenated in plan order once every worker has exited.
pub fn run_process_isolated(job: &JobSpec) -> Result<Outcome> {
    let start = Instant::now();
    let (input, len) = open_input(&job.input)?;
    drop(input);
    let plan = plan_for(job.direction, len, job.workers)?;

    let exe = match &job.worker_exe {
        Some(exe) => exe.clone(),
        None => std::env::current_exe().map_err(|e| Error::io("<current executable>", e))?,
    };

    let parts_dir = tempfile::Builder::new()
        .prefix(".parcrypt-parts-")
        .tempdir_in(parent_dir(&job.output))
        .map_err(|e| Error::io(parent_dir(&job.output), e))?;
    let part_paths: Vec<PathBuf> = (0..plan.len())
        .map(|i| parts_dir.path().join(format!("chunk-{i:04}.part")))
        .collect();

    // Spawn everything first, then wait on each in turn.
    let mut children: Vec<(usize, Child)> = Vec::with_capacity(plan.len());
    let mut failures = Vec::new();
    for (i, chunk) in plan.chunks().iter().enumerate() {
        match spawn_worker(&exe, job, chunk, &part_paths[i]) {
            Ok(child) => children.push((i, child)),
            Err(e) => {
                failures.push(WorkerFailure {
                    chunk: i,
                    message: format!("failed to start worker: {e}"),
                });
                break;
            }
        }
    }
    if !failures.is_empty() {
        for (_, child) in &mut children {
            let _ = child.kill();
        }
    }
    for (i, child) in children {
        match child.wait_with_output() {
            Ok(out) if out.status.success() => {}
            Ok(out) => failures.push(WorkerFailure {
                chunk: i,
                message: format!(
                    "worker exited with {}: {}",
                    out.status,
                    String::from_utf8_lossy(&out.stderr).trim()
                ),
            }),
            Err(e) => failures.push(WorkerFailure {
                chunk: i,
                message: format!("waiting on worker failed: {e}"),
            }),
        }
    }
    if !failures.is_empty() {
        failures.sort_by_key(|f| f.chunk);
        return Err(Error::Workers { failures });
    }

    for (i, (chunk, path)) in plan.chunks().iter().zip(&part_paths).enumerate() {
        let size = std::fs::metadata(path)
            .map_err(|e| Error::io(path, e))?
            .len();
        if size != chunk.padded_len {
            return Err(Error::Workers {
                failures: vec![WorkerFailure {
                    chunk: i,
                    message: format!(
                        "part file holds {size} bytes, expected {}",
                        chunk.padded_len
                    ),
                }],
            });
        }
    }

    let mut tmp = output_temp(&job.output)?;
    for path in &part_paths {
        let mut part = File::open(path).map_err(|e| Error::io(path, e))?;
        io::copy(&mut part, tmp.as_file_mut()).map_err(|e| Error::io(path, e))?;
    }
    tmp.as_file_mut()
        .flush()
        .map_err(|e| Error::io(tmp.path(), e))?;
    drop(parts_dir);
    let written = finish_output(tmp, &job.output, job.direction)?;

    Ok(Outcome {
        bytes_read: len,
        bytes_written: written,
        chunks: plan.len(),
        elapsed: start.elapsed(),
    })
}

fn spawn_worker(exe: &Path, job: &JobSpec, chunk: &Chunk, part: &Path) -> io::Result<Child> {
    let mut child = Command::new(exe)
        .arg(WORKER_SUBCOMMAND)
        .arg("--in")
        .arg(&job.input)
        .arg("--offset")
        .arg(chunk.offset.to_string())
        .arg("--len")
        .arg(chunk.raw_len.to_string())
        .arg("--final")
        .arg(if chunk.is_final { "1" } else { "0" })
        .arg("--direction")
        .arg(job.direction.name())
        .arg("--out")
        .arg(part)
        .stdin(Stdio::piped())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()?;
    let mut stdin = child.stdin.take().expect("stdin was piped");
    // A worker that dies before reading its key shows up as a failed exit.
    let _ = stdin.write_all(job.key.as_bytes());
    Ok(child)
}

/// What a worker process is asked to do.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkerTask {
    pub input: PathBuf,
    pub offset: u64,
    pub raw_len: u64,
    pub is_final: bool,
    pub direction: Direction,
    pub output: PathBuf,
}

/// Body of a worker process: transform exactly one chunk of the input into
/// `task.output`. Encrypting a final chunk pads it. Decrypted padding is left
/// in place for the coordinator to check once all parts are joined. Returns
/// the number of bytes written.
pub fn run_worker_chunk(task: &WorkerTask, key: &Key128) -> Result<u64> {
    let (input, len) = open_input(&task.input)?;
    let end = task.offset.checked_add(task.raw_len);
    if end.is_none_or(|end| end > len) {
        return Err(Error::invalid(format!(
            "chunk {}+{} lies outside {} ({len} bytes)",
            task.offset,
            task.raw_len,
            task.input.display()
        )));
    }
    let padded_len = match task.direction {
        Direction::Encrypt if task.is_final => chunk::padded_len_of(task.raw_len),
        Direction::Encrypt => {
            check_aligned(task.raw_len)?;
            task.raw_len
        }
        Direction::Decrypt => {
            check_aligned(task.raw_len)?;
            if task.raw_len == 0 {
                return Err(Error::invalid("decrypt chunk must not be empty"));
            }
            task.raw_len
        }
    };
    let chunk = Chunk {
        offset: task.offset,
        raw_len: task.raw_len,
        padded_len,
        is_final: task.is_final,
    };

    let ks = RoundKeySchedule::new(key);
    let mut out = File::create(&task.output).map_err(|e| Error::io(&task.output, e))?;
    transform_chunk(
        &input,
        &task.input,
        &chunk,
        task.direction,
        &ks,
        |_, data| out.write_all(data).map_err(|e| Error::io(&task.output, e)),
    )?;
    Ok(padded_len)
}

fn check_aligned(len: u64) -> Result<()> {
    if !len.is_multiple_of(BLOCK_LEN as u64) {
        return Err(Error::invalid(format!(
            "non-final chunk length {len} is not block-aligned"
        )));
    }
    Ok(())
}

/// Streams one chunk through the cipher. `sink` receives each transformed
/// piece with its offset relative to the start of the chunk's output.
fn transform_chunk(
    input: &File,
    input_path: &Path,
    chunk: &Chunk,
    direction: Direction,
    ks: &RoundKeySchedule,
    mut sink: impl FnMut(u64, &[u8]) -> Result<()>,
) -> Result<()> {
    let pad_here = direction == Direction::Encrypt && chunk.is_final;
    let mut buf = vec![0u8; IO_BUF_LEN + BLOCK_LEN];
    let mut pos = 0u64;
    loop {
        let n = (chunk.raw_len - pos).min(IO_BUF_LEN as u64) as usize;
        input
            .read_exact_at(&mut buf[..n], chunk.offset + pos)
            .map_err(|e| Error::io(input_path, e))?;
        let last = pos + n as u64 == chunk.raw_len;

        let piece_len = if last && pad_here {
            let k = BLOCK_LEN - n % BLOCK_LEN;
            buf[n..n + k].fill(k as u8);
            n + k
        } else {
            n
        };
        if piece_len % BLOCK_LEN != 0 {
            return Err(Error::invalid(format!(
                "chunk at offset {} is not block-aligned",
                chunk.offset
            )));
        }

        let piece = &mut buf[..piece_len];
        match direction {
            Direction::Encrypt => aes::ecb_encrypt_in_place(piece, ks),
            Direction::Decrypt => aes::ecb_decrypt_in_place(piece, ks),
        }
        if !piece.is_empty() {
            sink(pos, piece)?;
        }

        pos += n as u64;
        if last {
            return Ok(());
        }
    }
}

fn open_input(path: &Path) -> Result<(File, u64)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let len = file.metadata().map_err(|e| Error::io(path, e))?.len();
    Ok((file, len))
}

fn plan_for(direction: Direction, len: u64, workers: usize) -> Result<ChunkPlan> {
    match direction {
        Direction::Encrypt => chunk::plan_chunks(len, workers),
        Direction::Decrypt => chunk::plan_ciphertext_chunks(len, workers),
    }
}

fn parent_dir(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

fn output_temp(output: &Path) -> Result<NamedTempFile> {
    let dir = parent_dir(output);
    tempfile::Builder::new()
        .prefix(".parcrypt-out-")
        .tempfile_in(dir)
        .map_err(|e| Error::io(dir, e))
}

/// Validates and truncates the PKCS#7 tail of a decrypted file.
fn strip_padding(file: &File, path: &Path) -> Result<u64> {
    let len = file.metadata().map_err(|e| Error::io(path, e))?.len();
    chunk::check_ciphertext_len(len)?;
    let mut last = [0u8; BLOCK_LEN];
    file.read_exact_at(&mut last, len - BLOCK_LEN as u64)
        .map_err(|e| Error::io(path, e))?;
    let k = chunk::padding_len(&last)? as u64;
    file.set_len(len - k).map_err(|e| Error::io(path, e))?;
    Ok(len - k)
}

fn finish_output(tmp: NamedTempFile, output: &Path, direction: Direction) -> Result<u64> {
    let written = match direction {
        Direction::Decrypt => strip_padding(tmp.as_file(), tmp.path())?,
        Direction::Encrypt => tmp
            .as_file()
            .metadata()
            .map_err(|e| Error::io(tmp.path(), e))?
            .len(),
    };
    tmp.persist(output)
        .map_err(|e| Error::io(output, e.error))?;
    Ok(written)
}
