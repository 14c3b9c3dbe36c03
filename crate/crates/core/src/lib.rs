//! AES-128 file encryption split into block-aligned chunks and run
//! sequentially, on threads sharing one address space, or on isolated worker
//! processes, plus the benchmark harness that compares them.
//!
//! Files are encrypted in ECB mode with PKCS#7 padding so that independently
//! encrypted chunks concatenate to exactly the sequential ciphertext. ECB
//! leaks equal plaintext blocks; do not use this for data that matters.

pub mod aes;
pub mod bench;
pub mod chunk;
pub mod cli;
pub mod error;
pub mod exec;

pub use aes::{decrypt_block, encrypt_block, expand_key, Block, Key128, RoundKeySchedule, State};
pub use chunk::{assemble, pad_final, plan_chunks, unpad_final, Chunk, ChunkPlan};
pub use error::{Error, Result};
pub use exec::{run_job, Direction, ExecStrategy, JobSpec, Outcome};
