//! Splitting an input into block-aligned chunks that can be encrypted
//! independently and concatenated back into the sequential ECB output.
//!
//! Padding is PKCS#7 and is always applied, so a block-multiple input still
//! grows by one full block. Only the final chunk carries the padding.

use crate::aes::BLOCK_LEN;
use crate::error::{Error, Result};

const BLOCK: u64 = BLOCK_LEN as u64;

/// One worker's share of the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Chunk {
    /// Byte offset into the input, which is also the offset of this chunk's
    /// bytes in the output.
    pub offset: u64,
    pub raw_len: u64,
    /// Bytes this chunk contributes to the output before any unpadding.
    pub padded_len: u64,
    pub is_final: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChunkPlan {
    total_len: u64,
    workers: usize,
    chunks: Vec<Chunk>,
}

impl ChunkPlan {
    pub fn total_len(&self) -> u64 {
        self.total_len
    }

    /// Requested worker count; may exceed `chunks().len()` for tiny inputs.
    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    /// Sum of `padded_len` over all chunks.
    pub fn output_len(&self) -> u64 {
        self.chunks.iter().map(|c| c.padded_len).sum()
    }
}

/// Splits `blocks` blocks into `parts` shares of ⌊B/W⌋ or ⌈B/W⌉, larger first.
fn block_shares(blocks: u64, parts: u64) -> impl Iterator<Item = u64> {
    let base = blocks / parts;
    let extra = blocks % parts;
    (0..parts).map(move |i| base + u64::from(i < extra))
}

/// Plans encryption of a `total_len`-byte plaintext across `workers` workers.
///
/// Blocks are counted as ⌈total_len / 16⌉ (a partial tail counts as one
/// block) and at least one chunk is always produced, so an empty input plans
/// to a single chunk that encrypts to one padding block.
pub fn plan_chunks(total_len: u64, workers: usize) -> Result<ChunkPlan> {
    if workers == 0 {
        return Err(Error::invalid("worker count must be at least 1"));
    }
    let blocks = total_len.div_ceil(BLOCK);
    let parts = (workers as u64).min(blocks.max(1));

    let mut chunks = Vec::with_capacity(parts as usize);
    let mut offset = 0u64;
    for (i, share) in block_shares(blocks, parts).enumerate() {
        let is_final = i as u64 == parts - 1;
        let (raw_len, padded_len) = if is_final {
            let raw = total_len - offset;
            (raw, padded_len_of(raw))
        } else {
            (share * BLOCK, share * BLOCK)
        };
        chunks.push(Chunk {
            offset,
            raw_len,
            padded_len,
            is_final,
        });
        offset += raw_len;
    }

    Ok(ChunkPlan {
        total_len,
        workers,
        chunks,
    })
}

/// Plans decryption of a `total_len`-byte ciphertext. Every chunk is whole
/// blocks and `padded_len == raw_len`; the final chunk's padding is stripped
/// after it is decrypted.
pub fn plan_ciphertext_chunks(total_len: u64, workers: usize) -> Result<ChunkPlan> {
    if workers == 0 {
        return Err(Error::invalid("worker count must be at least 1"));
    }
    check_ciphertext_len(total_len)?;
    let blocks = total_len / BLOCK;
    let parts = (workers as u64).min(blocks);

    let mut offset = 0u64;
    let chunks = block_shares(blocks, parts)
        .enumerate()
        .map(|(i, share)| {
            let len = share * BLOCK;
            let chunk = Chunk {
                offset,
                raw_len: len,
                padded_len: len,
                is_final: i as u64 == parts - 1,
            };
            offset += len;
            chunk
        })
        .collect();

    Ok(ChunkPlan {
        total_len,
        workers,
        chunks,
    })
}

pub(crate) fn check_ciphertext_len(len: u64) -> Result<()> {
    if len == 0 || !len.is_multiple_of(BLOCK) {
        return Err(Error::Integrity(format!(
            "ciphertext length {len} is not a positive multiple of {BLOCK_LEN}"
        )));
    }
    Ok(())
}

/// Length after always-pad: the next multiple of 16 strictly greater than `raw_len`.
pub fn padded_len_of(raw_len: u64) -> u64 {
    (raw_len / BLOCK + 1) * BLOCK
}

/// Appends PKCS#7 padding: k copies of k, k = 16 - (len mod 16), k in 1..=16.
pub fn pad_final(raw: &[u8]) -> Vec<u8> {
    let k = BLOCK_LEN - raw.len() % BLOCK_LEN;
    let mut out = Vec::with_capacity(raw.len() + k);
    out.extend_from_slice(raw);
    out.resize(raw.len() + k, k as u8);
    out
}

/// Number of padding bytes at the end of a decrypted final block, after
/// validating that the tail is well-formed PKCS#7.
pub fn padding_len(last_block: &[u8]) -> Result<usize> {
    if last_block.len() != BLOCK_LEN {
        return Err(Error::Integrity(format!(
            "padding check needs one {BLOCK_LEN}-byte block, got {} bytes",
            last_block.len()
        )));
    }
    let k = last_block[BLOCK_LEN - 1] as usize;
    if k == 0 || k > BLOCK_LEN {
        return Err(Error::Integrity(format!("invalid padding byte {k:#04x}")));
    }
    if last_block[BLOCK_LEN - k..].iter().any(|&b| b as usize != k) {
        return Err(Error::Integrity("malformed padding tail".into()));
    }
    Ok(k)
}

/// Strips and validates PKCS#7 padding.
pub fn unpad_final(padded: &[u8]) -> Result<&[u8]> {
    if padded.is_empty() || !padded.len().is_multiple_of(BLOCK_LEN) {
        return Err(Error::Integrity(format!(
            "padded length {} is not a positive multiple of {BLOCK_LEN}",
            padded.len()
        )));
    }
    let k = padding_len(&padded[padded.len() - BLOCK_LEN..])?;
    Ok(&padded[..padded.len() - k])
}

/// Concatenates per-chunk outputs in plan order.
pub fn assemble<T: AsRef<[u8]>>(plan: &ChunkPlan, parts: &[T]) -> Result<Vec<u8>> {
    if parts.len() != plan.len() {
        return Err(Error::invalid(format!(
            "plan has {} chunks but {} outputs were supplied",
            plan.len(),
            parts.len()
        )));
    }
    let total = parts.iter().map(|p| p.as_ref().len()).sum();
    let mut out = Vec::with_capacity(total);
    for part in parts {
        out.extend_from_slice(part.as_ref());
    }
    Ok(out)
}
