#![allow(dead_code)]

use std::path::{Path, PathBuf};

use parcrypt::chunk::ChunkPlan;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn worker_exe() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_parcrypt"))
}

pub fn random_bytes(len: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = vec![0u8; len];
    rng.fill_bytes(&mut buf);
    buf
}

/// Entries in `dir` left behind by the tool's temporary naming scheme.
pub fn leftovers(dir: &Path) -> Vec<String> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with(".parcrypt"))
        .collect()
}

/// Independent construction of the expected plan: deal blocks one at a time
/// round-robin over the chunks, order shares largest first, then lay the
/// chunks end to end and trim/pad the last one.
pub fn expected_plan(total_len: u64, workers: usize) -> Vec<(u64, u64, u64, bool)> {
    let blocks = (total_len + 15) / 16;
    let parts = workers.min(blocks.max(1) as usize);
    let mut shares = vec![0u64; parts];
    for b in 0..blocks {
        shares[(b % parts as u64) as usize] += 1;
    }
    shares.sort_by(|a, b| b.cmp(a));

    let mut out = Vec::new();
    let mut offset = 0;
    for (i, share) in shares.iter().enumerate() {
        let is_final = i == parts - 1;
        let raw = if is_final {
            total_len - offset
        } else {
            share * 16
        };
        let mut padded = raw;
        if is_final {
            padded = raw + 1;
            while padded % 16 != 0 {
                padded += 1;
            }
        }
        out.push((offset, raw, padded, is_final));
        offset += raw;
    }
    out
}

/// Arithmetic form of `expected_plan` for lengths too large to deal block by
/// block: the first B mod P shares get one extra block.
pub fn expected_plan_fast(total_len: u64, workers: usize) -> Vec<(u64, u64, u64, bool)> {
    let blocks = (total_len + 15) / 16;
    let parts = (workers as u64).min(blocks.max(1));
    let mut out = Vec::new();
    let mut offset = 0;
    for i in 0..parts {
        let share = blocks / parts + u64::from(i < blocks % parts);
        let is_final = i == parts - 1;
        let raw = if is_final {
            total_len - offset
        } else {
            share * 16
        };
        let padded = if is_final { (raw / 16 + 1) * 16 } else { raw };
        out.push((offset, raw, padded, is_final));
        offset += raw;
    }
    out
}

/// Checks every structural property of a plan by walking its bytes.
pub fn check_plan(plan: &ChunkPlan, total_len: u64, workers: usize) -> Result<(), String> {
    let chunks = plan.chunks();
    let blocks = (total_len + 15) / 16;
    let want_parts = workers.min(blocks.max(1) as usize);
    if chunks.len() != want_parts {
        return Err(format!("{} chunks, expected {want_parts}", chunks.len()));
    }

    let mut owner = vec![usize::MAX; total_len as usize];
    for (i, c) in chunks.iter().enumerate() {
        for byte in c.offset..c.offset + c.raw_len {
            let slot = owner
                .get_mut(byte as usize)
                .ok_or_else(|| format!("chunk {i} runs past the end"))?;
            if *slot != usize::MAX {
                return Err(format!("byte {byte} owned by chunks {} and {i}", *slot));
            }
            *slot = i;
        }
    }
    if let Some(b) = owner.iter().position(|&o| o == usize::MAX) {
        return Err(format!("byte {b} not covered"));
    }

    let mut next = 0;
    for (i, c) in chunks.iter().enumerate() {
        if c.offset != next {
            return Err(format!("chunk {i} starts at {} not {next}", c.offset));
        }
        next += c.raw_len;
        let last = i == chunks.len() - 1;
        if c.is_final != last {
            return Err(format!("chunk {i} final flag wrong"));
        }
        if !last {
            if c.raw_len % 16 != 0 || c.raw_len == 0 {
                return Err(format!("non-final chunk {i} has raw_len {}", c.raw_len));
            }
            if c.padded_len != c.raw_len {
                return Err(format!("non-final chunk {i} is padded"));
            }
        } else if c.padded_len % 16 != 0
            || c.padded_len <= c.raw_len
            || c.padded_len > c.raw_len + 16
        {
            return Err(format!(
                "final chunk raw {} padded {}",
                c.raw_len, c.padded_len
            ));
        }
    }

    let lo = blocks / want_parts as u64;
    let hi = (blocks + want_parts as u64 - 1) / want_parts as u64;
    let shares: Vec<u64> = chunks.iter().map(|c| (c.raw_len + 15) / 16).collect();
    if shares.iter().any(|&s| s < lo || s > hi) && blocks > 0 {
        return Err(format!("unbalanced shares {shares:?}"));
    }
    if shares.windows(2).any(|w| w[0] < w[1]) {
        return Err(format!("shares not larger-first {shares:?}"));
    }

    let shape: Vec<_> = chunks
        .iter()
        .map(|c| (c.offset, c.raw_len, c.padded_len, c.is_final))
        .collect();
    if shape != expected_plan(total_len, workers) {
        return Err(format!("plan {shape:?} differs from oracle"));
    }
    Ok(())
}

/// Timing-like sample lists: a base time with jitter, sometimes heavy
/// outliers, sometimes exact ties.
pub fn random_sample_list(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = rng.gen_range(1..=40);
    let base: f64 = rng.gen_range(1e-4..100.0);
    match rng.gen_range(0..4) {
        0 => (0..n).map(|_| base * rng.gen_range(0.9..1.1)).collect(),
        1 => (0..n)
            .map(|_| {
                let jitter = base * rng.gen_range(0.95..1.05);
                if rng.gen_bool(0.15) {
                    jitter * rng.gen_range(2.0..20.0)
                } else {
                    jitter
                }
            })
            .collect(),
        2 => (0..n)
            .map(|_| base * f64::from(rng.gen_range(10u32..13)) / 10.0)
            .collect(),
        _ => (0..n).map(|_| rng.gen_range(0.0..base)).collect(),
    }
}
