//! Acceptance checks. Prints one PASS/FAIL/SKIP line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use parcrypt::aes::{encrypt_block, Key128, RoundKeySchedule};
use parcrypt::bench::{
    self, emit_report, reject_outliers, BenchRecord, CellOutcome, ReportMeta, CSV_HEADER,
};
use parcrypt::chunk::plan_chunks;
use parcrypt::exec::{run_job, Direction, ExecStrategy, JobSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

const MIB: u64 = 1 << 20;
const BIG_FILE: u64 = 256 * MIB;

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = fn(&Path) -> Verdict;

fn ensure(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn key() -> Key128 {
    Key128::from_hex("2b7e151628aed2a6abf7158809cf4f3c").unwrap()
}

fn job(
    input: &Path,
    output: &Path,
    workers: usize,
    strategy: ExecStrategy,
    direction: Direction,
) -> JobSpec {
    JobSpec::new(input, output, key(), workers, strategy, direction)
        .with_worker_exe(common::worker_exe())
}

fn cipher_vectors(_: &Path) -> Verdict {
    let cases = [
        (
            "2b7e151628aed2a6abf7158809cf4f3c",
            "3243f6a8885a308d313198a2e0370734",
            "3925841d02dc09fbdc118597196a0b32",
        ),
        (
            "000102030405060708090a0b0c0d0e0f",
            "00112233445566778899aabbccddeeff",
            "69c4e0d86a7b0430d8cdb78070b4c55a",
        ),
    ];
    for (k, pt, ct) in cases {
        let ks = RoundKeySchedule::new(&Key128::from_hex(k).unwrap());
        let block: [u8; 16] = hex::decode(pt).unwrap().try_into().unwrap();
        let got = hex::encode(encrypt_block(&block, &ks));
        if got != ct {
            return Verdict::Fail(format!("{pt} encrypted to {got}, expected {ct}"));
        }
    }
    Verdict::Pass("2 vectors".into())
}

fn strategy_equivalence(dir: &Path) -> Verdict {
    let sizes = [0usize, 1, 15, 16, 17, 31, 32, 1000, 65536, 1_000_007];
    let workers = [1usize, 2, 3, 4, 8, 16, 32];
    let mut compared = 0;
    for (i, &size) in sizes.iter().enumerate() {
        let plain = dir.join(format!("eq-{size}"));
        fs::write(&plain, common::random_bytes(size, 100 + i as u64)).unwrap();
        let reference = dir.join("eq-seq");
        run_job(&job(
            &plain,
            &reference,
            1,
            ExecStrategy::Sequential,
            Direction::Encrypt,
        ))
        .unwrap();
        let expected = fs::read(&reference).unwrap();
        for &w in &workers {
            for strategy in [ExecStrategy::Threaded, ExecStrategy::ProcessIsolated] {
                let out = dir.join("eq-par");
                if let Err(e) = run_job(&job(&plain, &out, w, strategy, Direction::Encrypt)) {
                    return Verdict::Fail(format!("size {size}, {w} workers, {strategy}: {e}"));
                }
                if fs::read(&out).unwrap() != expected {
                    return Verdict::Fail(format!(
                        "size {size}, {w} workers, {strategy}: bytes differ"
                    ));
                }
                compared += 1;
            }
        }
    }
    Verdict::Pass(format!("{compared} outputs identical to sequential"))
}

fn roundtrip(dir: &Path) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut pairs = 0;
    for i in 0..200 {
        let size = rng.gen_range(0..=MIB as usize);
        let data = common::random_bytes(size, 1000 + i);
        let plain = dir.join("rt-plain");
        fs::write(&plain, &data).unwrap();
        for enc in ExecStrategy::ALL {
            let ct = dir.join("rt-ct");
            let w = rng.gen_range(1..=8);
            if let Err(e) = run_job(&job(&plain, &ct, w, enc, Direction::Encrypt)) {
                return Verdict::Fail(format!("file {i} ({size} bytes) encrypt {enc}: {e}"));
            }
            for dec in ExecStrategy::ALL {
                let back = dir.join("rt-back");
                let w = rng.gen_range(1..=8);
                if let Err(e) = run_job(&job(&ct, &back, w, dec, Direction::Decrypt)) {
                    return Verdict::Fail(format!("file {i} ({size} bytes) {enc} -> {dec}: {e}"));
                }
                if fs::read(&back).unwrap() != data {
                    return Verdict::Fail(format!(
                        "file {i} ({size} bytes) {enc} -> {dec}: mismatch"
                    ));
                }
                pairs += 1;
            }
        }
    }
    Verdict::Pass(format!("200 files, {pairs} encrypt/decrypt pairings"))
}

fn threaded_throughput(input: &Path, output: &Path, workers: usize) -> Result<f64, String> {
    let spec = job(
        input,
        output,
        workers,
        ExecStrategy::Threaded,
        Direction::Encrypt,
    );
    bench::measure_job(&spec, 3, 1)
        .map(|r| r.throughput_mbps)
        .map_err(|e| format!("{workers} workers: {e}"))
}

fn big_input(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("big");
    if !path.exists() {
        bench::generate_input(&path, BIG_FILE, 1).unwrap();
    }
    path
}

fn scaling(dir: &Path) -> Verdict {
    let physical = num_cpus::get_physical();
    if physical < 4 {
        return Verdict::Skip(format!(
            "host has {physical} physical core(s), needs at least 4"
        ));
    }
    let input = big_input(dir);
    let out = dir.join("big-out");
    let one = match threaded_throughput(&input, &out, 1) {
        Ok(t) => t,
        Err(e) => return Verdict::Fail(e),
    };
    let four = match threaded_throughput(&input, &out, 4) {
        Ok(t) => t,
        Err(e) => return Verdict::Fail(e),
    };
    let ratio = four / one;
    ensure(
        ratio >= 1.5,
        format!("W=1 {one:.1} Mb/s, W=4 {four:.1} Mb/s, ratio {ratio:.2} (need >= 1.50)"),
    )
}

fn saturation(dir: &Path) -> Verdict {
    let physical = num_cpus::get_physical();
    let input = big_input(dir);
    let out = dir.join("big-out");
    let at_p = match threaded_throughput(&input, &out, physical) {
        Ok(t) => t,
        Err(e) => return Verdict::Fail(e),
    };
    let at_2p = match threaded_throughput(&input, &out, 2 * physical) {
        Ok(t) => t,
        Err(e) => return Verdict::Fail(e),
    };
    let ratio = at_2p / at_p;
    ensure(
        (0.75..=1.25).contains(&ratio),
        format!(
            "{physical} physical core(s): W={physical} {at_p:.1} Mb/s, W={} {at_2p:.1} Mb/s, ratio {ratio:.2} (need 0.75..=1.25)",
            2 * physical
        ),
    )
}

fn outliers(_: &Path) -> Verdict {
    let examples: [(&[f64], &[f64]); 3] = [
        (&[10.0, 10.0, 10.0, 10.0], &[10.0, 10.0, 10.0, 10.0]),
        (&[9.0, 10.0, 11.0, 12.0, 30.0], &[9.0, 10.0, 11.0, 12.0]),
        (&[10.0, 10.0, 10.0, 100.0], &[10.0, 10.0, 10.0]),
    ];
    for (input, want) in examples {
        let got = reject_outliers(input).unwrap();
        if got != want {
            return Verdict::Fail(format!("{input:?} -> {got:?}, expected {want:?}"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for i in 0..10_000 {
        let samples = common::random_sample_list(&mut rng);
        let once = reject_outliers(&samples).unwrap();
        if once.len() < samples.len().div_ceil(2) {
            return Verdict::Fail(format!(
                "list {i}: kept {} of {}: {samples:?}",
                once.len(),
                samples.len()
            ));
        }
        let twice = reject_outliers(&once).unwrap();
        if twice != once {
            return Verdict::Fail(format!("list {i}: not idempotent: {samples:?}"));
        }
    }
    Verdict::Pass("3 examples, 10000 random lists".into())
}

fn report_fidelity(_: &Path) -> Verdict {
    let mut outcomes: Vec<CellOutcome> = Vec::new();
    for size in [MIB, 4 * MIB] {
        for workers in [1, 2] {
            for strategy in [ExecStrategy::Threaded, ExecStrategy::ProcessIsolated] {
                let t = size as f64 / 4e7 / workers as f64;
                outcomes.push(Ok(BenchRecord::from_samples(
                    size,
                    workers,
                    strategy,
                    2,
                    vec![t, t * 1.01, t * 0.99],
                )
                .unwrap()));
            }
        }
    }
    let report = emit_report(
        &outcomes,
        &ReportMeta {
            machine: "acceptance".into(),
            cores: 2,
        },
    )
    .unwrap();

    let header = report.csv.lines().next().unwrap_or_default();
    if header != "file_size_bytes,workers,strategy,reps,retained,avg_seconds,throughput_mbps,throughput_per_core_mbps"
        || header != CSV_HEADER
    {
        return Verdict::Fail(format!("CSV header is {header:?}"));
    }
    for column in [
        "Best throughput (Mb/s)",
        "Through/core (Mb/s per core)",
        "RESULTS SUMMARY",
    ] {
        if !report.summary.contains(column) {
            return Verdict::Fail(format!("summary lacks {column:?}"));
        }
    }
    if report.charts.len() != 2 {
        return Verdict::Fail(format!("{} charts, expected 2", report.charts.len()));
    }
    for (strategy, svg) in &report.charts {
        let doc = match roxmltree::Document::parse(svg) {
            Ok(doc) => doc,
            Err(e) => return Verdict::Fail(format!("{strategy} chart is not XML: {e}")),
        };
        if doc.root_element().tag_name().name() != "svg" {
            return Verdict::Fail(format!("{strategy} chart root is not <svg>"));
        }
        let texts: Vec<&str> = doc.descendants().filter_map(|n| n.text()).collect();
        if !texts.contains(&"Data size") || !texts.contains(&"Throughput (Mb/s)") {
            return Verdict::Fail(format!("{strategy} chart lacks axis labels"));
        }
    }
    Verdict::Pass("header exact, summary columns present, 2 SVGs well-formed".into())
}

fn chunk_plans(_: &Path) -> Verdict {
    for len in 0..=1024u64 {
        for workers in 1..=33 {
            let plan = plan_chunks(len, workers).unwrap();
            if let Err(e) = common::check_plan(&plan, len, workers) {
                return Verdict::Fail(format!("len {len}, workers {workers}: {e}"));
            }
        }
    }
    Verdict::Pass("1025 lengths x 33 worker counts".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, Duration, Check); 8] = [
        (
            "cipher known vectors",
            Duration::from_secs(1),
            cipher_vectors,
        ),
        (
            "strategy equivalence grid",
            Duration::from_secs(120),
            strategy_equivalence,
        ),
        (
            "roundtrip across strategy pairings",
            Duration::from_secs(120),
            roundtrip,
        ),
        ("scaling W=4 vs W=1", Duration::from_secs(180), scaling),
        (
            "saturation W=2P vs W=P",
            Duration::from_secs(180),
            saturation,
        ),
        ("outlier rejection", Duration::from_secs(10), outliers),
        ("report fidelity", Duration::from_secs(5), report_fidelity),
        (
            "chunk-plan properties",
            Duration::from_secs(10),
            chunk_plans,
        ),
    ];

    let dir = TempDir::new().unwrap();
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let verdict = check(dir.path());
        let elapsed = start.elapsed();
        let timing = format!("{:.2}s of {}s", elapsed.as_secs_f64(), budget.as_secs());
        let verdict = match verdict {
            Verdict::Pass(d) if elapsed > budget => Verdict::Fail(format!("{d}; over time budget")),
            v => v,
        };
        match verdict {
            Verdict::Pass(d) => println!("[PASS] {name}: {d} ({timing})"),
            Verdict::Skip(d) => println!("[SKIP] {name}: {d}"),
            Verdict::Fail(d) => {
                failed += 1;
                println!("[FAIL] {name}: {d} ({timing})");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
