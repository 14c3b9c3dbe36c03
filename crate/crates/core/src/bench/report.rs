//! CSV, plain-text summary and SVG line charts for a finished sweep.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{BenchRecord, CellOutcome};
use crate::error::{Error, Result};
use crate::exec::ExecStrategy;

pub const CSV_HEADER: &str =
    "file_size_bytes,workers,strategy,reps,retained,avg_seconds,throughput_mbps,throughput_per_core_mbps";

/// One CSV row, at the precision the CSV stores.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct CsvRow {
    pub file_size_bytes: u64,
    pub workers: usize,
    pub strategy: String,
    pub reps: usize,
    pub retained: usize,
    pub avg_seconds: f64,
    pub throughput_mbps: f64,
    pub throughput_per_core_mbps: f64,
}

impl CsvRow {
    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{:.6},{:.1},{:.1}",
            self.file_size_bytes,
            self.workers,
            self.strategy,
            self.reps,
            self.retained,
            self.avg_seconds,
            self.throughput_mbps,
            self.throughput_per_core_mbps
        )
    }
}

impl From<&BenchRecord> for CsvRow {
    fn from(r: &BenchRecord) -> Self {
        CsvRow {
            file_size_bytes: r.file_size,
            workers: r.workers,
            strategy: r.strategy.name().to_string(),
            reps: r.samples.len(),
            retained: r.retained.len(),
            avg_seconds: r.avg_seconds,
            throughput_mbps: r.throughput_mbps,
            throughput_per_core_mbps: r.throughput_per_core_mbps,
        }
    }
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let first = text.lines().next().unwrap_or_default();
    if first != CSV_HEADER {
        return Err(Error::invalid(format!("unexpected CSV header `{first}`")));
    }
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .map(|row| row.map_err(|e| Error::invalid(format!("bad CSV row: {e}"))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportMeta {
    /// Free-form machine label for the summary's processor column.
    pub machine: String,
    pub cores: usize,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub csv: String,
    pub summary: String,
    pub charts: Vec<(ExecStrategy, String)>,
}

impl Report {
    /// Writes `report.csv`, `summary.txt` and one `throughput_<strategy>.svg`
    /// per strategy into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut files = vec![
            (dir.join("report.csv"), self.csv.as_str()),
            (dir.join("summary.txt"), self.summary.as_str()),
        ];
        for (strategy, svg) in &self.charts {
            files.push((dir.join(chart_file_name(*strategy)), svg.as_str()));
        }
        for (path, body) in &files {
            std::fs::write(path, body).map_err(|e| Error::io(path, e))?;
        }
        Ok(files.into_iter().map(|(p, _)| p).collect())
    }
}

pub fn chart_file_name(strategy: ExecStrategy) -> String {
    format!("throughput_{}.svg", strategy.name())
}

pub fn emit_report(outcomes: &[CellOutcome], meta: &ReportMeta) -> Result<Report> {
    if outcomes.is_empty() {
        return Err(Error::invalid("no benchmark records to report"));
    }
    let records: Vec<&BenchRecord> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();

    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for r in &records {
        csv.push_str(&CsvRow::from(*r).to_line());
        csv.push('\n');
    }

    let strategies: BTreeSet<ExecStrategy> = outcomes
        .iter()
        .map(|o| match o {
            Ok(r) => r.strategy,
            Err(f) => f.strategy,
        })
        .collect();
    let charts = strategies
        .iter()
        .map(|&s| {
            let mine: Vec<&BenchRecord> = records
                .iter()
                .copied()
                .filter(|r| r.strategy == s)
                .collect();
            (s, render_chart(s, &mine))
        })
        .collect();

    Ok(Report {
        csv,
        summary: render_summary(outcomes, &records, &strategies, meta),
        charts,
    })
}

pub fn human_size(bytes: u64) -> String {
    const UNITS: [(&str, u64); 3] = [("GiB", 1 << 30), ("MiB", 1 << 20), ("KiB", 1 << 10)];
    for (unit, scale) in UNITS {
        if bytes >= scale {
            return if bytes.is_multiple_of(scale) {
                format!("{} {unit}", bytes / scale)
            } else {
                format!("{:.1} {unit}", bytes as f64 / scale as f64)
            };
        }
    }
    format!("{bytes} B")
}

fn best<'a>(records: impl Iterator<Item = &'a BenchRecord>) -> Option<&'a BenchRecord> {
    records.max_by(|a, b| a.throughput_mbps.total_cmp(&b.throughput_mbps))
}

fn render_summary(
    outcomes: &[CellOutcome],
    records: &[&BenchRecord],
    strategies: &BTreeSet<ExecStrategy>,
    meta: &ReportMeta,
) -> String {
    let unit = if meta.cores == 1 { "core" } else { "cores" };
    let processor = format!("{} ({} {unit})", meta.machine, meta.cores);
    let mut out = String::new();
    let _ = writeln!(out, "RESULTS SUMMARY");
    let _ = writeln!(out, "throughput in Mb/s (10^6 bits per second)");
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:<12} {:<24} {:>22} {:>30} {:>12} {:>8}",
        "Method",
        "Processor",
        "Best throughput (Mb/s)",
        "Through/core (Mb/s per core)",
        "Data size",
        "Workers"
    );
    for &s in strategies {
        match best(records.iter().copied().filter(|r| r.strategy == s)) {
            Some(r) => {
                let _ = writeln!(
                    out,
                    "{:<12} {:<24} {:>22.1} {:>30.1} {:>12} {:>8}",
                    s.name(),
                    processor,
                    r.throughput_mbps,
                    r.throughput_per_core_mbps,
                    human_size(r.file_size),
                    r.workers
                );
            }
            None => {
                let _ = writeln!(
                    out,
                    "{:<12} {:<24} {:>22} {:>30} {:>12} {:>8}",
                    s.name(),
                    processor,
                    "-",
                    "-",
                    "-",
                    "-"
                );
            }
        }
    }

    if let Some(line) = ratio_line(records) {
        let _ = writeln!(out);
        let _ = writeln!(out, "{line}");
    }

    let _ = writeln!(out);
    let _ = writeln!(out, "ALL CELLS");
    let _ = writeln!(
        out,
        "{:>12} {:>8} {:<12} {:>10} {:>14} {:>16}",
        "Data size", "Workers", "Method", "Retained", "Avg (s)", "Throughput"
    );
    for o in outcomes {
        match o {
            Ok(r) => {
                let _ = writeln!(
                    out,
                    "{:>12} {:>8} {:<12} {:>10} {:>14.6} {:>16.1}",
                    human_size(r.file_size),
                    r.workers,
                    r.strategy.name(),
                    format!("{}/{}", r.retained.len(), r.samples.len()),
                    r.avg_seconds,
                    r.throughput_mbps
                );
            }
            Err(f) => {
                let size = f.file_size.map_or_else(|| "?".to_string(), human_size);
                let _ = writeln!(
                    out,
                    "{:>12} {:>8} {:<12} FAILED: {}",
                    size,
                    f.workers,
                    f.strategy.name(),
                    f.error
                );
            }
        }
    }
    out
}

/// Threads-over-processes throughput ratio at the cell with the most workers
/// (then the largest input) measured under both strategies.
fn ratio_line(records: &[&BenchRecord]) -> Option<String> {
    let lookup = |s: ExecStrategy| -> BTreeMap<(usize, u64), f64> {
        records
            .iter()
            .filter(|r| r.strategy == s)
            .map(|r| ((r.workers, r.file_size), r.throughput_mbps))
            .collect()
    };
    let threads = lookup(ExecStrategy::Threaded);
    let procs = lookup(ExecStrategy::ProcessIsolated);
    let (&(workers, size), t) = threads.iter().rev().find(|(k, _)| procs.contains_key(k))?;
    let p = procs[&(workers, size)];
    Some(format!(
        "threads/processes throughput ratio at {workers} workers, {}: {:.2}x ({t:.1} vs {p:.1} Mb/s)",
        human_size(size),
        t / p
    ))
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Rounds up to 1, 2 or 5 times a power of ten.
fn nice_ceiling(v: f64) -> f64 {
    if v <= 0.0 {
        return 1.0;
    }
    let mag = 10f64.powf(v.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|&c| c >= v)
        .unwrap_or(10.0 * mag)
}

/// Throughput against data size, one line per worker count. Sizes are
/// spaced evenly along the x axis in ascending order.
fn render_chart(strategy: ExecStrategy, records: &[&BenchRecord]) -> String {
    const W: f64 = 820.0;
    const H: f64 = 500.0;
    const LEFT: f64 = 90.0;
    const RIGHT: f64 = 150.0;
    const TOP: f64 = 50.0;
    const BOTTOM: f64 = 70.0;
    let plot_w = W - LEFT - RIGHT;
    let plot_h = H - TOP - BOTTOM;

    let sizes: Vec<u64> = records
        .iter()
        .map(|r| r.file_size)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let y_max = nice_ceiling(
        records
            .iter()
            .map(|r| r.throughput_mbps)
            .fold(0.0, f64::max)
            * 1.05,
    );
    let x_of = |size: u64| {
        let i = sizes.iter().position(|&s| s == size).unwrap_or(0);
        if sizes.len() <= 1 {
            LEFT + plot_w / 2.0
        } else {
            LEFT + plot_w * i as f64 / (sizes.len() - 1) as f64
        }
    };
    let y_of = |v: f64| TOP + plot_h * (1.0 - v / y_max);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">
<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>
<text x="{:.1}" y="28" text-anchor="middle" font-size="16">{}</text>"#,
        LEFT + plot_w / 2.0,
        escape(&format!("Throughput vs. data size ({})", strategy.name()))
    );

    // Axes, grid and tick labels.
    let _ = writeln!(
        svg,
        r#"<g stroke="black" stroke-width="1"><line x1="{LEFT}" y1="{:.1}" x2="{:.1}" y2="{:.1}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{:.1}"/></g>"#,
        TOP + plot_h,
        LEFT + plot_w,
        TOP + plot_h,
        TOP + plot_h
    );
    for i in 0..=5 {
        let v = y_max * i as f64 / 5.0;
        let y = y_of(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#dddddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{v:.0}</text>"##,
            LEFT + plot_w,
            LEFT - 8.0,
            y + 4.0
        );
    }
    for &size in &sizes {
        let x = x_of(size);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            TOP + plot_h,
            TOP + plot_h + 5.0,
            TOP + plot_h + 20.0,
            escape(&human_size(size))
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">Data size</text>
<text x="20" y="{:.1}" text-anchor="middle" transform="rotate(-90 20 {:.1})">Throughput (Mb/s)</text>"#,
        LEFT + plot_w / 2.0,
        H - 20.0,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0
    );

    let mut series: BTreeMap<usize, Vec<(u64, f64)>> = BTreeMap::new();
    for r in records {
        series
            .entry(r.workers)
            .or_default()
            .push((r.file_size, r.throughput_mbps));
    }
    if series.is_empty() {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">no successful measurements</text>"#,
            LEFT + plot_w / 2.0,
            TOP + plot_h / 2.0
        );
    }
    for (i, (workers, mut points)) in series.into_iter().enumerate() {
        points.sort_by_key(|p| p.0);
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = points
            .iter()
            .map(|&(s, v)| format!("{:.1},{:.1}", x_of(s), y_of(v)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            coords.join(" ")
        );
        for &(s, v) in &points {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#,
                x_of(s),
                y_of(v)
            );
        }
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = LEFT + plot_w + 20.0;
        let label = if workers == 1 {
            "1 worker".to_string()
        } else {
            format!("{workers} workers")
        };
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{label}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}
