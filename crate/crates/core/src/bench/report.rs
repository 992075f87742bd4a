//! Metric tables derived from benchmark records: one file per figure
//! family, as CSV/TSV tables or (x, series, y) plot triples.

use std::io;
use std::path::{Path, PathBuf};

use super::runner::{speedup, BenchmarkRecord, ExecMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Tsv,
    Plotdata,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(ReportFormat::Csv),
            "tsv" => Some(ReportFormat::Tsv),
            "plotdata" => Some(ReportFormat::Plotdata),
            _ => None,
        }
    }

    fn extension(&self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Tsv => "tsv",
            ReportFormat::Plotdata => "plot",
        }
    }

    fn delimiter(&self) -> u8 {
        match self {
            ReportFormat::Tsv => b'\t',
            _ => b',',
        }
    }
}

impl std::fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Tsv => "tsv",
            ReportFormat::Plotdata => "plotdata",
        })
    }
}

/// The eight figure families.
const FAMILIES: [&str; 8] = [
    "exec_time",
    "speedup",
    "e2e_time",
    "shards",
    "largest_shard",
    "per_follower",
    "analyze_time",
    "throughput",
];

struct Table {
    family: &'static str,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

fn key_cols(r: &BenchmarkRecord) -> Vec<String> {
    vec![
        r.config_id.clone(),
        r.rho.clone(),
        r.txns_per_block.to_string(),
        r.mode.to_string(),
        r.mode.follower_count().to_string(),
        r.phase.to_string(),
    ]
}

const KEY_HEADER: [&str; 6] = ["config_id", "rho", "txns_per_block", "mode", "followers", "phase"];

fn fmt_f64(v: f64) -> String {
    format!("{v:.6}")
}

/// Serial baseline for the same workload and phase, if present.
fn serial_baseline<'a>(
    records: &'a [BenchmarkRecord],
    of: &BenchmarkRecord,
) -> Option<&'a BenchmarkRecord> {
    records.iter().find(|r| {
        r.mode == ExecMode::Serial && r.config_id == of.config_id && r.phase == of.phase
    })
}

fn build_tables(records: &[BenchmarkRecord]) -> Vec<Table> {
    let mut tables = Vec::with_capacity(FAMILIES.len());

    let value_table = |family: &'static str,
                       col: &'static str,
                       f: &dyn Fn(&BenchmarkRecord) -> Option<f64>| {
        let mut header = KEY_HEADER.to_vec();
        header.push(col);
        let rows = records
            .iter()
            .filter_map(|r| {
                f(r).map(|v| {
                    let mut row = key_cols(r);
                    row.push(fmt_f64(v));
                    row
                })
            })
            .collect();
        Table { family, header, rows }
    };

    tables.push(value_table("exec_time", "mean_exec_ms", &|r| {
        Some(r.mean_exec_ms())
    }));
    tables.push(value_table("speedup", "speedup", &|r| {
        serial_baseline(records, r).map(|s| speedup(s, r))
    }));
    tables.push(value_table("e2e_time", "mean_e2e_ms", &|r| {
        Some(r.mean_e2e_ms())
    }));
    tables.push(value_table("shards", "mean_shards", &|r| Some(r.mean_shards())));
    tables.push(value_table("largest_shard", "mean_max_shard", &|r| {
        Some(r.mean_max_shard())
    }));

    // Long format: one row per worker slot.
    let mut per_follower_rows = Vec::new();
    for r in records {
        for (i, mean) in r.mean_txns_per_follower().iter().enumerate() {
            let mut row = key_cols(r);
            row.push(i.to_string());
            row.push(fmt_f64(*mean));
            per_follower_rows.push(row);
        }
    }
    let mut header = KEY_HEADER.to_vec();
    header.extend(["follower_index", "mean_txns"]);
    tables.push(Table {
        family: "per_follower",
        header,
        rows: per_follower_rows,
    });

    tables.push(value_table("analyze_time", "mean_analyze_us", &|r| {
        Some(r.mean_analyze_us())
    }));
    tables.push(value_table("throughput", "throughput_tps", &|r| {
        Some(r.throughput_tps())
    }));

    tables
}

/// For plotdata, each family collapses to (x, series, y): x is the follower
/// count (0 = serial), the series labels the workload cell.
fn plot_triples(records: &[BenchmarkRecord], family: &str) -> Vec<(String, String, String)> {
    fn push(
        rows: &mut Vec<(String, String, String)>,
        x: String,
        r: &BenchmarkRecord,
        y: Option<f64>,
    ) {
        if let Some(y) = y {
            rows.push((x, format!("{}/{}", r.config_id, r.phase), fmt_f64(y)));
        }
    }
    let mut rows = Vec::new();
    for r in records {
        let x = r.mode.follower_count().to_string();
        match family {
            "exec_time" => push(&mut rows, x, r, Some(r.mean_exec_ms())),
            "speedup" => push(&mut rows, x, r, serial_baseline(records, r).map(|s| speedup(s, r))),
            "e2e_time" => push(&mut rows, x, r, Some(r.mean_e2e_ms())),
            "shards" => push(&mut rows, r.txns_per_block.to_string(), r, Some(r.mean_shards())),
            "largest_shard" => {
                push(&mut rows, r.txns_per_block.to_string(), r, Some(r.mean_max_shard()))
            }
            "per_follower" => {
                for (i, mean) in r.mean_txns_per_follower().iter().enumerate() {
                    rows.push((
                        i.to_string(),
                        format!("{}/{}/{}", r.config_id, r.phase, r.mode),
                        fmt_f64(*mean),
                    ));
                }
            }
            "analyze_time" => {
                push(&mut rows, r.txns_per_block.to_string(), r, Some(r.mean_analyze_us()))
            }
            "throughput" => push(&mut rows, x, r, Some(r.throughput_tps())),
            _ => unreachable!("unknown family {family}"),
        }
    }
    rows
}

/// Write one file per figure family into `out_dir`; returns the paths.
pub fn emit_report(
    records: &[BenchmarkRecord],
    format: ReportFormat,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, io::Error> {
    assert!(!records.is_empty(), "emit_report needs at least one record");
    std::fs::create_dir_all(out_dir)?;
    let mut paths = Vec::with_capacity(FAMILIES.len());

    match format {
        ReportFormat::Csv | ReportFormat::Tsv => {
            for table in build_tables(records) {
                let path = out_dir.join(format!("{}.{}", table.family, format.extension()));
                let file = std::fs::File::create(&path)?;
                let mut w = csv::WriterBuilder::new()
                    .delimiter(format.delimiter())
                    .from_writer(io::BufWriter::new(file));
                w.write_record(&table.header)?;
                for row in &table.rows {
                    w.write_record(row)?;
                }
                w.flush()?;
                paths.push(path);
            }
        }
        ReportFormat::Plotdata => {
            for family in FAMILIES {
                let path = out_dir.join(format!("{}.{}", family, format.extension()));
                let file = std::fs::File::create(&path)?;
                let mut w = csv::Writer::from_writer(io::BufWriter::new(file));
                w.write_record(["x", "series", "y"])?;
                for (x, series, y) in plot_triples(records, family) {
                    w.write_record([x, series, y])?;
                }
                w.flush()?;
                paths.push(path);
            }
        }
    }
    Ok(paths)
}

/// Aggregate one-row-per-record summary (derived, lossy floats) for quick
/// reading; the per-block records file remains the source of truth.
pub fn write_summary_csv<W: io::Write>(
    writer: W,
    records: &[BenchmarkRecord],
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = KEY_HEADER.to_vec();
    header.extend([
        "blocks",
        "total_txns",
        "mean_exec_ms",
        "std_exec_ms",
        "mean_analyze_us",
        "mean_e2e_ms",
        "mean_shards",
        "mean_max_shard",
        "throughput_tps",
        "speedup_vs_serial",
        "all_accepted",
    ]);
    w.write_record(&header)?;
    for r in records {
        let mut row = key_cols(r);
        row.extend([
            r.blocks.len().to_string(),
            r.total_txns().to_string(),
            fmt_f64(r.mean_exec_ms()),
            fmt_f64(r.std_exec_ms()),
            fmt_f64(r.mean_analyze_us()),
            fmt_f64(r.mean_e2e_ms()),
            fmt_f64(r.mean_shards()),
            fmt_f64(r.mean_max_shard()),
            fmt_f64(r.throughput_tps()),
            serial_baseline(records, r)
                .map(|s| fmt_f64(speedup(s, r)))
                .unwrap_or_default(),
            r.all_accepted().to_string(),
        ]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
