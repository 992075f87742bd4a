//! Benchmark CLI: synthesize or ingest workloads, run serial-vs-community
//! measurements, and derive metric tables from saved records.

use std::net::TcpStream;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use txshard::bench::{
    emit_report, ingest_csv, load_config, load_records, run_benchmark, run_benchmark_with_leader,
    save_records, speedup, synthesize, write_summary_csv, write_transactions_csv, BenchConfig,
    BenchmarkRecord, ExecMode, Ratio, ReportFormat, RunPlan, SynthSpec,
};
use txshard::protocol::{listen, FollowerConfig, Leader};

#[derive(Parser)]
#[command(name = "bench", version, about = "Sharded-execution benchmark harness")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the role described by a key-value config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Synthesize a workload and write it as a transaction CSV.
    Synth {
        /// Contract:monetary ratio, e.g. 1/4.
        #[arg(long, default_value = "1/2")]
        rho: Ratio,
        /// Transactions per block.
        #[arg(long, default_value_t = 100)]
        txns: u32,
        #[arg(long, default_value_t = 10)]
        blocks: u32,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        zipf: f64,
        #[arg(long, default_value_t = 4.0)]
        pool_factor: f64,
    },
    /// Parse a transaction CSV and print an import summary.
    Ingest {
        csv: PathBuf,
        /// Downgrade unknown-selector rows to plain transfers instead of
        /// skipping them.
        #[arg(long)]
        coerce_unknown: bool,
    },
    /// Derive per-figure metric files from a saved records CSV.
    Report {
        records: PathBuf,
        #[arg(long, default_value = "csv")]
        format: String,
        #[arg(long, default_value = "bench-out")]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.cmd {
        Cmd::Run { config } => cmd_run(&load_config(&config)?),
        Cmd::Synth {
            rho,
            txns,
            blocks,
            seed,
            out,
            zipf,
            pool_factor,
        } => {
            let spec = SynthSpec {
                rho,
                txns_per_block: txns,
                block_count: blocks,
                seed,
                pool_factor,
                zipf_exponent: zipf,
            };
            let workload = synthesize(&spec);
            let file = std::fs::File::create(&out)?;
            let flat = workload.blocks.iter().flatten();
            write_transactions_csv(std::io::BufWriter::new(file), flat)?;
            println!(
                "{}: {} blocks, {} txns -> {}",
                spec.config_id(),
                workload.blocks.len(),
                workload.total_txns(),
                out.display()
            );
            Ok(())
        }
        Cmd::Ingest { csv, coerce_unknown } => {
            let outcome = ingest_csv(&csv, coerce_unknown)?;
            let r = &outcome.report;
            println!("rows:            {}", r.rows);
            println!("imported:        {}", r.imported);
            println!("  monetary:      {}", r.monetary);
            println!("  contract:      {}", r.contract);
            println!("skipped unknown: {}", r.skipped_unknown);
            println!("coerced unknown: {}", r.coerced_unknown);
            if !r.per_selector.is_empty() {
                println!("per function:");
                for (name, count) in &r.per_selector {
                    println!("  {name:<20} {count}");
                }
            }
            if !r.row_errors.is_empty() {
                println!("row errors ({}):", r.row_errors.len());
                for (row, err) in r.row_errors.iter().take(20) {
                    println!("  row {row}: {err}");
                }
            }
            let blocks = outcome.into_blocks();
            println!("blocks:          {}", blocks.len());
            Ok(())
        }
        Cmd::Report {
            records,
            format,
            out_dir,
        } => {
            let format = ReportFormat::parse(&format)
                .ok_or_else(|| format!("unknown format {format:?} (csv/tsv/plotdata)"))?;
            let records = load_records(&records)?;
            if records.is_empty() {
                return Err("records file has no data rows".into());
            }
            let paths = emit_report(&records, format, &out_dir)?;
            for p in paths {
                println!("wrote {}", p.display());
            }
            Ok(())
        }
    }
}

fn cmd_run(cfg: &BenchConfig) -> Result<(), Box<dyn std::error::Error>> {
    use txshard::bench::Role;
    match cfg.role {
        Role::Follower => {
            let addr = cfg.listen.as_deref().expect("validated by config parser");
            println!("follower serving on {addr}");
            listen(
                addr,
                FollowerConfig {
                    follower_id: 0,
                    cost: cfg.cost(),
                },
            )?;
            Ok(())
        }
        Role::Local => {
            let records = run_benchmark(&plan_from(cfg, None))?;
            finish_run(cfg, &records)
        }
        Role::Leader => {
            let mut leader = Leader::new();
            for (i, addr) in cfg.followers.iter().enumerate() {
                let stream = TcpStream::connect(addr)?;
                stream.set_nodelay(true).ok();
                leader.add_follower(i as u32, stream)?;
                println!("connected follower {i} at {addr}");
            }
            let plan = plan_from(cfg, Some(cfg.followers.len() as u32));
            let records = run_benchmark_with_leader(&plan, &mut leader)?;
            finish_run(cfg, &records)
        }
    }
}

fn plan_from(cfg: &BenchConfig, fixed_community: Option<u32>) -> RunPlan {
    let mut modes = Vec::new();
    if cfg.include_serial {
        modes.push(ExecMode::Serial);
    }
    match fixed_community {
        Some(f) => modes.push(ExecMode::Community { followers: f }),
        None => modes.extend(
            cfg.follower_counts
                .iter()
                .map(|&f| ExecMode::Community { followers: f }),
        ),
    }
    RunPlan {
        spec: SynthSpec {
            rho: cfg.rho,
            txns_per_block: cfg.txns_per_block,
            block_count: cfg.blocks,
            seed: cfg.seed,
            pool_factor: cfg.pool_factor,
            zipf_exponent: cfg.zipf_exponent,
        },
        modes,
        phases: cfg.phases.clone(),
        validators: cfg.validators.clone(),
        warmup: cfg.warmup,
        cost: cfg.cost(),
        deps: cfg.deps,
        emit_hints: cfg.emit_hints,
        target: cfg.target,
    }
}

fn finish_run(cfg: &BenchConfig, records: &[BenchmarkRecord]) -> Result<(), Box<dyn std::error::Error>> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    let records_path = cfg.out_dir.join("records.csv");
    save_records(&records_path, records)?;
    let summary_path = cfg.out_dir.join("summary.csv");
    let file = std::fs::File::create(&summary_path)?;
    write_summary_csv(std::io::BufWriter::new(file), records)?;
    let report_paths = emit_report(records, cfg.report_format, &cfg.out_dir)?;

    println!(
        "{:<34} {:>7} {:>12} {:>9} {:>12}",
        "cell", "blocks", "exec ms", "speedup", "tps"
    );
    for r in records {
        let serial = records
            .iter()
            .find(|s| s.mode == ExecMode::Serial && s.config_id == r.config_id && s.phase == r.phase);
        let speedup_text = serial
            .map(|s| format!("{:.2}", speedup(s, r)))
            .unwrap_or_else(|| "-".into());
        println!(
            "{:<34} {:>7} {:>12.3} {:>9} {:>12.0}",
            format!("{}/{}/{}", r.config_id, r.mode, r.phase),
            r.blocks.len(),
            r.mean_exec_ms(),
            speedup_text,
            r.throughput_tps(),
        );
    }
    println!("records: {}", records_path.display());
    println!("summary: {}", summary_path.display());
    println!("report:  {} files", report_paths.len());
    Ok(())
}
