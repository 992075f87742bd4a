//! Benchmark harness: workload synthesis and CSV ingest, the measurement
//! runner, configuration, and report emission.

pub mod config;
pub mod ingest;
pub mod report;
pub mod runner;
pub mod workload;

pub use config::{load_config, parse_config, BenchConfig, ConfigError, Role};
pub use ingest::{ingest_csv, replay_genesis, write_transactions_csv, IngestOutcome, IngestReport};
pub use report::{emit_report, write_summary_csv, ReportFormat};
pub use runner::{
    load_records, run_benchmark, run_benchmark_with_leader, save_records, speedup, BenchError,
    BenchmarkRecord, BlockMeasure, ExecMode, Phase, RunPlan,
};
pub use workload::{synthesize, Ratio, SynthSpec, Workload};
