//! Workload synthesis and CSV round-trip: generate seeded blocks, write
//! them in the ingestable column format, read them back, compare.

use txshard::bench::{ingest_csv, synthesize, write_transactions_csv, Ratio, SynthSpec};

fn main() {
    let spec = SynthSpec {
        rho: Ratio::new(1, 4),
        txns_per_block: 120,
        block_count: 5,
        seed: 42,
        ..SynthSpec::default()
    };
    let workload = synthesize(&spec);
    println!(
        "{}: {} blocks x {} txns, {} genesis accounts",
        spec.config_id(),
        workload.blocks.len(),
        spec.txns_per_block,
        workload.genesis.non_default().count()
    );

    // Same seed, same bytes; a different seed diverges immediately.
    assert_eq!(workload, synthesize(&spec));
    assert_ne!(
        workload.blocks,
        synthesize(&SynthSpec { seed: 43, ..spec.clone() }).blocks
    );
    println!("determinism: same spec reproduces identical blocks");

    let path = std::env::temp_dir().join("synthesized_workload.csv");
    let file = std::fs::File::create(&path).unwrap();
    write_transactions_csv(
        std::io::BufWriter::new(file),
        workload.blocks.iter().flatten(),
    )
    .unwrap();
    println!("wrote {}", path.display());

    let imported = ingest_csv(&path, false).unwrap();
    println!(
        "re-ingested {} rows: {} monetary, {} contract, {} skipped, {} row errors",
        imported.report.rows,
        imported.report.monetary,
        imported.report.contract,
        imported.report.skipped_unknown,
        imported.report.row_errors.len()
    );
    println!("per function:");
    for (name, count) in &imported.report.per_selector {
        println!("  {name:<20} {count}");
    }

    let original: Vec<_> = workload.blocks.iter().flatten().cloned().collect();
    println!(
        "round-trip lossless: {}",
        imported.txns == original
    );
    std::fs::remove_file(&path).ok();
}
