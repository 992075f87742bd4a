//! Dependency analysis and load balancing on a hand-built block.
//!
//! Transactions sharing an address (directly or transitively) land in the
//! same shard; shards execute independently, so the shard list is exactly
//! the parallelism available in the block.

use txshard::analyzer::{analyze, load_balance, shard_stats, DepsMode};
use txshard::bench::{synthesize, SynthSpec};
use txshard::types::{Address, Transaction};

fn main() {
    let a = Address::from_index;

    // Nine transfers forming three dependency chains:
    //   {0,4,6} share addresses through 1-2-3,
    //   {1,2,8} through 10-11-12,
    //   {3,5,7} through 20-21-22.
    let edges: [(u64, u64); 9] = [
        (1, 2),
        (10, 11),
        (11, 12),
        (20, 21),
        (2, 3),
        (21, 22),
        (3, 1),
        (22, 20),
        (12, 10),
    ];
    let txns: Vec<Transaction> = edges
        .iter()
        .enumerate()
        .map(|(i, &(f, t))| Transaction::monetary(i as u64, a(f), a(t), 1))
        .collect();

    let (shards, shard_of) = analyze(&txns, DepsMode::Full);
    println!("block of {} txns -> {} shards", txns.len(), shards.len());
    for shard in &shards {
        println!("  shard {}: txns {:?}", shard.shard_id, shard.tx_ids);
    }
    println!("hint map (tx -> shard): {shard_of:?}");

    // Balance the shards onto two followers: whole shards only, biggest
    // first onto the least-loaded follower.
    let assignment = load_balance(&shards, &[0, 1], &txns);
    for (follower, txns) in &assignment.per_follower {
        let ids: Vec<u64> = txns.iter().map(|t| t.tx_id).collect();
        println!(
            "follower {follower}: {} txns {:?} (shards {:?})",
            txns.len(),
            ids,
            assignment.shards_of_follower[follower]
        );
    }
    let stats = shard_stats(&shards, &assignment);
    println!(
        "stats: {} shards, largest {}, per-follower {:?}",
        stats.shard_count, stats.max_shard_size, stats.per_follower_txns
    );

    // On synthesized workloads the shard count grows with block size; the
    // giant component stays bounded because address reuse is Zipf-flat.
    println!("\nsynthetic workload shard trend (defaults, 10 blocks each):");
    for txns_per_block in [100u32, 200, 300, 400, 500] {
        let spec = SynthSpec {
            txns_per_block,
            block_count: 10,
            ..SynthSpec::default()
        };
        let workload = synthesize(&spec);
        let mut shards_total = 0usize;
        let mut largest = 0usize;
        for block in &workload.blocks {
            let (shards, _) = analyze(block, DepsMode::Full);
            shards_total += shards.len();
            largest = largest.max(shards[0].tx_ids.len());
        }
        println!(
            "  {txns_per_block:>3} txns/block: mean {:>5.1} shards, largest shard {largest}",
            shards_total as f64 / workload.blocks.len() as f64,
        );
    }
}
