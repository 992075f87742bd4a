//! A full community mining a chain: leader analyzes and dispatches, three
//! in-process followers execute shards and race the nonce, every validator
//! mode re-checks the result, and the reward ledger settles uncle credits.

use txshard::analyzer::DepsMode;
use txshard::bench::{synthesize, SynthSpec};
use txshard::engine::SyntheticCost;
use txshard::pow::Difficulty;
use txshard::protocol::LocalCommunity;
use txshard::roles::{
    create_block, mine_block_community, validate_block, LocalChain, RewardLedger, ValidatorMode,
};
use txshard::types::{Address, UncleRef};

fn main() {
    let workload = synthesize(&SynthSpec {
        txns_per_block: 60,
        block_count: 4,
        ..SynthSpec::default()
    });
    let target = Difficulty::pow2(244);
    let miner = Address::from_index(7777);
    let mut community = LocalCommunity::new(3, SyntheticCost::ZERO);
    let mut chain = LocalChain::new(workload.genesis.clone());
    let mut ledger = RewardLedger::default();

    for pending in &workload.blocks {
        let candidate = create_block(pending, &[], &chain, miner, chain.tip_number()).unwrap();
        let (sealed, post) = mine_block_community(
            candidate,
            &chain,
            &target,
            &mut community.leader,
            DepsMode::Full,
            true, // carry shard hints for Sharing validators
        )
        .unwrap();

        print!(
            "block {}: {} txns, {} hinted shards, nonce {}",
            sealed.number,
            sealed.txns.len(),
            sealed
                .shard_hints
                .as_ref()
                .map(|h| h.values().collect::<std::collections::BTreeSet<_>>().len())
                .unwrap_or(0),
            sealed.nonce,
        );
        for mode in [ValidatorMode::Serial, ValidatorMode::Default, ValidatorMode::Sharing] {
            let verdict = validate_block(
                &sealed,
                &chain,
                mode,
                Some(&mut community.leader),
                &target,
                DepsMode::Full,
                &SyntheticCost::ZERO,
            );
            print!("  {mode}:{}", if verdict.accepted() { "ok" } else { "REJECT" });
        }
        println!();

        ledger.apply_block(&sealed).unwrap();
        chain.append(sealed, post).unwrap();
    }

    // A nephew block including two uncles: the block miner earns the base
    // reward plus 1/32 per uncle; each uncle's miner earns (u+8-n)/8.
    let uncle_miner = Address::from_index(8888);
    let nephew = create_block(
        &workload.blocks[0],
        &[
            UncleRef { number: 3, miner: uncle_miner },
            UncleRef { number: 4, miner: uncle_miner },
        ],
        &chain,
        miner,
        99,
    )
    .unwrap();
    ledger.apply_block(&nephew).unwrap();

    println!("reward credits (wei):");
    for (who, credit) in &ledger.credits {
        println!("  {who}: {credit}");
    }

    println!("chain verifies end-to-end: {}", chain.verify(&SyntheticCost::ZERO));
    let errors = community.shutdown();
    println!("community shut down, {} follower errors", errors.len());
}
