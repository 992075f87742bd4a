//! Deterministic contract execution: calldata in, state transition out.
//!
//! Every supported function is a fixed rule over account balances and
//! storage, so re-execution anywhere reproduces the same post-state. Failed
//! transactions roll back completely, including their value transfer.

use txshard::abi::{by_name, encode_call, Value};
use txshard::codec::state_digest;
use txshard::engine::{
    execute_shard, execute_transaction, storage_key, storage_u128, SyntheticCost,
};
use txshard::types::{Address, Transaction, WorldState};

fn call(tx_id: u64, from: Address, to: Address, value: u128, name: &str, args: &[Value]) -> Transaction {
    let spec = by_name(name).expect("registered function");
    Transaction {
        tx_id,
        from,
        to,
        value,
        input: encode_call(spec, args),
        creates: None,
        block_number: 1,
    }
}

fn main() {
    let alice = Address::from_index(1);
    let bob = Address::from_index(2);
    let token = Address::from_index(100);
    let casino = Address::from_index(101);

    let mut genesis = WorldState::new();
    genesis.set_balance(alice, 10_000);
    genesis.set_balance(casino, 50_000);

    // Seed alice with 25 tokens by minting through `issue`.
    let txns = vec![
        call(0, alice, token, 0, "issue", &[Value::Addr(alice), Value::Uint(25)]),
        // Token transfer alice -> bob: 10 of the 25.
        call(1, alice, token, 0, "transfer", &[Value::Addr(bob), Value::Uint(10)]),
        // Overdraw attempt: 99 > 15 remaining; fails and changes nothing.
        call(2, alice, token, 0, "transfer", &[Value::Addr(bob), Value::Uint(99)]),
        // First vote counts, the repeat is rejected.
        call(3, alice, token, 0, "vote", &[Value::Uint(7)]),
        call(4, alice, token, 0, "vote", &[Value::Uint(7)]),
        // Dice roll staking 1000 coin; outcome is a pure function of
        // (block_number, tx_id), never of the wall clock.
        call(5, alice, casino, 1_000, "playerRollDice", &[Value::Uint(4)]),
    ];

    let (post, outcomes) = execute_shard(&txns, &genesis, &SyntheticCost::ZERO);
    for (tx, outcome) in txns.iter().zip(&outcomes) {
        println!(
            "tx {}: {:<10} {}",
            tx.tx_id,
            format!("{:?}", outcome.status),
            outcome.reason.as_deref().unwrap_or(""),
        );
    }

    let tokens = |state: &WorldState, who: Address| {
        storage_u128(state, &token, storage_key("token", who.as_bytes()))
    };
    println!("alice tokens: {}", tokens(&post, alice));
    println!("bob tokens:   {}", tokens(&post, bob));
    println!(
        "vote tally 7: {}",
        storage_u128(&post, &token, storage_key("tally", &7u128.to_be_bytes()))
    );
    println!(
        "alice coin {} -> {} (dice stake settled)",
        genesis.balance(&alice),
        post.balance(&alice)
    );
    println!(
        "coin conserved: {} == {}",
        genesis.total_balance(),
        post.total_balance()
    );

    // Atomicity: the failed overdraw left no partial writes. Replay without
    // it and compare digests.
    let without_overdraw: Vec<Transaction> = txns
        .iter()
        .filter(|t| t.tx_id != 2)
        .cloned()
        .collect();
    let (post2, _) = execute_shard(&without_overdraw, &genesis, &SyntheticCost::ZERO);
    println!(
        "digest with failed tx == digest without it: {}",
        state_digest(&post) == state_digest(&post2)
    );

    // Single-transaction API reports the touched addresses; the analyzer's
    // dependency estimate always covers them.
    let mut scratch = genesis.clone();
    let one = execute_transaction(&txns[0], &mut scratch, &SyntheticCost::ZERO);
    println!("issue touched: {:?}", one.touched);
}
