//! Proof-of-work: sealing, partitioned search, and cancellation.

use std::sync::mpsc;
use std::thread;
use std::time::Instant;

use txshard::pow::{check_pow, search_nonce, seal_block, CancelFlag, Difficulty, SearchPartition};
use txshard::types::{Address, Block, Transaction};

fn candidate(seed: u64) -> Block {
    let mut block = Block::candidate(seed, [0u8; 32], Address::from_index(9), seed);
    block.txns = vec![Transaction::monetary(
        0,
        Address::from_index(1),
        Address::from_index(2),
        seed as u128,
    )];
    block
}

fn main() {
    // 2^240 target: one hash in 2^16 wins, a few ms of searching.
    let target = Difficulty::pow2(240);
    println!(
        "target 2^240, expected attempts ~{}",
        target.expected_attempts()
    );

    // Whole-space sealing.
    let mut block = candidate(1);
    let t = Instant::now();
    seal_block(&mut block, &target).unwrap();
    println!(
        "sealed with nonce {} in {:?}; verifies: {}",
        block.nonce,
        t.elapsed(),
        check_pow(&block, &target)
    );

    // Four workers, each scanning nonces congruent to its index mod 4: the
    // partition covers the space with no overlap. First hit cancels the
    // rest, exactly as the leader does across follower machines.
    let block = candidate(2);
    let cancel = CancelFlag::new();
    let (tx, rx) = mpsc::channel();
    let workers: Vec<_> = (0..4)
        .map(|i| {
            let block = block.clone();
            let cancel = cancel.clone();
            let tx = tx.clone();
            thread::spawn(move || {
                let part = SearchPartition::new(i, 4);
                let found = search_nonce(&block, &target, part, &cancel).unwrap();
                tx.send((i, found)).unwrap();
            })
        })
        .collect();
    drop(tx);

    let (winner, nonce) = loop {
        let (i, found) = rx.recv().unwrap();
        match found {
            Some(nonce) => break (i, nonce),
            // A cancelled worker reports None; keep listening.
            None => continue,
        }
    };
    cancel.cancel();
    for w in workers {
        w.join().unwrap();
    }
    let mut sealed = block;
    sealed.nonce = nonce;
    println!(
        "worker {winner} found nonce {nonce} (residue {} mod 4); verifies: {}",
        nonce % 4,
        check_pow(&sealed, &target)
    );
    println!("other workers observed cancellation and returned None");

    // Tampering after sealing invalidates the proof: the nonce commits to
    // every byte of the block, state digest and hints included.
    let mut tampered = sealed.clone();
    tampered.txns[0].value += 1;
    println!(
        "tampered block still verifies: {}",
        check_pow(&tampered, &target)
    );
}
