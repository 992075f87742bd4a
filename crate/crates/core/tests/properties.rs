//! Randomized structural invariants: codecs must round-trip, the state
//! digest must depend only on non-default account content, analysis must
//! produce a true partition that keeps dependent transactions together,
//! balancing must preserve shard integrity, and response merging must be
//! insensitive to arrival order.

use std::collections::{BTreeMap, BTreeSet};

use proptest::collection::{btree_map, vec};
use proptest::prelude::*;

use txshard::abi::{self, ParamType, Value};
use txshard::analyzer::{hints_match_partition, touched_addresses_lenient};
use txshard::codec::{canonical_encode, decode_block, state_digest};
use txshard::engine::{ExecOutcome, ExecStatus};
use txshard::protocol::{merge_state, read_frame, write_frame, Message};
use txshard::types::UncleRef;
use txshard::{
    analyze, load_balance, Account, Address, Block, DepsMode, Difficulty, SearchPartition,
    Transaction, WorldState,
};

// ------------------------------------------------------------- strategies

/// Small index pool so generated transactions collide on addresses often
/// enough to exercise shard merging.
fn arb_address() -> impl Strategy<Value = Address> {
    (0u64..24).prop_map(Address::from_index)
}

fn arb_wide_address() -> impl Strategy<Value = Address> {
    (0u64..100_000).prop_map(Address::from_index)
}

fn arb_abi_value(p: ParamType) -> BoxedStrategy<Value> {
    match p {
        ParamType::Address => arb_address().prop_map(Value::Addr).boxed(),
        ParamType::Uint => any::<u128>().prop_map(Value::Uint).boxed(),
        ParamType::Bytes => vec(any::<u8>(), 0..48).prop_map(Value::Bytes).boxed(),
        ParamType::Bytes32 => any::<[u8; 32]>().prop_map(Value::Bytes32).boxed(),
        ParamType::Str => "[ -~]{0,24}".prop_map(Value::Str).boxed(),
        ParamType::AddressArray => vec(arb_address(), 0..5).prop_map(Value::AddrArray).boxed(),
        ParamType::UintArray => vec(any::<u128>(), 0..5).prop_map(Value::UintArray).boxed(),
    }
}

/// A call to one registered function with type-correct arguments.
fn arb_call_input() -> impl Strategy<Value = Vec<u8>> {
    (0..abi::registry().len()).prop_flat_map(|i| {
        let spec = &abi::registry()[i];
        spec.params
            .iter()
            .map(|p| arb_abi_value(*p))
            .collect::<Vec<_>>()
            .prop_map(move |args| abi::encode_call(spec, &args))
    })
}

/// Monetary, well-formed contract call, or junk calldata.
fn arb_input() -> impl Strategy<Value = Vec<u8>> {
    prop_oneof![
        3 => Just(Vec::new()),
        2 => arb_call_input(),
        1 => vec(any::<u8>(), 1..24),
    ]
}

fn arb_txns(max: usize) -> impl Strategy<Value = Vec<Transaction>> {
    vec(
        (arb_address(), arb_address(), 0u128..1_000, arb_input()),
        0..max,
    )
    .prop_map(|seeds| {
        seeds
            .into_iter()
            .enumerate()
            .map(|(i, (from, to, value, input))| Transaction {
                tx_id: i as u64,
                from,
                to,
                value,
                input,
                creates: None,
                block_number: 0,
            })
            .collect()
    })
}

fn arb_account() -> impl Strategy<Value = Account> {
    (
        any::<u128>(),
        btree_map(any::<[u8; 32]>(), any::<[u8; 32]>(), 0..4),
    )
        .prop_map(|(balance, storage)| Account { balance, storage })
}

fn arb_state() -> impl Strategy<Value = WorldState> {
    btree_map(arb_wide_address(), arb_account(), 0..12).prop_map(|accounts| {
        let mut s = WorldState::new();
        s.accounts = accounts;
        s
    })
}

fn arb_block() -> impl Strategy<Value = Block> {
    (
        (
            any::<u64>(),
            any::<[u8; 32]>(),
            arb_wide_address(),
            any::<u64>(),
            arb_txns(8),
        ),
        (
            vec((any::<u64>(), arb_wide_address()), 0..3),
            any::<[u8; 32]>(),
            proptest::option::of(btree_map(any::<u64>(), any::<u32>(), 0..8)),
            any::<u64>(),
        ),
    )
        .prop_map(
            |(
                (number, prev_hash, miner, timestamp, txns),
                (uncles, state_digest, shard_hints, nonce),
            )| Block {
                number,
                prev_hash,
                miner,
                timestamp,
                txns,
                uncles: uncles
                    .into_iter()
                    .map(|(number, miner)| UncleRef { number, miner })
                    .collect(),
                state_digest,
                shard_hints,
                nonce,
            },
        )
}

// ------------------------------------------------------------------ codec

proptest! {
    #[test]
    fn block_codec_round_trips_with_nonce(block in arb_block()) {
        let enc = canonical_encode(&block, true);
        let dec = decode_block(&enc, true).expect("decode of own encoding");
        prop_assert_eq!(dec, block);
    }

    #[test]
    fn block_codec_round_trips_nonceless(block in arb_block()) {
        let enc = canonical_encode(&block, false);
        let dec = decode_block(&enc, false).expect("decode of own encoding");
        let mut expect = block.clone();
        expect.nonce = 0;
        prop_assert_eq!(dec, expect);
        // The nonce-less form is what mining hashes: it must not see the nonce.
        let mut renonced = block;
        renonced.nonce = renonced.nonce.wrapping_add(1);
        prop_assert_eq!(enc, canonical_encode(&renonced, false));
    }

    #[test]
    fn truncated_block_never_decodes(block in arb_block(), cut in 0usize..200) {
        let enc = canonical_encode(&block, true);
        prop_assume!(cut < enc.len());
        prop_assert!(decode_block(&enc[..cut], true).is_err());
    }

    #[test]
    fn abi_codec_round_trips(idx in 0..abi::registry().len()) {
        let spec = &abi::registry()[idx];
        // One nested run per spec keeps the arg strategies type-correct.
        proptest!(|(args in spec.params.iter().map(|p| arb_abi_value(*p)).collect::<Vec<_>>())| {
            let input = abi::encode_call(spec, &args);
            let (got_spec, got_args) = abi::decode_call(&input).expect("decode of own encoding");
            prop_assert_eq!(got_spec.selector, spec.selector);
            prop_assert_eq!(got_args, args);
        });
    }
}

// ----------------------------------------------------------------- digest

proptest! {
    #[test]
    fn digest_ignores_default_accounts(
        state in arb_state(),
        extras in vec(arb_wide_address(), 0..6),
    ) {
        let before = state_digest(&state);
        let mut padded = state.clone();
        for addr in extras {
            padded.accounts.entry(addr).or_insert_with(Account::default);
        }
        prop_assert_eq!(state_digest(&padded), before);
    }

    #[test]
    fn digest_sees_every_balance_change(state in arb_state()) {
        let before = state_digest(&state);
        for addr in state.accounts.keys().copied().collect::<Vec<_>>() {
            if state.accounts[&addr].balance == 0 && state.accounts[&addr].storage.is_empty() {
                continue; // explicit default: invisible by design
            }
            let mut changed = state.clone();
            changed.accounts.get_mut(&addr).unwrap().balance =
                changed.accounts[&addr].balance.wrapping_add(1);
            prop_assert_ne!(state_digest(&changed), before, "balance change at {:?} invisible", addr);
        }
    }

    #[test]
    fn digest_sees_every_storage_change(state in arb_state()) {
        let before = state_digest(&state);
        for addr in state.accounts.keys().copied().collect::<Vec<_>>() {
            let keys: Vec<[u8; 32]> = state.accounts[&addr].storage.keys().copied().collect();
            for key in keys {
                let mut changed = state.clone();
                let slot = changed
                    .accounts
                    .get_mut(&addr)
                    .unwrap()
                    .storage
                    .get_mut(&key)
                    .unwrap();
                slot[0] ^= 1;
                prop_assert_ne!(state_digest(&changed), before);
            }
        }
    }
}

// --------------------------------------------------------------- analysis

proptest! {
    #[test]
    fn analysis_is_a_partition(txns in arb_txns(40), full in any::<bool>()) {
        let mode = if full { DepsMode::Full } else { DepsMode::FromToOnly };
        let (shards, shard_of) = analyze(&txns, mode);

        // Exact disjoint cover of the block's tx ids.
        let mut seen = BTreeSet::new();
        for shard in &shards {
            for id in &shard.tx_ids {
                prop_assert!(seen.insert(*id), "tx {} in two shards", id);
            }
        }
        let all: BTreeSet<u64> = txns.iter().map(|t| t.tx_id).collect();
        prop_assert_eq!(&seen, &all);
        prop_assert_eq!(shard_of.len(), txns.len());

        // shard_of is exactly the shards, inverted.
        for shard in &shards {
            for id in &shard.tx_ids {
                prop_assert_eq!(shard_of[id], shard.shard_id);
            }
        }

        // Dense ids ordered largest-first, ties by first arrival.
        for (i, shard) in shards.iter().enumerate() {
            prop_assert_eq!(shard.shard_id as usize, i);
            prop_assert!(!shard.tx_ids.is_empty());
            prop_assert!(shard.tx_ids.windows(2).all(|w| w[0] < w[1]));
            if i > 0 {
                let prev = &shards[i - 1];
                let key = |s: &txshard::Shard| (std::cmp::Reverse(s.tx_ids.len()), s.tx_ids[0]);
                prop_assert!(key(prev) <= key(shard), "shard order violated at {}", i);
            }
        }
    }

    #[test]
    fn dependent_txns_share_a_shard(txns in arb_txns(40), full in any::<bool>()) {
        let mode = if full { DepsMode::Full } else { DepsMode::FromToOnly };
        let (_, shard_of) = analyze(&txns, mode);
        let touched: Vec<BTreeSet<Address>> = txns
            .iter()
            .map(|t| touched_addresses_lenient(t, mode).into_iter().collect())
            .collect();
        for i in 0..txns.len() {
            for j in i + 1..txns.len() {
                if !touched[i].is_disjoint(&touched[j]) {
                    prop_assert_eq!(
                        shard_of[&txns[i].tx_id],
                        shard_of[&txns[j].tx_id],
                        "txns {} and {} share an address but not a shard",
                        i,
                        j
                    );
                }
            }
        }
    }

    #[test]
    fn hint_matching_is_relabel_invariant(txns in arb_txns(30), relabel_seed in any::<u32>()) {
        let (_, shard_of) = analyze(&txns, DepsMode::Full);
        prop_assume!(!shard_of.is_empty());

        // Any injective relabeling is the same partition.
        let relabeled: BTreeMap<u64, u32> = shard_of
            .iter()
            .map(|(tx, s)| (*tx, s.wrapping_mul(2).wrapping_add(relabel_seed)))
            .collect();
        prop_assert!(hints_match_partition(&relabeled, &shard_of));

        // Merging two groups is not.
        let ids: BTreeSet<u32> = shard_of.values().copied().collect();
        if ids.len() >= 2 {
            let mut it = ids.iter();
            let (a, b) = (*it.next().unwrap(), *it.next().unwrap());
            let merged: BTreeMap<u64, u32> = shard_of
                .iter()
                .map(|(tx, s)| (*tx, if *s == b { a } else { *s }))
                .collect();
            prop_assert!(!hints_match_partition(&merged, &shard_of));
        }

        // Splitting one transaction out of a multi-transaction group is not.
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for s in shard_of.values() {
            *counts.entry(*s).or_default() += 1;
        }
        if let Some((&big, _)) = counts.iter().find(|(_, n)| **n >= 2) {
            let fresh = ids.iter().max().unwrap() + 1;
            let victim = *shard_of.iter().find(|(_, s)| **s == big).unwrap().0;
            let mut split = shard_of.clone();
            split.insert(victim, fresh);
            prop_assert!(!hints_match_partition(&split, &shard_of));
        }
    }

    #[test]
    fn balancing_preserves_shard_integrity(
        txns in arb_txns(40),
        follower_count in 1u32..6,
    ) {
        let followers: Vec<u32> = (0..follower_count).collect();
        let (shards, _) = analyze(&txns, DepsMode::Full);
        let assignment = load_balance(&shards, &followers, &txns);

        let keys: Vec<u32> = assignment.per_follower.keys().copied().collect();
        prop_assert_eq!(keys, followers);

        // Every transaction lands exactly once, and whole shards stay together.
        let mut tx_to_follower: BTreeMap<u64, u32> = BTreeMap::new();
        for (fid, assigned) in &assignment.per_follower {
            for tx in assigned {
                prop_assert!(tx_to_follower.insert(tx.tx_id, *fid).is_none());
            }
        }
        prop_assert_eq!(tx_to_follower.len(), txns.len());
        for shard in &shards {
            let homes: BTreeSet<u32> =
                shard.tx_ids.iter().map(|id| tx_to_follower[id]).collect();
            prop_assert_eq!(homes.len(), 1, "shard {} split across followers", shard.shard_id);
        }

        // The assignment's own shard map is the analysis partition.
        prop_assert!(hints_match_partition(&assignment.shard_of, &analyze(&txns, DepsMode::Full).1));
    }
}

// ------------------------------------------------------------------ merge

proptest! {
    #[test]
    fn merge_is_permutation_invariant(
        base in arb_state(),
        updates in btree_map(arb_wide_address(), arb_account(), 0..10),
    ) {
        // Split disjoint updates into response slices of alternating size.
        let pairs: Vec<(Address, Account)> = updates.into_iter().collect();
        let (left, right): (Vec<_>, Vec<_>) =
            pairs.iter().cloned().enumerate().partition(|(i, _)| i % 2 == 0);
        let left: Vec<(Address, Account)> = left.into_iter().map(|(_, p)| p).collect();
        let right: Vec<(Address, Account)> = right.into_iter().map(|(_, p)| p).collect();

        let fwd = merge_state(&base, [left.as_slice(), right.as_slice()].into_iter()).unwrap();
        let rev = merge_state(&base, [right.as_slice(), left.as_slice()].into_iter()).unwrap();
        prop_assert_eq!(&fwd.accounts, &rev.accounts);

        // Base accounts outside the responses are untouched; responded
        // accounts carry the response balance and the union of storage.
        let responded: BTreeSet<Address> =
            left.iter().chain(&right).map(|(a, _)| *a).collect();
        for (addr, acct) in &base.accounts {
            if !responded.contains(addr) {
                prop_assert_eq!(fwd.accounts.get(addr), Some(acct));
            }
        }
        for (addr, resp) in left.iter().chain(&right) {
            let mut want = base.accounts.get(addr).cloned().unwrap_or_default();
            want.balance = resp.balance;
            for (k, v) in &resp.storage {
                want.storage.insert(*k, *v);
            }
            match fwd.accounts.get(addr) {
                Some(got) => prop_assert_eq!(got, &want),
                None => prop_assert!(want.is_default(), "non-default account dropped"),
            }
        }
    }
}

// ------------------------------------------------------------------- wire

fn arb_outcome() -> impl Strategy<Value = ExecOutcome> {
    (
        any::<bool>(),
        proptest::option::of("[ -~]{0,24}"),
        vec(arb_wide_address(), 0..4),
    )
        .prop_map(|(ok, reason, touched)| ExecOutcome {
            status: if ok { ExecStatus::Applied } else { ExecStatus::Failed },
            reason,
            touched: touched.into_iter().collect(),
        })
}

fn arb_slice() -> impl Strategy<Value = Vec<(Address, Account)>> {
    btree_map(arb_wide_address(), arb_account(), 0..6)
        .prop_map(|m| m.into_iter().collect())
}

fn arb_message() -> impl Strategy<Value = Message> {
    prop_oneof![
        (any::<u64>(), arb_txns(6), arb_slice()).prop_map(|(block_number, txns, state_slice)| {
            Message::ExecuteShardsReq { block_number, txns, state_slice }
        }),
        (any::<u64>(), arb_slice(), vec(arb_outcome(), 0..6)).prop_map(
            |(block_number, state_slice, outcomes)| Message::ExecuteShardsResp {
                block_number,
                state_slice,
                outcomes,
            }
        ),
        (arb_block(), 0u32..=255, any::<u64>(), 1u64..8).prop_map(
            |(mut block, bits, start, stride)| {
                block.nonce = 0; // candidates travel nonce-less
                Message::MineReq {
                    block,
                    target: Difficulty::pow2(bits),
                    part: SearchPartition::new(start % stride, stride),
                }
            }
        ),
        (any::<u64>(), any::<u64>()).prop_map(|(block_number, nonce)| Message::MineFound {
            block_number,
            nonce
        }),
        any::<u64>().prop_map(|block_number| Message::MineCancel { block_number }),
        any::<u32>().prop_map(|follower_id| Message::Ping { follower_id }),
        any::<u32>().prop_map(|follower_id| Message::Pong { follower_id }),
    ]
}

proptest! {
    #[test]
    fn message_codec_round_trips(msg in arb_message()) {
        let payload = msg.encode();
        let dec = Message::decode(msg.kind(), &payload).expect("decode of own encoding");
        prop_assert_eq!(dec, msg);
    }

    #[test]
    fn frames_round_trip(
        kind in 1u8..=7,
        request_id in any::<u64>(),
        payload in vec(any::<u8>(), 0..512),
    ) {
        let mut wire = Vec::new();
        write_frame(&mut wire, kind, request_id, &payload).unwrap();
        let env = read_frame(&mut wire.as_slice()).unwrap();
        prop_assert_eq!(env.kind, kind);
        prop_assert_eq!(env.request_id, request_id);
        prop_assert_eq!(env.payload, payload);
    }
}
