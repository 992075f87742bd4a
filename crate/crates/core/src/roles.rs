//! End-to-end miner and validator pipelines over a local linear chain,
//! plus uncle/nephew reward accounting.
//!
//! A miner turns pending transactions into a candidate block, executes them
//! (serially or across the community), stamps the post-state digest, and
//! seals the block with a nonce. A validator re-executes the block under one
//! of three modes and accepts only if its recomputed digest matches the
//! block's and the proof-of-work verifies. Because the state digest (and any
//! shard hints) sit under the block hash, tampering with the claimed results
//! also invalidates the PoW.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::analyzer::{analyze, hints_match_partition, load_balance, DepsMode, Shard};
use crate::codec::{block_hash, state_digest};
use crate::engine::{execute_shard, SyntheticCost};
use crate::pow::{check_pow, seal_block, Difficulty, SearchError};
use crate::protocol::{DispatchError, Leader};
use crate::types::{
    validate_block as validate_structure, Address, Block, StructuralError, Transaction,
    UncleRef, WorldState, MAX_UNCLES,
};

/// 3 Ether in Wei: the default base mining reward.
pub const DEFAULT_BASE_REWARD: u128 = 3_000_000_000_000_000_000;

/// Inclusion window: an uncle must be 1..=7 blocks older than its nephew.
pub const MAX_UNCLE_GAP: u64 = 7;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RewardError {
    #[error("uncle {uncle} is not older than nephew {nephew}")]
    NotOlder { uncle: u64, nephew: u64 },
    #[error("uncle {uncle} is stale for nephew {nephew}: gap {} >= 8", nephew - uncle)]
    Stale { uncle: u64, nephew: u64 },
}

/// Off-chain accounting of mining incentives in integer Wei. Divisions
/// truncate toward zero; with the default base reward (3e18) every division
/// by 8 and 32 is exact anyway.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RewardLedger {
    pub credits: BTreeMap<Address, u128>,
    pub base_reward: u128,
}

impl Default for RewardLedger {
    fn default() -> Self {
        RewardLedger::new(DEFAULT_BASE_REWARD)
    }
}

impl RewardLedger {
    pub fn new(base_reward: u128) -> Self {
        RewardLedger {
            credits: BTreeMap::new(),
            base_reward,
        }
    }

    /// Extra credit the including (nephew) miner earns per uncle.
    pub fn nephew_credit(&self) -> u128 {
        self.base_reward / 32
    }

    /// Credit the uncle's own miner earns: (u + 8 − n) · base / 8, defined
    /// only for gaps 1..=7.
    pub fn uncle_credit(&self, uncle: u64, nephew: u64) -> Result<u128, RewardError> {
        if nephew <= uncle {
            return Err(RewardError::NotOlder { uncle, nephew });
        }
        if nephew - uncle > MAX_UNCLE_GAP {
            return Err(RewardError::Stale { uncle, nephew });
        }
        // u128 before the add: uncle + 8 can overflow u64 at the top of the
        // block-number range.
        Ok((uncle as u128 + 8 - nephew as u128) * self.base_reward / 8)
    }

    fn credit(&mut self, who: Address, amount: u128) {
        *self.credits.entry(who).or_insert(0) += amount;
    }

    /// Credit a freshly appended block: base reward plus nephew credit per
    /// included uncle to the block's miner, and the uncle reward to each
    /// uncle's miner.
    pub fn apply_block(&mut self, block: &Block) -> Result<(), RewardError> {
        let mut miner_total = self.base_reward;
        let mut uncle_credits = Vec::with_capacity(block.uncles.len());
        for u in &block.uncles {
            uncle_credits.push((u.miner, self.uncle_credit(u.number, block.number)?));
            miner_total += self.nephew_credit();
        }
        self.credit(block.miner, miner_total);
        for (who, amount) in uncle_credits {
            self.credit(who, amount);
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("block number {got}, expected {expected}")]
    BadNumber { got: u64, expected: u64 },
    #[error("prev_hash does not match the chain tip")]
    BadLink,
    #[error("supplied post-state does not match the block's state digest")]
    BadState,
}

/// Append-only linear chain with the materialized tip state.
pub struct LocalChain {
    pub blocks: Vec<Block>,
    pub tip_state: WorldState,
    tip_hash: [u8; 32],
    genesis_state: WorldState,
}

impl LocalChain {
    pub fn new(genesis_state: WorldState) -> Self {
        LocalChain {
            blocks: Vec::new(),
            tip_state: genesis_state.clone(),
            tip_hash: [0u8; 32],
            genesis_state,
        }
    }

    /// Number of the tip block; 0 before any block is appended.
    pub fn tip_number(&self) -> u64 {
        self.blocks.last().map_or(0, |b| b.number)
    }

    pub fn tip_hash(&self) -> [u8; 32] {
        self.tip_hash
    }

    /// Append a validated block together with its re-executed post-state.
    pub fn append(&mut self, block: Block, post_state: WorldState) -> Result<(), ChainError> {
        let expected = self.tip_number() + 1;
        if block.number != expected {
            return Err(ChainError::BadNumber {
                got: block.number,
                expected,
            });
        }
        if block.prev_hash != self.tip_hash {
            return Err(ChainError::BadLink);
        }
        if state_digest(&post_state) != block.state_digest {
            return Err(ChainError::BadState);
        }
        self.tip_hash = block_hash(&block);
        self.tip_state = post_state;
        self.blocks.push(block);
        Ok(())
    }

    /// Re-derive every link and digest from genesis; true iff the whole
    /// chain is self-consistent.
    pub fn verify(&self, cost: &SyntheticCost) -> bool {
        let mut state = self.genesis_state.clone();
        let mut prev = [0u8; 32];
        for block in &self.blocks {
            if block.prev_hash != prev {
                return false;
            }
            let (post, _) = execute_shard(&block.txns, &state, cost);
            if state_digest(&post) != block.state_digest {
                return false;
            }
            state = post;
            prev = block_hash(block);
        }
        prev == self.tip_hash && state_digest(&state) == state_digest(&self.tip_state)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BlockCreateError {
    #[error("{0} uncles exceeds the limit of {MAX_UNCLES}")]
    TooManyUncles(usize),
    #[error(transparent)]
    BadUncle(#[from] RewardError),
}

/// Build a candidate block: next number, tip link, transactions renumbered
/// densely from 0 in arrival order and stamped with the new block number.
/// State digest, hints and nonce stay unset until mining.
pub fn create_block(
    pending: &[Transaction],
    uncles: &[UncleRef],
    chain: &LocalChain,
    miner: Address,
    timestamp: u64,
) -> Result<Block, BlockCreateError> {
    let number = chain.tip_number() + 1;
    if uncles.len() > MAX_UNCLES {
        return Err(BlockCreateError::TooManyUncles(uncles.len()));
    }
    let ledger = RewardLedger::default();
    for u in uncles {
        ledger.uncle_credit(u.number, number)?;
    }
    let mut block = Block::candidate(number, chain.tip_hash(), miner, timestamp);
    block.uncles = uncles.to_vec();
    block.txns = pending
        .iter()
        .enumerate()
        .map(|(i, tx)| {
            let mut tx = tx.clone();
            tx.tx_id = i as u64;
            tx.block_number = number;
            tx
        })
        .collect();
    Ok(block)
}

#[derive(Debug, Error)]
pub enum MineError {
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
    #[error(transparent)]
    Search(#[from] SearchError),
}

/// Serial baseline: execute in order on this node, stamp the digest, brute
/// force the nonce over the whole space. Returns the sealed block and its
/// post-state.
pub fn mine_block_serial(
    mut candidate: Block,
    chain: &LocalChain,
    target: &Difficulty,
    cost: &SyntheticCost,
) -> Result<(Block, WorldState), MineError> {
    let (post, _) = execute_shard(&candidate.txns, &chain.tip_state, cost);
    candidate.state_digest = state_digest(&post);
    seal_block(&mut candidate, target)?;
    Ok((candidate, post))
}

/// Community pipeline: analyze into shards, balance onto followers, execute
/// remotely, stamp the digest (and shard hints when `emit_hints`), then
/// race the nonce search across the same followers.
pub fn mine_block_community(
    mut candidate: Block,
    chain: &LocalChain,
    target: &Difficulty,
    leader: &mut Leader,
    deps: DepsMode,
    emit_hints: bool,
) -> Result<(Block, WorldState), MineError> {
    let (shards, shard_of) = analyze(&candidate.txns, deps);
    let followers = {
        let ids = leader.follower_ids();
        if ids.is_empty() {
            vec![0]
        } else {
            ids
        }
    };
    let assignment = load_balance(&shards, &followers, &candidate.txns);
    let (post, _) =
        leader.dispatch_execution(&assignment, &chain.tip_state, deps, candidate.number)?;
    candidate.state_digest = state_digest(&post);
    if emit_hints {
        candidate.shard_hints = Some(shard_of);
    }
    candidate.nonce = leader.dispatch_mining(&candidate, target)?;
    Ok((candidate, post))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValidatorMode {
    /// Re-execute the whole block in order on this node.
    Serial,
    /// Recompute shards by static analysis, then re-execute in parallel.
    Default,
    /// Reuse the block's shard hints (after checking them); falls back to
    /// Default when a block carries no hints.
    Sharing,
}

impl ValidatorMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "serial" => Some(ValidatorMode::Serial),
            "default" => Some(ValidatorMode::Default),
            "sharing" => Some(ValidatorMode::Sharing),
            _ => None,
        }
    }
}

impl std::fmt::Display for ValidatorMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ValidatorMode::Serial => "serial",
            ValidatorMode::Default => "default",
            ValidatorMode::Sharing => "sharing",
        })
    }
}

#[derive(Debug, PartialEq, Eq)]
pub enum RejectReason {
    Structural(StructuralError),
    /// Number or prev_hash does not extend the local tip.
    ChainLink,
    BadUncles,
    /// Shard hints do not match the recomputed dependency partition.
    BadHints,
    /// Re-executed state digest differs from the block's claim.
    StateMismatch,
    /// Block hash does not meet the target.
    BadPow,
}

/// Validation verdict; Accept carries the re-executed post-state so the
/// caller can append without executing again.
#[derive(Debug)]
pub enum Validation {
    Accept(WorldState),
    Reject(RejectReason),
}

impl Validation {
    pub fn accepted(&self) -> bool {
        matches!(self, Validation::Accept(_))
    }

    pub fn reason(&self) -> Option<&RejectReason> {
        match self {
            Validation::Accept(_) => None,
            Validation::Reject(r) => Some(r),
        }
    }
}

/// Rebuild shards from a hint map: group tx_ids by hinted shard id, order
/// groups by (size desc, min tx_id), renumber densely.
fn shards_from_hints(hints: &BTreeMap<u64, u32>) -> Vec<Shard> {
    let mut groups: BTreeMap<u32, Vec<u64>> = BTreeMap::new();
    for (tx, sid) in hints {
        groups.entry(*sid).or_default().push(*tx);
    }
    let mut list: Vec<Vec<u64>> = groups.into_values().collect();
    list.sort_by_key(|g| (std::cmp::Reverse(g.len()), g[0]));
    list.into_iter()
        .enumerate()
        .map(|(i, tx_ids)| Shard {
            shard_id: i as u32,
            tx_ids,
        })
        .collect()
}

/// Validate `block` against the chain tip. Checks run cheapest-first:
/// structure, chain link, uncle windows, hint partition (Sharing), then
/// re-execution, digest comparison, and proof-of-work. A community dispatch
/// failure falls back to serial re-execution rather than rejecting.
pub fn validate_block(
    block: &Block,
    chain: &LocalChain,
    mode: ValidatorMode,
    leader: Option<&mut Leader>,
    target: &Difficulty,
    deps: DepsMode,
    cost: &SyntheticCost,
) -> Validation {
    if let Err(e) = validate_structure(block) {
        return Validation::Reject(RejectReason::Structural(e));
    }
    if block.number != chain.tip_number() + 1 || block.prev_hash != chain.tip_hash() {
        return Validation::Reject(RejectReason::ChainLink);
    }
    let ledger = RewardLedger::default();
    for u in &block.uncles {
        if ledger.uncle_credit(u.number, block.number).is_err() {
            return Validation::Reject(RejectReason::BadUncles);
        }
    }

    // Pick the shard list to re-execute with. Sharing verifies the carried
    // hints against a fresh analysis before trusting their grouping; a miner
    // that splits dependent transactions across hinted shards is caught here
    // even though its block hashes fine.
    let shards: Vec<Shard> = match mode {
        ValidatorMode::Serial => Vec::new(),
        ValidatorMode::Default => analyze(&block.txns, deps).0,
        ValidatorMode::Sharing => match &block.shard_hints {
            None => analyze(&block.txns, deps).0,
            Some(hints) => {
                let (_, shard_of) = analyze(&block.txns, deps);
                if !hints_match_partition(hints, &shard_of) {
                    return Validation::Reject(RejectReason::BadHints);
                }
                shards_from_hints(hints)
            }
        },
    };

    let post = match mode {
        ValidatorMode::Serial => execute_shard(&block.txns, &chain.tip_state, cost).0,
        _ => {
            let community = leader.and_then(|l| {
                let ids = l.follower_ids();
                if ids.is_empty() {
                    None
                } else {
                    Some((l, ids))
                }
            });
            match community {
                None => execute_shard(&block.txns, &chain.tip_state, cost).0,
                Some((l, ids)) => {
                    let assignment = load_balance(&shards, &ids, &block.txns);
                    match l.dispatch_execution(
                        &assignment,
                        &chain.tip_state,
                        deps,
                        block.number,
                    ) {
                        Ok((post, _)) => post,
                        // Availability over speed: a flaky community must
                        // not reject an honest block.
                        Err(_) => execute_shard(&block.txns, &chain.tip_state, cost).0,
                    }
                }
            }
        }
    };

    if state_digest(&post) != block.state_digest {
        return Validation::Reject(RejectReason::StateMismatch);
    }
    if !check_pow(block, target) {
        return Validation::Reject(RejectReason::BadPow);
    }
    Validation::Accept(post)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::SyntheticCost;
    use crate::protocol::LocalCommunity;

    fn a(n: u64) -> Address {
        Address::from_index(n)
    }

    fn funded_state(n: u64) -> WorldState {
        let mut s = WorldState::new();
        for i in 0..n {
            s.set_balance(a(i), 1_000_000);
        }
        s
    }

    fn pending(n: u64) -> Vec<Transaction> {
        (0..n)
            .map(|i| Transaction::monetary(99, a(i % 7), a((i + 1) % 11), 10 + i as u128))
            .collect()
    }

    const EASY: fn() -> Difficulty = || Difficulty::pow2(248);

    #[test]
    fn reward_example_checks_out_exactly() {
        let ledger = RewardLedger::default();
        // Uncle at 100 included by nephew 102, base 3 Ether.
        assert_eq!(ledger.uncle_credit(100, 102).unwrap(), 2_250_000_000_000_000_000);
        assert_eq!(ledger.nephew_credit(), 93_750_000_000_000_000);
    }

    #[test]
    fn uncle_window_is_one_through_seven() {
        let ledger = RewardLedger::default();
        for gap in 1..=7u64 {
            let credit = ledger.uncle_credit(100, 100 + gap).unwrap();
            assert_eq!(credit, (8 - gap) as u128 * DEFAULT_BASE_REWARD / 8);
        }
        assert_eq!(
            ledger.uncle_credit(100, 108),
            Err(RewardError::Stale { uncle: 100, nephew: 108 })
        );
        assert_eq!(
            ledger.uncle_credit(100, 100),
            Err(RewardError::NotOlder { uncle: 100, nephew: 100 })
        );
        assert!(ledger.uncle_credit(100, 99).is_err());
    }

    #[test]
    fn apply_block_credits_miner_and_uncles() {
        let mut ledger = RewardLedger::default();
        let mut block = Block::candidate(102, [0u8; 32], a(1), 0);
        block.uncles = vec![
            UncleRef { number: 100, miner: a(2) },
            UncleRef { number: 101, miner: a(3) },
        ];
        ledger.apply_block(&block).unwrap();
        assert_eq!(
            ledger.credits[&a(1)],
            DEFAULT_BASE_REWARD + 2 * (DEFAULT_BASE_REWARD / 32)
        );
        assert_eq!(ledger.credits[&a(2)], 6 * DEFAULT_BASE_REWARD / 8);
        assert_eq!(ledger.credits[&a(3)], 7 * DEFAULT_BASE_REWARD / 8);
    }

    #[test]
    fn create_block_renumbers_and_stamps() {
        let chain = LocalChain::new(funded_state(10));
        let block = create_block(&pending(5), &[], &chain, a(42), 7).unwrap();
        assert_eq!(block.number, 1);
        assert_eq!(block.prev_hash, [0u8; 32]);
        assert!(block.uncles.is_empty());
        for (i, tx) in block.txns.iter().enumerate() {
            assert_eq!(tx.tx_id, i as u64);
            assert_eq!(tx.block_number, 1);
        }
    }

    #[test]
    fn create_block_rejects_bad_uncles() {
        let mut chain = LocalChain::new(funded_state(10));
        // Advance the chain so uncle numbers exist.
        for _ in 0..9 {
            let c = create_block(&pending(1), &[], &chain, a(1), 0).unwrap();
            let (sealed, post) =
                mine_block_serial(c, &chain, &EASY(), &SyntheticCost::ZERO).unwrap();
            chain.append(sealed, post).unwrap();
        }
        let three = vec![
            UncleRef { number: 9, miner: a(2) };
            3
        ];
        assert_eq!(
            create_block(&pending(1), &three, &chain, a(1), 0),
            Err(BlockCreateError::TooManyUncles(3))
        );
        let stale = vec![UncleRef { number: 2, miner: a(2) }]; // nephew 10, gap 8
        assert!(matches!(
            create_block(&pending(1), &stale, &chain, a(1), 0),
            Err(BlockCreateError::BadUncle(RewardError::Stale { .. }))
        ));
        let fresh = vec![UncleRef { number: 3, miner: a(2) }]; // gap 7
        assert!(create_block(&pending(1), &fresh, &chain, a(1), 0).is_ok());
    }

    #[test]
    fn serial_mining_round_trips_through_every_validator_mode() {
        let mut chain = LocalChain::new(funded_state(10));
        let candidate = create_block(&pending(6), &[], &chain, a(42), 5).unwrap();
        let (sealed, post) =
            mine_block_serial(candidate, &chain, &EASY(), &SyntheticCost::ZERO).unwrap();
        assert!(check_pow(&sealed, &EASY()));
        for mode in [ValidatorMode::Serial, ValidatorMode::Default, ValidatorMode::Sharing] {
            let v = validate_block(
                &sealed,
                &chain,
                mode,
                None,
                &EASY(),
                DepsMode::Full,
                &SyntheticCost::ZERO,
            );
            assert!(v.accepted(), "mode {mode}: {:?}", v.reason());
        }
        chain.append(sealed, post).unwrap();
        assert!(chain.verify(&SyntheticCost::ZERO));
    }

    #[test]
    fn identical_candidates_mine_identically() {
        let chain = LocalChain::new(funded_state(10));
        let candidate = create_block(&pending(4), &[], &chain, a(42), 5).unwrap();
        let (s1, _) =
            mine_block_serial(candidate.clone(), &chain, &EASY(), &SyntheticCost::ZERO)
                .unwrap();
        let (s2, _) =
            mine_block_serial(candidate, &chain, &EASY(), &SyntheticCost::ZERO).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn community_mining_matches_serial_digest_and_validates() {
        let mut chain = LocalChain::new(funded_state(12));
        let mut community = LocalCommunity::new(3, SyntheticCost::ZERO);
        for round in 0..3 {
            let candidate =
                create_block(&pending(8 + round), &[], &chain, a(42), round).unwrap();
            let (serial_sealed, _) = mine_block_serial(
                candidate.clone(),
                &chain,
                &EASY(),
                &SyntheticCost::ZERO,
            )
            .unwrap();
            let (sealed, post) = mine_block_community(
                candidate,
                &chain,
                &EASY(),
                &mut community.leader,
                DepsMode::Full,
                true,
            )
            .unwrap();
            assert_eq!(sealed.state_digest, serial_sealed.state_digest);
            let hints = sealed.shard_hints.as_ref().unwrap();
            assert_eq!(hints.len(), sealed.txns.len());

            for mode in [ValidatorMode::Serial, ValidatorMode::Default, ValidatorMode::Sharing] {
                let v = validate_block(
                    &sealed,
                    &chain,
                    mode,
                    Some(&mut community.leader),
                    &EASY(),
                    DepsMode::Full,
                    &SyntheticCost::ZERO,
                );
                assert!(v.accepted(), "round {round} mode {mode}: {:?}", v.reason());
            }
            chain.append(sealed, post).unwrap();
        }
        assert!(chain.verify(&SyntheticCost::ZERO));
    }

    #[test]
    fn tampered_blocks_are_rejected() {
        let chain = LocalChain::new(funded_state(10));
        let candidate = create_block(&pending(5), &[], &chain, a(42), 5).unwrap();
        let (sealed, _) =
            mine_block_serial(candidate, &chain, &EASY(), &SyntheticCost::ZERO).unwrap();

        let check = |b: &Block| {
            validate_block(
                b,
                &chain,
                ValidatorMode::Serial,
                None,
                &EASY(),
                DepsMode::Full,
                &SyntheticCost::ZERO,
            )
        };

        let mut digest_flip = sealed.clone();
        digest_flip.state_digest[0] ^= 1;
        assert!(!check(&digest_flip).accepted());

        let mut nonce_flip = sealed.clone();
        nonce_flip.nonce ^= 1;
        assert_eq!(check(&nonce_flip).reason(), Some(&RejectReason::BadPow));

        let mut value_flip = sealed.clone();
        value_flip.txns[0].value ^= 1;
        assert!(!check(&value_flip).accepted());

        let mut link_flip = sealed.clone();
        link_flip.prev_hash[5] ^= 1;
        assert_eq!(check(&link_flip).reason(), Some(&RejectReason::ChainLink));
    }

    #[test]
    fn split_hints_reject_only_in_sharing_mode() {
        let chain = LocalChain::new(funded_state(10));
        // Two dependent txns (shared a(1)) plus an independent one.
        let txns = vec![
            Transaction::monetary(0, a(1), a(2), 5),
            Transaction::monetary(1, a(1), a(3), 5),
            Transaction::monetary(2, a(4), a(5), 5),
        ];
        let mut candidate = create_block(&txns, &[], &chain, a(42), 5).unwrap();
        // Malicious hints: split the dependent pair. Mine WITH the hints so
        // the PoW itself is valid over them.
        candidate.shard_hints =
            Some(BTreeMap::from([(0u64, 0u32), (1, 1), (2, 2)]));
        let (post, _) = execute_shard(&candidate.txns, &chain.tip_state, &SyntheticCost::ZERO);
        candidate.state_digest = state_digest(&post);
        seal_block(&mut candidate, &EASY()).unwrap();

        let sharing = validate_block(
            &candidate,
            &chain,
            ValidatorMode::Sharing,
            None,
            &EASY(),
            DepsMode::Full,
            &SyntheticCost::ZERO,
        );
        assert_eq!(sharing.reason(), Some(&RejectReason::BadHints));

        // Serial and Default ignore hints; digest and PoW are fine.
        for mode in [ValidatorMode::Serial, ValidatorMode::Default] {
            let v = validate_block(
                &candidate,
                &chain,
                mode,
                None,
                &EASY(),
                DepsMode::Full,
                &SyntheticCost::ZERO,
            );
            assert!(v.accepted(), "mode {mode}");
        }
    }

    #[test]
    fn sharing_accepts_relabeled_but_equivalent_hints() {
        let chain = LocalChain::new(funded_state(10));
        let txns = vec![
            Transaction::monetary(0, a(1), a(2), 5),
            Transaction::monetary(1, a(1), a(3), 5),
            Transaction::monetary(2, a(4), a(5), 5),
        ];
        let mut candidate = create_block(&txns, &[], &chain, a(42), 5).unwrap();
        // Same partition as analyze() but with unusual shard ids.
        candidate.shard_hints =
            Some(BTreeMap::from([(0u64, 9u32), (1, 9), (2, 4)]));
        let (post, _) = execute_shard(&candidate.txns, &chain.tip_state, &SyntheticCost::ZERO);
        candidate.state_digest = state_digest(&post);
        seal_block(&mut candidate, &EASY()).unwrap();
        let v = validate_block(
            &candidate,
            &chain,
            ValidatorMode::Sharing,
            None,
            &EASY(),
            DepsMode::Full,
            &SyntheticCost::ZERO,
        );
        assert!(v.accepted(), "{:?}", v.reason());
    }

    #[test]
    fn chain_append_guards_links() {
        let mut chain = LocalChain::new(funded_state(5));
        let candidate = create_block(&pending(2), &[], &chain, a(1), 0).unwrap();
        let (sealed, post) =
            mine_block_serial(candidate, &chain, &EASY(), &SyntheticCost::ZERO).unwrap();

        let mut wrong_number = sealed.clone();
        wrong_number.number = 5;
        assert!(matches!(
            chain.append(wrong_number, post.clone()),
            Err(ChainError::BadNumber { .. })
        ));

        let mut wrong_state = post.clone();
        wrong_state.set_balance(a(4), 123_456);
        assert!(matches!(
            chain.append(sealed.clone(), wrong_state),
            Err(ChainError::BadState)
        ));

        chain.append(sealed, post).unwrap();
        assert_eq!(chain.tip_number(), 1);
    }
}
