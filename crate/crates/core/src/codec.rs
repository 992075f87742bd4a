//! Canonical byte encoding for blocks and the world-state digest.
//!
//! The encoding is the substrate for both hashing (PoW, prev_hash links) and
//! the wire protocol, so it must be bit-exact and deterministic: fields in
//! declaration order, integers big-endian fixed-width, lists prefixed by a
//! u32 big-endian count, optionals prefixed by a 0/1 presence byte. The
//! nonce is encoded last so it can be omitted (`include_nonce = false`) or
//! appended to a reusable hash prefix during nonce search.

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::types::{Account, Address, Block, Transaction, UncleRef, WorldState};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WireError {
    #[error("input truncated: needed {needed} more bytes for {what}")]
    Truncated { what: &'static str, needed: usize },
    #[error("invalid presence byte {0} (must be 0 or 1)")]
    BadPresence(u8),
    #[error("declared count {count} for {what} exceeds remaining input")]
    ImplausibleCount { what: &'static str, count: u64 },
    #[error("trailing garbage: {0} bytes left after decode")]
    TrailingBytes(usize),
    #[error("map keys for {0} not strictly ascending")]
    UnsortedKeys(&'static str),
}

/// Sequential reader over a byte slice with structured errors.
pub struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Reader { data, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    pub fn is_empty(&self) -> bool {
        self.remaining() == 0
    }

    pub fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], WireError> {
        if self.remaining() < n {
            return Err(WireError::Truncated {
                what,
                needed: n - self.remaining(),
            });
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self, what: &'static str) -> Result<u8, WireError> {
        Ok(self.take(1, what)?[0])
    }

    pub fn u32(&mut self, what: &'static str) -> Result<u32, WireError> {
        let b = self.take(4, what)?;
        Ok(u32::from_be_bytes(b.try_into().unwrap()))
    }

    pub fn u64(&mut self, what: &'static str) -> Result<u64, WireError> {
        let b = self.take(8, what)?;
        Ok(u64::from_be_bytes(b.try_into().unwrap()))
    }

    pub fn u128(&mut self, what: &'static str) -> Result<u128, WireError> {
        let b = self.take(16, what)?;
        Ok(u128::from_be_bytes(b.try_into().unwrap()))
    }

    pub fn hash(&mut self, what: &'static str) -> Result<[u8; 32], WireError> {
        Ok(self.take(32, what)?.try_into().unwrap())
    }

    pub fn address(&mut self, what: &'static str) -> Result<Address, WireError> {
        Ok(Address(self.take(20, what)?.try_into().unwrap()))
    }

    pub fn presence(&mut self, what: &'static str) -> Result<bool, WireError> {
        match self.u8(what)? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(WireError::BadPresence(b)),
        }
    }

    /// List count, sanity-checked against at least one byte per element.
    pub fn count(&mut self, what: &'static str) -> Result<usize, WireError> {
        let n = self.u32(what)?;
        if n as usize > self.remaining() {
            return Err(WireError::ImplausibleCount {
                what,
                count: n as u64,
            });
        }
        Ok(n as usize)
    }

    pub fn bytes(&mut self, what: &'static str) -> Result<Vec<u8>, WireError> {
        let n = self.count(what)?;
        Ok(self.take(n, what)?.to_vec())
    }

    pub fn finish(self) -> Result<(), WireError> {
        if self.remaining() == 0 {
            Ok(())
        } else {
            Err(WireError::TrailingBytes(self.remaining()))
        }
    }
}

pub fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_be_bytes());
}

pub fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_be_bytes());
}

pub fn put_u128(out: &mut Vec<u8>, v: u128) {
    out.extend_from_slice(&v.to_be_bytes());
}

pub fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    put_u32(out, b.len() as u32);
    out.extend_from_slice(b);
}

pub fn encode_transaction(out: &mut Vec<u8>, tx: &Transaction) {
    put_u64(out, tx.tx_id);
    out.extend_from_slice(tx.from.as_bytes());
    out.extend_from_slice(tx.to.as_bytes());
    put_u128(out, tx.value);
    put_bytes(out, &tx.input);
    match &tx.creates {
        None => out.push(0),
        Some(a) => {
            out.push(1);
            out.extend_from_slice(a.as_bytes());
        }
    }
    put_u64(out, tx.block_number);
}

pub fn decode_transaction(r: &mut Reader<'_>) -> Result<Transaction, WireError> {
    Ok(Transaction {
        tx_id: r.u64("tx_id")?,
        from: r.address("tx.from")?,
        to: r.address("tx.to")?,
        value: r.u128("tx.value")?,
        input: r.bytes("tx.input")?,
        creates: if r.presence("tx.creates")? {
            Some(r.address("tx.creates")?)
        } else {
            None
        },
        block_number: r.u64("tx.block_number")?,
    })
}

/// Canonical block encoding. With `include_nonce = false` the nonce field is
/// omitted entirely; that form feeds state digesting and the PoW prefix.
pub fn canonical_encode(block: &Block, include_nonce: bool) -> Vec<u8> {
    let mut out = Vec::with_capacity(128 + block.txns.len() * 96);
    put_u64(&mut out, block.number);
    out.extend_from_slice(&block.prev_hash);
    out.extend_from_slice(block.miner.as_bytes());
    put_u64(&mut out, block.timestamp);
    put_u32(&mut out, block.txns.len() as u32);
    for tx in &block.txns {
        encode_transaction(&mut out, tx);
    }
    put_u32(&mut out, block.uncles.len() as u32);
    for u in &block.uncles {
        put_u64(&mut out, u.number);
        out.extend_from_slice(u.miner.as_bytes());
    }
    out.extend_from_slice(&block.state_digest);
    match &block.shard_hints {
        None => out.push(0),
        Some(hints) => {
            out.push(1);
            put_u32(&mut out, hints.len() as u32);
            // BTreeMap iterates ascending by tx_id, as required.
            for (tx_id, shard_id) in hints {
                put_u64(&mut out, *tx_id);
                put_u32(&mut out, *shard_id);
            }
        }
    }
    if include_nonce {
        put_u64(&mut out, block.nonce);
    }
    out
}

/// Inverse of [`canonical_encode`]; the caller states which form it has.
pub fn decode_block(data: &[u8], include_nonce: bool) -> Result<Block, WireError> {
    let mut r = Reader::new(data);
    let block = decode_block_from(&mut r, include_nonce)?;
    r.finish()?;
    Ok(block)
}

pub fn decode_block_from(r: &mut Reader<'_>, include_nonce: bool) -> Result<Block, WireError> {
    let number = r.u64("block.number")?;
    let prev_hash = r.hash("block.prev_hash")?;
    let miner = r.address("block.miner")?;
    let timestamp = r.u64("block.timestamp")?;
    let n_txns = r.count("block.txns")?;
    let mut txns = Vec::with_capacity(n_txns);
    for _ in 0..n_txns {
        txns.push(decode_transaction(r)?);
    }
    let n_uncles = r.count("block.uncles")?;
    let mut uncles = Vec::with_capacity(n_uncles);
    for _ in 0..n_uncles {
        uncles.push(UncleRef {
            number: r.u64("uncle.number")?,
            miner: r.address("uncle.miner")?,
        });
    }
    let state_digest = r.hash("block.state_digest")?;
    let shard_hints = if r.presence("block.shard_hints")? {
        let n = r.count("shard_hints")?;
        let mut map = std::collections::BTreeMap::new();
        let mut last: Option<u64> = None;
        for _ in 0..n {
            let tx_id = r.u64("hint.tx_id")?;
            let shard_id = r.u32("hint.shard_id")?;
            if last.is_some_and(|p| p >= tx_id) {
                return Err(WireError::UnsortedKeys("shard_hints"));
            }
            last = Some(tx_id);
            map.insert(tx_id, shard_id);
        }
        Some(map)
    } else {
        None
    };
    let nonce = if include_nonce { r.u64("block.nonce")? } else { 0 };
    Ok(Block {
        number,
        prev_hash,
        miner,
        timestamp,
        txns,
        uncles,
        state_digest,
        shard_hints,
        nonce,
    })
}

/// SHA-256 of the nonce-bearing canonical encoding; the chain link and the
/// quantity compared against the PoW target.
pub fn block_hash(block: &Block) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(canonical_encode(block, true));
    h.finalize().into()
}

fn digest_account(h: &mut Sha256, addr: &Address, acct: &Account) {
    h.update(addr.as_bytes());
    h.update(acct.balance.to_be_bytes());
    for (k, v) in &acct.storage {
        h.update(k);
        h.update(v);
    }
}

/// SHA-256 over non-default accounts in ascending address order, each as
/// address ‖ balance ‖ storage entries in ascending key order. Insensitive
/// to insertion order and to default entries; the empty state digests to
/// SHA-256 of the empty string.
pub fn state_digest(state: &WorldState) -> [u8; 32] {
    let mut h = Sha256::new();
    for (addr, acct) in state.non_default() {
        digest_account(&mut h, addr, acct);
    }
    h.finalize().into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Account, Address, Block, Transaction, UncleRef, WorldState};
    use std::collections::BTreeMap;

    fn sample_tx(tx_id: u64) -> Transaction {
        Transaction {
            tx_id,
            from: Address::from_index(tx_id * 2 + 1),
            to: Address::from_index(tx_id * 2 + 2),
            value: 1_000 + tx_id as u128,
            input: if tx_id % 2 == 0 {
                Vec::new()
            } else {
                let spec = crate::abi::by_name("vote").unwrap();
                crate::abi::encode_call(spec, &[crate::abi::Value::Uint(tx_id as u128)])
            },
            creates: (tx_id % 3 == 0).then(|| Address::from_index(9_000 + tx_id)),
            block_number: 5,
        }
    }

    fn sample_block() -> Block {
        let mut b = Block::candidate(5, [7u8; 32], Address::from_index(42), 1_700_000_000);
        b.txns = (0..4).map(sample_tx).collect();
        b.uncles = vec![UncleRef {
            number: 3,
            miner: Address::from_index(11),
        }];
        b.state_digest = [9u8; 32];
        b.shard_hints = Some(BTreeMap::from([(0u64, 1u32), (1, 0), (2, 1), (3, 2)]));
        b.nonce = 0x1122_3344_5566_7788;
        b
    }

    #[test]
    fn empty_block_encoding_has_fixed_length() {
        let b = Block::candidate(0, [0u8; 32], Address::default(), 0);
        // number 8 + prev 32 + miner 20 + ts 8 + txn count 4 + uncle count 4
        // + digest 32 + hints presence 1 (+ nonce 8)
        assert_eq!(canonical_encode(&b, false).len(), 109);
        assert_eq!(canonical_encode(&b, true).len(), 117);
    }

    #[test]
    fn encoding_is_deterministic() {
        let b = sample_block();
        assert_eq!(canonical_encode(&b, true), canonical_encode(&b, true));
        assert_eq!(canonical_encode(&b, false), canonical_encode(&b, false));
    }

    #[test]
    fn nonce_only_affects_nonce_bearing_form() {
        let a = sample_block();
        let mut b = a.clone();
        b.nonce += 1;
        assert_eq!(canonical_encode(&a, false), canonical_encode(&b, false));
        assert_ne!(canonical_encode(&a, true), canonical_encode(&b, true));
    }

    #[test]
    fn block_round_trips_both_forms() {
        let b = sample_block();
        for include_nonce in [true, false] {
            let enc = canonical_encode(&b, include_nonce);
            let dec = decode_block(&enc, include_nonce).unwrap();
            if include_nonce {
                assert_eq!(dec, b);
            } else {
                let mut expect = b.clone();
                expect.nonce = 0;
                assert_eq!(dec, expect);
            }
        }
    }

    #[test]
    fn truncation_and_trailing_bytes_are_rejected() {
        let enc = canonical_encode(&sample_block(), true);
        for cut in [0, 1, 50, enc.len() - 1] {
            assert!(decode_block(&enc[..cut], true).is_err(), "cut {cut} accepted");
        }
        let mut long = enc.clone();
        long.push(0);
        assert_eq!(decode_block(&long, true), Err(WireError::TrailingBytes(1)));
    }

    #[test]
    fn empty_state_digests_to_sha256_of_empty_string() {
        let expected: [u8; 32] = Sha256::digest([]).into();
        assert_eq!(state_digest(&WorldState::new()), expected);
        // Well-known constant, pinned.
        assert_eq!(
            hex::encode(expected),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn default_accounts_do_not_change_digest() {
        let mut s = WorldState::new();
        s.set_balance(Address::from_index(1), 500);
        let base = state_digest(&s);
        s.account_mut(Address::from_index(2));
        assert_eq!(state_digest(&s), base);
    }

    #[test]
    fn digest_is_insertion_order_insensitive() {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);

        let mut entries: Vec<(Address, Account)> = (0..100)
            .map(|i| {
                let mut acct = Account::with_balance(i as u128 * 13 + 1);
                acct.storage.insert([i as u8; 32], [(i + 1) as u8; 32]);
                (Address::from_index(i * 7), acct)
            })
            .collect();

        let mut forward = WorldState::new();
        for (a, acct) in &entries {
            forward.accounts.insert(*a, acct.clone());
        }
        let want = state_digest(&forward);

        for _ in 0..5 {
            entries.shuffle(&mut rng);
            let mut s = WorldState::new();
            for (a, acct) in &entries {
                s.accounts.insert(*a, acct.clone());
            }
            assert_eq!(state_digest(&s), want);
        }
    }

    #[test]
    fn hints_must_be_sorted_on_the_wire() {
        let b = sample_block();
        let mut enc = canonical_encode(&b, true);
        // Locate the two final hint entries (8+4 bytes each, before the nonce)
        // and swap them to break ordering.
        let nonce_at = enc.len() - 8;
        let e2 = nonce_at - 12;
        let e1 = e2 - 12;
        let (a, b2) = (enc[e1..e2].to_vec(), enc[e2..nonce_at].to_vec());
        enc[e1..e2].copy_from_slice(&b2);
        enc[e2..nonce_at].copy_from_slice(&a);
        assert_eq!(
            decode_block(&enc, true),
            Err(WireError::UnsortedKeys("shard_hints"))
        );
    }
}
