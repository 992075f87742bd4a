//! Core domain types: addresses, transactions, accounts, world state, blocks.
//!
//! All types are plain values. Once built they are cloned freely between
//! workers; mutation happens only on privately owned copies (see
//! [`crate::engine`]).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;


use thiserror::Error;

use crate::abi;

/// 20-byte account identifier, rendered as 0x-prefixed lowercase hex.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Address(pub [u8; 20]);

impl Address {
    pub const LEN: usize = 20;

    pub fn from_bytes(bytes: [u8; 20]) -> Self {
        Address(bytes)
    }

    /// Deterministic test/synthesis helper: low 8 bytes hold `n` big-endian.
    pub fn from_index(n: u64) -> Self {
        let mut b = [0u8; 20];
        b[12..].copy_from_slice(&n.to_be_bytes());
        Address(b)
    }

    pub fn as_bytes(&self) -> &[u8; 20] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0u8; 20]
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AddressParseError {
    #[error("address must be 42 chars starting with 0x, got {0} chars")]
    BadLength(usize),
    #[error("address must start with 0x")]
    MissingPrefix,
    #[error("invalid hex in address: {0}")]
    BadHex(String),
}

impl FromStr for Address {
    type Err = AddressParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != 42 {
            return Err(AddressParseError::BadLength(s.len()));
        }
        let hex_part = s
            .strip_prefix("0x")
            .ok_or(AddressParseError::MissingPrefix)?;
        let bytes =
            hex::decode(hex_part).map_err(|e| AddressParseError::BadHex(e.to_string()))?;
        let mut out = [0u8; 20];
        out.copy_from_slice(&bytes);
        Ok(Address(out))
    }
}

/// A single transaction. `input` empty means plain monetary transfer;
/// nonempty input must begin with one of the registered 4-byte selectors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transaction {
    /// Intra-block sequence number, dense from 0 in arrival order.
    pub tx_id: u64,
    pub from: Address,
    pub to: Address,
    /// Amount in Wei.
    pub value: u128,
    pub input: Vec<u8>,
    /// Contract address assigned on first deployment, if any.
    pub creates: Option<Address>,
    pub block_number: u64,
}

impl Transaction {
    pub fn monetary(tx_id: u64, from: Address, to: Address, value: u128) -> Self {
        Transaction {
            tx_id,
            from,
            to,
            value,
            input: Vec::new(),
            creates: None,
            block_number: 0,
        }
    }

    pub fn is_contract_call(&self) -> bool {
        !self.input.is_empty()
    }

    pub fn selector(&self) -> Option<[u8; 4]> {
        if self.input.len() >= 4 {
            Some([self.input[0], self.input[1], self.input[2], self.input[3]])
        } else {
            None
        }
    }
}

/// Account state: coin balance plus contract storage.
///
/// The owning address is the key in [`WorldState::accounts`]; it is not
/// duplicated here.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Account {
    /// Balance in Wei. Debits exceeding the balance are rejected, never
    /// saturated.
    pub balance: u128,
    pub storage: BTreeMap<[u8; 32], [u8; 32]>,
}

impl Account {
    pub fn with_balance(balance: u128) -> Self {
        Account {
            balance,
            storage: BTreeMap::new(),
        }
    }

    /// Zero balance and empty storage; indistinguishable from absence.
    pub fn is_default(&self) -> bool {
        self.balance == 0 && self.storage.is_empty()
    }
}

/// Map of all account states. An absent address is equivalent to a default
/// account, and equality ignores default entries.
#[derive(Clone, Debug, Default)]
pub struct WorldState {
    pub accounts: BTreeMap<Address, Account>,
}

impl WorldState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn balance(&self, addr: &Address) -> u128 {
        self.accounts.get(addr).map_or(0, |a| a.balance)
    }

    /// Clone of the account, or the default account when absent.
    pub fn account(&self, addr: &Address) -> Account {
        self.accounts.get(addr).cloned().unwrap_or_default()
    }

    pub fn account_mut(&mut self, addr: Address) -> &mut Account {
        self.accounts.entry(addr).or_default()
    }

    pub fn set_balance(&mut self, addr: Address, balance: u128) {
        self.account_mut(addr).balance = balance;
    }

    /// Drops entries indistinguishable from absence.
    pub fn prune_defaults(&mut self) {
        self.accounts.retain(|_, acct| !acct.is_default());
    }

    /// Sum of all coin balances; invariant under transfers.
    pub fn total_balance(&self) -> u128 {
        self.accounts.values().map(|a| a.balance).sum()
    }

    /// Iterate non-default accounts in ascending address order.
    pub fn non_default(&self) -> impl Iterator<Item = (&Address, &Account)> {
        self.accounts.iter().filter(|(_, a)| !a.is_default())
    }
}

impl PartialEq for WorldState {
    fn eq(&self, other: &Self) -> bool {
        self.non_default().eq(other.non_default())
    }
}

impl Eq for WorldState {}

/// Reference to an uncle block: (block number, miner address).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UncleRef {
    pub number: u64,
    pub miner: Address,
}

/// At most this many uncles may be included per block.
pub const MAX_UNCLES: usize = 2;

/// A block. `shard_hints` is the optional tx_id → shard_id map a miner may
/// attach so validators can reuse its dependency analysis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub number: u64,
    pub prev_hash: [u8; 32],
    pub miner: Address,
    /// Seconds since epoch.
    pub timestamp: u64,
    pub txns: Vec<Transaction>,
    pub uncles: Vec<UncleRef>,
    /// Digest of the post-execution world state.
    pub state_digest: [u8; 32],
    pub shard_hints: Option<BTreeMap<u64, u32>>,
    pub nonce: u64,
}

impl Block {
    /// Fresh candidate: digest, hints and nonce unset.
    pub fn candidate(number: u64, prev_hash: [u8; 32], miner: Address, timestamp: u64) -> Self {
        Block {
            number,
            prev_hash,
            miner,
            timestamp,
            txns: Vec::new(),
            uncles: Vec::new(),
            state_digest: [0u8; 32],
            shard_hints: None,
            nonce: 0,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StructuralError {
    #[error("tx {tx_id}: input selector {selector} is not registered")]
    UnknownSelector { tx_id: u64, selector: String },
    #[error("tx {tx_id}: nonempty input shorter than 4-byte selector")]
    ShortInput { tx_id: u64 },
    #[error("tx ids not dense from 0: expected {expected} at position {position}, got {got}")]
    NonDenseTxIds {
        position: usize,
        expected: u64,
        got: u64,
    },
    #[error("block has {0} uncles, maximum is {max}", max = MAX_UNCLES)]
    TooManyUncles(usize),
    #[error("shard_hints do not cover exactly the block's tx ids")]
    BadHintCoverage,
}

/// Check one transaction's structural invariants.
pub fn validate_transaction(tx: &Transaction) -> Result<(), StructuralError> {
    if tx.input.is_empty() {
        return Ok(());
    }
    if tx.input.len() < 4 {
        return Err(StructuralError::ShortInput { tx_id: tx.tx_id });
    }
    let sel = tx.selector().unwrap();
    if abi::registry().iter().any(|f| f.selector == sel) {
        Ok(())
    } else {
        Err(StructuralError::UnknownSelector {
            tx_id: tx.tx_id,
            selector: format!("0x{}", hex::encode(sel)),
        })
    }
}

/// Check a block's structural invariants: valid transactions with dense
/// tx_ids, at most [`MAX_UNCLES`] uncles, hints (when present) covering
/// every tx exactly once.
pub fn validate_block(block: &Block) -> Result<(), StructuralError> {
    for (i, tx) in block.txns.iter().enumerate() {
        if tx.tx_id != i as u64 {
            return Err(StructuralError::NonDenseTxIds {
                position: i,
                expected: i as u64,
                got: tx.tx_id,
            });
        }
        validate_transaction(tx)?;
    }
    if block.uncles.len() > MAX_UNCLES {
        return Err(StructuralError::TooManyUncles(block.uncles.len()));
    }
    if let Some(hints) = &block.shard_hints {
        if hints.len() != block.txns.len()
            || !block.txns.iter().all(|tx| hints.contains_key(&tx.tx_id))
        {
            return Err(StructuralError::BadHintCoverage);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn address_round_trips_through_hex() {
        let a = Address::from_index(0xdeadbeef);
        let s = a.to_string();
        assert_eq!(s.len(), 42);
        assert!(s.starts_with("0x"));
        assert_eq!(s.parse::<Address>().unwrap(), a);
    }

    #[test]
    fn address_parse_rejects_junk() {
        assert_eq!(
            "0x1234".parse::<Address>(),
            Err(AddressParseError::BadLength(6))
        );
        let no_prefix = "zz".to_string() + &"0".repeat(40);
        assert_eq!(
            no_prefix.parse::<Address>(),
            Err(AddressParseError::MissingPrefix)
        );
        let bad_hex = "0x".to_string() + &"g".repeat(40);
        assert!(matches!(
            bad_hex.parse::<Address>(),
            Err(AddressParseError::BadHex(_))
        ));
    }

    #[test]
    fn default_accounts_do_not_affect_state_equality() {
        let mut a = WorldState::new();
        a.set_balance(Address::from_index(1), 100);

        let mut b = a.clone();
        b.account_mut(Address::from_index(2)); // default entry
        assert_eq!(a, b);

        b.set_balance(Address::from_index(2), 1);
        assert_ne!(a, b);
    }

    #[test]
    fn monetary_tx_is_structurally_valid() {
        let tx = Transaction::monetary(0, Address::from_index(1), Address::from_index(2), 5);
        assert!(validate_transaction(&tx).is_ok());
        assert!(!tx.is_contract_call());
    }

    #[test]
    fn unknown_selector_is_rejected() {
        let mut tx = Transaction::monetary(3, Address::from_index(1), Address::from_index(2), 0);
        tx.input = vec![0xde, 0xad, 0xbe, 0xef];
        assert_eq!(
            validate_transaction(&tx),
            Err(StructuralError::UnknownSelector {
                tx_id: 3,
                selector: "0xdeadbeef".into()
            })
        );
    }

    #[test]
    fn short_input_is_rejected() {
        let mut tx = Transaction::monetary(0, Address::from_index(1), Address::from_index(2), 0);
        tx.input = vec![0xa9];
        assert_eq!(
            validate_transaction(&tx),
            Err(StructuralError::ShortInput { tx_id: 0 })
        );
    }

    #[test]
    fn block_validation_checks_density_uncles_hints() {
        let miner = Address::from_index(9);
        let mut block = Block::candidate(1, [0u8; 32], miner, 0);
        block.txns = vec![
            Transaction::monetary(0, Address::from_index(1), Address::from_index(2), 1),
            Transaction::monetary(1, Address::from_index(3), Address::from_index(4), 1),
        ];
        assert!(validate_block(&block).is_ok());

        let mut gap = block.clone();
        gap.txns[1].tx_id = 5;
        assert_eq!(
            validate_block(&gap),
            Err(StructuralError::NonDenseTxIds {
                position: 1,
                expected: 1,
                got: 5
            })
        );

        let mut uncled = block.clone();
        uncled.uncles = vec![
            UncleRef { number: 0, miner },
            UncleRef { number: 0, miner },
            UncleRef { number: 0, miner },
        ];
        assert_eq!(
            validate_block(&uncled),
            Err(StructuralError::TooManyUncles(3))
        );

        let mut hinted = block.clone();
        hinted.shard_hints = Some([(0u64, 0u32)].into_iter().collect());
        assert_eq!(
            validate_block(&hinted),
            Err(StructuralError::BadHintCoverage)
        );
        hinted.shard_hints = Some([(0u64, 0u32), (1, 1)].into_iter().collect());
        assert!(validate_block(&hinted).is_ok());
    }
}
