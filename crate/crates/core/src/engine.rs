//! Deterministic transaction execution against a [`WorldState`].
//!
//! Monetary transfers move Wei between accounts. Contract calls dispatch on
//! the registered selector to a native rule that reads and writes storage
//! under the contract account (`tx.to`). Every rule is branch-deterministic:
//! identical (transactions, state) always produce identical post-state, which
//! is what lets validators re-execute blocks and compare digests.
//!
//! Failure is all-or-nothing per transaction: a `Failed` outcome leaves the
//! state bit-identical to the pre-state (snapshot/restore of the two accounts
//! a transaction can touch).
//!
//! Contract storage layout: every datum lives in `tx.to`'s storage map under
//! `SHA-256(role_tag ‖ subject)`, e.g. the token balance of holder H is at
//! `SHA-256("token" ‖ H)`. Amounts are stored as 32-byte big-endian words.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};

use crate::abi::{self, Value};
use crate::types::{Address, Transaction, WorldState};

/// Deterministic busy-compute injected per executed transaction, modeling
/// workloads whose latency is dominated by contract calls.
///
/// The burn spins until a wall-clock deadline, yielding each iteration, so
/// concurrent workers overlap their burns instead of serializing on cores.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SyntheticCost {
    pub contract_ns: u64,
    pub monetary_ns: u64,
}

impl Default for SyntheticCost {
    fn default() -> Self {
        SyntheticCost {
            contract_ns: 50_000,
            monetary_ns: 5_000,
        }
    }
}

impl SyntheticCost {
    pub const ZERO: SyntheticCost = SyntheticCost {
        contract_ns: 0,
        monetary_ns: 0,
    };

    pub fn from_us(contract_us: u64, monetary_us: u64) -> Self {
        SyntheticCost {
            contract_ns: contract_us * 1_000,
            monetary_ns: monetary_us * 1_000,
        }
    }

    fn burn(ns: u64) {
        if ns == 0 {
            return;
        }
        let deadline = Instant::now() + Duration::from_nanos(ns);
        // Yield while the deadline is far so co-scheduled followers make
        // progress on a shared core, but spin the last stretch: a yield
        // across the deadline costs a scheduler round trip, which at
        // microsecond burn sizes swamps the modeled cost and makes parallel
        // timings noisy.
        const SPIN_TAIL: Duration = Duration::from_micros(2);
        loop {
            let now = Instant::now();
            if now >= deadline {
                return;
            }
            if deadline - now > SPIN_TAIL {
                std::thread::yield_now();
            } else {
                std::hint::spin_loop();
            }
        }
    }

    fn pay(&self, tx: &Transaction) {
        Self::burn(if tx.is_contract_call() {
            self.contract_ns
        } else {
            self.monetary_ns
        });
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExecStatus {
    Applied,
    Failed,
}

/// Result of executing one transaction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExecOutcome {
    pub status: ExecStatus,
    /// Diagnostic for Failed outcomes.
    pub reason: Option<String>,
    /// Accounts actually read or written.
    pub touched: BTreeSet<Address>,
}

impl ExecOutcome {
    pub fn applied(&self) -> bool {
        self.status == ExecStatus::Applied
    }
}

/// `SHA-256(tag ‖ subject)`: the storage slot for `tag`-role data about
/// `subject` inside a contract account.
pub fn storage_key(tag: &str, subject: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(tag.as_bytes());
    h.update(subject);
    h.finalize().into()
}

fn word_of(v: u128) -> [u8; 32] {
    let mut w = [0u8; 32];
    w[16..].copy_from_slice(&v.to_be_bytes());
    w
}

fn u128_of(w: &[u8; 32]) -> u128 {
    // High half is always zero for words we write.
    u128::from_be_bytes(w[16..].try_into().unwrap())
}

/// Reads a stored u128 word, 0 when absent.
pub fn storage_u128(state: &WorldState, contract: &Address, key: [u8; 32]) -> u128 {
    state
        .accounts
        .get(contract)
        .and_then(|a| a.storage.get(&key))
        .map_or(0, u128_of)
}

/// Execution context for one transaction: tracks touched accounts and owns
/// the failure path.
struct Ctx<'a> {
    state: &'a mut WorldState,
    tx: &'a Transaction,
    touched: BTreeSet<Address>,
}

type RuleResult = Result<(), String>;

impl<'a> Ctx<'a> {
    fn touch(&mut self, a: Address) {
        self.touched.insert(a);
    }

    fn balance(&mut self, a: Address) -> u128 {
        self.touch(a);
        self.state.balance(&a)
    }

    fn credit(&mut self, a: Address, v: u128) -> RuleResult {
        self.touch(a);
        let acct = self.state.account_mut(a);
        acct.balance = acct
            .balance
            .checked_add(v)
            .ok_or_else(|| "balance overflow".to_string())?;
        Ok(())
    }

    fn debit(&mut self, a: Address, v: u128) -> RuleResult {
        if self.balance(a) < v {
            return Err("insufficient balance".into());
        }
        self.state.account_mut(a).balance -= v;
        Ok(())
    }

    /// Storage access goes to the contract (tx.to) account.
    fn sget(&mut self, key: [u8; 32]) -> u128 {
        self.touch(self.tx.to);
        storage_u128(self.state, &self.tx.to, key)
    }

    fn sput(&mut self, key: [u8; 32], v: u128) {
        self.touch(self.tx.to);
        self.state
            .account_mut(self.tx.to)
            .storage
            .insert(key, word_of(v));
    }

    fn sput_raw(&mut self, key: [u8; 32], word: [u8; 32]) {
        self.touch(self.tx.to);
        self.state.account_mut(self.tx.to).storage.insert(key, word);
    }

    fn shas(&mut self, key: [u8; 32]) -> bool {
        self.touch(self.tx.to);
        self.state
            .accounts
            .get(&self.tx.to)
            .is_some_and(|a| a.storage.contains_key(&key))
    }

    fn token_add(&mut self, holder: Address, amt: u128) -> RuleResult {
        let key = storage_key("token", holder.as_bytes());
        let bal = self
            .sget(key)
            .checked_add(amt)
            .ok_or_else(|| "token balance overflow".to_string())?;
        self.sput(key, bal);
        Ok(())
    }

    fn token_move(&mut self, from: Address, to: Address, amt: u128) -> RuleResult {
        let from_key = storage_key("token", from.as_bytes());
        let bal = self.sget(from_key);
        if bal < amt {
            return Err("insufficient token balance".into());
        }
        self.sput(from_key, bal - amt);
        self.token_add(to, amt)
    }
}

/// Deterministic pseudo-roll in 1..=6 from the transaction's coordinates:
/// SHA-256(block_number ‖ tx_id) taken mod 6, plus 1. Both miner and
/// validator recompute the same roll from the same block bytes.
pub fn dice_roll(block_number: u64, tx_id: u64) -> u8 {
    let mut h = Sha256::new();
    h.update(block_number.to_be_bytes());
    h.update(tx_id.to_be_bytes());
    let digest = h.finalize();
    let mut acc: u32 = 0;
    for b in digest {
        acc = (acc * 256 + b as u32) % 6;
    }
    acc as u8 + 1
}

fn run_contract(ctx: &mut Ctx<'_>, name: &str, args: &[Value]) -> RuleResult {
    let from = ctx.tx.from;
    match (name, args) {
        ("transfer", [Value::Addr(recipient), Value::Uint(amt)]) => {
            ctx.token_move(from, *recipient, *amt)
        }
        ("approve", [Value::Addr(spender), Value::Uint(amt)]) => {
            let mut subject = from.as_bytes().to_vec();
            subject.extend_from_slice(spender.as_bytes());
            ctx.sput(storage_key("allow", &subject), *amt);
            Ok(())
        }
        ("vote", [Value::Uint(proposal)]) => {
            let flag = storage_key("voted", from.as_bytes());
            if ctx.shas(flag) {
                return Err("sender already voted".into());
            }
            ctx.sput(flag, 1);
            let tally = storage_key("tally", &proposal.to_be_bytes());
            let n = ctx.sget(tally) + 1;
            ctx.sput(tally, n);
            Ok(())
        }
        ("submitTransaction", [Value::Addr(dest), Value::Uint(amt), Value::Bytes(_)]) => {
            let count_key = storage_key("pending-count", &[]);
            let idx = ctx.sget(count_key);
            let mut dest_word = [0u8; 32];
            dest_word[12..].copy_from_slice(dest.as_bytes());
            ctx.sput_raw(storage_key("pending-addr", &idx.to_be_bytes()), dest_word);
            ctx.sput(storage_key("pending-amt", &idx.to_be_bytes()), *amt);
            ctx.sput(count_key, idx + 1);
            Ok(())
        }
        ("issue", [Value::Addr(recipient), Value::Uint(amt)]) => {
            ctx.token_add(*recipient, *amt)
        }
        ("__callback", [Value::Bytes32(id), Value::Str(s), Value::Bytes(b)]) => {
            let mut h = Sha256::new();
            h.update(s.as_bytes());
            h.update(b);
            ctx.sput_raw(storage_key("callback", id), h.finalize().into());
            Ok(())
        }
        ("playerRollDice", [Value::Uint(bet)]) => {
            let contract = ctx.tx.to;
            ctx.debit(from, *bet).map_err(|_| "bettor cannot cover bet".to_string())?;
            ctx.credit(contract, *bet)?;
            let roll = dice_roll(ctx.tx.block_number, ctx.tx.tx_id);
            if roll >= 4 {
                let payout = bet.checked_mul(2).ok_or_else(|| "bet overflow".to_string())?;
                ctx.debit(contract, payout)
                    .map_err(|_| "contract cannot cover payout".to_string())?;
                ctx.credit(from, payout)?;
            }
            Ok(())
        }
        ("multisend", [Value::Addr(_token), Value::AddrArray(addrs), Value::UintArray(amts)]) => {
            if addrs.len() != amts.len() {
                return Err("recipient and amount arrays differ in length".into());
            }
            for (recipient, amt) in addrs.iter().zip(amts) {
                ctx.token_move(from, *recipient, *amt)?;
            }
            Ok(())
        }
        ("SmartAirdrop", []) => {
            let flag = storage_key("claimed", from.as_bytes());
            if ctx.shas(flag) {
                return Err("airdrop already claimed".into());
            }
            ctx.sput(flag, 1);
            ctx.token_add(from, 1_000)
        }
        ("PublicMine", []) => ctx.token_add(from, 100),
        ("setGenesisAddress", [Value::Addr(genesis), Value::Uint(amt), Value::Bytes(_)]) => {
            let key = storage_key("genesis", &[]);
            if ctx.shas(key) {
                return Err("genesis already set".into());
            }
            let mut word = [0u8; 32];
            word[12..].copy_from_slice(genesis.as_bytes());
            ctx.sput_raw(key, word);
            ctx.sput(storage_key("genesis-amt", &[]), *amt);
            Ok(())
        }
        _ => Err(format!("argument arity/type mismatch for {name}")),
    }
}

/// Storage slots under `tx.to` that executing `tx` may read, including
/// presence checks. Kept in lockstep with [`run_contract`]: every `sget`
/// and `shas` key there derives from the caller and the decoded arguments
/// alone, which is what lets a leader ship state slices narrowed to these
/// slots. Write-only slots are deliberately absent: their post-values come
/// back in the response slice no matter what was shipped.
pub fn storage_reads(tx: &Transaction) -> Vec<[u8; 32]> {
    if !tx.is_contract_call() {
        return Vec::new();
    }
    // Undecodable calldata fails before any storage access.
    let Ok((spec, args)) = abi::decode_call(&tx.input) else {
        return Vec::new();
    };
    let from = tx.from;
    match (spec.name, args.as_slice()) {
        ("transfer", [Value::Addr(recipient), Value::Uint(_)]) => vec![
            storage_key("token", from.as_bytes()),
            storage_key("token", recipient.as_bytes()),
        ],
        ("vote", [Value::Uint(proposal)]) => vec![
            storage_key("voted", from.as_bytes()),
            storage_key("tally", &proposal.to_be_bytes()),
        ],
        ("submitTransaction", [Value::Addr(_), Value::Uint(_), Value::Bytes(_)]) => {
            vec![storage_key("pending-count", &[])]
        }
        ("issue", [Value::Addr(recipient), Value::Uint(_)]) => {
            vec![storage_key("token", recipient.as_bytes())]
        }
        ("multisend", [Value::Addr(_), Value::AddrArray(addrs), Value::UintArray(_)]) => {
            let mut keys = vec![storage_key("token", from.as_bytes())];
            keys.extend(addrs.iter().map(|a| storage_key("token", a.as_bytes())));
            keys
        }
        ("SmartAirdrop", []) => vec![
            storage_key("claimed", from.as_bytes()),
            storage_key("token", from.as_bytes()),
        ],
        ("PublicMine", []) => vec![storage_key("token", from.as_bytes())],
        ("setGenesisAddress", [Value::Addr(_), Value::Uint(_), Value::Bytes(_)]) => {
            vec![storage_key("genesis", &[])]
        }
        // approve and __callback only overwrite; playerRollDice moves Wei
        // without storage; mismatched shapes fail before any access.
        _ => Vec::new(),
    }
}

/// Execute one transaction in place. Applies the Wei value transfer first
/// (for contract calls too), then the contract rule; any failure restores
/// the pre-state of the two involved accounts exactly.
pub fn execute_transaction(
    tx: &Transaction,
    state: &mut WorldState,
    cost: &SyntheticCost,
) -> ExecOutcome {
    cost.pay(tx);

    let snap_from = state.accounts.get(&tx.from).cloned();
    let snap_to = state.accounts.get(&tx.to).cloned();

    let mut ctx = Ctx {
        state,
        tx,
        touched: BTreeSet::new(),
    };

    let result: RuleResult = (|| {
        if tx.value > 0 {
            ctx.debit(tx.from, tx.value)?;
            ctx.credit(tx.to, tx.value)?;
        }
        if tx.is_contract_call() {
            let (spec, args) =
                abi::decode_call(&tx.input).map_err(|e| format!("calldata: {e}"))?;
            run_contract(&mut ctx, spec.name, &args)?;
        }
        Ok(())
    })();

    let touched = ctx.touched;
    match result {
        Ok(()) => ExecOutcome {
            status: ExecStatus::Applied,
            reason: None,
            touched,
        },
        Err(reason) => {
            // All-or-nothing: restore both accounts exactly, including
            // removing entries that did not exist before.
            match snap_from {
                Some(a) => {
                    state.accounts.insert(tx.from, a);
                }
                None => {
                    state.accounts.remove(&tx.from);
                }
            }
            match snap_to {
                Some(a) => {
                    state.accounts.insert(tx.to, a);
                }
                None => {
                    state.accounts.remove(&tx.to);
                }
            }
            ExecOutcome {
                status: ExecStatus::Failed,
                reason: Some(reason),
                touched,
            }
        }
    }
}

/// Execute a shard (or a whole block) serially over a private copy of
/// `state`; returns the post-state and per-transaction outcomes in order.
pub fn execute_shard(
    txns: &[Transaction],
    state: &WorldState,
    cost: &SyntheticCost,
) -> (WorldState, Vec<ExecOutcome>) {
    let mut post = state.clone();
    let outcomes = txns
        .iter()
        .map(|tx| execute_transaction(tx, &mut post, cost))
        .collect();
    (post, outcomes)
}
