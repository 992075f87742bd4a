//! Leader side: dispatches shard execution and partitioned mining to
//! follower connections and merges the results.
//!
//! One reader thread per follower funnels decoded messages into a single
//! event channel; dispatch calls consume events until their request set is
//! satisfied or a deadline passes. Execution responses merge all-or-nothing:
//! any follower failure leaves the leader's state untouched.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::sync::mpsc::{Receiver, RecvTimeoutError, Sender};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::analyzer::{touched_addresses_lenient, DepsMode, ShardAssignment};
use crate::engine::{execute_shard, storage_reads, ExecOutcome, SyntheticCost};
use crate::pow::{check_pow, search_nonce, CancelFlag, Difficulty, SearchPartition};
use crate::types::{Account, Address, Block, Transaction, WorldState};

use super::frame::{read_frame, write_frame, FrameError};
use super::messages::{Message, StateSlice};
use super::{ProtocolError, Transport};

#[derive(Debug, Error)]
pub enum DispatchError {
    #[error("follower {follower_id} is down: {detail}")]
    FollowerDown { follower_id: u32, detail: String },
    #[error("timed out waiting for follower {follower_id}")]
    Timeout { follower_id: u32 },
    #[error("responses overlap on address {0}; aborting block")]
    MergeConflict(Address),
    #[error("follower {follower_id} violated the protocol: {detail}")]
    Protocol { follower_id: u32, detail: String },
    #[error("mining exhausted the nonce space")]
    Exhausted,
}

enum LinkEvent {
    Msg(u64, Message),
    Closed,
    Bad(ProtocolError),
}

struct Link {
    follower_id: u32,
    writer: Box<dyn Write + Send>,
    closer: Box<dyn Fn() + Send>,
    alive: bool,
}

/// Leader endpoint over a fixed set of follower connections.
pub struct Leader {
    links: Vec<Link>,
    events_rx: Receiver<(usize, LinkEvent)>,
    events_tx: Sender<(usize, LinkEvent)>,
    next_request: u64,
    /// Per-follower response deadline for execution dispatch.
    pub exec_timeout: Duration,
    /// Deadline for the whole mining round.
    pub mine_timeout: Duration,
    /// Cost model for local (no-follower) execution fallback.
    pub local_cost: SyntheticCost,
    /// Log of rejected MineFound claims (follower id, detail).
    pub faulty_events: Vec<(u32, String)>,
}

impl Default for Leader {
    fn default() -> Self {
        let (events_tx, events_rx) = std::sync::mpsc::channel();
        Leader {
            links: Vec::new(),
            events_rx,
            events_tx,
            next_request: 1,
            exec_timeout: Duration::from_secs(30),
            mine_timeout: Duration::from_secs(600),
            local_cost: SyntheticCost::ZERO,
            faulty_events: Vec::new(),
        }
    }
}

impl Leader {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a follower connection. Spawns the reader thread.
    pub fn add_follower<T: Transport>(
        &mut self,
        follower_id: u32,
        conn: T,
    ) -> std::io::Result<()> {
        let writer = conn.try_clone()?;
        let closer_handle = conn.try_clone()?;
        let idx = self.links.len();
        let tx = self.events_tx.clone();
        std::thread::spawn(move || {
            let mut reader = conn;
            loop {
                let event = match read_frame(&mut reader) {
                    Ok(env) => match Message::decode(env.kind, &env.payload) {
                        Ok(msg) => LinkEvent::Msg(env.request_id, msg),
                        Err(e) => {
                            let _ = tx.send((idx, LinkEvent::Bad(e)));
                            return;
                        }
                    },
                    Err(FrameError::Closed) => {
                        let _ = tx.send((idx, LinkEvent::Closed));
                        return;
                    }
                    Err(e) => {
                        let _ = tx.send((idx, LinkEvent::Bad(e.into())));
                        return;
                    }
                };
                if tx.send((idx, event)).is_err() {
                    return; // leader dropped
                }
            }
        });
        self.links.push(Link {
            follower_id,
            writer: Box::new(writer),
            closer: Box::new(move || {
                let _ = closer_handle.shutdown();
            }),
            alive: true,
        });
        Ok(())
    }

    /// Ids of followers still believed connected.
    pub fn follower_ids(&self) -> Vec<u32> {
        self.links
            .iter()
            .filter(|l| l.alive)
            .map(|l| l.follower_id)
            .collect()
    }

    fn request_id(&mut self) -> u64 {
        let id = self.next_request;
        self.next_request += 1;
        id
    }

    /// Discard leftovers from previous phases (e.g. straggler MineFound).
    fn drain_events(&mut self) {
        while let Ok((idx, event)) = self.events_rx.try_recv() {
            if matches!(event, LinkEvent::Closed | LinkEvent::Bad(_)) {
                self.links[idx].alive = false;
            }
        }
    }

    fn send_to(&mut self, idx: usize, request_id: u64, msg: &Message) -> Result<(), DispatchError> {
        let link = &mut self.links[idx];
        write_frame(&mut link.writer, msg.kind(), request_id, &msg.encode()).map_err(|e| {
            link.alive = false;
            DispatchError::FollowerDown {
                follower_id: link.follower_id,
                detail: e.to_string(),
            }
        })
    }

    /// Round-trip a Ping to every live follower.
    pub fn ping_all(&mut self) -> Result<(), DispatchError> {
        self.drain_events();
        let live: Vec<usize> = (0..self.links.len())
            .filter(|&i| self.links[i].alive)
            .collect();
        let mut pending = BTreeMap::new();
        for idx in live {
            let rid = self.request_id();
            let ping = Message::Ping { follower_id: 0 };
            self.send_to(idx, rid, &ping)?;
            pending.insert(rid, idx);
        }
        let deadline = Instant::now() + self.exec_timeout;
        while !pending.is_empty() {
            let (idx, event) = self.recv_until(deadline, &pending)?;
            if let LinkEvent::Msg(rid, Message::Pong { .. }) = event {
                pending.remove(&rid);
            } else {
                self.unexpected(idx, &event)?;
            }
        }
        Ok(())
    }

    fn recv_until(
        &mut self,
        deadline: Instant,
        pending: &BTreeMap<u64, usize>,
    ) -> Result<(usize, LinkEvent), DispatchError> {
        let now = Instant::now();
        let wait = deadline.saturating_duration_since(now);
        match self.events_rx.recv_timeout(wait) {
            Ok(pair) => Ok(pair),
            Err(RecvTimeoutError::Timeout) | Err(RecvTimeoutError::Disconnected) => {
                let idx = pending.values().next().copied().unwrap_or(0);
                Err(DispatchError::Timeout {
                    follower_id: self.links.get(idx).map_or(0, |l| l.follower_id),
                })
            }
        }
    }

    /// Classify an event that was not the awaited response. Stray mining
    /// traffic is benign; closures and violations abort the dispatch.
    fn unexpected(&mut self, idx: usize, event: &LinkEvent) -> Result<(), DispatchError> {
        let follower_id = self.links[idx].follower_id;
        match event {
            LinkEvent::Msg(_, Message::MineFound { .. }) => Ok(()), // straggler
            LinkEvent::Msg(_, msg) => Err(DispatchError::Protocol {
                follower_id,
                detail: format!("unexpected {} during dispatch", msg.name()),
            }),
            LinkEvent::Closed => {
                self.links[idx].alive = false;
                Err(DispatchError::FollowerDown {
                    follower_id,
                    detail: "connection closed".into(),
                })
            }
            LinkEvent::Bad(e) => {
                self.links[idx].alive = false;
                Err(DispatchError::Protocol {
                    follower_id,
                    detail: e.to_string(),
                })
            }
        }
    }

    /// Ship each follower its transactions plus the state slice they touch;
    /// wait for all responses; merge. All-or-nothing: any failure leaves
    /// `state` unreferenced and no partial merge escapes.
    ///
    /// With no live followers (or an assignment naming none), executes
    /// locally — the degenerate serial case.
    pub fn dispatch_execution(
        &mut self,
        assignment: &ShardAssignment,
        state: &WorldState,
        deps: DepsMode,
        block_number: u64,
    ) -> Result<(WorldState, Vec<(u64, ExecOutcome)>), DispatchError> {
        self.drain_events();

        let id_to_idx: BTreeMap<u32, usize> = self
            .links
            .iter()
            .enumerate()
            .filter(|(_, l)| l.alive)
            .map(|(i, l)| (l.follower_id, i))
            .collect();

        // Degenerate path: nothing to dispatch remotely.
        let remote_total: usize = assignment
            .per_follower
            .iter()
            .filter(|(fid, txns)| id_to_idx.contains_key(fid) && !txns.is_empty())
            .map(|(_, txns)| txns.len())
            .sum();
        if remote_total != assignment.total_txns() {
            // Some assigned follower is not connected: execute everything
            // locally rather than merge a partial remote result.
            let mut all: Vec<Transaction> = assignment
                .per_follower
                .values()
                .flat_map(|v| v.iter().cloned())
                .collect();
            all.sort_by_key(|t| t.tx_id);
            let (post, outcomes) = execute_shard(&all, state, &self.local_cost);
            let pairs = all.iter().map(|t| t.tx_id).zip(outcomes).collect();
            return Ok((post, pairs));
        }

        struct Expected {
            idx: usize,
            follower_id: u32,
            txns: Vec<Transaction>,
            req_addrs: BTreeSet<Address>,
        }

        let mut pending: BTreeMap<u64, Expected> = BTreeMap::new();
        for (fid, txns) in &assignment.per_follower {
            if txns.is_empty() {
                continue; // zero-assignment followers receive nothing
            }
            let idx = id_to_idx[fid];
            let (slice, req_addrs) = build_slice(txns, state, deps);
            let rid = self.request_id();
            let req = Message::ExecuteShardsReq {
                block_number,
                txns: txns.clone(),
                state_slice: slice,
            };
            self.send_to(idx, rid, &req)?;
            pending.insert(
                rid,
                Expected {
                    idx,
                    follower_id: *fid,
                    txns: txns.clone(),
                    req_addrs,
                },
            );
        }

        let deadline = Instant::now() + self.exec_timeout;
        let mut responses: Vec<(Expected, StateSlice, Vec<ExecOutcome>)> = Vec::new();
        while !pending.is_empty() {
            let simple: BTreeMap<u64, usize> =
                pending.iter().map(|(r, e)| (*r, e.idx)).collect();
            let (idx, event) = self.recv_until(deadline, &simple)?;
            match event {
                LinkEvent::Msg(rid, Message::ExecuteShardsResp {
                    block_number: resp_block,
                    state_slice,
                    outcomes,
                }) if pending.contains_key(&rid) => {
                    let exp = &pending[&rid];
                    let follower_id = exp.follower_id;
                    if resp_block != block_number {
                        return Err(DispatchError::Protocol {
                            follower_id,
                            detail: format!(
                                "response for block {resp_block}, expected {block_number}"
                            ),
                        });
                    }
                    if outcomes.len() != exp.txns.len() {
                        return Err(DispatchError::Protocol {
                            follower_id,
                            detail: "outcome count does not match shipped txns".into(),
                        });
                    }
                    // Coverage: exactly request addresses plus creates.
                    let mut want = exp.req_addrs.clone();
                    for tx in &exp.txns {
                        if let Some(c) = tx.creates {
                            want.insert(c);
                        }
                    }
                    let got: BTreeSet<Address> =
                        state_slice.iter().map(|(a, _)| *a).collect();
                    if got != want {
                        return Err(DispatchError::Protocol {
                            follower_id,
                            detail: "response slice does not cover the request".into(),
                        });
                    }
                    let exp = pending.remove(&rid).unwrap();
                    responses.push((exp, state_slice, outcomes));
                }
                other => self.unexpected(idx, &other)?,
            }
        }

        let merged = merge_state(
            state,
            responses.iter().map(|(_, slice, _)| slice.as_slice()),
        )?;
        let mut pairs: Vec<(u64, ExecOutcome)> = responses
            .into_iter()
            .flat_map(|(exp, _, outcomes)| {
                exp.txns
                    .into_iter()
                    .map(|t| t.tx_id)
                    .zip(outcomes)
                    .collect::<Vec<_>>()
            })
            .collect();
        pairs.sort_by_key(|(id, _)| *id);
        Ok((merged, pairs))
    }

    /// Partitioned nonce search across live followers (start = position,
    /// stride = live count); returns the first verified nonce and cancels
    /// the rest. With no followers the leader searches locally.
    pub fn dispatch_mining(
        &mut self,
        block: &Block,
        target: &Difficulty,
    ) -> Result<u64, DispatchError> {
        self.drain_events();
        let live: Vec<usize> = (0..self.links.len())
            .filter(|&i| self.links[i].alive)
            .collect();

        if live.is_empty() {
            let nonce = search_nonce(
                block,
                target,
                SearchPartition::whole(),
                &CancelFlag::new(),
            )
            .map_err(|_| DispatchError::Exhausted)?
            .expect("uncancelled whole-space search returns a nonce");
            return Ok(nonce);
        }

        let stride = live.len() as u64;
        let mut pending: BTreeMap<u64, usize> = BTreeMap::new();
        for (pos, idx) in live.iter().enumerate() {
            let rid = self.request_id();
            let req = Message::MineReq {
                block: block.clone(),
                target: *target,
                part: SearchPartition::new(pos as u64, stride),
            };
            self.send_to(*idx, rid, &req)?;
            pending.insert(rid, *idx);
        }

        let deadline = Instant::now() + self.mine_timeout;
        loop {
            let (idx, event) = self.recv_until(deadline, &pending)?;
            match event {
                LinkEvent::Msg(_, Message::MineFound {
                    block_number,
                    nonce,
                }) => {
                    if block_number != block.number {
                        continue; // stale result for an earlier block
                    }
                    let mut sealed = block.clone();
                    sealed.nonce = nonce;
                    if !check_pow(&sealed, target) {
                        self.faulty_events.push((
                            self.links[idx].follower_id,
                            format!("claimed nonce {nonce} fails verification"),
                        ));
                        continue;
                    }
                    self.broadcast_cancel(block.number);
                    return Ok(nonce);
                }
                other => {
                    // A follower dying mid-search leaves its residue class
                    // unswept; fail fast rather than risk an unbounded wait.
                    self.unexpected(idx, &other)?;
                }
            }
        }
    }

    fn broadcast_cancel(&mut self, block_number: u64) {
        let cancel = Message::MineCancel { block_number };
        let payload = cancel.encode();
        let rid = self.request_id();
        for link in &mut self.links {
            if link.alive {
                // Best-effort: a follower lost after the win does not void it.
                let _ = write_frame(&mut link.writer, cancel.kind(), rid, &payload);
            }
        }
    }
}

impl Drop for Leader {
    fn drop(&mut self) {
        for link in &self.links {
            (link.closer)();
        }
    }
}

/// Addresses a transaction needs shipped: the dependency set (per mode)
/// plus its `creates` address pre-provisioned as a default account.
fn slice_addresses(tx: &Transaction, deps: DepsMode) -> Vec<Address> {
    let mut addrs = touched_addresses_lenient(tx, deps);
    if let Some(c) = tx.creates {
        if !addrs.contains(&c) {
            addrs.push(c);
        }
    }
    addrs
}

fn build_slice(
    txns: &[Transaction],
    state: &WorldState,
    deps: DepsMode,
) -> (StateSlice, BTreeSet<Address>) {
    let mut addrs: BTreeSet<Address> = BTreeSet::new();
    for tx in txns {
        addrs.extend(slice_addresses(tx, deps));
    }
    // Ship each account with storage narrowed to the slots this request's
    // calls can read (always under tx.to). Contracts accumulate storage
    // without bound, so shipping whole maps would make dispatch cost grow
    // with chain age instead of block size. Written slots need no shipping:
    // their post-values travel back in the response slice.
    let mut reads: BTreeMap<Address, BTreeSet<[u8; 32]>> = BTreeMap::new();
    for tx in txns {
        if tx.is_contract_call() {
            reads.entry(tx.to).or_default().extend(storage_reads(tx));
        }
    }
    let slice = addrs
        .iter()
        .map(|a| {
            let narrowed = match (state.accounts.get(a), reads.get(a)) {
                (None, _) => Account::default(),
                (Some(acct), None) => Account::with_balance(acct.balance),
                (Some(acct), Some(keys)) => Account {
                    balance: acct.balance,
                    storage: keys
                        .iter()
                        .filter_map(|k| acct.storage.get(k).map(|v| (*k, *v)))
                        .collect(),
                },
            };
            (*a, narrowed)
        })
        .collect();
    (slice, addrs)
}

/// Overlay response slices onto a base state. Responses must touch disjoint
/// address sets (guaranteed for honest followers by shard independence);
/// the result is therefore independent of response order.
///
/// The overlay is per account: the response balance replaces the base
/// balance, and response storage entries are unioned over the base map.
/// That union is exact because contract rules never remove slots, a failed
/// transaction restores exactly the shipped subset, and responses echo
/// every shipped slot - so a slot absent from a response was never shipped
/// and never touched, and its base value must survive. Accounts that end
/// up fully default are normalized to absence.
pub fn merge_state<'a>(
    base: &WorldState,
    responses: impl Iterator<Item = &'a [(Address, Account)]>,
) -> Result<WorldState, DispatchError> {
    let mut merged = base.clone();
    let mut seen: BTreeSet<Address> = BTreeSet::new();
    for slice in responses {
        for (addr, acct) in slice {
            if !seen.insert(*addr) {
                return Err(DispatchError::MergeConflict(*addr));
            }
            let entry = merged.accounts.entry(*addr).or_default();
            entry.balance = acct.balance;
            for (k, v) in &acct.storage {
                entry.storage.insert(*k, *v);
            }
            if entry.is_default() {
                merged.accounts.remove(addr);
            }
        }
    }
    Ok(merged)
}
