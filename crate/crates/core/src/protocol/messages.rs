//! Message bodies carried inside frames.
//!
//! Kind codes: 1 ExecuteShardsReq, 2 ExecuteShardsResp, 3 MineReq,
//! 4 MineFound, 5 MineCancel, 6 Ping, 7 Pong. State slices are explicit
//! (address, account) lists — default accounts included — so response
//! coverage is checkable against the request.

use std::collections::BTreeSet;

use crate::codec::{
    canonical_encode, decode_block_from, put_bytes, put_u128, put_u32, put_u64, Reader,
    WireError,
};
use crate::engine::{ExecOutcome, ExecStatus};
use crate::pow::{Difficulty, SearchPartition};
use crate::types::{Account, Address, Block};

use super::ProtocolError;

pub const KIND_EXECUTE_REQ: u8 = 1;
pub const KIND_EXECUTE_RESP: u8 = 2;
pub const KIND_MINE_REQ: u8 = 3;
pub const KIND_MINE_FOUND: u8 = 4;
pub const KIND_MINE_CANCEL: u8 = 5;
pub const KIND_PING: u8 = 6;
pub const KIND_PONG: u8 = 7;

/// State shipped with a request or response: (address, account) pairs in
/// strictly ascending address order.
pub type StateSlice = Vec<(Address, Account)>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Message {
    ExecuteShardsReq {
        block_number: u64,
        txns: Vec<crate::types::Transaction>,
        state_slice: StateSlice,
    },
    ExecuteShardsResp {
        block_number: u64,
        state_slice: StateSlice,
        outcomes: Vec<ExecOutcome>,
    },
    MineReq {
        /// Nonce-less candidate; the searcher appends nonces itself.
        block: Block,
        target: Difficulty,
        part: SearchPartition,
    },
    MineFound {
        block_number: u64,
        nonce: u64,
    },
    MineCancel {
        block_number: u64,
    },
    Ping {
        follower_id: u32,
    },
    Pong {
        follower_id: u32,
    },
}

impl Message {
    pub fn kind(&self) -> u8 {
        match self {
            Message::ExecuteShardsReq { .. } => KIND_EXECUTE_REQ,
            Message::ExecuteShardsResp { .. } => KIND_EXECUTE_RESP,
            Message::MineReq { .. } => KIND_MINE_REQ,
            Message::MineFound { .. } => KIND_MINE_FOUND,
            Message::MineCancel { .. } => KIND_MINE_CANCEL,
            Message::Ping { .. } => KIND_PING,
            Message::Pong { .. } => KIND_PONG,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Message::ExecuteShardsReq { .. } => "ExecuteShardsReq",
            Message::ExecuteShardsResp { .. } => "ExecuteShardsResp",
            Message::MineReq { .. } => "MineReq",
            Message::MineFound { .. } => "MineFound",
            Message::MineCancel { .. } => "MineCancel",
            Message::Ping { .. } => "Ping",
            Message::Pong { .. } => "Pong",
        }
    }
}

fn encode_account(out: &mut Vec<u8>, acct: &Account) {
    put_u128(out, acct.balance);
    put_u32(out, acct.storage.len() as u32);
    for (k, v) in &acct.storage {
        out.extend_from_slice(k);
        out.extend_from_slice(v);
    }
}

fn decode_account(r: &mut Reader<'_>) -> Result<Account, WireError> {
    let balance = r.u128("account.balance")?;
    let n = r.count("account.storage")?;
    let mut storage = std::collections::BTreeMap::new();
    let mut last: Option<[u8; 32]> = None;
    for _ in 0..n {
        let k = r.hash("storage.key")?;
        let v = r.hash("storage.value")?;
        if last.is_some_and(|p| p >= k) {
            return Err(WireError::UnsortedKeys("account.storage"));
        }
        last = Some(k);
        storage.insert(k, v);
    }
    Ok(Account { balance, storage })
}

fn encode_slice(out: &mut Vec<u8>, slice: &StateSlice) {
    put_u32(out, slice.len() as u32);
    for (addr, acct) in slice {
        out.extend_from_slice(addr.as_bytes());
        encode_account(out, acct);
    }
}

fn decode_slice(r: &mut Reader<'_>) -> Result<StateSlice, WireError> {
    let n = r.count("state_slice")?;
    let mut slice = Vec::with_capacity(n);
    let mut last: Option<Address> = None;
    for _ in 0..n {
        let addr = r.address("slice.address")?;
        if last.is_some_and(|p| p >= addr) {
            return Err(WireError::UnsortedKeys("state_slice"));
        }
        last = Some(addr);
        slice.push((addr, decode_account(r)?));
    }
    Ok(slice)
}

fn encode_outcome(out: &mut Vec<u8>, o: &ExecOutcome) {
    out.push(match o.status {
        ExecStatus::Applied => 0,
        ExecStatus::Failed => 1,
    });
    match &o.reason {
        None => out.push(0),
        Some(s) => {
            out.push(1);
            put_bytes(out, s.as_bytes());
        }
    }
    put_u32(out, o.touched.len() as u32);
    for a in &o.touched {
        out.extend_from_slice(a.as_bytes());
    }
}

fn decode_outcome(r: &mut Reader<'_>) -> Result<ExecOutcome, WireError> {
    let status = match r.u8("outcome.status")? {
        0 => ExecStatus::Applied,
        1 => ExecStatus::Failed,
        b => return Err(WireError::BadPresence(b)),
    };
    let reason = if r.presence("outcome.reason")? {
        let bytes = r.bytes("outcome.reason")?;
        Some(String::from_utf8_lossy(&bytes).into_owned())
    } else {
        None
    };
    let n = r.count("outcome.touched")?;
    let mut touched = BTreeSet::new();
    for _ in 0..n {
        touched.insert(r.address("outcome.touched")?);
    }
    Ok(ExecOutcome {
        status,
        reason,
        touched,
    })
}

impl Message {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            Message::ExecuteShardsReq {
                block_number,
                txns,
                state_slice,
            } => {
                put_u64(&mut out, *block_number);
                put_u32(&mut out, txns.len() as u32);
                for tx in txns {
                    crate::codec::encode_transaction(&mut out, tx);
                }
                encode_slice(&mut out, state_slice);
            }
            Message::ExecuteShardsResp {
                block_number,
                state_slice,
                outcomes,
            } => {
                put_u64(&mut out, *block_number);
                encode_slice(&mut out, state_slice);
                put_u32(&mut out, outcomes.len() as u32);
                for o in outcomes {
                    encode_outcome(&mut out, o);
                }
            }
            Message::MineReq {
                block,
                target,
                part,
            } => {
                out.extend_from_slice(&canonical_encode(block, false));
                out.extend_from_slice(&target.target);
                put_u64(&mut out, part.start);
                put_u64(&mut out, part.stride);
            }
            Message::MineFound {
                block_number,
                nonce,
            } => {
                put_u64(&mut out, *block_number);
                put_u64(&mut out, *nonce);
            }
            Message::MineCancel { block_number } => {
                put_u64(&mut out, *block_number);
            }
            Message::Ping { follower_id } | Message::Pong { follower_id } => {
                put_u32(&mut out, *follower_id);
            }
        }
        out
    }

    pub fn decode(kind: u8, payload: &[u8]) -> Result<Message, ProtocolError> {
        let mut r = Reader::new(payload);
        let msg = match kind {
            KIND_EXECUTE_REQ => {
                let block_number = r.u64("req.block_number")?;
                let n = r.count("req.txns")?;
                let mut txns = Vec::with_capacity(n);
                for _ in 0..n {
                    txns.push(crate::codec::decode_transaction(&mut r)?);
                }
                let state_slice = decode_slice(&mut r)?;
                Message::ExecuteShardsReq {
                    block_number,
                    txns,
                    state_slice,
                }
            }
            KIND_EXECUTE_RESP => {
                let block_number = r.u64("resp.block_number")?;
                let state_slice = decode_slice(&mut r)?;
                let n = r.count("resp.outcomes")?;
                let mut outcomes = Vec::with_capacity(n);
                for _ in 0..n {
                    outcomes.push(decode_outcome(&mut r)?);
                }
                Message::ExecuteShardsResp {
                    block_number,
                    state_slice,
                    outcomes,
                }
            }
            KIND_MINE_REQ => {
                let block = decode_block_from(&mut r, false)?;
                let target = Difficulty {
                    target: r.hash("mine.target")?,
                };
                let start = r.u64("mine.start")?;
                let stride = r.u64("mine.stride")?;
                if stride == 0 || start >= stride {
                    return Err(ProtocolError::Wire(WireError::BadPresence(0)));
                }
                Message::MineReq {
                    block,
                    target,
                    part: SearchPartition { start, stride },
                }
            }
            KIND_MINE_FOUND => Message::MineFound {
                block_number: r.u64("found.block_number")?,
                nonce: r.u64("found.nonce")?,
            },
            KIND_MINE_CANCEL => Message::MineCancel {
                block_number: r.u64("cancel.block_number")?,
            },
            KIND_PING => Message::Ping {
                follower_id: r.u32("ping.follower_id")?,
            },
            KIND_PONG => Message::Pong {
                follower_id: r.u32("pong.follower_id")?,
            },
            other => return Err(ProtocolError::UnknownKind(other)),
        };
        r.finish()?;
        Ok(msg)
    }
}
