//! Follower service: executes shipped shards against shipped state slices
//! and searches assigned nonce partitions, all over one connection.
//!
//! Followers are stateless between requests: every ExecuteShardsReq carries
//! the slice of world state its transactions touch (accounts narrowed to
//! the storage slots their calls can read), and the response covers exactly
//! the request's addresses plus any `creates` addresses.
//! Mining runs on a separate worker thread so a MineCancel arriving on the
//! connection can interrupt the search.

use std::collections::BTreeSet;
use std::sync::{Arc, Mutex};

use crate::engine::{execute_shard, SyntheticCost};
use crate::pow::{search_nonce, CancelFlag, Difficulty, SearchPartition};
use crate::types::{Address, Block, Transaction, WorldState};

use super::frame::{read_frame, write_frame, FrameError};
use super::messages::Message;
use super::{ProtocolError, Transport};

#[derive(Clone, Copy, Debug)]
pub struct FollowerConfig {
    pub follower_id: u32,
    pub cost: SyntheticCost,
}

struct MiningJob {
    block_number: u64,
    cancel: CancelFlag,
    worker: std::thread::JoinHandle<()>,
}

impl MiningJob {
    fn stop(self) {
        self.cancel.cancel();
        let _ = self.worker.join();
    }
}

/// Serve one connection until the peer closes it. Returns Ok on a clean
/// close and the protocol error otherwise; in both cases any mining worker
/// is cancelled before returning. Never panics on malformed input.
pub fn serve<T: Transport>(conn: T, config: FollowerConfig) -> Result<(), ProtocolError> {
    let writer = Arc::new(Mutex::new(conn.try_clone()?));
    let mut reader = conn;
    let mut mining: Option<MiningJob> = None;

    let result = loop {
        let envelope = match read_frame(&mut reader) {
            Ok(env) => env,
            Err(FrameError::Closed) => break Ok(()),
            Err(e) => break Err(ProtocolError::Frame(e)),
        };
        let msg = match Message::decode(envelope.kind, &envelope.payload) {
            Ok(m) => m,
            Err(e) => break Err(e),
        };
        match msg {
            Message::Ping { .. } => {
                let pong = Message::Pong {
                    follower_id: config.follower_id,
                };
                if let Err(e) = send(&writer, envelope.request_id, &pong) {
                    break Err(e);
                }
            }
            Message::ExecuteShardsReq {
                block_number,
                txns,
                state_slice,
            } => {
                match execute_request(&txns, &state_slice, &config.cost) {
                    Ok((slice, outcomes)) => {
                        let resp = Message::ExecuteShardsResp {
                            block_number,
                            state_slice: slice,
                            outcomes,
                        };
                        if let Err(e) = send(&writer, envelope.request_id, &resp) {
                            break Err(e);
                        }
                    }
                    Err(e) => break Err(e),
                }
            }
            Message::MineReq {
                block,
                target,
                part,
            } => {
                if let Some(job) = mining.take() {
                    job.stop();
                }
                mining = Some(start_mining(
                    block,
                    target,
                    part,
                    writer.clone(),
                    envelope.request_id,
                ));
            }
            Message::MineCancel { block_number } => {
                if mining.as_ref().is_some_and(|j| j.block_number == block_number) {
                    mining.take().unwrap().stop();
                }
            }
            other => {
                break Err(ProtocolError::Unexpected {
                    got: other.name(),
                    state: "follower",
                })
            }
        }
    };

    if let Some(job) = mining.take() {
        job.stop();
    }
    result
}

fn send<T: Transport>(
    writer: &Arc<Mutex<T>>,
    request_id: u64,
    msg: &Message,
) -> Result<(), ProtocolError> {
    let mut w = writer.lock().unwrap();
    write_frame(&mut *w, msg.kind(), request_id, &msg.encode())?;
    Ok(())
}

/// Execute the shipped transactions against a state built from the slice.
/// The response covers exactly the request's addresses plus `creates`
/// addresses; touching anything outside that set is a protocol violation
/// (the leader shipped an insufficient slice).
fn execute_request(
    txns: &[Transaction],
    state_slice: &[(Address, crate::types::Account)],
    cost: &SyntheticCost,
) -> Result<(Vec<(Address, crate::types::Account)>, Vec<crate::engine::ExecOutcome>), ProtocolError>
{
    let mut state = WorldState::new();
    let mut covered: BTreeSet<Address> = BTreeSet::new();
    for (addr, acct) in state_slice {
        state.accounts.insert(*addr, acct.clone());
        covered.insert(*addr);
    }
    for tx in txns {
        if let Some(c) = tx.creates {
            covered.insert(c);
        }
    }

    let (post, outcomes) = execute_shard(txns, &state, cost);

    for out in &outcomes {
        for touched in &out.touched {
            if !covered.contains(touched) {
                return Err(ProtocolError::SliceMiss(*touched));
            }
        }
    }

    let slice = covered
        .into_iter()
        .map(|addr| (addr, post.account(&addr)))
        .collect();
    Ok((slice, outcomes))
}

fn start_mining<T: Transport>(
    block: Block,
    target: Difficulty,
    part: SearchPartition,
    writer: Arc<Mutex<T>>,
    request_id: u64,
) -> MiningJob {
    let cancel = CancelFlag::new();
    let flag = cancel.clone();
    let block_number = block.number;
    let worker = std::thread::spawn(move || {
        if let Ok(Some(nonce)) = search_nonce(&block, &target, part, &flag) {
            let found = Message::MineFound {
                block_number,
                nonce,
            };
            // A dead connection here means the leader is gone; the result
            // is simply lost.
            let _ = send(&writer, request_id, &found);
        }
    });
    MiningJob {
        block_number,
        cancel,
        worker,
    }
}

/// Bind and serve connections sequentially, one leader at a time. Runs until
/// the listener fails; per-connection protocol errors just close that
/// connection.
pub fn listen(addr: &str, config: FollowerConfig) -> std::io::Result<()> {
    let listener = std::net::TcpListener::bind(addr)?;
    loop {
        let (conn, _) = listener.accept()?;
        conn.set_nodelay(true).ok();
        let _ = serve(conn, config);
    }
}
