//! In-process community: follower services on local threads, wired to the
//! leader over in-memory pipes speaking the real wire protocol. This is the
//! default rig for tests and single-machine benchmarks; multi-machine runs
//! use the same leader/follower code over TCP.

use crate::engine::SyntheticCost;

use super::follower::{serve, FollowerConfig};
use super::leader::Leader;
use super::pipe::{duplex, PipeShutdown};
use super::ProtocolError;

struct LocalFollower {
    follower_id: u32,
    shutdown: PipeShutdown,
    thread: Option<std::thread::JoinHandle<Result<(), ProtocolError>>>,
}

/// A leader plus `count` in-process followers.
pub struct LocalCommunity {
    pub leader: Leader,
    followers: Vec<LocalFollower>,
}

impl LocalCommunity {
    pub fn new(count: u32, cost: SyntheticCost) -> Self {
        let mut leader = Leader::new();
        let mut followers = Vec::new();
        for follower_id in 0..count {
            let (leader_end, follower_end) = duplex();
            let shutdown = follower_end.shutdown_handle();
            let config = FollowerConfig { follower_id, cost };
            let thread = std::thread::spawn(move || serve(follower_end, config));
            leader
                .add_follower(follower_id, leader_end)
                .expect("pipe clone cannot fail");
            followers.push(LocalFollower {
                follower_id,
                shutdown,
                thread: Some(thread),
            });
        }
        LocalCommunity { leader, followers }
    }

    pub fn follower_count(&self) -> u32 {
        self.followers.len() as u32
    }

    /// Sever a follower's connection abruptly, as if its process died.
    pub fn kill_follower(&mut self, follower_id: u32) {
        for f in &mut self.followers {
            if f.follower_id == follower_id {
                f.shutdown.kill();
                if let Some(t) = f.thread.take() {
                    let _ = t.join();
                }
            }
        }
    }

    /// Shut everything down and surface any follower-side protocol errors.
    pub fn shutdown(mut self) -> Vec<(u32, ProtocolError)> {
        let mut errors = Vec::new();
        for f in &mut self.followers {
            f.shutdown.kill();
            if let Some(t) = f.thread.take() {
                if let Ok(Err(e)) = t.join() {
                    errors.push((f.follower_id, e));
                }
            }
        }
        errors
    }
}

impl Drop for LocalCommunity {
    fn drop(&mut self) {
        for f in &mut self.followers {
            f.shutdown.kill();
            if let Some(t) = f.thread.take() {
                let _ = t.join();
            }
        }
    }
}
