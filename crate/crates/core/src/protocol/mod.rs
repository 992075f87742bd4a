//! Wire protocol and the leader/follower service endpoints.
//!
//! Frames are length-prefixed: u32 big-endian length, u8 kind, u64
//! big-endian request id, then the payload in canonical encoding. The same
//! code runs over TCP streams and over the in-memory duplex pipes used by
//! tests and the in-process benchmark harness.

pub mod follower;
pub mod frame;
pub mod harness;
pub mod leader;
pub mod messages;
pub mod pipe;

use std::io::{self, Read, Write};

use thiserror::Error;

pub use follower::{listen, serve, FollowerConfig};
pub use frame::{read_frame, write_frame, Envelope, FrameError, MAX_FRAME};
pub use harness::LocalCommunity;
pub use leader::{merge_state, DispatchError, Leader};
pub use messages::Message;

/// A reliable byte stream the protocol can run over. `try_clone` must yield
/// an independently usable handle to the same stream (reads and writes may
/// then proceed from different threads) and `shutdown` must unblock any
/// thread sitting in a read.
pub trait Transport: Read + Write + Send + 'static {
    fn try_clone(&self) -> io::Result<Self>
    where
        Self: Sized;
    fn shutdown(&self) -> io::Result<()>;
}

impl Transport for std::net::TcpStream {
    fn try_clone(&self) -> io::Result<Self> {
        std::net::TcpStream::try_clone(self)
    }

    fn shutdown(&self) -> io::Result<()> {
        match std::net::TcpStream::shutdown(self, std::net::Shutdown::Both) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == io::ErrorKind::NotConnected => Ok(()),
            Err(e) => Err(e),
        }
    }
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("payload: {0}")]
    Wire(#[from] crate::codec::WireError),
    #[error("unknown message kind {0}")]
    UnknownKind(u8),
    #[error("unexpected {got} message in state {state}")]
    Unexpected { got: &'static str, state: &'static str },
    #[error("state slice is missing account {0} touched during execution")]
    SliceMiss(crate::types::Address),
    #[error(transparent)]
    Io(#[from] io::Error),
}
