//! Length-prefixed framing.
//!
//! On the wire: u32 big-endian `length`, then `length` bytes comprising the
//! u8 kind, u64 big-endian request id, and the payload. A frame claiming
//! more than [`MAX_FRAME`] bytes (or fewer than the 9-byte header) is a
//! protocol violation; the connection is dropped rather than trusted.

use std::io::{self, Read, Write};

use thiserror::Error;

/// Upper bound on the post-length portion of one frame.
pub const MAX_FRAME: u32 = 64 * 1024 * 1024;

/// Bytes of kind + request_id inside the length-counted region.
const HEADER: u32 = 1 + 8;

#[derive(Debug)]
pub struct Envelope {
    pub kind: u8,
    pub request_id: u64,
    pub payload: Vec<u8>,
}

#[derive(Debug, Error)]
pub enum FrameError {
    /// Peer closed cleanly between frames.
    #[error("connection closed")]
    Closed,
    /// Stream ended inside a frame.
    #[error("connection closed mid-frame")]
    Truncated,
    #[error("frame length {0} exceeds maximum {MAX_FRAME}")]
    Oversized(u32),
    #[error("frame length {0} below the {HEADER}-byte header")]
    Undersized(u32),
    #[error(transparent)]
    Io(io::Error),
}

impl FrameError {
    /// True for the errors a server treats as a peer protocol violation
    /// (as opposed to a clean close).
    pub fn is_violation(&self) -> bool {
        !matches!(self, FrameError::Closed)
    }
}

pub fn write_frame(
    w: &mut impl Write,
    kind: u8,
    request_id: u64,
    payload: &[u8],
) -> io::Result<()> {
    let length = HEADER + payload.len() as u32;
    debug_assert!(length <= MAX_FRAME);
    let mut buf = Vec::with_capacity(4 + length as usize);
    buf.extend_from_slice(&length.to_be_bytes());
    buf.push(kind);
    buf.extend_from_slice(&request_id.to_be_bytes());
    buf.extend_from_slice(payload);
    w.write_all(&buf)?;
    w.flush()
}

/// Read one frame. A clean EOF before any length byte is [`FrameError::Closed`];
/// EOF anywhere later is [`FrameError::Truncated`].
pub fn read_frame(r: &mut impl Read) -> Result<Envelope, FrameError> {
    let mut len_buf = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut len_buf[got..]) {
            Ok(0) => {
                return Err(if got == 0 {
                    FrameError::Closed
                } else {
                    FrameError::Truncated
                });
            }
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(FrameError::Io(e)),
        }
    }
    let length = u32::from_be_bytes(len_buf);
    if length > MAX_FRAME {
        return Err(FrameError::Oversized(length));
    }
    if length < HEADER {
        return Err(FrameError::Undersized(length));
    }
    let mut body = vec![0u8; length as usize];
    r.read_exact(&mut body).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            FrameError::Truncated
        } else {
            FrameError::Io(e)
        }
    })?;
    Ok(Envelope {
        kind: body[0],
        request_id: u64::from_be_bytes(body[1..9].try_into().unwrap()),
        payload: body[9..].to_vec(),
    })
}
