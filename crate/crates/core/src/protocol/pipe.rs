//! In-memory duplex byte stream with the same blocking semantics as a
//! socket: reads block until data or EOF, writes fail after close, and a
//! detached [`PipeShutdown`] handle can sever the connection from outside —
//! which is how tests simulate a follower dying mid-request.

use std::collections::VecDeque;
use std::io::{self, Read, Write};
use std::sync::{Arc, Condvar, Mutex};

use super::Transport;

#[derive(Default)]
struct Channel {
    buf: Mutex<ChannelBuf>,
    readable: Condvar,
}

#[derive(Default)]
struct ChannelBuf {
    data: VecDeque<u8>,
    closed: bool,
}

impl Channel {
    fn close(&self) {
        self.buf.lock().unwrap().closed = true;
        self.readable.notify_all();
    }
}

/// One end of a duplex pipe. Clones share the same underlying stream, like
/// `TcpStream::try_clone`.
#[derive(Clone)]
pub struct PipeEnd {
    rx: Arc<Channel>,
    tx: Arc<Channel>,
}

/// Handle that severs both directions of a pipe, independent of either end.
#[derive(Clone)]
pub struct PipeShutdown {
    a: Arc<Channel>,
    b: Arc<Channel>,
}

impl PipeShutdown {
    pub fn kill(&self) {
        self.a.close();
        self.b.close();
    }
}

/// Create a connected pair of pipe ends.
pub fn duplex() -> (PipeEnd, PipeEnd) {
    let ab = Arc::new(Channel::default());
    let ba = Arc::new(Channel::default());
    (
        PipeEnd {
            rx: ba.clone(),
            tx: ab.clone(),
        },
        PipeEnd { rx: ab, tx: ba },
    )
}

impl PipeEnd {
    pub fn shutdown_handle(&self) -> PipeShutdown {
        PipeShutdown {
            a: self.rx.clone(),
            b: self.tx.clone(),
        }
    }

    pub fn close(&self) {
        self.rx.close();
        self.tx.close();
    }
}

impl Read for PipeEnd {
    fn read(&mut self, out: &mut [u8]) -> io::Result<usize> {
        if out.is_empty() {
            return Ok(0);
        }
        let mut buf = self.rx.buf.lock().unwrap();
        while buf.data.is_empty() && !buf.closed {
            buf = self.rx.readable.wait(buf).unwrap();
        }
        if buf.data.is_empty() {
            return Ok(0); // closed and drained: EOF
        }
        let n = out.len().min(buf.data.len());
        for slot in out.iter_mut().take(n) {
            *slot = buf.data.pop_front().unwrap();
        }
        Ok(n)
    }
}

impl Write for PipeEnd {
    fn write(&mut self, data: &[u8]) -> io::Result<usize> {
        let mut buf = self.tx.buf.lock().unwrap();
        if buf.closed {
            return Err(io::Error::new(io::ErrorKind::BrokenPipe, "pipe closed"));
        }
        buf.data.extend(data);
        self.tx.readable.notify_all();
        Ok(data.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

impl Transport for PipeEnd {
    fn try_clone(&self) -> io::Result<Self> {
        Ok(self.clone())
    }

    fn shutdown(&self) -> io::Result<()> {
        self.close();
        Ok(())
    }
}
