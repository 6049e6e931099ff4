//! Loopback plumbing: an intercepting proxy and a raw-bytes client.

use std::io::{self, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use hcie::transfer::{read_frame, ErrPayload, ErrorCode, Frame, FrameError, FrameKind};

/// Forwards one connection to `upstream`, passing every client byte through
/// `tamper(offset, byte)` and recording both directions.
pub struct Proxy {
    pub addr: SocketAddr,
    capture: Arc<Mutex<Vec<u8>>>,
    thread: Option<JoinHandle<()>>,
}

impl Proxy {
    pub fn start(
        upstream: SocketAddr,
        mut tamper: impl FnMut(usize, &mut u8) + Send + 'static,
    ) -> Proxy {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let capture = Arc::new(Mutex::new(Vec::new()));
        let cap = Arc::clone(&capture);
        let thread = thread::spawn(move || {
            let (mut client, _) = listener.accept().unwrap();
            let mut server = TcpStream::connect(upstream).unwrap();
            let (mut client_w, mut server_r) =
                (client.try_clone().unwrap(), server.try_clone().unwrap());
            let cap_back = Arc::clone(&cap);
            let back = thread::spawn(move || {
                let mut buf = [0u8; 8192];
                while let Ok(n) = server_r.read(&mut buf) {
                    if n == 0 {
                        break;
                    }
                    cap_back.lock().unwrap().extend_from_slice(&buf[..n]);
                    if client_w.write_all(&buf[..n]).is_err() {
                        break;
                    }
                }
                let _ = client_w.shutdown(Shutdown::Write);
            });
            let mut buf = [0u8; 8192];
            let mut offset = 0;
            while let Ok(n) = client.read(&mut buf) {
                if n == 0 {
                    break;
                }
                for b in &mut buf[..n] {
                    tamper(offset, b);
                    offset += 1;
                }
                cap.lock().unwrap().extend_from_slice(&buf[..n]);
                if server.write_all(&buf[..n]).is_err() {
                    break;
                }
            }
            let _ = server.shutdown(Shutdown::Write);
            let _ = back.join();
        });
        Proxy {
            addr,
            capture,
            thread: Some(thread),
        }
    }

    /// Waits for the proxied connection to finish and returns the capture.
    pub fn finish(mut self) -> Vec<u8> {
        if let Some(t) = self.thread.take() {
            t.join().unwrap();
        }
        std::mem::take(&mut *self.capture.lock().unwrap())
    }
}

/// What came back after writing raw bytes and half-closing.
#[derive(Debug)]
pub struct Reply {
    pub frames: Vec<Frame>,
    pub elapsed: Duration,
}

impl Reply {
    pub fn error(&self) -> Option<ErrPayload> {
        self.frames
            .iter()
            .find(|f| f.kind == FrameKind::Err)
            .map(|f| ErrPayload::decode(&f.payload))
    }
}

/// Sends `bytes`, half-closes, and reads frames until the server hangs up.
/// Fails if the server answers with something that is not a frame or does
/// not hang up within `limit`.
pub fn poke(addr: SocketAddr, bytes: &[u8], limit: Duration) -> Result<Reply, String> {
    let start = Instant::now();
    let mut s = TcpStream::connect(addr).map_err(|e| e.to_string())?;
    s.set_read_timeout(Some(limit)).unwrap();
    // the server may hang up early; later writes can fail
    let _ = s.write_all(bytes);
    let _ = s.shutdown(Shutdown::Write);
    let mut frames = Vec::new();
    loop {
        match read_frame(&mut s, 1 << 20) {
            Ok(f) => frames.push(f),
            Err(FrameError::ConnectionClosed) => break,
            Err(FrameError::Io(e)) if e.kind() == io::ErrorKind::ConnectionReset => break,
            Err(e) => return Err(format!("after {frames:?}: {e}")),
        }
    }
    Ok(Reply {
        frames,
        elapsed: start.elapsed(),
    })
}

/// A reply is acceptable if it is a prefix of the legal server sequence
/// `OK (ACK | ERR)` or a lone `ERR`, with documented reason codes.
pub fn is_documented(reply: &Reply) -> bool {
    let kinds: Vec<FrameKind> = reply.frames.iter().map(|f| f.kind).collect();
    let shape = matches!(
        kinds[..],
        [] | [FrameKind::Ok]
            | [FrameKind::Err]
            | [FrameKind::Ok, FrameKind::Err]
            | [FrameKind::Ok, FrameKind::Ack]
    );
    shape && reply.error().is_none_or(|e| e.code != ErrorCode::Other)
}
