use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use log::{info, warn};
use thiserror::Error;

use super::frame::{
    read_frame, write_frame, AckPayload, ErrorCode, FilePayload, Frame, FrameError, FrameKind,
    DEFAULT_MAX_FRAME, HELLO_PAYLOAD,
};
use super::DEFAULT_TIMEOUT;
use crate::envelope::{Envelope, OpenError};
use crate::rsa::{RsaError, RsaPrivateKey, RsaPublicKey};
use crate::sha256::{sha256, Digest};

/// Public keys of senders the server will accept, by fingerprint.
#[derive(Debug, Clone, Default)]
pub struct TrustStore {
    keys: HashMap<Digest, RsaPublicKey>,
}

#[derive(Debug, Error)]
pub enum TrustStoreError {
    #[error("cannot read {}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Key { path: PathBuf, source: RsaError },
}

impl TrustStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: RsaPublicKey) -> Digest {
        let fp = key.fingerprint();
        self.keys.insert(fp, key);
        fp
    }

    pub fn get(&self, fingerprint: &Digest) -> Option<&RsaPublicKey> {
        self.keys.get(fingerprint)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Loads every `*.pub` file in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, TrustStoreError> {
        let io_err = |path: &Path| {
            let path = path.to_path_buf();
            move |source| TrustStoreError::Io { path, source }
        };
        let mut store = Self::new();
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(io_err(dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "pub"))
            .collect();
        paths.sort();
        for path in paths {
            let text = fs::read_to_string(&path).map_err(io_err(&path))?;
            let key = RsaPublicKey::from_key_file(&text)
                .map_err(|source| TrustStoreError::Key { path, source })?;
            store.insert(key);
        }
        Ok(store)
    }
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    /// Per-connection inactivity timeout.
    pub timeout: Duration,
    pub max_frame: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            timeout: DEFAULT_TIMEOUT,
            max_frame: DEFAULT_MAX_FRAME,
        }
    }
}

/// Why a session ended without storing a file.
#[derive(Debug, Error)]
pub enum SessionError {
    #[error("{0}")]
    Frame(#[from] FrameError),
    #[error("unsupported protocol version")]
    Version,
    #[error("expected {expected:?}, got {got:?}")]
    UnexpectedFrame { expected: FrameKind, got: FrameKind },
    #[error("malformed envelope: {0}")]
    Malformed(String),
    #[error("unknown sender")]
    UnknownSender,
    #[error("{0}")]
    Open(OpenError),
    #[error("storage: {0}")]
    Storage(io::Error),
}

impl SessionError {
    fn code(&self) -> ErrorCode {
        match self {
            SessionError::Frame(FrameError::TooLarge { .. }) => ErrorCode::FrameTooLarge,
            SessionError::Frame(FrameError::Timeout) => ErrorCode::Timeout,
            SessionError::Frame(FrameError::InvalidName(_)) => ErrorCode::BadName,
            SessionError::Frame(_) | SessionError::UnexpectedFrame { .. } => ErrorCode::Protocol,
            SessionError::Version => ErrorCode::Version,
            SessionError::Malformed(_) => ErrorCode::Malformed,
            SessionError::UnknownSender => ErrorCode::UnknownSender,
            SessionError::Open(e) => match e {
                OpenError::Malformed(_) => ErrorCode::Malformed,
                OpenError::SenderMismatch => ErrorCode::UnknownSender,
                OpenError::Decapsulation => ErrorCode::Decapsulation,
                OpenError::Decryption(_) => ErrorCode::Decryption,
                OpenError::LengthMismatch { .. } => ErrorCode::Length,
                OpenError::Signature => ErrorCode::Signature,
            },
            SessionError::Storage(_) => ErrorCode::Storage,
        }
    }

    fn reason(&self) -> String {
        match self {
            SessionError::Version => "version".to_string(),
            other => other.to_string(),
        }
    }
}

/// A file accepted and written by the server.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Received {
    pub path: PathBuf,
    pub digest: Digest,
    pub len: u64,
}

/// Receiving side: one file per connection.
pub struct Server {
    recipient: RsaPrivateKey,
    trust: TrustStore,
    out_dir: PathBuf,
    config: ServerConfig,
}

impl Server {
    pub fn new(recipient: RsaPrivateKey, trust: TrustStore, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            recipient,
            trust,
            out_dir: out_dir.into(),
            config: ServerConfig::default(),
        }
    }

    pub fn with_config(mut self, config: ServerConfig) -> Self {
        self.config = config;
        self
    }

    /// Runs one session to completion. On failure an ERR frame is sent
    /// (best effort) before the connection is dropped.
    pub fn handle(&self, mut stream: TcpStream) -> Result<Received, SessionError> {
        let result = self.session(&mut stream);
        if let Err(e) = &result {
            let _ = write_frame(&mut stream, &Frame::error(e.code(), &e.reason()));
        }
        result
    }

    fn session(&self, stream: &mut TcpStream) -> Result<Received, SessionError> {
        stream
            .set_read_timeout(Some(self.config.timeout))
            .and_then(|_| stream.set_write_timeout(Some(self.config.timeout)))
            .map_err(FrameError::from)?;

        let hello = read_frame(stream, self.config.max_frame)?;
        expect(&hello, FrameKind::Hello)?;
        if hello.payload != HELLO_PAYLOAD {
            return Err(SessionError::Version);
        }
        write_frame(stream, &Frame::ok())?;

        let file = read_frame(stream, self.config.max_frame)?;
        expect(&file, FrameKind::File)?;
        let file = FilePayload::decode(&file.payload)?;
        let envelope =
            Envelope::parse(&file.envelope).map_err(|e| SessionError::Malformed(e.to_string()))?;
        let sender = self
            .trust
            .get(&envelope.sender_fingerprint)
            .ok_or(SessionError::UnknownSender)?;
        let plaintext = envelope
            .open(&self.recipient, sender)
            .map_err(SessionError::Open)?;
        let digest = sha256(&plaintext);
        let path = store_atomically(&self.out_dir, &file.name, &plaintext)
            .map_err(SessionError::Storage)?;

        write_frame(
            stream,
            &Frame::new(FrameKind::Ack, AckPayload::ok(digest).encode()),
        )?;
        Ok(Received {
            path,
            digest,
            len: plaintext.len() as u64,
        })
    }

    /// Accepts connections until the listener fails, one at a time.
    pub fn serve(&self, listener: &TcpListener) -> io::Result<()> {
        for stream in listener.incoming() {
            self.handle_logged(stream?);
        }
        Ok(())
    }

    fn handle_logged(&self, stream: TcpStream) {
        let peer = stream.peer_addr().ok();
        match self.handle(stream) {
            Ok(r) => info!("{peer:?}: stored {} ({} bytes)", r.path.display(), r.len),
            Err(e) => warn!("{peer:?}: {e}"),
        }
    }

    /// Serves on a background thread, one thread per connection.
    pub fn spawn(self, listener: TcpListener) -> io::Result<ServerHandle> {
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let server = Arc::new(self);
        let flag = Arc::clone(&stop);
        let thread = thread::spawn(move || {
            for stream in listener.incoming() {
                if flag.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let server = Arc::clone(&server);
                thread::spawn(move || server.handle_logged(stream));
            }
        });
        Ok(ServerHandle {
            addr,
            stop,
            thread: Some(thread),
        })
    }
}

fn expect(frame: &Frame, kind: FrameKind) -> Result<(), SessionError> {
    if frame.kind == kind {
        Ok(())
    } else {
        Err(SessionError::UnexpectedFrame {
            expected: kind,
            got: frame.kind,
        })
    }
}

/// Writes to a temporary file, then links it under the first free name of
/// `name`, `name.1`, `name.2`, … Existing files are never replaced.
fn store_atomically(dir: &Path, name: &str, data: &[u8]) -> io::Result<PathBuf> {
    let tmp = dir.join(format!(".hcie-{:016x}.part", rand::random::<u64>()));
    let result = (|| {
        let mut f = fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&tmp)?;
        f.write_all(data)?;
        f.sync_all()?;
        drop(f);
        for n in 0u64.. {
            let candidate = if n == 0 {
                dir.join(name)
            } else {
                dir.join(format!("{name}.{n}"))
            };
            match fs::hard_link(&tmp, &candidate) {
                Ok(()) => return Ok(candidate),
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(e),
            }
        }
        unreachable!()
    })();
    let _ = fs::remove_file(&tmp);
    result
}

/// Handle to a server started with [`Server::spawn`].
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops accepting; sessions already running finish on their own.
    pub fn shutdown(mut self) {
        self.stop_inner();
    }

    fn stop_inner(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // wake the accept loop
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if self.thread.is_some() {
            self.stop_inner();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collisions_get_numeric_suffixes() {
        let dir = tempfile::tempdir().unwrap();
        let a = store_atomically(dir.path(), "f.txt", b"one").unwrap();
        let b = store_atomically(dir.path(), "f.txt", b"two").unwrap();
        let c = store_atomically(dir.path(), "f.txt", b"three").unwrap();
        assert_eq!(a, dir.path().join("f.txt"));
        assert_eq!(b, dir.path().join("f.txt.1"));
        assert_eq!(c, dir.path().join("f.txt.2"));
        assert_eq!(fs::read(&a).unwrap(), b"one");
        assert_eq!(fs::read(&c).unwrap(), b"three");
        // no temporary files left behind
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 3);
    }

    #[test]
    fn version_reason_text() {
        assert_eq!(SessionError::Version.reason(), "version");
        assert_eq!(SessionError::UnknownSender.reason(), "unknown sender");
        assert_eq!(SessionError::UnknownSender.code(), ErrorCode::UnknownSender);
    }
}
