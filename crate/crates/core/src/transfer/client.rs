use std::fmt;
use std::io;
use std::net::{TcpStream, ToSocketAddrs};
use std::path::{Path, PathBuf};
use std::time::Duration;

use rand::RngCore;
use thiserror::Error;

use super::frame::{
    read_frame, write_frame, AckPayload, ErrPayload, ErrorCode, FilePayload, Frame, FrameError,
    FrameKind, DEFAULT_MAX_FRAME,
};
use super::DEFAULT_TIMEOUT;
use crate::envelope::{seal, SealError};
use crate::hill::DEFAULT_DIM_LOG2;
use crate::rsa::{RsaPrivateKey, RsaPublicKey};
use crate::sha256::sha256;

/// Where in the exchange a transfer failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Read,
    Connect,
    Hello,
    Seal,
    Send,
    Ack,
    Verify,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Read => "read",
            Stage::Connect => "connect",
            Stage::Hello => "hello",
            Stage::Seal => "seal",
            Stage::Send => "send",
            Stage::Ack => "ack",
            Stage::Verify => "verify",
        })
    }
}

#[derive(Debug, Error)]
pub enum TransferError {
    #[error("{stage}: cannot read {}: {source}", path.display())]
    Input {
        stage: Stage,
        path: PathBuf,
        source: io::Error,
    },
    #[error("{stage}: {source}")]
    Io { stage: Stage, source: io::Error },
    #[error("{stage}: {source}")]
    Frame { stage: Stage, source: FrameError },
    #[error("{stage}: server rejected transfer: {}", .error.reason)]
    Rejected { stage: Stage, error: ErrPayload },
    #[error("{stage}: unexpected {kind:?} frame")]
    Unexpected { stage: Stage, kind: FrameKind },
    #[error("{stage}: {source}")]
    Seal { stage: Stage, source: SealError },
    #[error("{stage}: server reported status {status}")]
    Status { stage: Stage, status: u8 },
    #[error("{stage}: acknowledged digest does not match the sent plaintext")]
    DigestMismatch { stage: Stage },
}

impl TransferError {
    pub fn stage(&self) -> Stage {
        match self {
            TransferError::Input { stage, .. }
            | TransferError::Io { stage, .. }
            | TransferError::Frame { stage, .. }
            | TransferError::Rejected { stage, .. }
            | TransferError::Unexpected { stage, .. }
            | TransferError::Seal { stage, .. }
            | TransferError::Status { stage, .. }
            | TransferError::DigestMismatch { stage } => *stage,
        }
    }

    /// Reason code if the server answered with ERR.
    pub fn remote_code(&self) -> Option<ErrorCode> {
        match self {
            TransferError::Rejected { error, .. } => Some(error.code),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SendOptions {
    pub dim_log2: u32,
    pub timeout: Duration,
    pub max_frame: usize,
}

impl Default for SendOptions {
    fn default() -> Self {
        Self {
            dim_log2: DEFAULT_DIM_LOG2,
            timeout: DEFAULT_TIMEOUT,
            max_frame: DEFAULT_MAX_FRAME,
        }
    }
}

/// Seals the file at `path` and delivers it, returning the server's ACK
/// once its digest matches the local plaintext.
pub fn send_file<A: ToSocketAddrs, R: RngCore + ?Sized>(
    addr: A,
    path: &Path,
    recipient: &RsaPublicKey,
    sender: &RsaPrivateKey,
    rng: &mut R,
    options: &SendOptions,
) -> Result<AckPayload, TransferError> {
    let data = std::fs::read(path).map_err(|source| TransferError::Input {
        stage: Stage::Read,
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| TransferError::Input {
            stage: Stage::Read,
            path: path.to_path_buf(),
            source: io::Error::new(io::ErrorKind::InvalidInput, "file name is not UTF-8"),
        })?;
    send_bytes(addr, name, &data, recipient, sender, rng, options)
}

/// Same exchange as [`send_file`], for data already in memory.
pub fn send_bytes<A: ToSocketAddrs, R: RngCore + ?Sized>(
    addr: A,
    name: &str,
    data: &[u8],
    recipient: &RsaPublicKey,
    sender: &RsaPrivateKey,
    rng: &mut R,
    options: &SendOptions,
) -> Result<AckPayload, TransferError> {
    let frame_err = |stage| move |source| TransferError::Frame { stage, source };

    let mut stream = TcpStream::connect(addr).map_err(|source| TransferError::Io {
        stage: Stage::Connect,
        source,
    })?;
    for r in [
        stream.set_read_timeout(Some(options.timeout)),
        stream.set_write_timeout(Some(options.timeout)),
    ] {
        r.map_err(|source| TransferError::Io {
            stage: Stage::Connect,
            source,
        })?;
    }

    write_frame(&mut stream, &Frame::hello()).map_err(frame_err(Stage::Hello))?;
    let reply = read_frame(&mut stream, options.max_frame).map_err(frame_err(Stage::Hello))?;
    expect(reply, FrameKind::Ok, Stage::Hello)?;

    let sender_pub = sender.public_key();
    let envelope =
        seal(data, recipient, sender, &sender_pub, rng, options.dim_log2).map_err(|source| {
            TransferError::Seal {
                stage: Stage::Seal,
                source,
            }
        })?;
    let payload = FilePayload {
        name: name.to_string(),
        envelope: envelope.serialize(),
    }
    .encode()
    .map_err(frame_err(Stage::Send))?;
    write_frame(&mut stream, &Frame::new(FrameKind::File, payload))
        .map_err(frame_err(Stage::Send))?;

    let reply = read_frame(&mut stream, options.max_frame).map_err(frame_err(Stage::Ack))?;
    let reply = expect(reply, FrameKind::Ack, Stage::Ack)?;
    let ack = AckPayload::decode(&reply.payload).map_err(frame_err(Stage::Ack))?;
    if ack.status != 0 {
        return Err(TransferError::Status {
            stage: Stage::Ack,
            status: ack.status,
        });
    }
    if ack.digest != sha256(data) {
        return Err(TransferError::DigestMismatch {
            stage: Stage::Verify,
        });
    }
    Ok(ack)
}

fn expect(frame: Frame, kind: FrameKind, stage: Stage) -> Result<Frame, TransferError> {
    if frame.kind == kind {
        Ok(frame)
    } else if frame.kind == FrameKind::Err {
        Err(TransferError::Rejected {
            stage,
            error: ErrPayload::decode(&frame.payload),
        })
    } else {
        Err(TransferError::Unexpected {
            stage,
            kind: frame.kind,
        })
    }
}
