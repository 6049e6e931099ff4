use std::io::{self, Read, Write};

use thiserror::Error;

use crate::sha256::Digest;

/// Default ceiling on a single frame's payload.
pub const DEFAULT_MAX_FRAME: usize = 256 * 1024 * 1024;
pub const HEADER_LEN: usize = 5;
pub const HELLO_PAYLOAD: &[u8] = b"hciv1";
const MAX_NAME_LEN: usize = 255;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum FrameKind {
    Hello = 1,
    Ok = 2,
    File = 3,
    Ack = 4,
    Err = 5,
}

impl TryFrom<u8> for FrameKind {
    type Error = FrameError;

    fn try_from(b: u8) -> Result<Self, FrameError> {
        Ok(match b {
            1 => FrameKind::Hello,
            2 => FrameKind::Ok,
            3 => FrameKind::File,
            4 => FrameKind::Ack,
            5 => FrameKind::Err,
            other => return Err(FrameError::Protocol(format!("unknown frame kind {other}"))),
        })
    }
}

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("connection closed")]
    ConnectionClosed,
    #[error("connection timed out")]
    Timeout,
    #[error("frame too large: {len} > {max}")]
    TooLarge { len: u64, max: usize },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("invalid file name {0:?}")]
    InvalidName(String),
    #[error("i/o error: {0}")]
    Io(#[source] io::Error),
}

impl From<io::Error> for FrameError {
    fn from(e: io::Error) -> Self {
        match e.kind() {
            io::ErrorKind::UnexpectedEof
            | io::ErrorKind::ConnectionReset
            | io::ErrorKind::ConnectionAborted
            | io::ErrorKind::BrokenPipe => FrameError::ConnectionClosed,
            io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock => FrameError::Timeout,
            _ => FrameError::Io(e),
        }
    }
}

/// `kind u8 | len u32 | payload`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub kind: FrameKind,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(kind: FrameKind, payload: impl Into<Vec<u8>>) -> Self {
        Self {
            kind,
            payload: payload.into(),
        }
    }

    pub fn hello() -> Self {
        Self::new(FrameKind::Hello, HELLO_PAYLOAD)
    }

    pub fn ok() -> Self {
        Self::new(FrameKind::Ok, Vec::new())
    }

    pub fn error(code: ErrorCode, reason: &str) -> Self {
        let mut payload = vec![code as u8];
        payload.extend_from_slice(reason.as_bytes());
        Self::new(FrameKind::Err, payload)
    }
}

pub fn write_frame<W: Write + ?Sized>(w: &mut W, frame: &Frame) -> Result<(), FrameError> {
    let len = u32::try_from(frame.payload.len()).map_err(|_| FrameError::TooLarge {
        len: frame.payload.len() as u64,
        max: u32::MAX as usize,
    })?;
    let mut header = [0u8; HEADER_LEN];
    header[0] = frame.kind as u8;
    header[1..].copy_from_slice(&len.to_be_bytes());
    w.write_all(&header)?;
    w.write_all(&frame.payload)?;
    w.flush()?;
    Ok(())
}

/// Reads one frame. The declared length is checked against `max` before
/// any payload is read, and the buffer only grows as bytes arrive.
pub fn read_frame<R: Read + ?Sized>(r: &mut R, max: usize) -> Result<Frame, FrameError> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)?;
    let kind = FrameKind::try_from(header[0])?;
    let len = u32::from_be_bytes(header[1..].try_into().unwrap()) as u64;
    if len > max as u64 {
        return Err(FrameError::TooLarge { len, max });
    }
    let mut payload = Vec::with_capacity((len as usize).min(64 * 1024));
    r.take(len).read_to_end(&mut payload)?;
    if payload.len() as u64 != len {
        return Err(FrameError::ConnectionClosed);
    }
    Ok(Frame { kind, payload })
}

/// Reason codes carried in the first byte of an ERR payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum ErrorCode {
    Version = 1,
    Protocol = 2,
    UnknownSender = 3,
    Decapsulation = 4,
    Decryption = 5,
    Signature = 6,
    BadName = 7,
    Storage = 8,
    Malformed = 9,
    FrameTooLarge = 10,
    Length = 11,
    Timeout = 12,
    Other = 255,
}

impl ErrorCode {
    pub fn from_u8(b: u8) -> Self {
        use ErrorCode::*;
        match b {
            1 => Version,
            2 => Protocol,
            3 => UnknownSender,
            4 => Decapsulation,
            5 => Decryption,
            6 => Signature,
            7 => BadName,
            8 => Storage,
            9 => Malformed,
            10 => FrameTooLarge,
            11 => Length,
            12 => Timeout,
            _ => Other,
        }
    }
}

/// Decoded ERR payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrPayload {
    pub code: ErrorCode,
    pub reason: String,
}

impl ErrPayload {
    pub fn decode(payload: &[u8]) -> Self {
        match payload.split_first() {
            Some((&code, reason)) => Self {
                code: ErrorCode::from_u8(code),
                reason: String::from_utf8_lossy(reason).into_owned(),
            },
            None => Self {
                code: ErrorCode::Other,
                reason: String::new(),
            },
        }
    }
}

/// Returns the name if it is safe to create inside an output directory.
pub fn validate_name(name: &str) -> Result<&str, FrameError> {
    let ok = !name.is_empty()
        && name.len() <= MAX_NAME_LEN
        && !name.contains(['/', '\\', '\0'])
        && name != "."
        && name != "..";
    if ok {
        Ok(name)
    } else {
        Err(FrameError::InvalidName(name.to_string()))
    }
}

/// `name_len u16 | name | envelope bytes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilePayload {
    pub name: String,
    pub envelope: Vec<u8>,
}

impl FilePayload {
    pub fn encode(&self) -> Result<Vec<u8>, FrameError> {
        validate_name(&self.name)?;
        let mut out = Vec::with_capacity(2 + self.name.len() + self.envelope.len());
        out.extend_from_slice(&(self.name.len() as u16).to_be_bytes());
        out.extend_from_slice(self.name.as_bytes());
        out.extend_from_slice(&self.envelope);
        Ok(out)
    }

    pub fn decode(payload: &[u8]) -> Result<Self, FrameError> {
        if payload.len() < 2 {
            return Err(FrameError::Protocol("short file payload".into()));
        }
        let name_len = u16::from_be_bytes([payload[0], payload[1]]) as usize;
        let rest = &payload[2..];
        if rest.len() < name_len {
            return Err(FrameError::Protocol("short file name".into()));
        }
        let name = std::str::from_utf8(&rest[..name_len])
            .map_err(|_| FrameError::Protocol("file name is not UTF-8".into()))?;
        validate_name(name)?;
        Ok(Self {
            name: name.to_string(),
            envelope: rest[name_len..].to_vec(),
        })
    }
}

/// `status u8 | digest [32]`; a non-zero status carries an all-zero digest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AckPayload {
    pub status: u8,
    pub digest: Digest,
}

impl AckPayload {
    pub fn ok(digest: Digest) -> Self {
        Self { status: 0, digest }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(33);
        out.push(self.status);
        out.extend_from_slice(self.digest.as_bytes());
        out
    }

    pub fn decode(payload: &[u8]) -> Result<Self, FrameError> {
        if payload.len() != 33 {
            return Err(FrameError::Protocol("ack payload must be 33 bytes".into()));
        }
        let ack = Self {
            status: payload[0],
            digest: Digest(payload[1..].try_into().unwrap()),
        };
        if ack.status != 0 && ack.digest.0 != [0; 32] {
            return Err(FrameError::Protocol("failed ack carries a digest".into()));
        }
        Ok(ack)
    }
}
