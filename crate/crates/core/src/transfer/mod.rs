//! File transfer over TCP.
//!
//! One sealed file per connection:
//!
//! ```text
//! client                      server
//!   HELLO "hciv1"     ->
//!                     <-      OK
//!   FILE name+envelope ->
//!                     <-      ACK status=0, sha256(plaintext)
//! ```
//!
//! Any failure on the server side is answered with an ERR frame carrying a
//! reason code, after which the connection is closed. The server writes a
//! file only after the envelope's signature verifies.

mod client;
mod frame;
mod server;

use std::time::Duration;

pub use client::{send_bytes, send_file, SendOptions, Stage, TransferError};
pub use frame::{
    read_frame, validate_name, write_frame, AckPayload, ErrPayload, ErrorCode, FilePayload, Frame,
    FrameError, FrameKind, DEFAULT_MAX_FRAME, HEADER_LEN, HELLO_PAYLOAD,
};
pub use server::{
    Received, Server, ServerConfig, ServerHandle, SessionError, TrustStore, TrustStoreError,
};

/// Inactivity timeout applied to both ends of a connection.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
