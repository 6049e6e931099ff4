//! The sealed container: Hill ciphertext, RSA-encapsulated seed, and a
//! sender signature over the plaintext.
//!
//! Wire layout, all integers big-endian:
//!
//! ```text
//! "HCIE" | version u8 | dim_log2 u8 | reserved u16 (0)
//! sender_fingerprint [32]
//! seed_ct_len u32 | encapsulated_seed
//! sig_len u32     | signature
//! plaintext_len u64
//! ct_len u64      | ciphertext
//! ```
//!
//! The same bytes are written to `.hcie` files and sent over the wire.

use rand::RngCore;
use thiserror::Error;

use crate::hill::{derive_key, HillError, SessionSeed, MAX_DIM_LOG2, MIN_DIM_LOG2};
use crate::rsa::{self, RsaError, RsaPrivateKey, RsaPublicKey, Signature};
use crate::sha256::Digest;

pub const MAGIC: [u8; 4] = *b"HCIE";
pub const VERSION: u8 = 1;
/// Bytes before the encapsulated seed.
pub const FIXED_HEADER_LEN: usize = 4 + 1 + 1 + 2 + 32 + 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    BadVersion(u8),
    #[error("truncated {0}")]
    Truncated(&'static str),
    #[error("inconsistent length field: {0}")]
    Inconsistent(&'static str),
    #[error("{0} trailing bytes after ciphertext")]
    TrailingBytes(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OpenError {
    #[error("malformed envelope: {0}")]
    Malformed(#[from] ParseError),
    #[error("signature check refused: sender fingerprint does not match the supplied public key")]
    SenderMismatch,
    #[error("decapsulation failed")]
    Decapsulation,
    #[error("decryption failed: {0}")]
    Decryption(HillError),
    #[error("plaintext length {actual} does not match recorded {recorded}")]
    LengthMismatch { recorded: u64, actual: u64 },
    #[error("signature verification failed")]
    Signature,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SealError {
    #[error(transparent)]
    Rsa(#[from] RsaError),
    #[error(transparent)]
    Hill(#[from] HillError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub version: u8,
    pub dim_log2: u8,
    pub sender_fingerprint: Digest,
    pub encapsulated_seed: Vec<u8>,
    pub signature: Vec<u8>,
    pub plaintext_len: u64,
    pub ciphertext: Vec<u8>,
}

/// Seals `plaintext` for `recipient`, signed by `sender`.
pub fn seal<R: RngCore + ?Sized>(
    plaintext: &[u8],
    recipient: &RsaPublicKey,
    sender: &RsaPrivateKey,
    sender_pub: &RsaPublicKey,
    rng: &mut R,
    dim_log2: u32,
) -> Result<Envelope, SealError> {
    let seed = SessionSeed::random(rng);
    let key = derive_key(&seed, dim_log2)?;
    let ciphertext = key.encrypt_stream(plaintext)?;
    let encapsulated_seed = rsa::encrypt_seed(recipient, &seed, rng)?;
    let signature = rsa::sign(sender, plaintext)?
        .to_bytes(sender.size())
        .expect("signature below modulus");
    Ok(Envelope {
        version: VERSION,
        dim_log2: dim_log2 as u8,
        sender_fingerprint: sender_pub.fingerprint(),
        encapsulated_seed,
        signature,
        plaintext_len: plaintext.len() as u64,
        ciphertext,
    })
}

impl Envelope {
    /// Structural checks shared by [`parse`](Envelope::parse) and
    /// [`open`](Envelope::open).
    pub fn validate(&self) -> Result<(), ParseError> {
        if self.version != VERSION {
            return Err(ParseError::BadVersion(self.version));
        }
        let s = u32::from(self.dim_log2);
        if !(MIN_DIM_LOG2..=MAX_DIM_LOG2).contains(&s) {
            return Err(ParseError::Inconsistent("dim_log2"));
        }
        let block = 1u64 << s;
        let ct_len = self.ciphertext.len() as u64;
        if ct_len == 0 || !ct_len.is_multiple_of(block) {
            return Err(ParseError::Inconsistent("ct_len"));
        }
        if !(self.plaintext_len < ct_len && ct_len <= self.plaintext_len + block) {
            return Err(ParseError::Inconsistent("plaintext_len"));
        }
        Ok(())
    }

    /// Decrypts and authenticates. Nothing is returned unless every check
    /// passes.
    pub fn open(
        &self,
        recipient: &RsaPrivateKey,
        sender_pub: &RsaPublicKey,
    ) -> Result<Vec<u8>, OpenError> {
        self.validate()?;
        if sender_pub.fingerprint() != self.sender_fingerprint {
            return Err(OpenError::SenderMismatch);
        }
        let seed = rsa::decrypt_seed(recipient, &self.encapsulated_seed)
            .map_err(|_| OpenError::Decapsulation)?;
        let key = derive_key(&seed, u32::from(self.dim_log2)).map_err(OpenError::Decryption)?;
        let plaintext = key
            .decrypt_stream(&self.ciphertext)
            .map_err(OpenError::Decryption)?;
        if plaintext.len() as u64 != self.plaintext_len {
            return Err(OpenError::LengthMismatch {
                recorded: self.plaintext_len,
                actual: plaintext.len() as u64,
            });
        }
        let signature = Signature::from_bytes(&self.signature);
        if !rsa::verify(sender_pub, &plaintext, &signature) {
            return Err(OpenError::Signature);
        }
        Ok(plaintext)
    }

    pub fn serialized_len(&self) -> usize {
        FIXED_HEADER_LEN
            + self.encapsulated_seed.len()
            + 4
            + self.signature.len()
            + 16
            + self.ciphertext.len()
    }

    pub fn serialize(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.serialized_len());
        out.extend_from_slice(&MAGIC);
        out.push(self.version);
        out.push(self.dim_log2);
        out.extend_from_slice(&0u16.to_be_bytes());
        out.extend_from_slice(self.sender_fingerprint.as_bytes());
        out.extend_from_slice(&(self.encapsulated_seed.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.encapsulated_seed);
        out.extend_from_slice(&(self.signature.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.signature);
        out.extend_from_slice(&self.plaintext_len.to_be_bytes());
        out.extend_from_slice(&(self.ciphertext.len() as u64).to_be_bytes());
        out.extend_from_slice(&self.ciphertext);
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Envelope, ParseError> {
        let mut r = Reader { buf: bytes };
        if r.take(4, "magic")? != MAGIC {
            return Err(ParseError::BadMagic);
        }
        let version = r.u8("version")?;
        if version != VERSION {
            return Err(ParseError::BadVersion(version));
        }
        let dim_log2 = r.u8("header")?;
        if r.take(2, "header")? != [0, 0] {
            return Err(ParseError::Inconsistent("reserved"));
        }
        let sender_fingerprint = Digest(r.take(32, "sender fingerprint")?.try_into().unwrap());
        let seed_len = r.u32("seed length")? as usize;
        let encapsulated_seed = r.take(seed_len, "encapsulated seed")?.to_vec();
        let sig_len = r.u32("signature length")? as usize;
        let signature = r.take(sig_len, "signature")?.to_vec();
        let plaintext_len = r.u64("plaintext length")?;
        let ct_len = r.u64("ciphertext length")?;
        let ct_len = usize::try_from(ct_len).map_err(|_| ParseError::Truncated("ciphertext"))?;
        let ciphertext = r.take(ct_len, "ciphertext")?.to_vec();
        if !r.buf.is_empty() {
            return Err(ParseError::TrailingBytes(r.buf.len()));
        }
        let env = Envelope {
            version,
            dim_log2,
            sender_fingerprint,
            encapsulated_seed,
            signature,
            plaintext_len,
            ciphertext,
        };
        env.validate()?;
        Ok(env)
    }
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], ParseError> {
        if self.buf.len() < n {
            return Err(ParseError::Truncated(what));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, ParseError> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, ParseError> {
        Ok(u32::from_be_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &'static str) -> Result<u64, ParseError> {
        Ok(u64::from_be_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}
