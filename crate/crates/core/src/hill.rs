//! Hill-style block cipher `C = K·M mod 2^m` with tensor-built keys.
//!
//! Keys are the Kronecker product of `s` invertible 2×2 factors, giving a
//! `2^s`-dimensional matrix. Byte streams are padded and enciphered one
//! block at a time with no chaining, so the map is linear per block; see
//! [`recover_key_known_plaintext`] for the consequence.

use std::fmt;

use thiserror::Error;

use crate::ring::{Block, RingError, RingMatrix, RingParams};
use crate::sha256::Sha256;

pub const SEED_LEN: usize = 32;
pub const MIN_DIM_LOG2: u32 = 1;
pub const MAX_DIM_LOG2: u32 = 6;
/// Default tensor depth: a 16×16 key over `Z/256`.
pub const DEFAULT_DIM_LOG2: u32 = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HillError {
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error("tensor depth {0} outside {MIN_DIM_LOG2}..={MAX_DIM_LOG2}")]
    BadDimLog2(u32),
    #[error("invalid padding")]
    InvalidPadding,
    #[error("ciphertext length {len} is not a positive multiple of {block_len}")]
    BadLength { len: usize, block_len: usize },
    #[error("byte streams need a key over Z/256 with dimension at most 255")]
    UnsupportedKey,
    #[error("insufficient independent plaintext")]
    InsufficientPlaintext,
    #[error("pairs are not consistent with a single key")]
    InconsistentPairs,
}

/// The 32-byte secret from which a session key is derived.
#[derive(Clone, PartialEq, Eq)]
pub struct SessionSeed(pub [u8; SEED_LEN]);

impl SessionSeed {
    pub fn random<R: rand::RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut bytes = [0u8; SEED_LEN];
        rng.fill_bytes(&mut bytes);
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; SEED_LEN] {
        &self.0
    }
}

impl fmt::Debug for SessionSeed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SessionSeed(..)")
    }
}

/// An invertible encryption matrix together with its inverse.
#[derive(Clone, PartialEq, Eq)]
pub struct HillKey {
    ring: RingParams,
    forward: RingMatrix,
    inverse: RingMatrix,
    factors: Option<Vec<RingMatrix>>,
}

impl fmt::Debug for HillKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HillKey")
            .field("bits", &self.ring.bits())
            .field("dim", &self.dim())
            .finish_non_exhaustive()
    }
}

impl HillKey {
    /// Wraps an arbitrary invertible matrix.
    pub fn from_matrix(forward: RingMatrix, ring: RingParams) -> Result<Self, HillError> {
        let inverse = forward.invert(ring)?;
        Ok(Self {
            ring,
            forward,
            inverse,
            factors: None,
        })
    }

    /// `factors[0] ⊗ factors[1] ⊗ ...`; the inverse is the product of the
    /// factor inverses in the same order.
    pub fn from_factors(factors: Vec<RingMatrix>, ring: RingParams) -> Result<Self, HillError> {
        let inverses = factors
            .iter()
            .map(|f| f.invert(ring))
            .collect::<Result<Vec<_>, _>>()?;
        let forward = RingMatrix::kronecker_all(&factors, ring)?;
        let inverse = RingMatrix::kronecker_all(&inverses, ring)?;
        Ok(Self {
            ring,
            forward,
            inverse,
            factors: Some(factors),
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            ring: RingParams::BYTE,
            forward: RingMatrix::identity(dim),
            inverse: RingMatrix::identity(dim),
            factors: None,
        }
    }

    pub fn ring(&self) -> RingParams {
        self.ring
    }

    pub fn dim(&self) -> usize {
        self.forward.dim()
    }

    pub fn forward(&self) -> &RingMatrix {
        &self.forward
    }

    pub fn inverse(&self) -> &RingMatrix {
        &self.inverse
    }

    pub fn factors(&self) -> Option<&[RingMatrix]> {
        self.factors.as_deref()
    }

    pub fn encrypt_block(&self, m: &Block) -> Result<Block, HillError> {
        Ok(self.forward.mul_vec(m, self.ring)?)
    }

    pub fn decrypt_block(&self, c: &Block) -> Result<Block, HillError> {
        Ok(self.inverse.mul_vec(c, self.ring)?)
    }

    fn stream_block_len(&self) -> Result<usize, HillError> {
        if self.ring != RingParams::BYTE || self.dim() > 255 {
            return Err(HillError::UnsupportedKey);
        }
        Ok(self.dim())
    }

    /// Pads, then enciphers each `dim`-byte block independently.
    pub fn encrypt_stream(&self, plaintext: &[u8]) -> Result<Vec<u8>, HillError> {
        let n = self.stream_block_len()?;
        let mut data = pad(plaintext, n);
        apply_blocks(&self.forward, &mut data, self.ring);
        Ok(data)
    }

    pub fn decrypt_stream(&self, ciphertext: &[u8]) -> Result<Vec<u8>, HillError> {
        let n = self.stream_block_len()?;
        if ciphertext.is_empty() || !ciphertext.len().is_multiple_of(n) {
            return Err(HillError::BadLength {
                len: ciphertext.len(),
                block_len: n,
            });
        }
        let mut data = ciphertext.to_vec();
        apply_blocks(&self.inverse, &mut data, self.ring);
        let len = unpad(&data, n)?.len();
        data.truncate(len);
        Ok(data)
    }
}

fn apply_blocks(matrix: &RingMatrix, data: &mut [u8], ring: RingParams) {
    let n = matrix.dim();
    let mut input = vec![0u64; n];
    let mut output = vec![0u64; n];
    for chunk in data.chunks_exact_mut(n) {
        for (dst, &b) in input.iter_mut().zip(chunk.iter()) {
            *dst = u64::from(b);
        }
        matrix.mul_vec_into(&input, &mut output, ring);
        for (dst, &x) in chunk.iter_mut().zip(&output) {
            *dst = x as u8;
        }
    }
}

/// SHA-256 in counter mode: `SHA-256(seed ‖ be32(counter))`, counter from 0.
struct SeedStream<'a> {
    seed: &'a [u8; SEED_LEN],
    counter: u32,
    block: [u8; 32],
    pos: usize,
}

impl<'a> SeedStream<'a> {
    fn new(seed: &'a SessionSeed) -> Self {
        Self {
            seed: &seed.0,
            counter: 0,
            block: [0; 32],
            pos: 32,
        }
    }

    fn next_byte(&mut self) -> u8 {
        if self.pos == 32 {
            let mut h = Sha256::new();
            h.update(self.seed);
            h.update(&self.counter.to_be_bytes());
            self.block = h.finalize().0;
            self.counter = self.counter.wrapping_add(1);
            self.pos = 0;
        }
        let b = self.block[self.pos];
        self.pos += 1;
        b
    }
}

/// Expands a seed into `s` odd-determinant 2×2 factors and their tensor
/// product.
///
/// Candidates are read four bytes at a time (row-major) from the seed
/// keystream; a candidate with even determinant is discarded and the next
/// four bytes are read.
pub fn derive_key(seed: &SessionSeed, dim_log2: u32) -> Result<HillKey, HillError> {
    if !(MIN_DIM_LOG2..=MAX_DIM_LOG2).contains(&dim_log2) {
        return Err(HillError::BadDimLog2(dim_log2));
    }
    let ring = RingParams::BYTE;
    let mut stream = SeedStream::new(seed);
    let mut factors = Vec::with_capacity(dim_log2 as usize);
    while factors.len() < dim_log2 as usize {
        let e: [u64; 4] = std::array::from_fn(|_| u64::from(stream.next_byte()));
        let candidate = RingMatrix::new(2, e.to_vec(), ring)?;
        if candidate.is_invertible(ring) {
            factors.push(candidate);
        }
    }
    HillKey::from_factors(factors, ring)
}

/// Appends `k` bytes of value `k`, `1 <= k <= block_len`.
///
/// # Panics
///
/// If `block_len` is outside `1..=255`.
pub fn pad(data: &[u8], block_len: usize) -> Vec<u8> {
    assert!((1..=255).contains(&block_len), "block_len {block_len}");
    let k = block_len - data.len() % block_len;
    let mut out = Vec::with_capacity(data.len() + k);
    out.extend_from_slice(data);
    out.resize(data.len() + k, k as u8);
    out
}

/// Validates and strips padding added by [`pad`].
pub fn unpad(data: &[u8], block_len: usize) -> Result<&[u8], HillError> {
    if data.is_empty() || !data.len().is_multiple_of(block_len) {
        return Err(HillError::BadLength {
            len: data.len(),
            block_len,
        });
    }
    let k = *data.last().unwrap() as usize;
    if k == 0 || k > block_len {
        return Err(HillError::InvalidPadding);
    }
    let (body, fill) = data.split_at(data.len() - k);
    if fill.iter().any(|&b| b as usize != k) {
        return Err(HillError::InvalidPadding);
    }
    Ok(body)
}

/// Incremental basis over GF(2), used to pick plaintexts that form an
/// invertible matrix over `Z/2^m` (invertibility only depends on the
/// matrix mod 2).
struct Gf2Basis {
    // pivot bit index -> reduced vector
    rows: Vec<(usize, Vec<u64>)>,
    dim: usize,
}

impl Gf2Basis {
    fn new(dim: usize) -> Self {
        Self {
            rows: Vec::new(),
            dim,
        }
    }

    fn insert(&mut self, block: &Block) -> bool {
        let mut v = vec![0u64; self.dim.div_ceil(64)];
        for (i, &x) in block.entries().iter().enumerate() {
            if x & 1 == 1 {
                v[i / 64] |= 1 << (i % 64);
            }
        }
        for (pivot, row) in &self.rows {
            if v[pivot / 64] >> (pivot % 64) & 1 == 1 {
                v.iter_mut().zip(row).for_each(|(a, b)| *a ^= b);
            }
        }
        let lead = (0..self.dim).find(|&i| v[i / 64] >> (i % 64) & 1 == 1);
        match lead {
            Some(pivot) => {
                self.rows.push((pivot, v));
                true
            }
            None => false,
        }
    }
}

/// Recovers `K` from plaintext/ciphertext block pairs as `C·P⁻¹`.
///
/// The first `n` pairs whose plaintexts are independent mod 2 form `P`.
/// The result is checked against every pair before being returned.
pub fn recover_key_known_plaintext(
    pairs: &[(Block, Block)],
    ring: RingParams,
) -> Result<RingMatrix, HillError> {
    let n = pairs
        .first()
        .map(|(p, _)| p.dim())
        .ok_or(HillError::InsufficientPlaintext)?;
    let mut basis = Gf2Basis::new(n);
    let mut chosen = Vec::with_capacity(n);
    for (p, c) in pairs {
        if p.dim() != n || c.dim() != n {
            return Err(RingError::DimensionMismatch {
                left: n,
                right: if p.dim() != n { p.dim() } else { c.dim() },
            }
            .into());
        }
        if chosen.len() < n && basis.insert(p) {
            chosen.push((p, c));
        }
    }
    if chosen.len() < n {
        return Err(HillError::InsufficientPlaintext);
    }
    let plain = RingMatrix::from_columns(&chosen.iter().map(|(p, _)| *p).collect::<Vec<_>>())?;
    let cipher = RingMatrix::from_columns(&chosen.iter().map(|(_, c)| *c).collect::<Vec<_>>())?;
    let key = cipher.mul(&plain.invert(ring)?, ring)?;
    for (p, c) in pairs {
        if &key.mul_vec(p, ring)? != c {
            return Err(HillError::InconsistentPairs);
        }
    }
    Ok(key)
}
