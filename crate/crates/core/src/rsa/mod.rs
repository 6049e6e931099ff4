//! Textbook RSA: key generation, seed encapsulation, and digest-then-sign
//! signatures over SHA-256.
//!
//! This is deliberately the unadorned construction. Encapsulation uses a
//! `00 02 fill 00 payload` block with random non-zero fill; signatures
//! exponentiate the raw digest. There is no OAEP, PSS, or blinding.

mod keyfile;
pub mod prime;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::One;
use rand::RngCore;
use thiserror::Error;

use crate::hill::{SessionSeed, SEED_LEN};
use crate::sha256::{sha256, Digest};

pub use keyfile::KeyFileError;
pub use prime::{is_probable_prime, random_prime, MR_ROUNDS};

pub const DEFAULT_PUBLIC_EXPONENT: u32 = 65537;
/// Encapsulation overhead: `00 02`, at least eight fill bytes, `00`.
pub const PADDING_OVERHEAD: usize = 11;
/// Smallest modulus (in bytes) accepted by [`encrypt_seed`].
pub const MIN_SEED_MODULUS_BYTES: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RsaError {
    #[error("random source failed: {0}")]
    Rng(String),
    #[error("unsupported key size {0} bits")]
    UnsupportedBits(u64),
    #[error("key size {0} bits too small for the public exponent")]
    BitsTooSmallForExponent(u64),
    #[error("modulus too small: need at least {needed} bytes, have {actual}")]
    ModulusTooSmall { needed: usize, actual: usize },
    #[error("modulus must exceed 2^256 to sign a SHA-256 digest")]
    ModulusTooSmallToSign,
    #[error("modulus below the minimum for this key profile")]
    InsecureModulus,
    #[error("payload of {len} bytes does not fit a {modulus_bytes}-byte block")]
    PayloadTooLarge { len: usize, modulus_bytes: usize },
    #[error("decapsulation failed")]
    Decapsulation,
    #[error("inconsistent key: {0}")]
    InvalidKey(&'static str),
    #[error(transparent)]
    KeyFile(#[from] KeyFileError),
}

/// Which key sizes are acceptable.
///
/// `Insecure` exists so tests can brute-force tiny keys; nothing else
/// should use it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KeyProfile {
    #[default]
    Standard,
    Insecure,
}

impl KeyProfile {
    fn check_bits(self, bits: u64) -> Result<(), RsaError> {
        match self {
            KeyProfile::Standard if matches!(bits, 512 | 1024 | 2048) => Ok(()),
            KeyProfile::Insecure if bits >= 32 => Ok(()),
            _ => Err(RsaError::UnsupportedBits(bits)),
        }
    }

    fn check_modulus(self, n: &BigUint) -> Result<(), RsaError> {
        let ok = match self {
            KeyProfile::Standard => n.bits() >= 256,
            KeyProfile::Insecure => n.bits() >= 4,
        };
        ok.then_some(()).ok_or(RsaError::InsecureModulus)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RsaPublicKey {
    n: BigUint,
    e: BigUint,
}

#[derive(Clone, PartialEq, Eq)]
pub struct RsaPrivateKey {
    n: BigUint,
    e: BigUint,
    d: BigUint,
    p: BigUint,
    q: BigUint,
}

impl std::fmt::Debug for RsaPrivateKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RsaPrivateKey")
            .field("n", &self.n)
            .field("e", &self.e)
            .finish_non_exhaustive()
    }
}

/// `digest^d mod n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Signature(BigUint);

impl Signature {
    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn from_value(value: BigUint) -> Self {
        Self(value)
    }

    /// Big-endian, left-padded to `width`; `None` if the value is wider.
    pub fn to_bytes(&self, width: usize) -> Option<Vec<u8>> {
        to_fixed_width(&self.0, width)
    }

    pub fn from_bytes(bytes: &[u8]) -> Self {
        Self(BigUint::from_bytes_be(bytes))
    }
}

fn to_fixed_width(x: &BigUint, width: usize) -> Option<Vec<u8>> {
    let raw = x.to_bytes_be();
    let raw: &[u8] = if raw == [0] { &[] } else { &raw };
    if raw.len() > width {
        return None;
    }
    let mut out = vec![0u8; width - raw.len()];
    out.extend_from_slice(raw);
    Some(out)
}

fn carmichael(p: &BigUint, q: &BigUint) -> BigUint {
    prime::lcm(&(p - 1u32), &(q - 1u32))
}

impl RsaPublicKey {
    pub fn new(n: BigUint, e: BigUint) -> Result<Self, RsaError> {
        if n.is_even() || n < BigUint::from(3u32) {
            return Err(RsaError::InvalidKey("modulus must be odd"));
        }
        if e <= BigUint::one() || e >= n {
            return Err(RsaError::InvalidKey("exponent out of range"));
        }
        Ok(Self { n, e })
    }

    pub fn modulus(&self) -> &BigUint {
        &self.n
    }

    pub fn exponent(&self) -> &BigUint {
        &self.e
    }

    /// Length of the modulus in bytes.
    pub fn size(&self) -> usize {
        (self.n.bits() as usize).div_ceil(8)
    }

    /// `x^e mod n`.
    pub fn raw_encrypt(&self, x: &BigUint) -> BigUint {
        x.modpow(&self.e, &self.n)
    }

    /// SHA-256 of the serialized key file; identifies a sender.
    pub fn fingerprint(&self) -> Digest {
        sha256(self.to_key_file().as_bytes())
    }
}

impl RsaPrivateKey {
    /// Assembles a key from its parts, checking `n = p·q`, `p ≠ q`, and
    /// `e·d ≡ 1 (mod lcm(p-1, q-1))`. Primality of `p` and `q` is not
    /// rechecked.
    pub fn from_components(
        n: BigUint,
        e: BigUint,
        d: BigUint,
        p: BigUint,
        q: BigUint,
        profile: KeyProfile,
    ) -> Result<Self, RsaError> {
        profile.check_modulus(&n)?;
        RsaPublicKey::new(n.clone(), e.clone())?;
        if p == q || &p * &q != n {
            return Err(RsaError::InvalidKey("modulus is not p·q with p ≠ q"));
        }
        let lambda = carmichael(&p, &q);
        if !((&e * &d) % &lambda).is_one() {
            return Err(RsaError::InvalidKey("e·d ≢ 1 mod λ(n)"));
        }
        Ok(Self { n, e, d, p, q })
    }

    /// Derives `d = e⁻¹ mod λ(n)` from two primes.
    pub fn from_primes(
        p: BigUint,
        q: BigUint,
        e: BigUint,
        profile: KeyProfile,
    ) -> Result<Self, RsaError> {
        let lambda = carmichael(&p, &q);
        let d = e
            .modinv(&lambda)
            .ok_or(RsaError::InvalidKey("e not invertible mod λ(n)"))?;
        let n = &p * &q;
        Self::from_components(n, e, d, p, q, profile)
    }

    pub fn modulus(&self) -> &BigUint {
        &self.n
    }

    pub fn private_exponent(&self) -> &BigUint {
        &self.d
    }

    pub fn primes(&self) -> (&BigUint, &BigUint) {
        (&self.p, &self.q)
    }

    pub fn size(&self) -> usize {
        (self.n.bits() as usize).div_ceil(8)
    }

    pub fn public_key(&self) -> RsaPublicKey {
        RsaPublicKey {
            n: self.n.clone(),
            e: self.e.clone(),
        }
    }

    /// `c^d mod n`.
    pub fn raw_decrypt(&self, c: &BigUint) -> BigUint {
        c.modpow(&self.d, &self.n)
    }
}

/// Generates a key pair with `n` of exactly `bits` bits.
///
/// `e` starts at 65537 and moves to the next odd value until it is coprime
/// with `λ(n)`.
pub fn keygen<R: RngCore + ?Sized>(
    bits: u64,
    profile: KeyProfile,
    rng: &mut R,
) -> Result<(RsaPublicKey, RsaPrivateKey), RsaError> {
    profile.check_bits(bits)?;
    let p_bits = bits / 2;
    let q_bits = bits - p_bits;
    loop {
        let p = random_prime(p_bits, rng)?;
        let q = random_prime(q_bits, rng)?;
        if p == q {
            continue;
        }
        let n = &p * &q;
        debug_assert_eq!(n.bits(), bits);
        let lambda = carmichael(&p, &q);
        let mut e = BigUint::from(DEFAULT_PUBLIC_EXPONENT);
        while e.gcd(&lambda) != BigUint::one() {
            e += 2u32;
        }
        if e >= n {
            return Err(RsaError::BitsTooSmallForExponent(bits));
        }
        let private = RsaPrivateKey::from_primes(p, q, e, profile)?;
        return Ok((private.public_key(), private));
    }
}

/// Encrypts `payload` as one block `00 02 fill 00 payload`.
pub fn encapsulate<R: RngCore + ?Sized>(
    public: &RsaPublicKey,
    payload: &[u8],
    rng: &mut R,
) -> Result<Vec<u8>, RsaError> {
    let k = public.size();
    if payload.len() + PADDING_OVERHEAD > k {
        return Err(RsaError::PayloadTooLarge {
            len: payload.len(),
            modulus_bytes: k,
        });
    }
    let fill_len = k - 3 - payload.len();
    let mut block = Vec::with_capacity(k);
    block.extend([0x00, 0x02]);
    let mut fill = vec![0u8; fill_len];
    rng.try_fill_bytes(&mut fill)
        .map_err(|e| RsaError::Rng(e.to_string()))?;
    for b in fill.iter_mut() {
        while *b == 0 {
            let mut one = [0u8];
            rng.try_fill_bytes(&mut one)
                .map_err(|e| RsaError::Rng(e.to_string()))?;
            *b = one[0];
        }
    }
    block.extend_from_slice(&fill);
    block.push(0x00);
    block.extend_from_slice(payload);

    let x = BigUint::from_bytes_be(&block);
    let c = public.raw_encrypt(&x);
    Ok(to_fixed_width(&c, k).expect("c < n"))
}

/// Inverts [`encapsulate`]. Every failure is the same opaque error.
pub fn decapsulate(private: &RsaPrivateKey, ct: &[u8]) -> Result<Vec<u8>, RsaError> {
    let k = private.size();
    if ct.len() != k {
        return Err(RsaError::Decapsulation);
    }
    let c = BigUint::from_bytes_be(ct);
    if c >= private.n {
        return Err(RsaError::Decapsulation);
    }
    let block = to_fixed_width(&private.raw_decrypt(&c), k).ok_or(RsaError::Decapsulation)?;
    if block[0] != 0x00 || block[1] != 0x02 {
        return Err(RsaError::Decapsulation);
    }
    let sep = block[2..]
        .iter()
        .position(|&b| b == 0)
        .ok_or(RsaError::Decapsulation)?;
    if sep < PADDING_OVERHEAD - 3 {
        return Err(RsaError::Decapsulation);
    }
    Ok(block[2 + sep + 1..].to_vec())
}

/// Encapsulates a session seed; needs a modulus of at least 64 bytes.
pub fn encrypt_seed<R: RngCore + ?Sized>(
    public: &RsaPublicKey,
    seed: &SessionSeed,
    rng: &mut R,
) -> Result<Vec<u8>, RsaError> {
    if public.size() < MIN_SEED_MODULUS_BYTES {
        return Err(RsaError::ModulusTooSmall {
            needed: MIN_SEED_MODULUS_BYTES,
            actual: public.size(),
        });
    }
    encapsulate(public, seed.as_bytes(), rng)
}

pub fn decrypt_seed(private: &RsaPrivateKey, ct: &[u8]) -> Result<SessionSeed, RsaError> {
    let payload = decapsulate(private, ct)?;
    let bytes: [u8; SEED_LEN] = payload.try_into().map_err(|_| RsaError::Decapsulation)?;
    Ok(SessionSeed(bytes))
}

fn digest_int(message: &[u8]) -> BigUint {
    BigUint::from_bytes_be(sha256(message).as_bytes())
}

/// `sha256(message)^d mod n`.
pub fn sign(private: &RsaPrivateKey, message: &[u8]) -> Result<Signature, RsaError> {
    if private.n.bits() <= 256 {
        return Err(RsaError::ModulusTooSmallToSign);
    }
    Ok(Signature(private.raw_decrypt(&digest_int(message))))
}

/// Recovers the digest from the signature and compares it with a freshly
/// computed one. Never fails, only answers.
pub fn verify(public: &RsaPublicKey, message: &[u8], signature: &Signature) -> bool {
    if signature.0 >= public.n {
        return false;
    }
    public.raw_encrypt(&signature.0) == digest_int(message)
}
