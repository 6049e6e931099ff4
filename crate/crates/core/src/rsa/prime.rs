//! Miller–Rabin primality testing and random prime generation.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::RngCore;

use super::RsaError;

/// Rounds used for key generation.
pub const MR_ROUNDS: usize = 40;

/// Bases that make Miller–Rabin deterministic for every `n < 3.3·10^24`.
const FIXED_BASES: [u32; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

const SMALL_PRIMES: [u32; 54] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193,
    197, 199, 211, 223, 227, 229, 233, 239, 241, 251,
];

/// Uniform-ish integer with exactly `bytes * 8` random bits.
pub(crate) fn random_biguint<R: RngCore + ?Sized>(
    rng: &mut R,
    bytes: usize,
) -> Result<BigUint, RsaError> {
    let mut buf = vec![0u8; bytes];
    rng.try_fill_bytes(&mut buf)
        .map_err(|e| RsaError::Rng(e.to_string()))?;
    Ok(BigUint::from_bytes_be(&buf))
}

/// Runs `rounds` Miller–Rabin rounds. The first rounds use the fixed bases
/// above, the rest use random bases in `[2, n-2]`.
pub fn is_probable_prime<R: RngCore + ?Sized>(
    n: &BigUint,
    rounds: usize,
    rng: &mut R,
) -> Result<bool, RsaError> {
    let two = BigUint::from(2u32);
    if n < &two {
        return Ok(false);
    }
    for &p in &SMALL_PRIMES {
        let p = BigUint::from(p);
        if n == &p {
            return Ok(true);
        }
        if (n % &p).is_zero() {
            return Ok(false);
        }
    }

    let n_minus_1 = n - 1u32;
    let shift = n_minus_1.trailing_zeros().expect("n - 1 > 0");
    let odd = &n_minus_1 >> shift;

    let witnesses_composite = |a: &BigUint| -> bool {
        let mut x = a.modpow(&odd, n);
        if x.is_one() || x == n_minus_1 {
            return false;
        }
        for _ in 1..shift {
            x = (&x * &x) % n;
            if x == n_minus_1 {
                return false;
            }
            if x.is_one() {
                return true;
            }
        }
        true
    };

    let span = n - 3u32; // bases drawn from [2, n-2]
    let byte_len = (n.bits() as usize).div_ceil(8) + 8;
    for round in 0..rounds {
        let base = match FIXED_BASES.get(round) {
            // n > 251 here, so every fixed base is below n - 1
            Some(&b) => BigUint::from(b),
            None => random_biguint(rng, byte_len)? % &span + 2u32,
        };
        if witnesses_composite(&base) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Random prime with exactly `bits` bits and its top two bits set.
pub fn random_prime<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> Result<BigUint, RsaError> {
    assert!(bits >= 8, "prime size {bits}");
    let bytes = (bits as usize).div_ceil(8);
    loop {
        let mut candidate = random_biguint(rng, bytes)?;
        let excess = bytes as u64 * 8 - bits;
        candidate >>= excess;
        candidate.set_bit(bits - 1, true);
        candidate.set_bit(bits - 2, true);
        candidate.set_bit(0, true);
        if is_probable_prime(&candidate, MR_ROUNDS, rng)? {
            return Ok(candidate);
        }
    }
}

pub(crate) fn lcm(a: &BigUint, b: &BigUint) -> BigUint {
    a.lcm(b)
}
