//! Reference implementations the library is checked against. They are
//! written for obviousness, not speed, and share no code with the crate.
#![allow(dead_code)]

pub mod net;

use hcie::rsa::{keygen, KeyProfile};
use hcie::{RsaPrivateKey, RsaPublicKey};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Row-major product of two `n×n` matrices mod `modulus`.
pub fn mat_mul(a: &[u64], b: &[u64], n: usize, modulus: u64) -> Vec<u64> {
    let mut out = vec![0u64; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut acc: u128 = 0;
            for k in 0..n {
                acc += a[i * n + k] as u128 * b[k * n + j] as u128;
            }
            out[i * n + j] = (acc % modulus as u128) as u64;
        }
    }
    out
}

/// Determinant by cofactor expansion along the first row.
pub fn det_cofactor(a: &[u64], n: usize, modulus: u64) -> u64 {
    let m = modulus as i128;
    fn go(a: &[i128], n: usize, m: i128) -> i128 {
        if n == 1 {
            return a[0].rem_euclid(m);
        }
        let mut total = 0i128;
        for col in 0..n {
            let minor: Vec<i128> = (1..n)
                .flat_map(|r| (0..n).filter(move |&c| c != col).map(move |c| a[r * n + c]))
                .collect();
            let term = a[col] * go(&minor, n - 1, m) % m;
            total = if col % 2 == 0 {
                total + term
            } else {
                total - term
            };
        }
        total.rem_euclid(m)
    }
    let wide: Vec<i128> = a.iter().map(|&x| x as i128).collect();
    go(&wide, n, m) as u64
}

/// `(A ⊗ B)[i·q + k][j·q + l] = A[i][j]·B[k][l]`.
pub fn kron(a: &[u64], p: usize, b: &[u64], q: usize, modulus: u64) -> Vec<u64> {
    let n = p * q;
    let mut out = vec![0u64; n * n];
    for i in 0..p {
        for j in 0..p {
            for k in 0..q {
                for l in 0..q {
                    let v = a[i * p + j] as u128 * b[k * q + l] as u128 % modulus as u128;
                    out[(i * q + k) * n + j * q + l] = v as u64;
                }
            }
        }
    }
    out
}

pub fn identity(n: usize) -> Vec<u64> {
    (0..n * n).map(|i| (i / n == i % n) as u64).collect()
}

/// Searches every 2×2 matrix over `Z_modulus` for a right inverse.
pub fn brute_force_inverse_2x2(a: &[u64], modulus: u64) -> Option<Vec<u64>> {
    let id = identity(2);
    (0..modulus.pow(4))
        .map(|code| {
            (0..4)
                .map(|k| code / modulus.pow(k) % modulus)
                .collect::<Vec<u64>>()
        })
        .find(|b| mat_mul(a, b, 2, modulus) == id)
}

pub fn is_prime_trial(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// `base^exp mod m` by repeated multiplication.
pub fn pow_naive(base: u64, exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    for _ in 0..exp {
        acc = acc * base % m;
    }
    acc
}

pub fn keypair(bits: u64, seed: u64) -> (RsaPublicKey, RsaPrivateKey) {
    keygen(bits, KeyProfile::Standard, &mut rng(seed)).unwrap()
}
