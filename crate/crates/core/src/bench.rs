//! Throughput comparison of the symmetric cipher alone, RSA alone, and
//! the hybrid envelope.
//!
//! Each timed run is decrypted and compared with its input before a
//! record is produced, outside the timed region.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::envelope::{seal, OpenError, SealError};
use crate::hill::{derive_key, HillError, SessionSeed, DEFAULT_DIM_LOG2};
use crate::rsa::{self, KeyProfile, RsaError, PADDING_OVERHEAD};

pub const MIN_PAYLOAD: usize = 1024;
pub const CSV_HEADER: &str = "scheme,payload_bytes,elapsed_seconds,throughput_mb_s";
/// Seed of the keystream that generates benchmark payloads.
pub const PAYLOAD_SEED: u64 = 0x4843_4945;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    HillOnly,
    RsaOnly,
    Hybrid,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::HillOnly, Scheme::RsaOnly, Scheme::Hybrid];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::HillOnly => "hill_only",
            Scheme::RsaOnly => "rsa_only",
            Scheme::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| BenchError::Csv(format!("unknown scheme {s:?}")))
    }
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("no payload sizes given")]
    NoSizes,
    #[error("payload size {0} below the {MIN_PAYLOAD}-byte minimum")]
    SizeTooSmall(usize),
    #[error(transparent)]
    Rsa(#[from] RsaError),
    #[error(transparent)]
    Hill(#[from] HillError),
    #[error(transparent)]
    Seal(#[from] SealError),
    #[error(transparent)]
    Open(#[from] OpenError),
    #[error("{0} round trip did not reproduce the payload")]
    Verification(Scheme),
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRecord {
    pub scheme: Scheme,
    pub payload_bytes: u64,
    pub elapsed_seconds: f64,
    pub throughput_mb_s: f64,
}

impl BenchRecord {
    pub fn new(scheme: Scheme, payload_bytes: u64, elapsed_seconds: f64) -> Self {
        Self {
            scheme,
            payload_bytes,
            elapsed_seconds,
            throughput_mb_s: payload_bytes as f64 / elapsed_seconds / 1e6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub repetitions: usize,
    pub rsa_bits: u64,
    pub dim_log2: u32,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            repetitions: 3,
            rsa_bits: 1024,
            dim_log2: DEFAULT_DIM_LOG2,
        }
    }
}

/// Deterministic benchmark payload of `len` bytes.
pub fn payload(len: usize) -> Vec<u8> {
    let mut out = vec![0u8; len];
    ChaCha20Rng::seed_from_u64(PAYLOAD_SEED).fill_bytes(&mut out);
    out
}

pub fn run_bench<R: RngCore + ?Sized>(
    sizes: &[usize],
    rng: &mut R,
) -> Result<Vec<BenchRecord>, BenchError> {
    run_bench_with(sizes, rng, &BenchConfig::default())
}

/// Three records per size, in the order hill_only, rsa_only, hybrid.
pub fn run_bench_with<R: RngCore + ?Sized>(
    sizes: &[usize],
    rng: &mut R,
    config: &BenchConfig,
) -> Result<Vec<BenchRecord>, BenchError> {
    if sizes.is_empty() {
        return Err(BenchError::NoSizes);
    }
    if let Some(&s) = sizes.iter().find(|&&s| s < MIN_PAYLOAD) {
        return Err(BenchError::SizeTooSmall(s));
    }
    let (recipient_pub, recipient) = rsa::keygen(config.rsa_bits, KeyProfile::Standard, rng)?;
    let (sender_pub, sender) = rsa::keygen(config.rsa_bits, KeyProfile::Standard, rng)?;

    let mut records = Vec::with_capacity(sizes.len() * 3);
    for &size in sizes {
        let data = payload(size);

        let hill = median_seconds(config.repetitions, || {
            let key = derive_key(&SessionSeed::random(rng), config.dim_log2)?;
            let start = Instant::now();
            let ct = key.encrypt_stream(&data)?;
            let elapsed = start.elapsed().as_secs_f64();
            check(key.decrypt_stream(&ct)? == data, Scheme::HillOnly)?;
            Ok(elapsed)
        })?;
        records.push(BenchRecord::new(Scheme::HillOnly, size as u64, hill));

        let chunk = recipient_pub.size() - PADDING_OVERHEAD;
        let rsa_only = median_seconds(config.repetitions, || {
            let start = Instant::now();
            let blocks = data
                .chunks(chunk)
                .map(|c| rsa::encapsulate(&recipient_pub, c, rng))
                .collect::<Result<Vec<_>, _>>()?;
            let elapsed = start.elapsed().as_secs_f64();
            let mut recovered = Vec::with_capacity(data.len());
            for b in &blocks {
                recovered.extend(rsa::decapsulate(&recipient, b)?);
            }
            check(recovered == data, Scheme::RsaOnly)?;
            Ok(elapsed)
        })?;
        records.push(BenchRecord::new(Scheme::RsaOnly, size as u64, rsa_only));

        let hybrid = median_seconds(config.repetitions, || {
            let start = Instant::now();
            let env = seal(
                &data,
                &recipient_pub,
                &sender,
                &sender_pub,
                rng,
                config.dim_log2,
            )?;
            let elapsed = start.elapsed().as_secs_f64();
            check(env.open(&recipient, &sender_pub)? == data, Scheme::Hybrid)?;
            Ok(elapsed)
        })?;
        records.push(BenchRecord::new(Scheme::Hybrid, size as u64, hybrid));
    }
    Ok(records)
}

fn check(ok: bool, scheme: Scheme) -> Result<(), BenchError> {
    ok.then_some(()).ok_or(BenchError::Verification(scheme))
}

fn median_seconds(
    reps: usize,
    mut run: impl FnMut() -> Result<f64, BenchError>,
) -> Result<f64, BenchError> {
    let mut times = (0..reps.max(1))
        .map(|_| run())
        .collect::<Result<Vec<_>, _>>()?;
    times.sort_by(f64::total_cmp);
    // never report a zero duration
    Ok(times[times.len() / 2].max(1e-9))
}

pub fn write_csv<W: Write>(records: &[BenchRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{}",
            r.scheme, r.payload_bytes, r.elapsed_seconds, r.throughput_mb_s
        )?;
    }
    Ok(())
}

pub fn parse_csv(text: &str) -> Result<Vec<BenchRecord>, BenchError> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(BenchError::Csv("missing header".into()));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = |what: &str| BenchError::Csv(format!("row {}: bad {what}", i + 1));
            let fields: Vec<&str> = line.split(',').collect();
            let [scheme, bytes, elapsed, throughput] = fields[..] else {
                return Err(bad("field count"));
            };
            Ok(BenchRecord {
                scheme: scheme.parse()?,
                payload_bytes: bytes.parse().map_err(|_| bad("payload_bytes"))?,
                elapsed_seconds: elapsed.parse().map_err(|_| bad("elapsed_seconds"))?,
                throughput_mb_s: throughput.parse().map_err(|_| bad("throughput_mb_s"))?,
            })
        })
        .collect()
}
