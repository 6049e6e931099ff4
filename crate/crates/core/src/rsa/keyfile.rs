//! Text key files.
//!
//! ```text
//! hcirsa-v1
//! public | private
//! <n hex>
//! <e hex>
//! <d hex>   (private only)
//! <p hex>   (private only)
//! <q hex>   (private only)
//! ```
//!
//! Every line ends in `\n`. Numbers are lowercase hex without leading
//! zeros, so each key has exactly one valid encoding and
//! `serialize(parse(text)) == text` for every accepted `text`.

use num_bigint::BigUint;
use thiserror::Error;

use super::{KeyProfile, RsaError, RsaPrivateKey, RsaPublicKey};

const MAGIC: &str = "hcirsa-v1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KeyFileError {
    #[error("not an hcirsa-v1 key file")]
    BadMagic,
    #[error("expected a {expected} key, found {found:?}")]
    WrongRole {
        expected: &'static str,
        found: String,
    },
    #[error("expected {expected} lines, found {found}")]
    LineCount { expected: usize, found: usize },
    #[error("missing final newline")]
    MissingNewline,
    #[error("line {0}: not canonical lowercase hex")]
    BadNumber(usize),
}

fn parse_hex(line: &str, index: usize) -> Result<BigUint, KeyFileError> {
    let canonical = !line.is_empty()
        && line.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
        && (line == "0" || !line.starts_with('0'));
    if !canonical {
        return Err(KeyFileError::BadNumber(index + 1));
    }
    BigUint::parse_bytes(line.as_bytes(), 16).ok_or(KeyFileError::BadNumber(index + 1))
}

fn split_lines<'a>(
    text: &'a str,
    role: &'static str,
    count: usize,
) -> Result<Vec<&'a str>, KeyFileError> {
    let body = text
        .strip_suffix('\n')
        .ok_or(KeyFileError::MissingNewline)?;
    let lines: Vec<&str> = body.split('\n').collect();
    if lines.first() != Some(&MAGIC) {
        return Err(KeyFileError::BadMagic);
    }
    match lines.get(1) {
        Some(&r) if r == role => {}
        other => {
            return Err(KeyFileError::WrongRole {
                expected: role,
                found: other.unwrap_or(&"").to_string(),
            })
        }
    }
    if lines.len() != count {
        return Err(KeyFileError::LineCount {
            expected: count,
            found: lines.len(),
        });
    }
    Ok(lines)
}

impl RsaPublicKey {
    pub fn to_key_file(&self) -> String {
        format!(
            "{MAGIC}\npublic\n{}\n{}\n",
            self.n.to_str_radix(16),
            self.e.to_str_radix(16)
        )
    }

    pub fn from_key_file(text: &str) -> Result<Self, RsaError> {
        let lines = split_lines(text, "public", 4)?;
        let n = parse_hex(lines[2], 2)?;
        let e = parse_hex(lines[3], 3)?;
        RsaPublicKey::new(n, e)
    }
}

impl RsaPrivateKey {
    pub fn to_key_file(&self) -> String {
        let mut out = format!("{MAGIC}\nprivate\n");
        for x in [&self.n, &self.e, &self.d, &self.p, &self.q] {
            out.push_str(&x.to_str_radix(16));
            out.push('\n');
        }
        out
    }

    pub fn from_key_file(text: &str, profile: KeyProfile) -> Result<Self, RsaError> {
        let lines = split_lines(text, "private", 7)?;
        let nums = (2..7)
            .map(|i| parse_hex(lines[i], i))
            .collect::<Result<Vec<_>, _>>()?;
        let [n, e, d, p, q]: [BigUint; 5] = nums.try_into().expect("five numbers");
        RsaPrivateKey::from_components(n, e, d, p, q, profile)
    }
}
