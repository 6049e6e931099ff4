//! Vectors and square matrices over the residue ring `Z/2^m`.
//!
//! Elements are stored as `u64` with `1 <= m <= 64`. Because `2^m` divides
//! `2^64`, every sum and product can be accumulated with wrapping machine
//! arithmetic and reduced once with a bit mask.

use std::fmt;

use thiserror::Error;

/// Largest matrix dimension any operation will produce.
pub const DEFAULT_MAX_DIM: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RingError {
    #[error("ring bit width {0} outside 1..=64")]
    BadWidth(u32),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("expected {expected} entries, got {actual}")]
    WrongEntryCount { expected: usize, actual: usize },
    #[error("dimension {dim} exceeds maximum {max}")]
    TooLarge { dim: usize, max: usize },
    #[error("matrix dimension must be positive")]
    Empty,
    #[error("matrix not a unit mod 2^m")]
    NotInvertible,
}

/// The ring `Z/2^m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RingParams {
    bits: u32,
}

impl RingParams {
    /// The byte ring `Z/256` used by the default cipher profile.
    pub const BYTE: RingParams = RingParams { bits: 8 };

    pub fn new(bits: u32) -> Result<Self, RingError> {
        if (1..=64).contains(&bits) {
            Ok(Self { bits })
        } else {
            Err(RingError::BadWidth(bits))
        }
    }

    pub fn bits(self) -> u32 {
        self.bits
    }

    /// `2^m`, which does not fit a `u64` when `m = 64`.
    pub fn modulus(self) -> u128 {
        1u128 << self.bits
    }

    #[inline]
    pub fn mask(self) -> u64 {
        if self.bits == 64 {
            u64::MAX
        } else {
            (1u64 << self.bits) - 1
        }
    }

    #[inline]
    pub fn reduce(self, x: u64) -> u64 {
        x & self.mask()
    }

    #[inline]
    pub fn add(self, a: u64, b: u64) -> u64 {
        a.wrapping_add(b) & self.mask()
    }

    #[inline]
    pub fn sub(self, a: u64, b: u64) -> u64 {
        a.wrapping_sub(b) & self.mask()
    }

    #[inline]
    pub fn neg(self, a: u64) -> u64 {
        a.wrapping_neg() & self.mask()
    }

    #[inline]
    pub fn mul(self, a: u64, b: u64) -> u64 {
        a.wrapping_mul(b) & self.mask()
    }

    /// Units of `Z/2^m` are exactly the odd residues.
    #[inline]
    pub fn is_unit(self, a: u64) -> bool {
        a & 1 == 1
    }

    /// Multiplicative inverse of an odd element.
    pub fn inverse(self, a: u64) -> Option<u64> {
        if !self.is_unit(a) {
            return None;
        }
        // Newton iteration: each step doubles the number of correct low bits.
        // a*a == 1 mod 8 for odd a, so the seed is correct to three bits.
        let mut x = a;
        for _ in 0..5 {
            x = x.wrapping_mul(2u64.wrapping_sub(a.wrapping_mul(x)));
        }
        Some(self.reduce(x))
    }

    pub fn pow(self, base: u64, mut exp: u64) -> u64 {
        let mut acc = self.reduce(1);
        let mut b = self.reduce(base);
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, b);
            }
            b = self.mul(b, b);
            exp >>= 1;
        }
        acc
    }
}

impl Default for RingParams {
    fn default() -> Self {
        Self::BYTE
    }
}

/// A column vector of ring elements: one plaintext or ciphertext unit.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Block {
    entries: Vec<u64>,
}

impl Block {
    pub fn new(entries: Vec<u64>, ring: RingParams) -> Result<Self, RingError> {
        if entries.is_empty() {
            return Err(RingError::Empty);
        }
        Ok(Self {
            entries: entries.into_iter().map(|x| ring.reduce(x)).collect(),
        })
    }

    /// Maps each byte to the ring element of the same value.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, RingError> {
        Self::new(
            bytes.iter().map(|&b| u64::from(b)).collect(),
            RingParams::BYTE,
        )
    }

    /// Low byte of each entry; lossless when the ring is `Z/256`.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.entries.iter().map(|&x| x as u8).collect()
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[u64] {
        &self.entries
    }

    pub fn add(&self, other: &Block, ring: RingParams) -> Result<Block, RingError> {
        check_dims(self.dim(), other.dim())?;
        Ok(Block {
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(&a, &b)| ring.add(a, b))
                .collect(),
        })
    }
}

impl fmt::Debug for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.entries).finish()
    }
}

/// Square matrix over `Z/2^m`, row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RingMatrix {
    dim: usize,
    entries: Vec<u64>,
}

impl fmt::Debug for RingMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.rows()).finish()
    }
}

fn check_dims(left: usize, right: usize) -> Result<(), RingError> {
    if left == right {
        Ok(())
    } else {
        Err(RingError::DimensionMismatch { left, right })
    }
}

impl RingMatrix {
    /// Builds a `dim x dim` matrix from row-major entries, reducing each one.
    pub fn new(dim: usize, entries: Vec<u64>, ring: RingParams) -> Result<Self, RingError> {
        if dim == 0 {
            return Err(RingError::Empty);
        }
        if dim > DEFAULT_MAX_DIM {
            return Err(RingError::TooLarge {
                dim,
                max: DEFAULT_MAX_DIM,
            });
        }
        if entries.len() != dim * dim {
            return Err(RingError::WrongEntryCount {
                expected: dim * dim,
                actual: entries.len(),
            });
        }
        Ok(Self {
            dim,
            entries: entries.into_iter().map(|x| ring.reduce(x)).collect(),
        })
    }

    /// Convenience constructor from nested rows.
    pub fn from_rows<R: AsRef<[u64]>>(rows: &[R], ring: RingParams) -> Result<Self, RingError> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            let row = row.as_ref();
            check_dims(dim, row.len())?;
            entries.extend_from_slice(row);
        }
        Self::new(dim, entries, ring)
    }

    pub fn identity(dim: usize) -> Self {
        assert!(
            dim > 0 && dim <= DEFAULT_MAX_DIM,
            "identity dimension {dim}"
        );
        let mut entries = vec![0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1;
        }
        Self { dim, entries }
    }

    /// Matrix whose columns are the given blocks.
    pub fn from_columns(columns: &[&Block]) -> Result<Self, RingError> {
        let dim = columns.len();
        if dim == 0 {
            return Err(RingError::Empty);
        }
        let mut entries = vec![0; dim * dim];
        for (j, col) in columns.iter().enumerate() {
            check_dims(dim, col.dim())?;
            for (i, &x) in col.entries().iter().enumerate() {
                entries[i * dim + j] = x;
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[u64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u64 {
        self.entries[row * self.dim + col]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u64]> {
        self.entries.chunks_exact(self.dim)
    }

    pub fn column(&self, col: usize) -> Block {
        Block {
            entries: (0..self.dim).map(|i| self.get(i, col)).collect(),
        }
    }

    pub fn mul(&self, other: &RingMatrix, ring: RingParams) -> Result<RingMatrix, RingError> {
        check_dims(self.dim, other.dim)?;
        let n = self.dim;
        let mut out = vec![0u64; n * n];
        for i in 0..n {
            let row = &self.entries[i * n..(i + 1) * n];
            let acc = &mut out[i * n..(i + 1) * n];
            for (k, &a) in row.iter().enumerate() {
                if a == 0 {
                    continue;
                }
                let other_row = &other.entries[k * n..(k + 1) * n];
                for (dst, &b) in acc.iter_mut().zip(other_row) {
                    *dst = dst.wrapping_add(a.wrapping_mul(b));
                }
            }
        }
        let mask = ring.mask();
        out.iter_mut().for_each(|x| *x &= mask);
        Ok(RingMatrix {
            dim: n,
            entries: out,
        })
    }

    /// `self * v`, the linear map at the heart of the cipher.
    pub fn mul_vec(&self, v: &Block, ring: RingParams) -> Result<Block, RingError> {
        check_dims(self.dim, v.dim())?;
        let mut out = vec![0u64; self.dim];
        self.mul_vec_into(&v.entries, &mut out, ring);
        Ok(Block { entries: out })
    }

    /// Unchecked inner loop shared with the byte-stream cipher.
    #[inline]
    pub(crate) fn mul_vec_into(&self, v: &[u64], out: &mut [u64], ring: RingParams) {
        let mask = ring.mask();
        for (row, dst) in self.rows().zip(out.iter_mut()) {
            let s = row
                .iter()
                .zip(v)
                .fold(0u64, |acc, (&a, &b)| acc.wrapping_add(a.wrapping_mul(b)));
            *dst = s & mask;
        }
    }

    /// Determinant, by elimination using only unimodular row operations.
    ///
    /// Each pivot is the entry of least 2-adic valuation in its column, so
    /// every other entry in the column is a multiple of it by a ring element
    /// and can be cleared without dividing by a non-unit.
    pub fn det(&self, ring: RingParams) -> u64 {
        let n = self.dim;
        let mut a = self.entries.clone();
        let mut det = ring.reduce(1);
        for col in 0..n {
            let pivot_row = (col..n)
                .filter(|&r| a[r * n + col] != 0)
                .min_by_key(|&r| a[r * n + col].trailing_zeros());
            let Some(p) = pivot_row else {
                return 0;
            };
            if p != col {
                for j in 0..n {
                    a.swap(p * n + j, col * n + j);
                }
                det = ring.neg(det);
            }
            let pivot = a[col * n + col];
            let shift = pivot.trailing_zeros();
            let unit_inv = ring.inverse(pivot >> shift).expect("odd part is a unit");
            for r in col + 1..n {
                let e = a[r * n + col];
                if e == 0 {
                    continue;
                }
                let factor = ring.mul(e >> shift, unit_inv);
                for j in col..n {
                    let v = ring.mul(factor, a[col * n + j]);
                    a[r * n + j] = ring.sub(a[r * n + j], v);
                }
            }
            det = ring.mul(det, pivot);
        }
        det
    }

    pub fn is_invertible(&self, ring: RingParams) -> bool {
        ring.is_unit(self.det(ring))
    }

    /// Gauss-Jordan inversion with odd (unit) pivots and row swaps.
    pub fn invert(&self, ring: RingParams) -> Result<RingMatrix, RingError> {
        let n = self.dim;
        let mut a = self.entries.clone();
        let mut inv = RingMatrix::identity(n).entries;
        for col in 0..n {
            let p = (col..n)
                .find(|&r| ring.is_unit(a[r * n + col]))
                .ok_or(RingError::NotInvertible)?;
            if p != col {
                for j in 0..n {
                    a.swap(p * n + j, col * n + j);
                    inv.swap(p * n + j, col * n + j);
                }
            }
            let scale = ring.inverse(a[col * n + col]).expect("pivot is odd");
            for j in 0..n {
                a[col * n + j] = ring.mul(a[col * n + j], scale);
                inv[col * n + j] = ring.mul(inv[col * n + j], scale);
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let factor = a[r * n + col];
                if factor == 0 {
                    continue;
                }
                for j in 0..n {
                    a[r * n + j] = ring.sub(a[r * n + j], ring.mul(factor, a[col * n + j]));
                    inv[r * n + j] = ring.sub(inv[r * n + j], ring.mul(factor, inv[col * n + j]));
                }
            }
        }
        Ok(RingMatrix {
            dim: n,
            entries: inv,
        })
    }

    /// Kronecker product capped at [`DEFAULT_MAX_DIM`].
    pub fn kronecker(&self, other: &RingMatrix, ring: RingParams) -> Result<RingMatrix, RingError> {
        self.kronecker_with_limit(other, ring, DEFAULT_MAX_DIM)
    }

    /// Block `(i, j)` of the result is `self[i][j] * other`.
    pub fn kronecker_with_limit(
        &self,
        other: &RingMatrix,
        ring: RingParams,
        max_dim: usize,
    ) -> Result<RingMatrix, RingError> {
        let (p, q) = (self.dim, other.dim);
        let dim = p
            .checked_mul(q)
            .filter(|&d| d <= max_dim.min(DEFAULT_MAX_DIM))
            .ok_or(RingError::TooLarge {
                dim: p.saturating_mul(q),
                max: max_dim.min(DEFAULT_MAX_DIM),
            })?;
        let mut entries = vec![0u64; dim * dim];
        for i in 0..p {
            for j in 0..p {
                let a = self.get(i, j);
                for k in 0..q {
                    for l in 0..q {
                        entries[(i * q + k) * dim + (j * q + l)] = ring.mul(a, other.get(k, l));
                    }
                }
            }
        }
        Ok(RingMatrix { dim, entries })
    }

    /// Iterated Kronecker product `factors[0] ⊗ factors[1] ⊗ ...`.
    pub fn kronecker_all(
        factors: &[RingMatrix],
        ring: RingParams,
    ) -> Result<RingMatrix, RingError> {
        let (first, rest) = factors.split_first().ok_or(RingError::Empty)?;
        rest.iter()
            .try_fold(first.clone(), |acc, f| acc.kronecker(f, ring))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const Z256: RingParams = RingParams::BYTE;

    fn m(rows: &[&[u64]], ring: RingParams) -> RingMatrix {
        RingMatrix::from_rows(rows, ring).unwrap()
    }

    #[test]
    fn params_bounds() {
        assert!(RingParams::new(0).is_err());
        assert!(RingParams::new(65).is_err());
        assert_eq!(RingParams::new(64).unwrap().modulus(), 1u128 << 64);
        assert_eq!(RingParams::new(8).unwrap().modulus(), 256);
    }

    #[test]
    fn unit_inverse_every_width() {
        for bits in 1..=64 {
            let ring = RingParams::new(bits).unwrap();
            for a in [1u64, 3, 5, 255, 0xdead_beef, u64::MAX] {
                let a = ring.reduce(a) | 1;
                let inv = ring.inverse(a).unwrap();
                assert_eq!(ring.mul(a, inv), 1, "bits={bits} a={a}");
            }
            assert_eq!(ring.inverse(2 & ring.mask()), None);
        }
    }

    #[test]
    fn mat_mul_examples() {
        let b = m(&[&[9, 8], &[7, 6]], Z256);
        assert_eq!(RingMatrix::identity(2).mul(&b, Z256).unwrap(), b);
        let x = m(&[&[1, 1], &[0, 1]], Z256);
        let y = m(&[&[1, 0], &[1, 1]], Z256);
        assert_eq!(x.mul(&y, Z256).unwrap(), m(&[&[2, 1], &[1, 1]], Z256));
        let z4 = RingParams::new(2).unwrap();
        let t = m(&[&[3, 3], &[3, 3]], z4);
        let ones = m(&[&[1, 1], &[1, 1]], z4);
        assert_eq!(t.mul(&ones, z4).unwrap(), m(&[&[2, 2], &[2, 2]], z4));
    }

    #[test]
    fn mat_mul_dimension_mismatch() {
        let err = RingMatrix::identity(2).mul(&RingMatrix::identity(3), Z256);
        assert_eq!(err, Err(RingError::DimensionMismatch { left: 2, right: 3 }));
        let v = Block::new(vec![1, 2, 3], Z256).unwrap();
        assert!(RingMatrix::identity(2).mul_vec(&v, Z256).is_err());
    }

    #[test]
    fn mat_vec_examples() {
        let v = Block::new(vec![2, 3], Z256).unwrap();
        assert_eq!(RingMatrix::identity(2).mul_vec(&v, Z256).unwrap(), v);
        let k = m(&[&[1, 1], &[0, 1]], Z256);
        assert_eq!(k.mul_vec(&v, Z256).unwrap().entries(), &[5, 3]);
        let swap = m(&[&[0, 1], &[1, 0]], Z256);
        let w = Block::new(vec![7, 9], Z256).unwrap();
        assert_eq!(swap.mul_vec(&w, Z256).unwrap().entries(), &[9, 7]);
    }

    #[test]
    fn det_examples() {
        for n in 1..6 {
            assert_eq!(RingMatrix::identity(n).det(Z256), 1);
        }
        assert_eq!(m(&[&[1, 1], &[0, 1]], Z256).det(Z256), 1);
        assert_eq!(m(&[&[2, 0], &[0, 1]], Z256).det(Z256), 2);
        // a row swap flips the sign
        assert_eq!(m(&[&[0, 1], &[1, 0]], Z256).det(Z256), 255);
        // even pivots: det([[2,4],[6,4]]) = 8 - 24 = -16
        assert_eq!(m(&[&[2, 4], &[6, 4]], Z256).det(Z256), 240);
    }

    #[test]
    fn invertibility_examples() {
        assert!(RingMatrix::identity(4).is_invertible(Z256));
        assert!(!m(&[&[2, 0], &[0, 1]], Z256).is_invertible(Z256));
        assert!(m(&[&[1, 1], &[0, 1]], Z256).is_invertible(Z256));
    }

    #[test]
    fn invert_examples() {
        assert_eq!(
            RingMatrix::identity(3).invert(Z256).unwrap(),
            RingMatrix::identity(3)
        );
        let k = m(&[&[1, 1], &[0, 1]], Z256);
        assert_eq!(k.invert(Z256).unwrap(), m(&[&[1, 255], &[0, 1]], Z256));
        let err = m(&[&[2, 0], &[0, 1]], Z256).invert(Z256).unwrap_err();
        assert_eq!(err.to_string(), "matrix not a unit mod 2^m");
    }

    #[test]
    fn invert_needs_row_swap() {
        let k = m(&[&[2, 1], &[1, 0]], Z256);
        let inv = k.invert(Z256).unwrap();
        assert_eq!(k.mul(&inv, Z256).unwrap(), RingMatrix::identity(2));
    }

    #[test]
    fn kronecker_examples() {
        let i2 = RingMatrix::identity(2);
        assert_eq!(i2.kronecker(&i2, Z256).unwrap(), RingMatrix::identity(4));
        let a = m(&[&[1, 1], &[0, 1]], Z256);
        let expected = m(
            &[&[1, 0, 1, 0], &[0, 1, 0, 1], &[0, 0, 1, 0], &[0, 0, 0, 1]],
            Z256,
        );
        assert_eq!(a.kronecker(&i2, Z256).unwrap(), expected);
    }

    #[test]
    fn kronecker_respects_cap() {
        let big = RingMatrix::identity(128);
        let err = big.kronecker(&RingMatrix::identity(4), Z256).unwrap_err();
        assert_eq!(err, RingError::TooLarge { dim: 512, max: 256 });
        assert!(RingMatrix::identity(4)
            .kronecker_with_limit(&RingMatrix::identity(4), Z256, 8)
            .is_err());
        assert_eq!(
            RingMatrix::identity(128)
                .kronecker(&RingMatrix::identity(2), Z256)
                .unwrap()
                .dim(),
            256
        );
    }

    #[test]
    fn full_width_ring() {
        let ring = RingParams::new(64).unwrap();
        let k = m(&[&[u64::MAX, 2], &[0, 1]], ring);
        let inv = k.invert(ring).unwrap();
        assert_eq!(k.mul(&inv, ring).unwrap(), RingMatrix::identity(2));
        assert_eq!(k.det(ring), u64::MAX);
    }

    #[test]
    fn new_validates_shape() {
        assert_eq!(
            RingMatrix::new(2, vec![1, 2, 3], Z256),
            Err(RingError::WrongEntryCount {
                expected: 4,
                actual: 3
            })
        );
        assert_eq!(RingMatrix::new(0, vec![], Z256), Err(RingError::Empty));
        // entries are reduced on construction
        assert_eq!(RingMatrix::new(1, vec![257], Z256).unwrap().entries(), &[1]);
    }
}
