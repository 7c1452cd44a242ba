//! Arithmetic over GF(2^q) for q in {1, 8} and Gaussian elimination on
//! matrices of field elements.
//!
//! Elements are stored as plain `u8` values in bulk data (rows, packets) and
//! wrapped in [`FieldElement`] at the scalar API boundary. Multiplication is a
//! single lookup into a `2^q x 2^q` table built once per field from the
//! shift-and-reduce definition.

use std::collections::{BTreeSet, HashMap};
use std::ops::Range;
use std::sync::{LazyLock, Mutex};

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GaloisError {
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("unsupported field exponent q={0}; only q=1 and q=8 are supported")]
    UnsupportedExponent(u8),
    #[error("polynomial {poly:#x} is not irreducible of degree {q}")]
    NotIrreducible { q: u8, poly: u16 },
    #[error("matrix has no rows or no columns")]
    EmptyMatrix,
    #[error("pivot range {start}..{end} exceeds {cols} columns")]
    PivotRange {
        start: usize,
        end: usize,
        cols: usize,
    },
}

/// Exponent and reduction polynomial of a binary extension field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldSpec {
    q: u8,
    poly: u16,
}

impl FieldSpec {
    /// GF(2^8) reduced by x^8 + x^4 + x^3 + x^2 + 1.
    pub const GF256: FieldSpec = FieldSpec { q: 8, poly: 0x11D };
    /// GF(2), written as polynomials modulo x + 1.
    pub const GF2: FieldSpec = FieldSpec { q: 1, poly: 0b11 };

    /// Validates `q` and checks that `poly` is irreducible of degree `q` by
    /// trial division with every polynomial of degree 1..=q/2.
    pub fn new(q: u8, poly: u16) -> Result<Self, GaloisError> {
        if q != 1 && q != 8 {
            return Err(GaloisError::UnsupportedExponent(q));
        }
        if poly >> q != 1 || !is_irreducible(poly, q) {
            return Err(GaloisError::NotIrreducible { q, poly });
        }
        Ok(Self { q, poly })
    }

    /// Standard field for a given symbol width.
    pub fn for_bits(q: u8) -> Result<Self, GaloisError> {
        match q {
            1 => Ok(Self::GF2),
            8 => Ok(Self::GF256),
            other => Err(GaloisError::UnsupportedExponent(other)),
        }
    }

    pub fn q(&self) -> u8 {
        self.q
    }

    pub fn polynomial(&self) -> u16 {
        self.poly
    }

    /// Number of field elements, 2^q.
    pub fn order(&self) -> usize {
        1 << self.q
    }
}

fn degree(p: u32) -> i32 {
    31 - p.leading_zeros() as i32
}

fn poly_mod(mut a: u32, b: u32) -> u32 {
    let db = degree(b);
    while a != 0 && degree(a) >= db {
        a ^= b << (degree(a) - db);
    }
    a
}

fn is_irreducible(poly: u16, q: u8) -> bool {
    let poly = poly as u32;
    // divisors of degree d in 1..=q/2 are exactly the values in [2^d, 2^(d+1))
    let limit = 1u32 << (q as u32 / 2 + 1);
    (2..limit).all(|d| poly_mod(poly, d) != 0)
}

/// Polynomial product of `a` and `b` reduced modulo the field polynomial, one
/// bit of `b` at a time.
pub fn mul_shift_reduce(a: u8, b: u8, spec: FieldSpec) -> u8 {
    let top = 1u16 << spec.q;
    let mut a = a as u16;
    let mut b = b;
    let mut acc = 0u16;
    while b != 0 {
        if b & 1 != 0 {
            acc ^= a;
        }
        b >>= 1;
        a <<= 1;
        if a & top != 0 {
            a ^= spec.poly;
        }
    }
    acc as u8
}

/// A scalar of GF(2^q).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldElement(pub u8);

impl FieldElement {
    pub const ZERO: FieldElement = FieldElement(0);
    pub const ONE: FieldElement = FieldElement(1);

    pub fn value(self) -> u8 {
        self.0
    }
}

/// Precomputed arithmetic tables for one field.
pub struct Field {
    spec: FieldSpec,
    mul: Vec<u8>,
    inv: Vec<u8>,
}

impl std::fmt::Debug for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Field").field("spec", &self.spec).finish()
    }
}

static GF256: LazyLock<Field> = LazyLock::new(|| Field::new(FieldSpec::GF256));
static GF2: LazyLock<Field> = LazyLock::new(|| Field::new(FieldSpec::GF2));
static CUSTOM: LazyLock<Mutex<HashMap<FieldSpec, &'static Field>>> =
    LazyLock::new(|| Mutex::new(HashMap::new()));

impl Field {
    pub fn new(spec: FieldSpec) -> Self {
        let n = spec.order();
        let mut mul = vec![0u8; n * n];
        for a in 0..n {
            for b in 0..n {
                mul[(a << spec.q) | b] = mul_shift_reduce(a as u8, b as u8, spec);
            }
        }
        let mut inv = vec![0u8; n];
        for a in 1..n {
            inv[a] = (1..n)
                .find(|&b| mul[(a << spec.q) | b] == 1)
                .expect("every nonzero element of a field is invertible")
                as u8;
        }
        Self { spec, mul, inv }
    }

    pub fn gf256() -> &'static Field {
        &GF256
    }

    pub fn gf2() -> &'static Field {
        &GF2
    }

    /// Shared instance for `spec`. Non-standard polynomials are built once and
    /// kept for the life of the process.
    pub fn shared(spec: FieldSpec) -> &'static Field {
        if spec == FieldSpec::GF256 {
            return &GF256;
        }
        if spec == FieldSpec::GF2 {
            return &GF2;
        }
        let mut cache = CUSTOM.lock().expect("field cache poisoned");
        cache
            .entry(spec)
            .or_insert_with(|| Box::leak(Box::new(Field::new(spec))))
    }

    pub fn spec(&self) -> FieldSpec {
        self.spec
    }

    pub fn q(&self) -> u8 {
        self.spec.q
    }

    pub fn order(&self) -> usize {
        self.spec.order()
    }

    pub fn add(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        FieldElement(a.0 ^ b.0)
    }

    pub fn mul(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        FieldElement(self.mul_raw(a.0, b.0))
    }

    pub fn inv(&self, a: FieldElement) -> Result<FieldElement, GaloisError> {
        if a.0 == 0 {
            return Err(GaloisError::ZeroInverse);
        }
        Ok(FieldElement(self.inv[a.0 as usize]))
    }

    pub fn div(&self, a: FieldElement, b: FieldElement) -> Result<FieldElement, GaloisError> {
        Ok(self.mul(a, self.inv(b)?))
    }

    #[inline]
    pub fn mul_raw(&self, a: u8, b: u8) -> u8 {
        self.mul[((a as usize) << self.spec.q) | b as usize]
    }

    /// Inverse of a nonzero raw value. Panics on zero.
    #[inline]
    pub fn inv_raw(&self, a: u8) -> u8 {
        assert_ne!(a, 0, "inverse of zero");
        self.inv[a as usize]
    }

    /// `dst += c * src`, element-wise.
    #[inline]
    pub fn axpy(&self, dst: &mut [u8], c: u8, src: &[u8]) {
        debug_assert_eq!(dst.len(), src.len());
        match c {
            0 => {}
            1 => dst.iter_mut().zip(src).for_each(|(d, s)| *d ^= s),
            _ => {
                let row = &self.mul[(c as usize) << self.spec.q..][..self.order()];
                dst.iter_mut()
                    .zip(src)
                    .for_each(|(d, &s)| *d ^= row[s as usize]);
            }
        }
    }

    /// `dst *= c`, element-wise.
    #[inline]
    pub fn scale(&self, dst: &mut [u8], c: u8) {
        if c == 1 {
            return;
        }
        let row = &self.mul[(c as usize) << self.spec.q..][..self.order()];
        dst.iter_mut().for_each(|d| *d = row[*d as usize]);
    }

    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> u8 {
        rng.random_range(0..self.order()) as u8
    }

    pub fn random_nonzero<R: Rng + ?Sized>(&self, rng: &mut R) -> u8 {
        rng.random_range(1..self.order()) as u8
    }
}

/// Dense row-major matrix of raw field values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

/// Output of [`FieldMatrix::rref`].
#[derive(Debug, Clone)]
pub struct RowReduction {
    pub matrix: FieldMatrix,
    pub rank: usize,
    /// Pivot column of output row `i`, for `i < rank`.
    pub pivot_columns: Vec<usize>,
    /// `provenance[i]` holds the input rows that were combined into output
    /// row `i`; present only when tracking was requested.
    pub provenance: Option<Vec<BTreeSet<usize>>>,
}

impl RowReduction {
    /// Output rows whose entries in `range` are all zero.
    pub fn zero_rows(&self, range: Range<usize>) -> Vec<usize> {
        (0..self.matrix.rows)
            .filter(|&r| self.matrix.row(r)[range.clone()].iter().all(|&v| v == 0))
            .collect()
    }
}

impl FieldMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: u8) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[u8] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [u8] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let (lo, hi) = (a.min(b), a.max(b));
        let (head, tail) = self.data.split_at_mut(hi * self.cols);
        head[lo * self.cols..(lo + 1) * self.cols].swap_with_slice(&mut tail[..self.cols]);
    }

    /// `row[dst] += c * row[src]`.
    fn axpy_rows(&mut self, field: &Field, dst: usize, c: u8, src: usize) {
        debug_assert_ne!(dst, src);
        let cols = self.cols;
        let (d, s) = if dst < src {
            let (head, tail) = self.data.split_at_mut(src * cols);
            (&mut head[dst * cols..(dst + 1) * cols], &tail[..cols])
        } else {
            let (head, tail) = self.data.split_at_mut(dst * cols);
            (&mut tail[..cols], &head[src * cols..(src + 1) * cols])
        };
        field.axpy(d, c, s);
    }

    /// Reduced row-echelon form with pivots restricted to `pivot_cols`.
    ///
    /// Operations are applied to the full row width, so columns outside the
    /// pivot range carry along whatever combination the coefficient block
    /// dictates.
    pub fn rref(
        &self,
        field: &Field,
        pivot_cols: Range<usize>,
        track_provenance: bool,
    ) -> Result<RowReduction, GaloisError> {
        if self.rows == 0 || self.cols == 0 {
            return Err(GaloisError::EmptyMatrix);
        }
        if pivot_cols.end > self.cols || pivot_cols.start > pivot_cols.end {
            return Err(GaloisError::PivotRange {
                start: pivot_cols.start,
                end: pivot_cols.end,
                cols: self.cols,
            });
        }
        let mut m = self.clone();
        let mut prov: Option<Vec<BTreeSet<usize>>> =
            track_provenance.then(|| (0..m.rows).map(|i| BTreeSet::from([i])).collect());
        let mut pivots = Vec::new();
        let mut pivot_row = 0;
        for col in pivot_cols {
            if pivot_row == m.rows {
                break;
            }
            let Some(found) = (pivot_row..m.rows).find(|&r| m.get(r, col) != 0) else {
                continue;
            };
            m.swap_rows(pivot_row, found);
            if let Some(p) = prov.as_mut() {
                p.swap(pivot_row, found);
            }
            let inv = field.inv_raw(m.get(pivot_row, col));
            field.scale(m.row_mut(pivot_row), inv);
            for r in 0..m.rows {
                let f = m.get(r, col);
                if r == pivot_row || f == 0 {
                    continue;
                }
                m.axpy_rows(field, r, f, pivot_row);
                if let Some(p) = prov.as_mut() {
                    let src = p[pivot_row].clone();
                    p[r].extend(src);
                }
            }
            pivots.push(col);
            pivot_row += 1;
        }
        Ok(RowReduction {
            matrix: m,
            rank: pivots.len(),
            pivot_columns: pivots,
            provenance: prov,
        })
    }

    /// Rank over all columns.
    pub fn rank(&self, field: &Field) -> usize {
        if self.rows == 0 || self.cols == 0 {
            return 0;
        }
        self.rref(field, 0..self.cols, false)
            .map(|r| r.rank)
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn e(v: u8) -> FieldElement {
        FieldElement(v)
    }

    // Full carry-less product followed by polynomial long division; shares no
    // code with the table builder.
    fn clmul_then_reduce(a: u8, b: u8, poly: u16) -> u8 {
        let mut prod = 0u32;
        for i in 0..8 {
            if b >> i & 1 == 1 {
                prod ^= (a as u32) << i;
            }
        }
        poly_mod(prod, poly as u32) as u8
    }

    #[test]
    fn add_examples() {
        let f = Field::gf256();
        assert_eq!(f.add(e(0x5A), e(0x5A)), e(0x00));
        assert_eq!(f.add(e(0x00), e(0x37)), e(0x37));
        assert_eq!(f.add(e(0x0F), e(0xF0)), e(0xFF));
    }

    #[test]
    fn mul_examples() {
        let f = Field::gf256();
        assert_eq!(f.mul(e(0x00), e(0x87)), e(0x00));
        assert_eq!(f.mul(e(0x01), e(0x87)), e(0x87));
        assert_eq!(clmul_then_reduce(0x02, 0x87, 0x11D), 0x13);
        assert_eq!(f.mul(e(0x02), e(0x87)), e(0x13));
    }

    #[test]
    fn table_matches_independent_multiply() {
        let f = Field::gf256();
        for a in 0..=255u8 {
            for b in 0..=255u8 {
                assert_eq!(f.mul_raw(a, b), clmul_then_reduce(a, b, 0x11D));
            }
        }
    }

    #[test]
    fn inverses_exhaustive() {
        let f = Field::gf256();
        assert_eq!(f.inv(e(1)), Ok(e(1)));
        assert_eq!(f.inv(e(0)), Err(GaloisError::ZeroInverse));
        for a in 1..=255u8 {
            let inv = f.inv(e(a)).unwrap();
            assert_eq!(f.mul(e(a), inv), FieldElement::ONE);
            // the inverse is unique
            let by_search: Vec<u8> = (1..=255u8).filter(|&b| f.mul_raw(a, b) == 1).collect();
            assert_eq!(by_search, vec![inv.0]);
        }
    }

    #[test]
    fn gf2_arithmetic() {
        let f = Field::gf2();
        assert_eq!(f.mul_raw(1, 1), 1);
        assert_eq!(f.mul_raw(1, 0), 0);
        assert_eq!(f.inv(e(1)), Ok(e(1)));
        assert_eq!(f.order(), 2);
    }

    #[test]
    fn field_spec_validation() {
        assert!(FieldSpec::new(8, 0x11D).is_ok());
        assert!(FieldSpec::new(8, 0x11B).is_ok());
        // x^8 + 1 = (x + 1)^8
        assert_eq!(
            FieldSpec::new(8, 0x101),
            Err(GaloisError::NotIrreducible { q: 8, poly: 0x101 })
        );
        assert_eq!(
            FieldSpec::new(4, 0x13),
            Err(GaloisError::UnsupportedExponent(4))
        );
        assert!(FieldSpec::new(1, 0b11).is_ok());
        let custom = FieldSpec::new(8, 0x11B).unwrap();
        let f = Field::shared(custom);
        assert_eq!(f.mul_raw(0x53, 0xCA), 0x01);
    }

    #[test]
    fn generator_stays_in_range() {
        let f = Field::gf256();
        let mut x = 1u8;
        let mut seen = BTreeSet::new();
        for _ in 0..255 {
            x = f.mul_raw(x, 2);
            assert!(seen.insert(x));
        }
        assert_eq!(x, 1, "0x02 is primitive for 0x11D");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100_000))]
        #[test]
        fn field_axioms(a: u8, b: u8, c: u8) {
            let f = Field::gf256();
            let (a, b, c) = (e(a), e(b), e(c));
            prop_assert_eq!(f.add(f.add(a, b), c), f.add(a, f.add(b, c)));
            prop_assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
            prop_assert_eq!(f.mul(a, b), f.mul(b, a));
            prop_assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
        }
    }

    #[test]
    fn rref_identity() {
        let f = Field::gf256();
        let m = FieldMatrix::from_rows(&[[1u8, 0, 0], [0, 1, 0], [0, 0, 1]]);
        let r = m.rref(f, 0..3, true).unwrap();
        assert_eq!(r.matrix, m);
        assert_eq!(r.rank, 3);
        let prov = r.provenance.unwrap();
        for (i, p) in prov.iter().enumerate() {
            assert_eq!(p, &BTreeSet::from([i]));
        }
    }

    #[test]
    fn rref_constructed_dependency() {
        let f = Field::gf256();
        let r0 = [0x12u8, 0x34, 0x56];
        let r1 = [0x9Au8, 0x00, 0x77];
        let r2: Vec<u8> = r0.iter().zip(&r1).map(|(a, b)| a ^ b).collect();
        let m = FieldMatrix::from_rows(&[r0.to_vec(), r1.to_vec(), r2]);
        let r = m.rref(f, 0..3, true).unwrap();
        assert_eq!(r.rank, 2);
        let zeros = r.zero_rows(0..3);
        assert_eq!(zeros.len(), 1);
        let prov = r.provenance.unwrap();
        assert_eq!(prov[zeros[0]], BTreeSet::from([0, 1, 2]));
    }

    #[test]
    fn rref_empty_is_error() {
        let m = FieldMatrix::zeros(0, 3);
        assert_eq!(
            m.rref(Field::gf256(), 0..3, false).unwrap_err(),
            GaloisError::EmptyMatrix
        );
    }

    // Rank as the size of the largest nonsingular square minor; determinants
    // by permutation expansion (no sign in characteristic 2).
    fn det_leibniz(f: &Field, m: &[Vec<u8>]) -> u8 {
        fn rec(f: &Field, m: &[Vec<u8>], row: usize, used: &mut Vec<bool>, acc: u8) -> u8 {
            if acc == 0 {
                return 0;
            }
            if row == m.len() {
                return acc;
            }
            let mut sum = 0u8;
            for c in 0..m.len() {
                if !used[c] {
                    used[c] = true;
                    sum ^= rec(f, m, row + 1, used, f.mul_raw(acc, m[row][c]));
                    used[c] = false;
                }
            }
            sum
        }
        rec(f, m, 0, &mut vec![false; m.len()], 1)
    }

    fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
        (0u32..1 << n)
            .filter(|s| s.count_ones() as usize == k)
            .map(|s| (0..n).filter(|i| s >> i & 1 == 1).collect())
            .collect()
    }

    fn brute_rank(f: &Field, rows: &[Vec<u8>]) -> usize {
        let (n, m) = (rows.len(), rows[0].len());
        for k in (1..=n.min(m)).rev() {
            for rs in subsets(n, k) {
                for cs in subsets(m, k) {
                    let minor: Vec<Vec<u8>> = rs
                        .iter()
                        .map(|&r| cs.iter().map(|&c| rows[r][c]).collect())
                        .collect();
                    if det_leibniz(f, &minor) != 0 {
                        return k;
                    }
                }
            }
        }
        0
    }

    #[test]
    fn rank_matches_minor_oracle() {
        let f = Field::gf256();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..40 {
            let mut rows: Vec<Vec<u8>> = (0..5)
                .map(|_| (0..8).map(|_| f.random(&mut rng)).collect())
                .collect();
            // plant dependencies in some trials
            if trial % 2 == 0 {
                let c = f.random_nonzero(&mut rng);
                let mut dep = rows[0].clone();
                f.axpy(&mut dep, c, &rows[1]);
                rows[4] = dep;
            }
            if trial % 4 == 0 {
                rows[3] = rows[2].clone();
            }
            let m = FieldMatrix::from_rows(&rows);
            assert_eq!(m.rank(f), brute_rank(f, &rows), "trial {trial}");
        }
    }

    #[test]
    fn rref_idempotent_and_single_dependency() {
        let f = Field::gf256();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let mut rows: Vec<Vec<u8>> = (0..4)
                .map(|_| (0..9).map(|_| f.random(&mut rng)).collect())
                .collect();
            let mut dep = vec![0u8; 9];
            for r in &rows {
                f.axpy(&mut dep, f.random_nonzero(&mut rng), r);
            }
            rows.push(dep);
            let m = FieldMatrix::from_rows(&rows);
            let once = m.rref(f, 0..6, false).unwrap();
            let twice = once.matrix.rref(f, 0..6, false).unwrap();
            assert_eq!(once.matrix, twice.matrix);
            if once.rank == 4 {
                assert_eq!(once.zero_rows(0..6).len(), 1);
            }
        }
    }
}
