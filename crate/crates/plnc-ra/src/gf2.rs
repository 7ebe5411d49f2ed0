//! Bit-packed GF(2) vectors and matrices: XOR accumulation, reduced row
//! echelon form with the elementary-operation transform, recoverability
//! analysis and augmented-system solving for frame-level packet recovery.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum Gf2Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("value out of domain: {0}")]
    Domain(String),
    #[error("contract violation: {0}")]
    Contract(String),
}

const WORD_BITS: usize = 64;

/// Fixed-length binary vector, bit-packed into `u64` limbs.
///
/// Externally the contract is index-based access only; the limb layout is an
/// internal detail. Unused high bits of the last limb are kept at zero so the
/// derived equality and hash are canonical.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitWord {
    limbs: Vec<u64>,
    len: usize,
}

impl BitWord {
    pub fn zeros(len: usize) -> Self {
        Self {
            limbs: vec![0; len.div_ceil(WORD_BITS)],
            len,
        }
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        let mut w = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b != 0 {
                w.set(i, true);
            }
        }
        w
    }

    /// Parse from a string of `0`/`1` characters, e.g. `"1010"`.
    pub fn from_str01(s: &str) -> Result<Self, Gf2Error> {
        let mut w = Self::zeros(s.len());
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => w.set(i, true),
                other => return Err(Gf2Error::Domain(format!("invalid bit char '{other}'"))),
            }
        }
        Ok(w)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.limbs[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 1u64 << (i % WORD_BITS);
        if value {
            self.limbs[i / WORD_BITS] |= mask;
        } else {
            self.limbs[i / WORD_BITS] &= !mask;
        }
    }

    pub fn xor_assign(&mut self, other: &BitWord) -> Result<(), Gf2Error> {
        if self.len != other.len {
            return Err(Gf2Error::Dimension(format!(
                "xor of lengths {} and {}",
                self.len, other.len
            )));
        }
        for (a, b) in self.limbs.iter_mut().zip(&other.limbs) {
            *a ^= b;
        }
        Ok(())
    }

    pub fn weight(&self) -> usize {
        self.limbs.iter().map(|l| l.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.limbs.iter().all(|&l| l == 0)
    }

    pub fn iter_bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Indices of the set bits, in increasing order.
    pub fn support(&self) -> Vec<usize> {
        (0..self.len).filter(|&i| self.get(i)).collect()
    }

    /// Index of the first set bit, if any.
    pub fn leading_one(&self) -> Option<usize> {
        for (k, &limb) in self.limbs.iter().enumerate() {
            if limb != 0 {
                return Some(k * WORD_BITS + limb.trailing_zeros() as usize);
            }
        }
        None
    }

    /// Interpret as an unsigned integer, LSB-first (bit 0 is the least
    /// significant). Inverse of [`binary_expansion`]. Panics if len > 64.
    pub fn to_index(&self) -> u64 {
        assert!(self.len <= 64, "to_index supports up to 64 bits");
        self.limbs.first().copied().unwrap_or(0)
    }
}

impl fmt::Debug for BitWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter_bits() {
            write!(f, "{}", u8::from(b))?;
        }
        Ok(())
    }
}

/// Row-major matrix over GF(2); all rows share the same length.
#[derive(Clone, PartialEq, Eq)]
pub struct BitMatrix {
    rows: Vec<BitWord>,
    n_cols: usize,
}

impl BitMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            rows: vec![BitWord::zeros(n_cols); n_rows],
            n_cols,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.rows[i].set(i, true);
        }
        m
    }

    pub fn from_rows(rows: Vec<BitWord>) -> Result<Self, Gf2Error> {
        let n_cols = rows.first().map_or(0, BitWord::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Gf2Error::Dimension("rows of unequal length".into()));
        }
        Ok(Self { rows, n_cols })
    }

    /// Build from rows given as 0/1 strings; convenient in tests.
    pub fn from_str01_rows(rows: &[&str]) -> Result<Self, Gf2Error> {
        let rows = rows
            .iter()
            .map(|s| BitWord::from_str01(s))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_rows(rows)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &BitWord {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[BitWord] {
        &self.rows
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.rows[r].get(c)
    }

    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        self.rows[r].set(c, value);
    }

    pub fn push_row(&mut self, row: BitWord) -> Result<(), Gf2Error> {
        if self.rows.is_empty() && self.n_cols == 0 {
            self.n_cols = row.len();
        } else if row.len() != self.n_cols {
            return Err(Gf2Error::Dimension("pushed row of wrong length".into()));
        }
        self.rows.push(row);
        Ok(())
    }

    /// Matrix product over GF(2).
    pub fn mul(&self, rhs: &BitMatrix) -> Result<BitMatrix, Gf2Error> {
        if self.n_cols != rhs.n_rows() {
            return Err(Gf2Error::Dimension(format!(
                "product of {}x{} and {}x{}",
                self.n_rows(),
                self.n_cols,
                rhs.n_rows(),
                rhs.n_cols()
            )));
        }
        let mut out = BitMatrix::zeros(self.n_rows(), rhs.n_cols());
        for (i, row) in self.rows.iter().enumerate() {
            for j in 0..self.n_cols {
                if row.get(j) {
                    out.rows[i].xor_assign(&rhs.rows[j])?;
                }
            }
        }
        Ok(out)
    }

    /// Matrix-vector product over GF(2), treating `v` as a column vector.
    pub fn mul_vec(&self, v: &BitWord) -> Result<BitWord, Gf2Error> {
        if self.n_cols != v.len() {
            return Err(Gf2Error::Dimension("matrix-vector size mismatch".into()));
        }
        let mut out = BitWord::zeros(self.n_rows());
        for (i, row) in self.rows.iter().enumerate() {
            let mut acc = 0u64;
            for (a, b) in row.limbs.iter().zip(&v.limbs) {
                acc ^= a & b;
            }
            out.set(i, acc.count_ones() % 2 == 1);
        }
        Ok(out)
    }

    /// True if the matrix satisfies the RREF conditions: pivots strictly move
    /// right, each pivot is the only nonzero entry of its column, and zero
    /// rows come last.
    pub fn is_rref(&self) -> bool {
        let mut last_pivot: Option<usize> = None;
        let mut seen_zero_row = false;
        for row in &self.rows {
            match row.leading_one() {
                None => seen_zero_row = true,
                Some(p) => {
                    if seen_zero_row {
                        return false;
                    }
                    if let Some(lp) = last_pivot {
                        if p <= lp {
                            return false;
                        }
                    }
                    if self.rows.iter().filter(|r| r.get(p)).count() != 1 {
                        return false;
                    }
                    last_pivot = Some(p);
                }
            }
        }
        true
    }
}

impl fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in &self.rows {
            writeln!(f, "{row:?}")?;
        }
        Ok(())
    }
}

/// Outcome of Gaussian elimination: `rref = transform * input` over GF(2).
#[derive(Clone, Debug)]
pub struct RrefResult {
    pub rref: BitMatrix,
    pub transform: BitMatrix,
    pub rank: usize,
    pub pivot_cols: Vec<usize>,
}

/// Reduce `m` to reduced row echelon form by elementary row operations,
/// tracking the same operations in a square transform matrix.
pub fn rref(m: &BitMatrix) -> RrefResult {
    let n_rows = m.n_rows();
    let mut work = m.clone();
    let mut transform = BitMatrix::identity(n_rows);
    let mut pivot_cols = Vec::new();
    let mut pivot_row = 0usize;
    for col in 0..m.n_cols() {
        let Some(src) = (pivot_row..n_rows).find(|&r| work.get(r, col)) else {
            continue;
        };
        work.rows.swap(pivot_row, src);
        transform.rows.swap(pivot_row, src);
        for r in 0..n_rows {
            if r != pivot_row && work.get(r, col) {
                let (head, tail) = split_pair(&mut work.rows, r, pivot_row);
                head.xor_assign(tail).expect("equal row lengths");
                let (head, tail) = split_pair(&mut transform.rows, r, pivot_row);
                head.xor_assign(tail).expect("equal row lengths");
            }
        }
        pivot_cols.push(col);
        pivot_row += 1;
        if pivot_row == n_rows {
            break;
        }
    }
    RrefResult {
        rref: work,
        transform,
        rank: pivot_cols.len(),
        pivot_cols,
    }
}

/// Borrow rows `a` and `b` (`a != b`) mutably at the same time.
fn split_pair(rows: &mut [BitWord], a: usize, b: usize) -> (&mut BitWord, &BitWord) {
    debug_assert_ne!(a, b);
    if a < b {
        let (lo, hi) = rows.split_at_mut(b);
        (&mut lo[a], &hi[0])
    } else {
        let (lo, hi) = rows.split_at_mut(a);
        (&mut hi[0], &lo[b])
    }
}

/// Rank of a matrix over GF(2).
pub fn rank(m: &BitMatrix) -> usize {
    rref(m).rank
}

/// Column indices whose unknowns are directly recoverable from a matrix in
/// RREF: pivot columns of rows with Hamming weight exactly 1.
pub fn recoverable_indices(m: &BitMatrix) -> Result<BTreeSet<usize>, Gf2Error> {
    if !m.is_rref() {
        return Err(Gf2Error::Contract("input matrix is not in RREF".into()));
    }
    let mut out = BTreeSet::new();
    for row in &m.rows {
        if row.weight() == 1 {
            out.insert(row.leading_one().expect("weight-1 row has a pivot"));
        }
    }
    Ok(out)
}

/// Solution of the GF(2) linear system `A * U = W_hat` for the uniquely
/// determined unknowns.
#[derive(Clone, Debug)]
pub struct SolveOutcome {
    /// Unknown column index -> recovered word (a row of U).
    pub recovered: BTreeMap<usize, BitWord>,
    /// Rows that eliminated to `0 = nonzero`, dropped from the system.
    pub conflicts: usize,
    pub rank: usize,
}

/// Solve `A * U = W_hat` by elimination on the augmented system.
///
/// Returns every unknown that is uniquely determined (its pivot row has
/// weight 1 after reduction). Inconsistent rows are counted and excluded;
/// recovery proceeds on the consistent subsystem.
pub fn solve_combinations(a: &BitMatrix, w_hat: &BitMatrix) -> Result<SolveOutcome, Gf2Error> {
    if a.n_rows() != w_hat.n_rows() {
        return Err(Gf2Error::Dimension(format!(
            "A has {} rows, W_hat has {}",
            a.n_rows(),
            w_hat.n_rows()
        )));
    }
    let res = rref(a);
    let w_reduced = res.transform.mul(w_hat)?;
    let mut conflicts = 0usize;
    let mut recovered = BTreeMap::new();
    for (i, row) in res.rref.rows().iter().enumerate() {
        if row.is_zero() {
            if !w_reduced.row(i).is_zero() {
                conflicts += 1;
            }
            continue;
        }
        if row.weight() == 1 {
            let j = row.leading_one().expect("nonzero row");
            recovered.insert(j, w_reduced.row(i).clone());
        }
    }
    Ok(SolveOutcome {
        recovered,
        conflicts,
        rank: res.rank,
    })
}

/// XOR of the words whose coefficient bit is set.
pub fn xor_accumulate(words: &[BitWord], coefficients: &BitWord) -> Result<BitWord, Gf2Error> {
    if coefficients.len() != words.len() {
        return Err(Gf2Error::Dimension(format!(
            "{} coefficients for {} words",
            coefficients.len(),
            words.len()
        )));
    }
    let len = words.first().map_or(0, BitWord::len);
    let mut acc = BitWord::zeros(len);
    for (word, c) in words.iter().zip(coefficients.iter_bits()) {
        if c {
            acc.xor_assign(word)?;
        }
    }
    Ok(acc)
}

/// Length-`d` binary expansion of `i`, LSB-first: bit k is the k-th least
/// significant bit of `i`. Valid for `1 <= i <= 2^d - 1`.
pub fn binary_expansion(i: u64, d: usize) -> Result<BitWord, Gf2Error> {
    if d == 0 || d > 63 || i == 0 || i >= (1u64 << d) {
        return Err(Gf2Error::Domain(format!(
            "index {i} not in [1, 2^{d} - 1]"
        )));
    }
    let mut w = BitWord::zeros(d);
    for k in 0..d {
        if (i >> k) & 1 == 1 {
            w.set(k, true);
        }
    }
    Ok(w)
}
