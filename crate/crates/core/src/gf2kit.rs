//! Bit-packed GF(2) linear algebra tuned for rule-108 rows.
//!
//! A [`BitRow`] is a cyclic bit vector packed into `u64` words, bit `i` living in
//! word `i / 64` at position `i % 64`. Bits past the logical length are always zero;
//! every mutating operation restores that invariant.
//!
//! Rule 108 acts on a row as `f(R)_i = R_i + R_{i+1}` with indices taken modulo the
//! row length, which is a single rotate-and-xor on the packed words.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

const WORD: usize = 64;

#[inline]
fn words_for(len: usize) -> usize {
    len.div_ceil(WORD)
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitRow {
    len: usize,
    words: Vec<u64>,
}

impl BitRow {
    pub fn zeros(len: usize) -> Self {
        BitRow { len, words: vec![0; words_for(len)] }
    }

    pub fn ones(len: usize) -> Self {
        let mut r = BitRow { len, words: vec![u64::MAX; words_for(len)] };
        r.mask_tail();
        r
    }

    /// Row with a single 1 at `index`.
    pub fn unit(len: usize, index: usize) -> Self {
        let mut r = Self::zeros(len);
        r.set(index, true);
        r
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let bits: Vec<bool> = bits.into_iter().collect();
        let mut r = Self::zeros(bits.len());
        for (i, b) in bits.into_iter().enumerate() {
            if b {
                r.set(i, true);
            }
        }
        r
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i / WORD] >> (i % WORD)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        debug_assert!(i < self.len);
        let mask = 1u64 << (i % WORD);
        if value {
            self.words[i / WORD] |= mask;
        } else {
            self.words[i / WORD] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i / WORD] ^= 1u64 << (i % WORD);
    }

    /// Bit at a possibly out-of-range index, reduced cyclically.
    #[inline]
    pub fn get_cyclic(&self, i: isize) -> bool {
        self.get(i.rem_euclid(self.len as isize) as usize)
    }

    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn parity(&self) -> bool {
        self.words.iter().fold(0u32, |acc, w| acc ^ w.count_ones()) & 1 == 1
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn xor_assign(&mut self, other: &BitRow) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= *b;
        }
    }

    pub fn xor(&self, other: &BitRow) -> BitRow {
        let mut out = self.clone();
        out.xor_assign(other);
        out
    }

    pub fn and_parity(&self, other: &BitRow) -> bool {
        debug_assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(&other.words)
            .fold(0u32, |acc, (a, b)| acc ^ (a & b).count_ones())
            & 1
            == 1
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(k, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let t = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(k * WORD + t)
                }
            })
        })
    }

    /// `out[i] = self[i + 1]` (indices mod len).
    pub fn rotate_next(&self) -> BitRow {
        let n = self.words.len();
        let mut out = BitRow::zeros(self.len);
        if self.len == 0 {
            return out;
        }
        for k in 0..n {
            let hi = if k + 1 < n { self.words[k + 1] << 63 } else { 0 };
            out.words[k] = (self.words[k] >> 1) | hi;
        }
        if self.get(0) {
            out.set(self.len - 1, true);
        }
        out
    }

    /// `out[i] = self[i - 1]` (indices mod len).
    pub fn rotate_prev(&self) -> BitRow {
        let n = self.words.len();
        let mut out = BitRow::zeros(self.len);
        if self.len == 0 {
            return out;
        }
        for k in 0..n {
            let lo = if k > 0 { self.words[k - 1] >> 63 } else { 0 };
            out.words[k] = (self.words[k] << 1) | lo;
        }
        out.mask_tail();
        if self.get(self.len - 1) {
            out.set(0, true);
        } else {
            out.set(0, false);
        }
        out
    }

    /// `out[i] = self[i + k]` (indices mod len).
    pub fn rotate_by(&self, k: isize) -> BitRow {
        let mut out = BitRow::zeros(self.len);
        for i in self.iter_ones() {
            let dst = (i as isize - k).rem_euclid(self.len as isize) as usize;
            out.set(dst, true);
        }
        out
    }

    /// Reverse index order: `out[i] = self[(len - i) mod len]`.
    pub fn reflect(&self) -> BitRow {
        let mut out = BitRow::zeros(self.len);
        for i in self.iter_ones() {
            out.set((self.len - i) % self.len, true);
        }
        out
    }

    fn mask_tail(&mut self) {
        let rem = self.len % WORD;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    /// XOR `other` into `self` starting at word `from` (both rows same length).
    #[inline]
    fn xor_from(&mut self, other: &BitRow, from: usize) {
        for k in from..self.words.len() {
            self.words[k] ^= other.words[k];
        }
    }
}

impl fmt::Display for BitRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitRow({self})")
    }
}

impl FromStr for BitRow {
    type Err = Error;

    /// Parses a string of `0`/`1` characters, index 0 leftmost.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let mut bits = Vec::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                _ => return Err(Error::Format(format!("bad bit character {c:?} in {s:?}"))),
            }
        }
        Ok(BitRow::from_bits(bits))
    }
}

/// One step of rule 108: `f(R)_i = R_i xor R_{i+1}`, cyclic.
pub fn rule108_step(row: &BitRow) -> BitRow {
    let mut out = row.rotate_next();
    out.xor_assign(row);
    out
}

/// Dense GF(2) matrix stored as packed rows.
#[derive(Clone, PartialEq, Eq)]
pub struct Gf2Matrix {
    ncols: usize,
    rows: Vec<BitRow>,
}

impl fmt::Debug for Gf2Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Gf2Matrix {}x{}", self.rows.len(), self.ncols)?;
        for r in &self.rows {
            writeln!(f, "  {r}")?;
        }
        Ok(())
    }
}

impl Gf2Matrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Gf2Matrix { ncols, rows: vec![BitRow::zeros(ncols); nrows] }
    }

    pub fn identity(n: usize) -> Self {
        Gf2Matrix { ncols: n, rows: (0..n).map(|i| BitRow::unit(n, i)).collect() }
    }

    pub fn from_rows(ncols: usize, rows: Vec<BitRow>) -> Self {
        assert!(rows.iter().all(|r| r.len() == ncols), "row length mismatch");
        Gf2Matrix { ncols, rows }
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn rows(&self) -> &[BitRow] {
        &self.rows
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.rows[r].get(c)
    }

    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        self.rows[r].set(c, v)
    }

    pub fn is_square(&self) -> bool {
        self.nrows() == self.ncols
    }

    pub fn mul_vec(&self, v: &BitRow) -> BitRow {
        assert_eq!(v.len(), self.ncols);
        BitRow::from_bits(self.rows.iter().map(|r| r.and_parity(v)))
    }

    pub fn mul(&self, other: &Gf2Matrix) -> Gf2Matrix {
        assert_eq!(self.ncols, other.nrows());
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut acc = BitRow::zeros(other.ncols);
                for k in r.iter_ones() {
                    acc.xor_assign(&other.rows[k]);
                }
                acc
            })
            .collect();
        Gf2Matrix { ncols: other.ncols, rows }
    }

    pub fn add(&self, other: &Gf2Matrix) -> Gf2Matrix {
        assert_eq!((self.nrows(), self.ncols), (other.nrows(), other.ncols));
        let rows = self.rows.iter().zip(&other.rows).map(|(a, b)| a.xor(b)).collect();
        Gf2Matrix { ncols: self.ncols, rows }
    }

    pub fn rank(&self) -> usize {
        let mut rows = self.rows.clone();
        row_reduce(&mut rows, self.ncols).len()
    }
}

/// Matrix of rule 108 on rows of length `len`: `F = I + S` with `(S v)_i = v_{i+1}`.
pub fn rule108_matrix(len: usize) -> Gf2Matrix {
    let rows = (0..len)
        .map(|i| {
            let mut r = BitRow::unit(len, i);
            r.set((i + 1) % len, !r.get((i + 1) % len));
            r
        })
        .collect();
    Gf2Matrix { ncols: len, rows }
}

/// `m^n` by repeated squaring.
pub fn mat_pow(m: &Gf2Matrix, mut n: u64) -> Gf2Matrix {
    assert!(m.is_square(), "mat_pow needs a square matrix");
    let mut result = Gf2Matrix::identity(m.nrows());
    let mut base = m.clone();
    while n > 0 {
        if n & 1 == 1 {
            result = result.mul(&base);
        }
        n >>= 1;
        if n > 0 {
            base = base.mul(&base);
        }
    }
    result
}

/// Reduces `rows` in place to reduced row-echelon form over the first `ncols`
/// columns. Returns the pivot column of each leading row; rows beyond the
/// returned length are zero in those columns. Columns past `ncols` (augmented
/// right-hand sides) are carried along.
pub fn row_reduce(rows: &mut [BitRow], ncols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        if r == rows.len() {
            break;
        }
        let Some(p) = (r..rows.len()).find(|&k| rows[k].get(c)) else {
            continue;
        };
        rows.swap(r, p);
        let (head, tail) = rows.split_at_mut(r);
        let (pivot, rest) = tail.split_first_mut().expect("pivot row");
        let from = c / WORD;
        for row in head.iter_mut().chain(rest.iter_mut()) {
            if row.get(c) {
                row.xor_from(pivot, from);
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSolution {
    pub particular: BitRow,
    pub nullspace: Vec<BitRow>,
}

/// Solves `a x = b` over GF(2), returning one solution and a basis of the kernel.
pub fn solve_linear(a: &Gf2Matrix, b: &BitRow) -> Result<LinearSolution> {
    assert_eq!(a.nrows(), b.len(), "right-hand side length must equal row count");
    let n = a.ncols();
    let mut aug: Vec<BitRow> = a
        .rows
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let mut row = BitRow::zeros(n + 1);
            for c in r.iter_ones() {
                row.set(c, true);
            }
            row.set(n, b.get(k));
            row
        })
        .collect();
    let pivots = row_reduce(&mut aug, n);
    if aug[pivots.len()..].iter().any(|row| row.get(n)) {
        return Err(Error::Inconsistent);
    }
    let mut particular = BitRow::zeros(n);
    for (k, &c) in pivots.iter().enumerate() {
        particular.set(c, aug[k].get(n));
    }
    Ok(LinearSolution { particular, nullspace: nullspace_from_rref(&aug, &pivots, n) })
}

fn nullspace_from_rref(rref: &[BitRow], pivots: &[usize], n: usize) -> Vec<BitRow> {
    let mut is_pivot = vec![false; n];
    for &c in pivots {
        is_pivot[c] = true;
    }
    (0..n)
        .filter(|&f| !is_pivot[f])
        .map(|f| {
            let mut v = BitRow::unit(n, f);
            for (k, &c) in pivots.iter().enumerate() {
                if rref[k].get(f) {
                    v.set(c, true);
                }
            }
            v
        })
        .collect()
}

/// Basis of `{v : m v = 0}`.
pub fn kernel_basis(m: &Gf2Matrix) -> Vec<BitRow> {
    let mut rows = m.rows.clone();
    let pivots = row_reduce(&mut rows, m.ncols);
    nullspace_from_rref(&rows, &pivots, m.ncols)
}

/// Transient and cycle lengths of the rule-108 orbit starting at `start`.
pub fn orbit_shape(start: &BitRow) -> (usize, usize) {
    if start.len() <= 64 {
        orbit_by_hashing(start)
    } else {
        orbit_by_brent(start)
    }
}

fn orbit_by_hashing(start: &BitRow) -> (usize, usize) {
    let mut seen: HashMap<BitRow, usize> = HashMap::new();
    let mut state = start.clone();
    let mut t = 0;
    loop {
        if let Some(&first) = seen.get(&state) {
            return (first, t - first);
        }
        seen.insert(state.clone(), t);
        state = rule108_step(&state);
        t += 1;
    }
}

fn orbit_by_brent(start: &BitRow) -> (usize, usize) {
    let mut power = 1;
    let mut lambda = 1;
    let mut tortoise = start.clone();
    let mut hare = rule108_step(start);
    while tortoise != hare {
        if power == lambda {
            tortoise = hare.clone();
            power *= 2;
            lambda = 0;
        }
        hare = rule108_step(&hare);
        lambda += 1;
    }
    let mut tortoise = start.clone();
    let mut hare = start.clone();
    for _ in 0..lambda {
        hare = rule108_step(&hare);
    }
    let mut mu = 0;
    while tortoise != hare {
        tortoise = rule108_step(&tortoise);
        hare = rule108_step(&hare);
        mu += 1;
    }
    (mu, lambda)
}

/// Length of the cycle reached from a row with a single 1. Every rule-108 cycle
/// length on rows of this length divides it.
pub fn cycle_length_from_single_one(len: usize) -> usize {
    assert!(len >= 1, "row length must be positive");
    orbit_shape(&BitRow::unit(len, 0)).1
}
