//! Exact integer sparse matrices for the structural (graph) operators.
//!
//! Entries live in a `BTreeMap` keyed by `(row, col)`, so iteration order is
//! deterministic and products/sums are exact.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;

#[derive(Clone, PartialEq, Eq)]
pub struct SparseInt {
    rows: usize,
    cols: usize,
    entries: BTreeMap<(usize, usize), i64>,
}

impl SparseInt {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: BTreeMap::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn from_diagonal(diag: &[i64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    /// `u vᵀ` for integer column vectors given densely.
    pub fn outer(u: &[i64], v: &[i64]) -> Self {
        let mut m = Self::zeros(u.len(), v.len());
        for (i, &a) in u.iter().enumerate().filter(|(_, a)| **a != 0) {
            for (j, &b) in v.iter().enumerate().filter(|(_, b)| **b != 0) {
                m.set(i, j, a * b);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, r: usize, c: usize) -> i64 {
        self.entries.get(&(r, c)).copied().unwrap_or(0)
    }

    /// Setting a zero removes the entry.
    pub fn set(&mut self, r: usize, c: usize, v: i64) {
        assert!(r < self.rows && c < self.cols, "index ({r},{c}) out of bounds");
        if v == 0 {
            self.entries.remove(&(r, c));
        } else {
            self.entries.insert((r, c), v);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, i64)> + '_ {
        self.entries.iter().map(|(&(r, c), &v)| (r, c, v))
    }

    pub fn column(&self, c: usize) -> Vec<i64> {
        let mut out = vec![0; self.rows];
        for (r, cc, v) in self.iter() {
            if cc == c {
                out[r] = v;
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for (r, c, v) in self.iter() {
            t.set(c, r, v);
        }
        t
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && self.iter().all(|(r, c, v)| self.get(c, r) == v)
    }

    pub fn is_diagonal(&self) -> bool {
        self.iter().all(|(r, c, _)| r == c)
    }

    /// Exactly one `1` per row and per column, zeros elsewhere.
    pub fn is_permutation(&self) -> bool {
        if self.rows != self.cols || self.nnz() != self.rows {
            return false;
        }
        let mut row_seen = vec![false; self.rows];
        let mut col_seen = vec![false; self.cols];
        for (r, c, v) in self.iter() {
            if v != 1 || row_seen[r] || col_seen[c] {
                return false;
            }
            row_seen[r] = true;
            col_seen[c] = true;
        }
        true
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.rows, self.cols);
        for (r, c, v) in self.iter() {
            d[(r, c)] = v as f64;
        }
        d
    }

    /// Principal submatrix on the given (sorted or not) index list.
    pub fn restrict(&self, idx: &[usize]) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(idx.len(), idx.len());
        for (a, &r) in idx.iter().enumerate() {
            for (b, &c) in idx.iter().enumerate() {
                d[(a, b)] = self.get(r, c) as f64;
            }
        }
        d
    }
}

impl fmt::Debug for SparseInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "SparseInt {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|c| format!("{:>2}", self.get(r, c))).collect();
            writeln!(f, "  {}", row.join(" "))?;
        }
        write!(f, "]")
    }
}

impl Add for &SparseInt {
    type Output = SparseInt;
    fn add(self, rhs: &SparseInt) -> SparseInt {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch in add");
        let mut out = self.clone();
        for (r, c, v) in rhs.iter() {
            let s = out.get(r, c) + v;
            out.set(r, c, s);
        }
        out
    }
}

impl Sub for &SparseInt {
    type Output = SparseInt;
    fn sub(self, rhs: &SparseInt) -> SparseInt {
        self + &(-rhs)
    }
}

impl Neg for &SparseInt {
    type Output = SparseInt;
    fn neg(self) -> SparseInt {
        let mut out = self.clone();
        for v in out.entries.values_mut() {
            *v = -*v;
        }
        out
    }
}

impl Mul for &SparseInt {
    type Output = SparseInt;
    fn mul(self, rhs: &SparseInt) -> SparseInt {
        assert_eq!(self.cols, rhs.rows, "shape mismatch in mul");
        // bucket rhs by row
        let mut rhs_rows: Vec<Vec<(usize, i64)>> = vec![Vec::new(); rhs.rows];
        for (r, c, v) in rhs.iter() {
            rhs_rows[r].push((c, v));
        }
        let mut acc: BTreeMap<(usize, usize), i64> = BTreeMap::new();
        for (r, k, a) in self.iter() {
            for &(c, b) in &rhs_rows[k] {
                *acc.entry((r, c)).or_insert(0) += a * b;
            }
        }
        acc.retain(|_, v| *v != 0);
        SparseInt {
            rows: self.rows,
            cols: rhs.cols,
            entries: acc,
        }
    }
}

/// Sum of a non-empty family, or a zero matrix of the given shape.
pub fn sum_or_zero<'a>(items: impl IntoIterator<Item = &'a SparseInt>, rows: usize, cols: usize) -> SparseInt {
    items
        .into_iter()
        .fold(SparseInt::zeros(rows, cols), |acc, m| &acc + m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_transpose() {
        let b = SparseInt::outer(&[1, -1, 0], &[1]);
        let l = &b * &b.transpose();
        assert_eq!(l.get(0, 0), 1);
        assert_eq!(l.get(0, 1), -1);
        assert_eq!(l.get(2, 2), 0);
        assert!(l.is_symmetric());
        assert_eq!(l.nnz(), 4);
    }

    #[test]
    fn permutation_detection() {
        let mut p = SparseInt::zeros(2, 2);
        p.set(0, 1, 1);
        p.set(1, 0, 1);
        assert!(p.is_permutation());
        assert_eq!(&p * &p, SparseInt::identity(2));
        p.set(0, 0, 1);
        assert!(!p.is_permutation());
    }

    #[test]
    fn cancellation_drops_entries() {
        let a = SparseInt::identity(3);
        let z = &a - &a;
        assert_eq!(z.nnz(), 0);
        assert_eq!(z, SparseInt::zeros(3, 3));
    }
}
