//! Compressed sparse column storage for square matrices.
//!
//! Every `CscMatrix` upholds three invariants, checked on construction:
//! `col_ptr` starts at zero and is non-decreasing, row indices inside a
//! column are strictly increasing, and all row indices are below `n`.
//! Explicit zeros are kept; the pattern, not the values, drives symbolic
//! analysis.

use crate::error::{Error, Result};

/// A single `(row, col, value)` entry, 0-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triplet {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

impl Triplet {
    pub fn new(row: usize, col: usize, value: f64) -> Self {
        Triplet { row, col, value }
    }
}

/// Square sparse matrix in compressed sparse column form.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CscMatrix {
    /// Builds a matrix from raw arrays, validating every invariant.
    pub fn from_parts(
        n: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if col_ptr.len() != n + 1 {
            return Err(Error::DimensionMismatch {
                expected: n + 1,
                found: col_ptr.len(),
            });
        }
        if col_ptr[0] != 0 {
            return Err(Error::BadParams("col_ptr[0] must be 0".into()));
        }
        if row_idx.len() != values.len() || col_ptr[n] != row_idx.len() {
            return Err(Error::DimensionMismatch {
                expected: col_ptr[n],
                found: row_idx.len(),
            });
        }
        for j in 0..n {
            if col_ptr[j] > col_ptr[j + 1] {
                return Err(Error::BadParams(format!(
                    "col_ptr decreases at column {j}"
                )));
            }
            let rows = &row_idx[col_ptr[j]..col_ptr[j + 1]];
            for (k, &r) in rows.iter().enumerate() {
                if r >= n {
                    return Err(Error::IndexOutOfRange { row: r, col: j, n });
                }
                if k > 0 && rows[k - 1] >= r {
                    return Err(Error::BadParams(format!(
                        "row indices of column {j} are not strictly increasing"
                    )));
                }
            }
        }
        Ok(CscMatrix {
            n,
            col_ptr,
            row_idx,
            values,
        })
    }

    /// Assembles a matrix from triplets, summing duplicates and sorting columns.
    ///
    /// Duplicates that cancel leave an explicit zero in the pattern.
    pub fn from_triplets(n: usize, entries: &[Triplet]) -> Result<Self> {
        for t in entries {
            if t.row >= n || t.col >= n {
                return Err(Error::IndexOutOfRange {
                    row: t.row,
                    col: t.col,
                    n,
                });
            }
        }
        let mut counts = vec![0usize; n + 1];
        for t in entries {
            counts[t.col + 1] += 1;
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        // bucket by column, keeping input order for a stable duplicate sum
        let mut next = counts.clone();
        let mut rows = vec![0usize; entries.len()];
        let mut vals = vec![0.0f64; entries.len()];
        for t in entries {
            let slot = next[t.col];
            rows[slot] = t.row;
            vals[slot] = t.value;
            next[t.col] += 1;
        }

        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        col_ptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for j in 0..n {
            order.clear();
            order.extend(counts[j]..counts[j + 1]);
            order.sort_by_key(|&k| rows[k]);
            for &k in &order {
                let r = rows[k];
                if row_idx.len() > col_ptr[j] && *row_idx.last().unwrap() == r {
                    *values.last_mut().unwrap() += vals[k];
                } else {
                    row_idx.push(r);
                    values.push(vals[k]);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Ok(CscMatrix {
            n,
            col_ptr,
            row_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        CscMatrix {
            n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Row indices and values of column `j`.
    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let range = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.row_idx[range.clone()], &self.values[range])
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let (rows, vals) = self.col(col);
        rows.binary_search(&row).ok().map(|k| vals[k])
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        let (rows, _) = self.col(col);
        rows.binary_search(&row).is_ok()
    }

    /// Entries in column-major order.
    pub fn triplets(&self) -> Vec<Triplet> {
        let mut out = Vec::with_capacity(self.nnz());
        for j in 0..self.n {
            let (rows, vals) = self.col(j);
            for (&r, &v) in rows.iter().zip(vals) {
                out.push(Triplet::new(r, j, v));
            }
        }
        out
    }

    pub fn transpose(&self) -> CscMatrix {
        let n = self.n;
        let mut counts = vec![0usize; n + 1];
        for &r in &self.row_idx {
            counts[r + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut row_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        // columns are visited in increasing order, so output rows come out sorted
        for j in 0..n {
            let (rows, vals) = self.col(j);
            for (&r, &v) in rows.iter().zip(vals) {
                let slot = next[r];
                row_idx[slot] = j;
                values[slot] = v;
                next[r] += 1;
            }
        }
        CscMatrix {
            n,
            col_ptr: counts,
            row_idx,
            values,
        }
    }

    /// Symmetric permutation `B = P A Pᵀ` where `B[i][j] = A[perm[i]][perm[j]]`.
    pub fn permute_symmetric(&self, perm: &[usize]) -> Result<CscMatrix> {
        if perm.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: perm.len(),
            });
        }
        let mut inv = vec![usize::MAX; self.n];
        for (new, &old) in perm.iter().enumerate() {
            if old >= self.n || inv[old] != usize::MAX {
                return Err(Error::BadParams("not a permutation".into()));
            }
            inv[old] = new;
        }
        let entries: Vec<Triplet> = self
            .triplets()
            .into_iter()
            .map(|t| Triplet::new(inv[t.row], inv[t.col], t.value))
            .collect();
        CscMatrix::from_triplets(self.n, &entries)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        let mut sums = vec![0.0f64; self.n];
        for (&r, &v) in self.row_idx.iter().zip(&self.values) {
            sums[r] += v.abs();
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: x.len(),
            });
        }
        let mut y = vec![0.0; self.n];
        for (j, &xj) in x.iter().enumerate() {
            let (rows, vals) = self.col(j);
            for (&r, &v) in rows.iter().zip(vals) {
                y[r] += v * xj;
            }
        }
        Ok(y)
    }

    /// Row-major dense copy; intended for small matrices and tests.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for t in self.triplets() {
            d[t.row][t.col] = t.value;
        }
        d
    }

    /// True when `(i, j)` present implies `(j, i)` present.
    pub fn is_pattern_symmetric(&self) -> bool {
        self.first_asymmetry().is_none()
    }

    pub(crate) fn first_asymmetry(&self) -> Option<(usize, usize)> {
        for j in 0..self.n {
            let (rows, _) = self.col(j);
            for &r in rows {
                if !self.contains(j, r) {
                    return Some((r, j));
                }
            }
        }
        None
    }

    pub(crate) fn first_missing_diagonal(&self) -> Option<usize> {
        (0..self.n).find(|&j| !self.contains(j, j))
    }
}
