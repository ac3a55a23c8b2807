//! Symbolic factorization: the structurally symmetric pattern of `L + U`.
//!
//! Elimination runs in natural order. The lower factor's column patterns are
//! built by merging each column's own below-diagonal entries with the
//! patterns of its children in the elimination tree, which costs
//! `O(nnz(L))` after the tree is known. `U` is taken as the transpose of `L`.

use crate::csc::{CscMatrix, Triplet};
use crate::error::{Error, Result};

/// Nonzero pattern of `L + U` after symbolic factorization.
///
/// Structurally symmetric, full diagonal, closed under elimination in order
/// `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilledPattern {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
}

impl FilledPattern {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz_filled(&self) -> usize {
        self.row_idx.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    /// Sorted row indices of column `j`.
    pub fn col(&self, j: usize) -> &[usize] {
        &self.row_idx[self.col_ptr[j]..self.col_ptr[j + 1]]
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        self.col(col).binary_search(&row).is_ok()
    }

    /// Pattern as a CSC matrix with unit values.
    pub fn to_csc(&self) -> CscMatrix {
        CscMatrix::from_parts(
            self.n,
            self.col_ptr.clone(),
            self.row_idx.clone(),
            vec![1.0; self.row_idx.len()],
        )
        .expect("filled pattern is valid CSC")
    }

    /// Wraps an existing CSC pattern after checking symmetry and the diagonal.
    /// Closure under elimination is not checked.
    pub fn from_symmetric_csc(a: &CscMatrix) -> Result<Self> {
        check_symmetric_full_diagonal(a)?;
        Ok(FilledPattern {
            n: a.n(),
            col_ptr: a.col_ptr().to_vec(),
            row_idx: a.row_idx().to_vec(),
        })
    }
}

pub(crate) fn check_symmetric_full_diagonal(a: &CscMatrix) -> Result<()> {
    if let Some(j) = a.first_missing_diagonal() {
        return Err(Error::MissingDiagonal(j));
    }
    if let Some((row, col)) = a.first_asymmetry() {
        return Err(Error::NotSymmetric { row, col });
    }
    Ok(())
}

/// Pattern of `A + Aᵀ` plus a full diagonal. Entries that were not in `a`
/// carry `0.0`; existing values are kept.
pub fn symmetrize_pattern(a: &CscMatrix) -> CscMatrix {
    let mut entries = a.triplets();
    let n = a.n();
    for t in a.triplets() {
        if t.row != t.col && !a.contains(t.col, t.row) {
            entries.push(Triplet::new(t.col, t.row, 0.0));
        }
    }
    for i in 0..n {
        if !a.contains(i, i) {
            entries.push(Triplet::new(i, i, 0.0));
        }
    }
    CscMatrix::from_triplets(n, &entries).expect("indices come from a valid matrix")
}

/// Elimination tree of a structurally symmetric matrix; `None` marks a root.
pub fn elimination_tree(a: &CscMatrix) -> Vec<Option<usize>> {
    let n = a.n();
    let mut parent = vec![None; n];
    let mut ancestor: Vec<Option<usize>> = vec![None; n];
    for k in 0..n {
        let (rows, _) = a.col(k);
        for &i in rows.iter().take_while(|&&i| i < k) {
            // climb to the current root, compressing the path onto k
            let mut node = Some(i);
            while let Some(cur) = node.filter(|&c| c < k) {
                let next = ancestor[cur];
                ancestor[cur] = Some(k);
                if next.is_none() {
                    parent[cur] = Some(k);
                }
                node = next;
            }
        }
    }
    parent
}

pub fn symbolic_factorize(a_sym: &CscMatrix) -> Result<FilledPattern> {
    check_symmetric_full_diagonal(a_sym)?;
    let n = a_sym.n();
    let parent = elimination_tree(a_sym);

    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (c, p) in parent.iter().enumerate() {
        if let Some(p) = *p {
            children[p].push(c);
        }
    }

    // strictly-lower column patterns of L
    let mut lower: Vec<Vec<usize>> = Vec::with_capacity(n);
    let mut mark = vec![usize::MAX; n];
    for k in 0..n {
        let mut pattern = Vec::new();
        mark[k] = k;
        let (rows, _) = a_sym.col(k);
        for &i in rows.iter().filter(|&&i| i > k) {
            if mark[i] != k {
                mark[i] = k;
                pattern.push(i);
            }
        }
        for &c in &children[k] {
            for &i in &lower[c] {
                if mark[i] != k {
                    mark[i] = k;
                    pattern.push(i);
                }
            }
        }
        pattern.sort_unstable();
        lower.push(pattern);
    }

    let mut upper_count = vec![0usize; n];
    for col in &lower {
        for &i in col {
            upper_count[i] += 1;
        }
    }
    let mut col_ptr = Vec::with_capacity(n + 1);
    col_ptr.push(0);
    for j in 0..n {
        col_ptr.push(col_ptr[j] + upper_count[j] + 1 + lower[j].len());
    }
    let mut row_idx = vec![0usize; col_ptr[n]];
    let mut next: Vec<usize> = col_ptr[..n].to_vec();
    // upper part of column j is { i < j : j in lower[i] }, visited in increasing i
    for (i, col) in lower.iter().enumerate() {
        for &j in col {
            row_idx[next[j]] = i;
            next[j] += 1;
        }
    }
    for j in 0..n {
        row_idx[next[j]] = j;
        next[j] += 1;
        for &i in &lower[j] {
            row_idx[next[j]] = i;
            next[j] += 1;
        }
        debug_assert_eq!(next[j], col_ptr[j + 1]);
    }
    Ok(FilledPattern {
        n,
        col_ptr,
        row_idx,
    })
}

/// `nnz(L+U) / nnz(symmetrized A)`.
pub fn fill_ratio(a: &CscMatrix, f: &FilledPattern) -> Result<f64> {
    if a.n() != f.n() {
        return Err(Error::DimensionMismatch {
            expected: f.n(),
            found: a.n(),
        });
    }
    let sym = symmetrize_pattern(a);
    Ok(f.nnz_filled() as f64 / sym.nnz() as f64)
}
