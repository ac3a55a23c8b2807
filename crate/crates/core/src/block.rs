//! Per-block sparse storage with block-local indices.

/// A rectangular CSC submatrix. Row indices are local to the block and
/// strictly increasing within each column.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseBlock {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseBlock {
    pub fn empty(nrows: usize, ncols: usize) -> Self {
        SparseBlock {
            nrows,
            ncols,
            col_ptr: vec![0; ncols + 1],
            row_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Caller guarantees sorted rows per column and consistent lengths.
    pub(crate) fn from_raw(
        nrows: usize,
        ncols: usize,
        col_ptr: Vec<usize>,
        row_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(col_ptr.len(), ncols + 1);
        debug_assert_eq!(row_idx.len(), values.len());
        debug_assert_eq!(col_ptr[ncols], row_idx.len());
        debug_assert!((0..ncols).all(|j| {
            let r = &row_idx[col_ptr[j]..col_ptr[j + 1]];
            r.windows(2).all(|w| w[0] < w[1]) && r.iter().all(|&i| i < nrows)
        }));
        SparseBlock {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        }
    }

    /// Keeps the nonzero entries of a dense column-major array.
    pub fn from_dense(nrows: usize, ncols: usize, dense: &[f64]) -> Self {
        let mut b = SparseBlockBuilder::new(nrows, ncols);
        for j in 0..ncols {
            for i in 0..nrows {
                let v = dense[j * nrows + i];
                if v != 0.0 {
                    b.push(i, v);
                }
            }
            b.finish_column();
        }
        b.build()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_idx.is_empty()
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

    #[cfg(test)]
    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Column pointers and row indices alongside mutable values.
    pub(crate) fn split_mut(&mut self) -> (&[usize], &[usize], &mut [f64]) {
        (&self.col_ptr, &self.row_idx, &mut self.values)
    }

    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.row_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let (rows, vals) = self.col(j);
        rows.binary_search(&i).ok().map(|k| vals[k])
    }

    /// Entries per row.
    pub fn row_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.nrows];
        for &i in &self.row_idx {
            c[i] += 1;
        }
        c
    }

    /// Column-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.nrows * self.ncols];
        for j in 0..self.ncols {
            let (rows, vals) = self.col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                d[j * self.nrows + i] = v;
            }
        }
        d
    }
}

/// Column-by-column construction of a [`SparseBlock`].
pub(crate) struct SparseBlockBuilder {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseBlockBuilder {
    pub(crate) fn new(nrows: usize, ncols: usize) -> Self {
        let mut col_ptr = Vec::with_capacity(ncols + 1);
        col_ptr.push(0);
        SparseBlockBuilder {
            nrows,
            ncols,
            col_ptr,
            row_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub(crate) fn with_capacity(nrows: usize, ncols: usize, nnz: usize) -> Self {
        let mut b = Self::new(nrows, ncols);
        b.row_idx.reserve(nnz);
        b.values.reserve(nnz);
        b
    }

    pub(crate) fn push(&mut self, row: usize, value: f64) {
        self.row_idx.push(row);
        self.values.push(value);
    }

    pub(crate) fn finish_column(&mut self) {
        self.col_ptr.push(self.row_idx.len());
    }

    /// Closes columns until `col` is the one being filled.
    pub(crate) fn advance_to(&mut self, col: usize) {
        while self.col_ptr.len() <= col {
            self.finish_column();
        }
    }

    pub(crate) fn build(mut self) -> SparseBlock {
        self.advance_to(self.ncols);
        SparseBlock::from_raw(self.nrows, self.ncols, self.col_ptr, self.row_idx, self.values)
    }
}
