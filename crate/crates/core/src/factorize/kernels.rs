//! The four block kernels of right-looking blocked LU.
//!
//! All kernels accumulate every output entry in ascending elimination order
//! (`x -= l * u` one product at a time, never a pre-summed dot product), which
//! makes the blocked result reproduce scalar right-looking elimination with
//! the same pivot sequence operation for operation.

use crate::block::{SparseBlock, SparseBlockBuilder};

/// Result of factoring a diagonal block: `P B = L U`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalFactor {
    /// Strictly lower part of the unit lower factor; rows are pivot positions.
    pub l: SparseBlock,
    /// Upper factor including the diagonal.
    pub u: SparseBlock,
    /// `perm[k]` is the local row chosen as pivot `k`.
    pub perm: Vec<usize>,
    /// Inverse of `perm`.
    pub pinv: Vec<usize>,
    /// Pivots replaced by the static-pivot value.
    pub perturbed: usize,
}

impl DiagonalFactor {
    pub fn order(&self) -> usize {
        self.perm.len()
    }

    pub fn is_identity_perm(&self) -> bool {
        self.perm.iter().enumerate().all(|(k, &r)| k == r)
    }
}

/// Pivot acceptance rule for [`factor_diagonal`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PivotPolicy {
    /// A pivot is rejected when `|pivot| < pivot_tol * max|column|`.
    pub pivot_tol: f64,
    /// Absolute magnitude substituted for a rejected pivot; `None` makes a
    /// rejected pivot an error.
    pub static_pivot: Option<f64>,
}

impl Default for PivotPolicy {
    fn default() -> Self {
        PivotPolicy {
            pivot_tol: 1e-12,
            static_pivot: None,
        }
    }
}

/// Kernel-local failure; the driver attaches block coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelError {
    ZeroPivot { column: usize, magnitude: f64 },
    OutsideSupport { row: usize, col: usize },
}

/// Dense scratch sized to the largest block a worker touches.
#[derive(Debug, Default)]
pub struct Workspace {
    x: Vec<f64>,
    mark: Vec<usize>,
    stamp: usize,
    stack: Vec<(usize, usize)>,
    reach: Vec<usize>,
}

impl Workspace {
    pub fn new() -> Self {
        Self::default()
    }

    fn ensure(&mut self, m: usize) {
        if self.x.len() < m {
            self.x.resize(m, 0.0);
            self.mark.resize(m, 0);
        }
    }

    fn next_stamp(&mut self) -> usize {
        self.stamp += 1;
        if self.stamp == usize::MAX {
            self.mark.iter_mut().for_each(|m| *m = 0);
            self.stamp = 1;
        }
        self.stamp
    }
}

/// Depth-first reach of `seeds` through a graph whose node `v` has
/// out-edges `adj(v)`. Leaves reached nodes in `ws.reach` (unordered) and
/// marks them with the current stamp.
fn reach<'a, F>(ws: &mut Workspace, seeds: &[usize], adj: F)
where
    F: Fn(usize) -> Option<&'a [usize]>,
{
    let stamp = ws.stamp;
    ws.reach.clear();
    for &s in seeds {
        if ws.mark[s] == stamp {
            continue;
        }
        ws.mark[s] = stamp;
        ws.reach.push(s);
        ws.stack.push((s, 0));
        while let Some((v, pos)) = ws.stack.pop() {
            if let Some(edges) = adj(v) {
                if let Some(&w) = edges.get(pos) {
                    ws.stack.push((v, pos + 1));
                    if ws.mark[w] != stamp {
                        ws.mark[w] = stamp;
                        ws.reach.push(w);
                        ws.stack.push((w, 0));
                    }
                }
            }
        }
    }
}

pub fn factor_diagonal(b: &SparseBlock, policy: &PivotPolicy) -> Result<DiagonalFactor, KernelError> {
    factor_diagonal_with(b, policy, &mut Workspace::new())
}

/// Left-looking sparse LU of one square block with partial pivoting confined
/// to the block. Ties in pivot magnitude go to the smallest local row.
pub fn factor_diagonal_with(
    b: &SparseBlock,
    policy: &PivotPolicy,
    ws: &mut Workspace,
) -> Result<DiagonalFactor, KernelError> {
    let m = b.ncols();
    debug_assert_eq!(b.nrows(), m);
    ws.ensure(m);
    const NONE: usize = usize::MAX;
    let mut pinv = vec![NONE; m];
    let mut perm = vec![NONE; m];
    // columns of L with original row numbering, finalized in order
    let mut l_ptr = vec![0usize];
    let mut l_rows: Vec<usize> = Vec::new();
    let mut l_vals: Vec<f64> = Vec::new();
    let mut u = SparseBlockBuilder::new(m, m);
    let mut pivoted: Vec<usize> = Vec::new();
    let mut candidates: Vec<usize> = Vec::new();
    let mut perturbed = 0;

    for j in 0..m {
        let (rows, vals) = b.col(j);
        ws.next_stamp();
        {
            let (l_ptr, l_rows, pinv) = (&l_ptr, &l_rows, &pinv);
            reach(ws, rows, |r| {
                let k = pinv[r];
                (k != NONE).then(|| &l_rows[l_ptr[k]..l_ptr[k + 1]])
            });
        }
        for &r in &ws.reach {
            ws.x[r] = 0.0;
        }
        let mut col_max = 0.0f64;
        for (&r, &v) in rows.iter().zip(vals) {
            ws.x[r] = v;
            col_max = col_max.max(v.abs());
        }

        pivoted.clear();
        candidates.clear();
        for &r in &ws.reach {
            if pinv[r] != NONE {
                pivoted.push(r);
            } else {
                candidates.push(r);
            }
        }
        pivoted.sort_unstable_by_key(|&r| pinv[r]);
        candidates.sort_unstable();

        for &r in &pivoted {
            let k = pinv[r];
            let xk = ws.x[r];
            for p in l_ptr[k]..l_ptr[k + 1] {
                ws.x[l_rows[p]] -= l_vals[p] * xk;
            }
        }
        for &r in &pivoted {
            u.push(pinv[r], ws.x[r]);
        }

        let mut best: Option<usize> = None;
        for &r in &candidates {
            match best {
                Some(b) if ws.x[r].abs() <= ws.x[b].abs() => {}
                _ => best = Some(r),
            }
        }
        let pivot_row = match best {
            Some(r) => r,
            None => match policy.static_pivot {
                // structurally empty candidate set: borrow the first free row
                Some(_) => {
                    let r = (0..m).find(|&r| pinv[r] == NONE).expect("a free row remains");
                    ws.x[r] = 0.0;
                    r
                }
                None => return Err(KernelError::ZeroPivot { column: j, magnitude: 0.0 }),
            },
        };
        let mut pivot = ws.x[pivot_row];
        if !(pivot.abs() > 0.0 && pivot.abs() >= policy.pivot_tol * col_max) {
            match policy.static_pivot {
                Some(s) => {
                    pivot = if pivot.is_sign_negative() { -s } else { s };
                    ws.x[pivot_row] = pivot;
                    perturbed += 1;
                }
                None => {
                    return Err(KernelError::ZeroPivot {
                        column: j,
                        magnitude: pivot.abs(),
                    })
                }
            }
        }
        pinv[pivot_row] = j;
        perm[j] = pivot_row;
        u.push(j, pivot);
        u.finish_column();

        for &r in &candidates {
            if r != pivot_row {
                l_rows.push(r);
                l_vals.push(ws.x[r] / pivot);
            }
        }
        l_ptr.push(l_rows.len());
    }

    // renumber L rows to pivot positions
    let mut lb = SparseBlockBuilder::new(m, m);
    let mut entries: Vec<(usize, f64)> = Vec::new();
    for k in 0..m {
        entries.clear();
        entries.extend((l_ptr[k]..l_ptr[k + 1]).map(|p| (pinv[l_rows[p]], l_vals[p])));
        entries.sort_unstable_by_key(|e| e.0);
        for &(r, v) in &entries {
            lb.push(r, v);
        }
        lb.finish_column();
    }
    Ok(DiagonalFactor {
        l: lb.build(),
        u: u.build(),
        perm,
        pinv,
        perturbed,
    })
}

pub fn factor_u_panel(diag: &DiagonalFactor, b: &SparseBlock) -> SparseBlock {
    factor_u_panel_with(diag, b, &mut Workspace::new())
}

/// `U_ij = L_ii^-1 P_i B_ij`, one sparse forward substitution per column.
pub fn factor_u_panel_with(diag: &DiagonalFactor, b: &SparseBlock, ws: &mut Workspace) -> SparseBlock {
    let m = diag.order();
    debug_assert_eq!(b.nrows(), m);
    ws.ensure(m);
    let l = &diag.l;
    let mut out = SparseBlockBuilder::with_capacity(m, b.ncols(), b.nnz());
    let mut seeds: Vec<usize> = Vec::new();
    for c in 0..b.ncols() {
        let (rows, vals) = b.col(c);
        if rows.is_empty() {
            out.finish_column();
            continue;
        }
        seeds.clear();
        seeds.extend(rows.iter().map(|&r| diag.pinv[r]));
        ws.next_stamp();
        reach(ws, &seeds, |k| Some(l.col(k).0));
        ws.reach.sort_unstable();
        for &k in &ws.reach {
            ws.x[k] = 0.0;
        }
        for (&r, &v) in rows.iter().zip(vals) {
            ws.x[diag.pinv[r]] = v;
        }
        for &k in &ws.reach {
            let xk = ws.x[k];
            let (lr, lv) = l.col(k);
            for (&r, &lval) in lr.iter().zip(lv) {
                ws.x[r] -= lval * xk;
            }
        }
        for &k in &ws.reach {
            out.push(k, ws.x[k]);
        }
        out.finish_column();
    }
    out.build()
}

pub fn factor_l_panel(b: &SparseBlock, diag: &DiagonalFactor) -> Result<SparseBlock, KernelError> {
    factor_l_panel_with(b, diag, &mut Workspace::new())
}

/// `L_ki = B_ki U_ii^-1`, solved column by column:
/// `L(:, c) = (B(:, c) - sum_{t < c} L(:, t) U(t, c)) / U(c, c)`.
pub fn factor_l_panel_with(
    b: &SparseBlock,
    diag: &DiagonalFactor,
    ws: &mut Workspace,
) -> Result<SparseBlock, KernelError> {
    let m = diag.order();
    debug_assert_eq!(b.ncols(), m);
    let nrows = b.nrows();
    ws.ensure(nrows);
    let u = &diag.u;
    let mut col_ptr = Vec::with_capacity(m + 1);
    col_ptr.push(0usize);
    let mut row_idx: Vec<usize> = Vec::with_capacity(b.nnz());
    let mut values: Vec<f64> = Vec::with_capacity(b.nnz());
    let mut pattern: Vec<usize> = Vec::new();
    for c in 0..m {
        let stamp = ws.next_stamp();
        pattern.clear();
        let (brows, bvals) = b.col(c);
        for (&r, &v) in brows.iter().zip(bvals) {
            ws.mark[r] = stamp;
            ws.x[r] = v;
            pattern.push(r);
        }
        let (urows, uvals) = u.col(c);
        let mut diag_val = None;
        for (&t, &utc) in urows.iter().zip(uvals) {
            if t == c {
                diag_val = Some(utc);
                continue;
            }
            for p in col_ptr[t]..col_ptr[t + 1] {
                let r = row_idx[p];
                if ws.mark[r] != stamp {
                    ws.mark[r] = stamp;
                    ws.x[r] = 0.0;
                    pattern.push(r);
                }
                ws.x[r] -= values[p] * utc;
            }
        }
        let ucc = match diag_val {
            Some(v) if v != 0.0 => v,
            other => {
                return Err(KernelError::ZeroPivot {
                    column: c,
                    magnitude: other.unwrap_or(0.0).abs(),
                })
            }
        };
        pattern.sort_unstable();
        for &r in &pattern {
            row_idx.push(r);
            values.push(ws.x[r] / ucc);
        }
        col_ptr.push(row_idx.len());
    }
    Ok(SparseBlock::from_raw(nrows, m, col_ptr, row_idx, values))
}

pub fn schur_update(target: &mut SparseBlock, l: &SparseBlock, u: &SparseBlock) -> Result<(), KernelError> {
    schur_update_with(target, l, u, &mut Workspace::new()).map(|_| ())
}

/// `B_kj <- B_kj - L_ki U_ij`, accumulated into the existing support of the
/// target. A product landing outside that support is an error. Returns
/// whether the product had any structural term.
pub fn schur_update_with(
    target: &mut SparseBlock,
    l: &SparseBlock,
    u: &SparseBlock,
    ws: &mut Workspace,
) -> Result<bool, KernelError> {
    debug_assert_eq!(l.nrows(), target.nrows());
    debug_assert_eq!(u.ncols(), target.ncols());
    debug_assert_eq!(l.ncols(), u.nrows());
    if l.is_empty() || u.is_empty() {
        return Ok(false);
    }
    // Scalar blocks: same single multiply-subtract as the general path.
    if target.nnz() == 1 && l.ncols() == 1 && target.nrows() == 1 && target.ncols() == 1 {
        let (_, _, values) = target.split_mut();
        values[0] -= l.values()[0] * u.values()[0];
        return Ok(true);
    }
    let mut touched = false;
    ws.ensure(target.nrows());
    let (col_ptr, row_idx, values) = target.split_mut();
    for c in 0..u.ncols() {
        let (urows, uvals) = u.col(c);
        if urows.is_empty() {
            continue;
        }
        let stamp = ws.next_stamp();
        let range = col_ptr[c]..col_ptr[c + 1];
        let (rows, vals) = (&row_idx[range.clone()], &mut values[range]);
        for (&r, &v) in rows.iter().zip(vals.iter()) {
            ws.mark[r] = stamp;
            ws.x[r] = v;
        }
        for (&t, &utc) in urows.iter().zip(uvals) {
            let (lrows, lvals) = l.col(t);
            touched |= !lrows.is_empty();
            for (&r, &lrt) in lrows.iter().zip(lvals) {
                if ws.mark[r] != stamp {
                    return Err(KernelError::OutsideSupport { row: r, col: c });
                }
                ws.x[r] -= lrt * utc;
            }
        }
        for (&r, v) in rows.iter().zip(vals.iter_mut()) {
            *v = ws.x[r];
        }
    }
    Ok(touched)
}

/// Dense partial-pivot LU of a block, used when the dense fallback is on and
/// the block is at least half full. Same pivot rule and accumulation order
/// as [`factor_diagonal`]; exact zeros are dropped from the outputs.
pub fn factor_diagonal_dense(b: &SparseBlock, policy: &PivotPolicy) -> Result<DiagonalFactor, KernelError> {
    let m = b.ncols();
    let mut a = b.to_dense(); // column-major
    let at = |i: usize, j: usize| i + j * m;
    let mut orig: Vec<usize> = (0..m).collect();
    let mut perturbed = 0;
    let col_max: Vec<f64> = (0..m)
        .map(|j| (0..m).fold(0.0f64, |acc, i| acc.max(a[at(i, j)].abs())))
        .collect();
    for t in 0..m {
        let mut q = t;
        for r in t + 1..m {
            let (vr, vq) = (a[at(r, t)].abs(), a[at(q, t)].abs());
            if vr > vq || (vr == vq && orig[r] < orig[q]) {
                q = r;
            }
        }
        if q != t {
            for j in 0..m {
                a.swap(at(t, j), at(q, j));
            }
            orig.swap(t, q);
        }
        let mut pivot = a[at(t, t)];
        if !(pivot.abs() > 0.0 && pivot.abs() >= policy.pivot_tol * col_max[t]) {
            match policy.static_pivot {
                Some(s) => {
                    pivot = if pivot.is_sign_negative() { -s } else { s };
                    a[at(t, t)] = pivot;
                    perturbed += 1;
                }
                None => {
                    return Err(KernelError::ZeroPivot {
                        column: t,
                        magnitude: pivot.abs(),
                    })
                }
            }
        }
        for r in t + 1..m {
            a[at(r, t)] /= pivot;
        }
        for c in t + 1..m {
            let utc = a[at(t, c)];
            if utc == 0.0 {
                continue;
            }
            for r in t + 1..m {
                let l = a[at(r, t)];
                a[at(r, c)] -= l * utc;
            }
        }
    }
    let mut lb = SparseBlockBuilder::new(m, m);
    let mut ub = SparseBlockBuilder::new(m, m);
    for j in 0..m {
        for i in 0..m {
            let v = a[at(i, j)];
            if i > j && v != 0.0 {
                lb.push(i, v);
            } else if i <= j && (v != 0.0 || i == j) {
                ub.push(i, v);
            }
        }
        lb.finish_column();
        ub.finish_column();
    }
    let mut pinv = vec![0; m];
    for (k, &r) in orig.iter().enumerate() {
        pinv[r] = k;
    }
    Ok(DiagonalFactor {
        l: lb.build(),
        u: ub.build(),
        perm: orig,
        pinv,
        perturbed,
    })
}

/// Fraction of a block's cells that are stored.
pub fn density(b: &SparseBlock) -> f64 {
    let cells = b.nrows() * b.ncols();
    if cells == 0 {
        0.0
    } else {
        b.nnz() as f64 / cells as f64
    }
}
