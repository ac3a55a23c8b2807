//! Numeric blocked LU over a [`BlockGrid`].
//!
//! Each step `i` factors the diagonal block, solves the U panels of block
//! row `i` and the L panels of block column `i`, then applies the Schur
//! updates to the trailing blocks. Work is scheduled on a static task graph
//! in which all writes to one block column are chained in step order, so the
//! floating-point result does not depend on the number of workers.

mod kernels;
mod schedule;

pub use kernels::{
    density, factor_diagonal, factor_diagonal_dense, factor_l_panel, factor_u_panel, schur_update,
    DiagonalFactor, KernelError, PivotPolicy, Workspace,
};

use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, OnceLock};

use crate::block::SparseBlock;
use crate::blocking::BlockingPlan;
use crate::csc::{CscMatrix, Triplet};
use crate::grid::{BlockGrid, GridShape, Kernel};
use crate::{Error, Result};

use schedule::{ExecGraph, Job};

/// Knobs for [`factorize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorOptions {
    pub workers: usize,
    /// Relative pivot threshold against the column maximum.
    pub pivot_tol: f64,
    /// When set, a rejected pivot becomes `±eps * max|A|` instead of an error.
    pub static_pivot: Option<f64>,
    /// Factor diagonal blocks with at least half their cells stored using
    /// dense loops.
    pub dense_fallback: bool,
}

impl Default for FactorOptions {
    fn default() -> Self {
        FactorOptions {
            workers: 1,
            pivot_tol: 1e-12,
            static_pivot: None,
            dense_fallback: false,
        }
    }
}

impl FactorOptions {
    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }
}

/// Kernel invocation counts of one factorization.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FactorStats {
    pub getrf: usize,
    pub gessm: usize,
    pub tstrf: usize,
    pub ssssm: usize,
    /// Diagonal blocks that went through the dense kernel.
    pub dense_getrf: usize,
    /// Pivots replaced under the static-pivot option.
    pub perturbed_pivots: usize,
}

impl FactorStats {
    pub fn tasks(&self) -> usize {
        self.getrf + self.gessm + self.tstrf + self.ssssm
    }

    pub fn count(&self, kernel: Kernel) -> usize {
        match kernel {
            Kernel::Getrf => self.getrf,
            Kernel::Gessm => self.gessm,
            Kernel::Tstrf => self.tstrf,
            Kernel::Ssssm => self.ssssm,
        }
    }
}

/// Blocked factors `P A = L U`, with `P` the block-diagonal composition of
/// the per-block row permutations.
#[derive(Debug, Clone, PartialEq)]
pub struct LuFactors {
    plan: BlockingPlan,
    diag: Vec<DiagonalFactor>,
    /// `(block_row, block_col, L panel)`; panel rows keep the input order.
    lower: Vec<(usize, usize, SparseBlock)>,
    /// `(block_row, block_col, U panel)`; panel rows are pivot positions.
    upper: Vec<(usize, usize, SparseBlock)>,
    stats: FactorStats,
}

impl LuFactors {
    pub fn plan(&self) -> &BlockingPlan {
        &self.plan
    }

    pub fn n(&self) -> usize {
        self.plan.n()
    }

    pub fn stats(&self) -> &FactorStats {
        &self.stats
    }

    pub fn diagonal(&self, block: usize) -> &DiagonalFactor {
        &self.diag[block]
    }

    pub fn lower_panels(&self) -> &[(usize, usize, SparseBlock)] {
        &self.lower
    }

    pub fn upper_panels(&self) -> &[(usize, usize, SparseBlock)] {
        &self.upper
    }

    /// `perm[g]` is the input row placed at position `g`.
    pub fn perm(&self) -> Vec<usize> {
        let pos = self.plan.positions();
        let mut perm = Vec::with_capacity(self.n());
        for (i, d) in self.diag.iter().enumerate() {
            perm.extend(d.perm.iter().map(|&r| pos[i] + r));
        }
        perm
    }

    /// Unit lower factor as a global CSC matrix (diagonal ones stored).
    pub fn l_factor(&self) -> CscMatrix {
        let pos = self.plan.positions();
        let mut t = Vec::new();
        for (i, d) in self.diag.iter().enumerate() {
            let s = pos[i];
            for c in 0..d.order() {
                t.push(Triplet::new(s + c, s + c, 1.0));
                let (rows, vals) = d.l.col(c);
                t.extend(rows.iter().zip(vals).map(|(&r, &v)| Triplet::new(s + r, s + c, v)));
            }
        }
        for (k, i, b) in &self.lower {
            let pinv = &self.diag[*k].pinv;
            let (sk, si) = (pos[*k], pos[*i]);
            for c in 0..b.ncols() {
                let (rows, vals) = b.col(c);
                t.extend(
                    rows.iter()
                        .zip(vals)
                        .map(|(&r, &v)| Triplet::new(sk + pinv[r], si + c, v)),
                );
            }
        }
        CscMatrix::from_triplets(self.n(), &t).expect("factor indices are in range")
    }

    /// Upper factor as a global CSC matrix.
    pub fn u_factor(&self) -> CscMatrix {
        let pos = self.plan.positions();
        let mut t = Vec::new();
        let diag_blocks = self.diag.iter().enumerate().map(|(i, d)| (i, i, &d.u));
        let panels = self.upper.iter().map(|(i, j, b)| (*i, *j, b));
        for (i, j, b) in diag_blocks.chain(panels) {
            let (si, sj) = (pos[i], pos[j]);
            for c in 0..b.ncols() {
                let (rows, vals) = b.col(c);
                t.extend(rows.iter().zip(vals).map(|(&r, &v)| Triplet::new(si + r, sj + c, v)));
            }
        }
        CscMatrix::from_triplets(self.n(), &t).expect("factor indices are in range")
    }

    /// Stored entries of L (including the unit diagonal) and U.
    pub fn nnz(&self) -> (usize, usize) {
        let l = self.n()
            + self.diag.iter().map(|d| d.l.nnz()).sum::<usize>()
            + self.lower.iter().map(|p| p.2.nnz()).sum::<usize>();
        let u = self.diag.iter().map(|d| d.u.nnz()).sum::<usize>()
            + self.upper.iter().map(|p| p.2.nnz()).sum::<usize>();
        (l, u)
    }

    /// Hash of every stored index and value bit pattern. Two factorizations
    /// with the same fingerprint are, for practical purposes, bit-identical.
    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        let mut block = |b: &SparseBlock| {
            b.col_ptr().hash(&mut h);
            b.row_idx().hash(&mut h);
            for v in b.values() {
                v.to_bits().hash(&mut h);
            }
        };
        for d in &self.diag {
            block(&d.l);
            block(&d.u);
        }
        for (_, _, b) in self.lower.iter().chain(&self.upper) {
            block(b);
        }
        for d in &self.diag {
            d.perm.hash(&mut h);
        }
        h.finish()
    }
}

enum Done {
    Diag(DiagonalFactor),
    Panel(SparseBlock),
}

/// A block receives Schur updates under `raw` until its own kernel runs,
/// then is published once in `done` and only read afterwards.
struct Slot {
    raw: Mutex<Option<SparseBlock>>,
    done: OnceLock<Done>,
}

impl Slot {
    fn new(b: SparseBlock) -> Self {
        Slot {
            raw: Mutex::new(Some(b)),
            done: OnceLock::new(),
        }
    }

    fn panel(&self) -> &SparseBlock {
        match self.done.get() {
            Some(Done::Panel(b)) => b,
            _ => unreachable!("panel read before it was solved"),
        }
    }

    fn diag(&self) -> &DiagonalFactor {
        match self.done.get() {
            Some(Done::Diag(d)) => d,
            _ => unreachable!("diagonal block read before it was factored"),
        }
    }

    fn take_raw(&self) -> SparseBlock {
        self.raw.lock().expect("lock").take().expect("block factored twice")
    }

    fn finish(&self, d: Done) {
        if self.done.set(d).is_err() {
            unreachable!("block finished twice");
        }
    }
}

#[derive(Default)]
struct Counters {
    kernels: [AtomicUsize; 4],
    dense: AtomicUsize,
    perturbed: AtomicUsize,
}

impl Counters {
    fn bump(&self, k: Kernel) {
        self.kernels[k as usize].fetch_add(1, Ordering::Relaxed);
    }
}

struct Context<'a> {
    shape: &'a GridShape,
    blocks: &'a [Slot],
    policy: PivotPolicy,
    dense_fallback: bool,
    counters: &'a Counters,
}

impl Context<'_> {
    fn run(&self, job: Job, ws: &mut Workspace) -> Result<()> {
        let pos = self.shape.plan.positions();
        match job {
            Job::Getrf(i) => {
                let slot = self.diag_slot(i);
                let b = self.blocks[slot].take_raw();
                let dense = self.dense_fallback && density(&b) >= 0.5;
                let factor = if dense {
                    self.counters.dense.fetch_add(1, Ordering::Relaxed);
                    factor_diagonal_dense(&b, &self.policy)
                } else {
                    kernels::factor_diagonal_with(&b, &self.policy, ws)
                };
                let factor = factor.map_err(|e| kernel_error(e, i, i, pos))?;
                self.counters.perturbed.fetch_add(factor.perturbed, Ordering::Relaxed);
                self.blocks[slot].finish(Done::Diag(factor));
                self.counters.bump(Kernel::Getrf);
            }
            Job::Gessm(slot) => {
                let (i, _) = self.coords(slot);
                let diag = self.blocks[self.diag_slot(i)].diag();
                let b = self.blocks[slot].take_raw();
                self.blocks[slot].finish(Done::Panel(kernels::factor_u_panel_with(diag, &b, ws)));
                self.counters.bump(Kernel::Gessm);
            }
            Job::Tstrf(slot) => {
                let (k, i) = self.coords(slot);
                let diag = self.blocks[self.diag_slot(i)].diag();
                let b = self.blocks[slot].take_raw();
                let panel = kernels::factor_l_panel_with(&b, diag, ws).map_err(|e| kernel_error(e, k, i, pos))?;
                self.blocks[slot].finish(Done::Panel(panel));
                self.counters.bump(Kernel::Tstrf);
            }
            Job::Join(_) => {}
            Job::Update { u_slot, first, last } => {
                let (_, j) = self.coords(u_slot);
                let u = self.blocks[u_slot].panel();
                let mut applied = 0;
                // Both L panels and column `j` are sorted by block row, so
                // targets are found by a merge walk.
                let col = &self.shape.block_rows[..self.shape.col_ptr[j + 1]];
                let mut cursor = self.shape.col_ptr[j];
                for l_slot in first..last {
                    let (k, _) = self.coords(l_slot);
                    while cursor < col.len() && col[cursor] < k {
                        cursor += 1;
                    }
                    let target = (cursor < col.len() && col[cursor] == k).then_some(cursor);
                    let l = self.blocks[l_slot].panel();
                    let Some(target) = target else {
                        match first_product(l, u) {
                            None => continue,
                            Some((r, c)) => {
                                return Err(Error::SupportViolation {
                                    block_row: k,
                                    block_col: j,
                                    row: pos[k] + r,
                                    col: pos[j] + c,
                                })
                            }
                        }
                    };
                    let mut guard = self.blocks[target].raw.lock().expect("lock");
                    let t = guard.as_mut().expect("update into a finished block");
                    let touched =
                        kernels::schur_update_with(t, l, u, ws).map_err(|e| kernel_error(e, k, j, pos))?;
                    applied += touched as usize;
                }
                self.counters.kernels[Kernel::Ssssm as usize].fetch_add(applied, Ordering::Relaxed);
            }
        }
        Ok(())
    }

    fn diag_slot(&self, i: usize) -> usize {
        self.shape.diag_slot(i)
    }

    fn coords(&self, slot: usize) -> (usize, usize) {
        (self.shape.block_rows[slot], self.shape.block_cols[slot])
    }
}

fn first_product(l: &SparseBlock, u: &SparseBlock) -> Option<(usize, usize)> {
    (0..u.ncols()).find_map(|c| {
        u.col(c)
            .0
            .iter()
            .find_map(|&t| l.col(t).0.first().map(|&r| (r, c)))
    })
}

fn kernel_error(e: KernelError, block_row: usize, block_col: usize, pos: &[usize]) -> Error {
    match e {
        KernelError::ZeroPivot { column, magnitude } => Error::ZeroPivot {
            block: block_col,
            column,
            magnitude,
        },
        KernelError::OutsideSupport { row, col } => Error::SupportViolation {
            block_row,
            block_col,
            row: pos[block_row] + row,
            col: pos[block_col] + col,
        },
    }
}

/// Runs blocked LU on `grid` with `options.workers` threads.
///
/// The result is bit-identical for every worker count. On failure the
/// reported error is the one a single-threaded run in task order would hit
/// first.
pub fn factorize(grid: &BlockGrid, options: &FactorOptions) -> Result<LuFactors> {
    if options.workers == 0 {
        return Err(Error::BadParams("workers must be at least 1".into()));
    }
    if !(options.pivot_tol >= 0.0 && options.pivot_tol.is_finite()) {
        return Err(Error::BadParams(format!("pivot_tol {} is not a non-negative number", options.pivot_tol)));
    }
    if let Some(eps) = options.static_pivot {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::BadParams(format!("static pivot {eps} must be positive")));
        }
    }
    let a_max = grid
        .iter()
        .flat_map(|(_, b)| b.values().iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let policy = PivotPolicy {
        pivot_tol: options.pivot_tol,
        static_pivot: options.static_pivot.map(|eps| eps * if a_max > 0.0 { a_max } else { 1.0 }),
    };

    let (blocks, shape) = grid.clone().into_blocks();
    let graph = ExecGraph::build(&shape);
    let blocks: Vec<Slot> = blocks.into_iter().map(Slot::new).collect();
    let counters = Counters::default();
    let ctx = Context {
        shape: &shape,
        blocks: &blocks,
        policy,
        dense_fallback: options.dense_fallback,
        counters: &counters,
    };
    schedule::execute(&graph, options.workers, |job, ws| ctx.run(job, ws))?;

    let p = shape.plan.num_blocks();
    let mut diag: Vec<Option<DiagonalFactor>> = (0..p).map(|_| None).collect();
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for (slot, cell) in blocks.into_iter().enumerate() {
        let (i, j) = (shape.block_rows[slot], shape.block_cols[slot]);
        match cell.done.into_inner().expect("every block is factored or solved") {
            Done::Diag(d) => diag[i] = Some(d),
            Done::Panel(b) if i > j => lower.push((i, j, b)),
            Done::Panel(b) => upper.push((i, j, b)),
        }
    }
    upper.sort_by_key(|e| (e.0, e.1));
    let k = |kernel: Kernel| counters.kernels[kernel as usize].load(Ordering::Relaxed);
    let stats = FactorStats {
        getrf: k(Kernel::Getrf),
        gessm: k(Kernel::Gessm),
        tstrf: k(Kernel::Tstrf),
        ssssm: k(Kernel::Ssssm),
        dense_getrf: counters.dense.load(Ordering::Relaxed),
        perturbed_pivots: counters.perturbed.load(Ordering::Relaxed),
    };
    Ok(LuFactors {
        plan: shape.plan,
        diag: diag.into_iter().map(|d| d.expect("diagonal factored")).collect(),
        lower,
        upper,
        stats,
    })
}

/// `||P A - L U||_F / ||A||_F`.
pub fn residual(a: &CscMatrix, f: &LuFactors) -> Result<f64> {
    let n = a.n();
    if n != f.n() {
        return Err(Error::DimensionMismatch {
            expected: f.n(),
            found: n,
        });
    }
    let norm_a = a.frobenius_norm();
    if norm_a == 0.0 {
        return Err(Error::DegenerateMatrix);
    }
    let perm = f.perm();
    let mut pinv = vec![0; n];
    for (g, &r) in perm.iter().enumerate() {
        pinv[r] = g;
    }
    let (l, u) = (f.l_factor(), f.u_factor());
    let mut acc = vec![0.0; n];
    let mut touched = vec![false; n];
    let mut rows: Vec<usize> = Vec::new();
    let mut sum = 0.0;
    for j in 0..n {
        let (ur, uv) = u.col(j);
        for (&k, &ukj) in ur.iter().zip(uv) {
            let (lr, lv) = l.col(k);
            for (&r, &lrk) in lr.iter().zip(lv) {
                if !touched[r] {
                    touched[r] = true;
                    rows.push(r);
                }
                acc[r] += lrk * ukj;
            }
        }
        let (ar, av) = a.col(j);
        for (&r, &v) in ar.iter().zip(av) {
            let g = pinv[r];
            if !touched[g] {
                touched[g] = true;
                rows.push(g);
            }
            acc[g] -= v;
        }
        for &r in &rows {
            sum += acc[r] * acc[r];
            acc[r] = 0.0;
            touched[r] = false;
        }
        rows.clear();
    }
    Ok(sum.sqrt() / norm_a)
}

/// Solves `A x = b` with the factors: `L U x = P b`.
pub fn solve(f: &LuFactors, b: &[f64]) -> Result<Vec<f64>> {
    let n = f.n();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    let mut y: Vec<f64> = f.perm().iter().map(|&r| b[r]).collect();
    let l = f.l_factor();
    for j in 0..n {
        let yj = y[j];
        let (rows, vals) = l.col(j);
        for (&r, &v) in rows.iter().zip(vals) {
            if r > j {
                y[r] -= v * yj;
            }
        }
    }
    let u = f.u_factor();
    for j in (0..n).rev() {
        let (rows, vals) = u.col(j);
        let d = match rows.last() {
            Some(&r) if r == j => vals[vals.len() - 1],
            _ => 0.0,
        };
        if d == 0.0 {
            return Err(Error::ZeroPivot {
                block: f.plan.block_of(j),
                column: j - f.plan.positions()[f.plan.block_of(j)],
                magnitude: 0.0,
            });
        }
        y[j] /= d;
        let yj = y[j];
        for (&r, &v) in rows.iter().zip(vals) {
            if r < j {
                y[r] -= v * yj;
            }
        }
    }
    Ok(y)
}
