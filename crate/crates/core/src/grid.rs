//! 2D block grid and the task dependency tree of right-looking blocked LU.
//!
//! Elimination step `i` of the blocked algorithm runs four kinds of kernel:
//!
//! | kernel   | block      | effect                              |
//! |----------|------------|-------------------------------------|
//! | `GETRF`  | `(i, i)`   | `B_ii -> L_ii U_ii`                 |
//! | `GESSM`  | `(i, j)`   | `B_ij <- L_ii^-1 B_ij`  (U panel)   |
//! | `TSTRF`  | `(k, i)`   | `B_ki <- B_ki U_ii^-1`  (L panel)   |
//! | `SSSSM`  | `(k, j)`   | `B_kj <- B_kj - B_ki B_ij`          |
//!
//! Only nonempty blocks are stored, and an update exists only when both of
//! its panels are nonempty. Because the filled pattern is closed under
//! elimination, every update target already has support in the grid.

use crate::block::{SparseBlock, SparseBlockBuilder};
use crate::blocking::BlockingPlan;
use crate::csc::CscMatrix;
use crate::error::{Error, Result};
use crate::symbolic::FilledPattern;

/// Nonempty blocks of a filled matrix under a blocking plan.
///
/// Blocks are indexed by a slot number; `col_ptr`/`block_rows` give the
/// block-level CSC layout and `row_ptr`/`row_slots` the transposed view.
#[derive(Debug, Clone)]
pub struct BlockGrid {
    plan: BlockingPlan,
    col_ptr: Vec<usize>,
    block_rows: Vec<usize>,
    block_cols: Vec<usize>,
    blocks: Vec<SparseBlock>,
    row_ptr: Vec<usize>,
    row_slots: Vec<usize>,
}

impl BlockGrid {
    pub fn plan(&self) -> &BlockingPlan {
        &self.plan
    }

    /// Blocks per dimension.
    pub fn p(&self) -> usize {
        self.plan.num_blocks()
    }

    /// Number of stored (nonempty) blocks.
    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn nnz(&self) -> usize {
        self.blocks.iter().map(SparseBlock::nnz).sum()
    }

    pub fn slot(&self, block_row: usize, block_col: usize) -> Option<usize> {
        let range = self.col_ptr[block_col]..self.col_ptr[block_col + 1];
        self.block_rows[range.clone()]
            .binary_search(&block_row)
            .ok()
            .map(|k| range.start + k)
    }

    pub fn block(&self, block_row: usize, block_col: usize) -> Option<&SparseBlock> {
        self.slot(block_row, block_col).map(|s| &self.blocks[s])
    }

    pub fn block_at(&self, slot: usize) -> &SparseBlock {
        &self.blocks[slot]
    }

    /// `(block_row, block_col)` of a slot.
    pub fn coords(&self, slot: usize) -> (usize, usize) {
        (self.block_rows[slot], self.block_cols[slot])
    }

    pub fn block_nnz(&self, block_row: usize, block_col: usize) -> usize {
        self.block(block_row, block_col).map_or(0, SparseBlock::nnz)
    }

    /// Slots of block column `j`, ordered by block row.
    pub fn col_slots(&self, j: usize) -> std::ops::Range<usize> {
        self.col_ptr[j]..self.col_ptr[j + 1]
    }

    /// Slots of block row `i`, ordered by block column.
    pub fn row_slots(&self, i: usize) -> &[usize] {
        &self.row_slots[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    /// Slots strictly below the diagonal in block column `i` (L panels).
    pub fn lower_slots(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.col_slots(i).filter(move |&s| self.block_rows[s] > i)
    }

    /// Slots strictly right of the diagonal in block row `i` (U panels).
    pub fn upper_slots(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.row_slots(i)
            .iter()
            .copied()
            .filter(move |&s| self.block_cols[s] > i)
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), &SparseBlock)> {
        (0..self.blocks.len()).map(move |s| (self.coords(s), &self.blocks[s]))
    }

    pub(crate) fn into_blocks(self) -> (Vec<SparseBlock>, GridShape) {
        let shape = GridShape {
            plan: self.plan,
            col_ptr: self.col_ptr,
            block_rows: self.block_rows,
            block_cols: self.block_cols,
            row_ptr: self.row_ptr,
            row_slots: self.row_slots,
        };
        (self.blocks, shape)
    }
}

/// Block layout without the numeric data.
#[derive(Debug, Clone)]
pub(crate) struct GridShape {
    pub(crate) plan: BlockingPlan,
    pub(crate) col_ptr: Vec<usize>,
    pub(crate) block_rows: Vec<usize>,
    pub(crate) block_cols: Vec<usize>,
    pub(crate) row_ptr: Vec<usize>,
    pub(crate) row_slots: Vec<usize>,
}

impl GridShape {
    pub(crate) fn slot(&self, block_row: usize, block_col: usize) -> Option<usize> {
        let range = self.col_ptr[block_col]..self.col_ptr[block_col + 1];
        self.block_rows[range.clone()]
            .binary_search(&block_row)
            .ok()
            .map(|k| range.start + k)
    }

    pub(crate) fn diag_slot(&self, i: usize) -> usize {
        self.slot(i, i).expect("diagonal blocks are always stored")
    }
}

/// Splits the filled matrix into blocks. Each block carries the filled
/// pattern restricted to its range, with values from `a` and `0.0` at fill
/// positions.
pub fn partition(f: &FilledPattern, a: &CscMatrix, plan: &BlockingPlan) -> Result<BlockGrid> {
    let n = f.n();
    for found in [a.n(), plan.n()] {
        if found != n {
            return Err(Error::DimensionMismatch { expected: n, found });
        }
    }
    let p = plan.num_blocks();
    let pos = plan.positions();
    let block_of = plan.block_map();

    let mut col_ptr = vec![0usize];
    let mut block_rows = Vec::new();
    let mut block_cols = Vec::new();
    let mut blocks = Vec::new();

    let mut builder_of: Vec<Option<usize>> = vec![None; p];
    for bj in 0..p {
        let (c0, c1) = (pos[bj], pos[bj + 1]);
        let mut touched: Vec<usize> = Vec::new();
        let mut builders: Vec<SparseBlockBuilder> = Vec::new();
        for c in c0..c1 {
            let local_c = c - c0;
            let (a_rows, a_vals) = a.col(c);
            let mut ak = 0;
            for &r in f.col(c) {
                let value = if ak < a_rows.len() && a_rows[ak] == r {
                    ak += 1;
                    a_vals[ak - 1]
                } else {
                    0.0
                };
                let bi = block_of[r];
                let b = match builder_of[bi] {
                    Some(b) => b,
                    None => {
                        builder_of[bi] = Some(builders.len());
                        touched.push(bi);
                        builders.push(SparseBlockBuilder::new(pos[bi + 1] - pos[bi], c1 - c0));
                        builders.len() - 1
                    }
                };
                builders[b].advance_to(local_c);
                builders[b].push(r - pos[bi], value);
            }
            if ak != a_rows.len() {
                return Err(Error::BadParams(format!(
                    "entry ({}, {c}) of the input lies outside the filled pattern",
                    a_rows[ak]
                )));
            }
        }
        let mut order: Vec<(usize, SparseBlockBuilder)> = touched.into_iter().zip(builders).collect();
        order.sort_by_key(|(bi, _)| *bi);
        for (bi, builder) in order {
            builder_of[bi] = None;
            block_rows.push(bi);
            block_cols.push(bj);
            blocks.push(builder.build());
        }
        col_ptr.push(blocks.len());
    }

    let mut row_ptr = vec![0usize; p + 1];
    for &bi in &block_rows {
        row_ptr[bi + 1] += 1;
    }
    for i in 0..p {
        row_ptr[i + 1] += row_ptr[i];
    }
    let mut next = row_ptr.clone();
    let mut row_slots = vec![0usize; blocks.len()];
    for (s, &bi) in block_rows.iter().enumerate() {
        row_slots[next[bi]] = s;
        next[bi] += 1;
    }

    Ok(BlockGrid {
        plan: plan.clone(),
        col_ptr,
        block_rows,
        block_cols,
        blocks,
        row_ptr,
        row_slots,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub enum Kernel {
    Getrf,
    Gessm,
    Tstrf,
    Ssssm,
}

impl Kernel {
    pub fn name(self) -> &'static str {
        match self {
            Kernel::Getrf => "GETRF",
            Kernel::Gessm => "GESSM",
            Kernel::Tstrf => "TSTRF",
            Kernel::Ssssm => "SSSSM",
        }
    }
}

/// One kernel invocation on one block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Task {
    pub kernel: Kernel,
    /// Elimination step.
    pub step: usize,
    /// Target (written) block.
    pub row: usize,
    pub col: usize,
    /// Nonzero weight: nnz of the output block for factor/panel kernels,
    /// `min(nnz(L_ki), nnz(U_ij))` for updates.
    pub weight: u64,
    /// Floating-point operation count implied by the filled patterns.
    pub flops: u64,
    /// Earliest wave the task can run in.
    pub level: usize,
}

/// Task DAG of blocked LU with ASAP levels.
#[derive(Debug, Clone)]
pub struct DependencyTree {
    tasks: Vec<Task>,
    dep_ptr: Vec<usize>,
    deps: Vec<usize>,
    levels: Vec<Vec<usize>>,
    steps: usize,
    missing_targets: usize,
}

impl DependencyTree {
    /// Builds a tree from explicit tasks and dependency lists. Every
    /// dependency must point to an earlier task; levels are recomputed.
    pub fn from_tasks(mut tasks: Vec<Task>, task_deps: &[Vec<usize>]) -> Result<Self> {
        if task_deps.len() != tasks.len() {
            return Err(Error::DimensionMismatch {
                expected: tasks.len(),
                found: task_deps.len(),
            });
        }
        let mut dep_ptr = vec![0usize];
        let mut deps = Vec::new();
        for (t, d) in task_deps.iter().enumerate() {
            let mut level = 0;
            for &x in d {
                if x >= t {
                    return Err(Error::BadParams(format!("task {t} depends on later task {x}")));
                }
                level = level.max(tasks[x].level + 1);
                deps.push(x);
            }
            dep_ptr.push(deps.len());
            tasks[t].level = level;
        }
        let num_levels = tasks.iter().map(|t| t.level + 1).max().unwrap_or(0);
        let mut levels = vec![Vec::new(); num_levels];
        for (id, t) in tasks.iter().enumerate() {
            levels[t.level].push(id);
        }
        let steps = tasks.iter().map(|t| t.step + 1).max().unwrap_or(0);
        Ok(DependencyTree {
            tasks,
            dep_ptr,
            deps,
            levels,
            steps,
            missing_targets: 0,
        })
    }

    /// Tasks in a valid topological order.
    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn deps(&self, task: usize) -> &[usize] {
        &self.deps[self.dep_ptr[task]..self.dep_ptr[task + 1]]
    }

    /// Task ids per ASAP level.
    pub fn levels(&self) -> &[Vec<usize>] {
        &self.levels
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// Number of elimination steps (`p`).
    pub fn num_steps(&self) -> usize {
        self.steps
    }

    /// Updates whose target block had no support in the grid. Zero whenever
    /// the grid was built from an elimination-closed pattern.
    pub fn missing_targets(&self) -> usize {
        self.missing_targets
    }

    pub fn total_weight(&self) -> u64 {
        self.tasks.iter().map(|t| t.weight).sum()
    }

    pub fn total_flops(&self) -> u64 {
        self.tasks.iter().map(|t| t.flops).sum()
    }

    pub fn count(&self, kernel: Kernel) -> usize {
        self.tasks.iter().filter(|t| t.kernel == kernel).count()
    }

    /// Successor lists, the reverse of [`deps`](Self::deps).
    pub fn successors(&self) -> Vec<Vec<usize>> {
        let mut succ = vec![Vec::new(); self.tasks.len()];
        for t in 0..self.tasks.len() {
            for &d in self.deps(t) {
                succ[d].push(t);
            }
        }
        succ
    }
}

/// Per-slot pattern counts used for the flop model.
struct PatternCounts {
    /// Entries per local column.
    col: Vec<Vec<u64>>,
    /// Entries per local row.
    row: Vec<Vec<u64>>,
}

impl PatternCounts {
    fn new(grid: &BlockGrid) -> Self {
        let mut col = Vec::with_capacity(grid.num_blocks());
        let mut row = Vec::with_capacity(grid.num_blocks());
        for (_, b) in grid.iter() {
            col.push(
                b.col_ptr()
                    .windows(2)
                    .map(|w| (w[1] - w[0]) as u64)
                    .collect(),
            );
            row.push(b.row_counts().into_iter().map(|c| c as u64).collect());
        }
        PatternCounts { col, row }
    }
}

/// Strictly-lower entries per column and strictly-upper entries per row of a
/// diagonal block.
fn triangle_counts(b: &SparseBlock) -> (Vec<u64>, Vec<u64>) {
    let m = b.ncols();
    let mut below = vec![0u64; m];
    let mut right = vec![0u64; b.nrows()];
    for j in 0..m {
        for &i in b.col(j).0 {
            if i > j {
                below[j] += 1;
            } else if i < j {
                right[i] += 1;
            }
        }
    }
    (below, right)
}

/// Builds the task DAG of the blocked factorization and assigns ASAP levels.
///
/// Dependencies: `GETRF(i)` waits for every update into `(i, i)`; a panel
/// waits for its `GETRF` and every update into its block; `SSSSM(k, j, i)`
/// waits for `TSTRF(k, i)`, `GESSM(i, j)` and the previous update into
/// `(k, j)`, so updates to one block apply in ascending step order.
pub fn dependency_levels(grid: &BlockGrid) -> DependencyTree {
    let p = grid.p();
    let counts = PatternCounts::new(grid);
    let mut tasks: Vec<Task> = Vec::new();
    let mut dep_ptr = vec![0usize];
    let mut deps: Vec<usize> = Vec::new();
    let mut last_writer: Vec<Option<usize>> = vec![None; grid.num_blocks()];
    let mut missing_targets = 0usize;

    let mut push = |tasks: &mut Vec<Task>, mut task: Task, task_deps: &[Option<usize>]| -> usize {
        let mut level = 0;
        for d in task_deps.iter().flatten() {
            deps.push(*d);
            level = level.max(tasks[*d].level + 1);
        }
        dep_ptr.push(deps.len());
        task.level = level;
        tasks.push(task);
        tasks.len() - 1
    };

    for i in 0..p {
        let diag = grid.slot(i, i).expect("filled pattern has a full diagonal");
        let db = grid.block_at(diag);
        let (below, right) = triangle_counts(db);
        let getrf_flops: u64 = below
            .iter()
            .zip(&right)
            .map(|(&l, &u)| l + 2 * l * u)
            .sum();
        let getrf = push(
            &mut tasks,
            Task {
                kernel: Kernel::Getrf,
                step: i,
                row: i,
                col: i,
                weight: db.nnz() as u64,
                flops: getrf_flops,
                level: 0,
            },
            &[last_writer[diag]],
        );
        last_writer[diag] = Some(getrf);

        let mut u_panels: Vec<(usize, usize, usize)> = Vec::new();
        for s in grid.upper_slots(i) {
            let (_, j) = grid.coords(s);
            let b = grid.block_at(s);
            let flops = (0..b.ncols())
                .flat_map(|c| b.col(c).0.iter())
                .map(|&t| 2 * below[t])
                .sum();
            let t = push(
                &mut tasks,
                Task {
                    kernel: Kernel::Gessm,
                    step: i,
                    row: i,
                    col: j,
                    weight: b.nnz() as u64,
                    flops,
                    level: 0,
                },
                &[Some(getrf), last_writer[s]],
            );
            last_writer[s] = Some(t);
            u_panels.push((j, s, t));
        }
        let mut l_panels: Vec<(usize, usize, usize)> = Vec::new();
        for s in grid.lower_slots(i) {
            let (k, _) = grid.coords(s);
            let b = grid.block_at(s);
            let flops = (0..b.ncols())
                .map(|t| b.col(t).0.len() as u64 * (1 + 2 * right[t]))
                .sum();
            let t = push(
                &mut tasks,
                Task {
                    kernel: Kernel::Tstrf,
                    step: i,
                    row: k,
                    col: i,
                    weight: b.nnz() as u64,
                    flops,
                    level: 0,
                },
                &[Some(getrf), last_writer[s]],
            );
            last_writer[s] = Some(t);
            l_panels.push((k, s, t));
        }
        for &(j, us, ut) in &u_panels {
            for &(k, ls, lt) in &l_panels {
                let lcol = &counts.col[ls];
                let urow = &counts.row[us];
                let flops: u64 = lcol.iter().zip(urow).map(|(&a, &b)| 2 * a * b).sum();
                if flops == 0 {
                    // structurally empty product: nothing to update
                    continue;
                }
                let target = grid.slot(k, j);
                if target.is_none() {
                    missing_targets += 1;
                }
                let weight = (grid.block_at(ls).nnz().min(grid.block_at(us).nnz())) as u64;
                let prev = target.and_then(|s| last_writer[s]);
                let t = push(
                    &mut tasks,
                    Task {
                        kernel: Kernel::Ssssm,
                        step: i,
                        row: k,
                        col: j,
                        weight,
                        flops,
                        level: 0,
                    },
                    &[Some(lt), Some(ut), prev],
                );
                if let Some(s) = target {
                    last_writer[s] = Some(t);
                }
            }
        }
    }

    let num_levels = tasks.iter().map(|t| t.level + 1).max().unwrap_or(0);
    let mut levels = vec![Vec::new(); num_levels];
    for (id, t) in tasks.iter().enumerate() {
        levels[t.level].push(id);
    }
    DependencyTree {
        tasks,
        dep_ptr,
        deps,
        levels,
        steps: p,
        missing_targets,
    }
}
