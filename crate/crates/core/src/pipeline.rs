//! The analysis pipeline from an input matrix to a block grid.

use crate::blocking::{irregular_plan, pangulu_size_select, regular_plan, BlockingPlan, IrregularParams};
use crate::csc::CscMatrix;
use crate::features::{diag_block_pointer, percentage_curve, DiagBlockPointer, PercentCurve};
use crate::grid::{partition, BlockGrid};
use crate::symbolic::{symbolic_factorize, symmetrize_pattern, FilledPattern};
use crate::Result;

/// A matrix together with its symmetrized pattern, filled pattern and
/// diagonal block pointer.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub a: CscMatrix,
    pub sym: CscMatrix,
    pub filled: FilledPattern,
    pub ptr: DiagBlockPointer,
}

pub fn prepare(a: CscMatrix) -> Result<Prepared> {
    let sym = symmetrize_pattern(&a);
    let filled = symbolic_factorize(&sym)?;
    let ptr = diag_block_pointer(&filled)?;
    Ok(Prepared { a, sym, filled, ptr })
}

/// How to cut the matrix into blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlanSpec {
    Irregular(IrregularParams),
    Regular(usize),
    /// Regular with the size from [`pangulu_size_select`].
    Pangulu,
}

impl Prepared {
    pub fn n(&self) -> usize {
        self.a.n()
    }

    pub fn curve(&self, sample_points: usize) -> Result<PercentCurve> {
        percentage_curve(&self.ptr, sample_points)
    }

    pub fn plan(&self, spec: &PlanSpec) -> Result<BlockingPlan> {
        let n = self.n();
        match spec {
            PlanSpec::Irregular(params) => irregular_plan(&self.curve(params.sample_points)?, params),
            PlanSpec::Regular(bs) => regular_plan(n, *bs),
            PlanSpec::Pangulu => regular_plan(n, self.pangulu_size().min(n)),
        }
    }

    pub fn pangulu_size(&self) -> usize {
        pangulu_size_select(self.n(), self.filled.nnz_filled())
    }

    pub fn grid(&self, plan: &BlockingPlan) -> Result<BlockGrid> {
        partition(&self.filled, &self.sym, plan)
    }
}
