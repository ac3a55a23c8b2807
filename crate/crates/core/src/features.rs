//! Diagonal block-based distribution feature.
//!
//! `blockptr[k]` counts the nonzeros of the leading `k x k` principal
//! submatrix of a structurally symmetric pattern. It is derived from the CSC
//! arrays in a single pass: every strictly-lower entry `(r, c)` is charged to
//! row `r`, and the leading block grows by `2 * num[r] + 1` entries when row
//! and column `r` join it (the mirrored upper entries plus the diagonal).
//!
//! Normalizing the pointer by `n` on the x axis and by `nnz` on the y axis
//! gives a percentage curve whose shape exposes the 2D layout of the matrix:
//! banded matrices give a straight line, uniformly dense ones a parabola, and
//! dense rows/columns show up as jumps.

use crate::csc::CscMatrix;
use crate::error::{Error, Result};
use crate::symbolic::{check_symmetric_full_diagonal, FilledPattern};

pub const DEFAULT_SAMPLE_POINTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagBlockPointer {
    n: usize,
    blockptr: Vec<usize>,
}

impl DiagBlockPointer {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.blockptr
    }

    pub fn total(&self) -> usize {
        self.blockptr[self.n]
    }
}

fn block_pointer_from_arrays(n: usize, col_ptr: &[usize], row_idx: &[usize]) -> DiagBlockPointer {
    let mut num = vec![0usize; n];
    for i in 0..n {
        for &index in &row_idx[col_ptr[i]..col_ptr[i + 1]] {
            if index > i {
                num[index] += 1;
            }
        }
    }
    let mut blockptr = Vec::with_capacity(n + 1);
    blockptr.push(0);
    for i in 0..n {
        num[i] = 2 * num[i] + 1;
        blockptr.push(blockptr[i] + num[i]);
    }
    DiagBlockPointer { n, blockptr }
}

pub fn diag_block_pointer(f: &FilledPattern) -> Result<DiagBlockPointer> {
    Ok(block_pointer_from_arrays(f.n(), f.col_ptr(), f.row_idx()))
}

/// Same as [`diag_block_pointer`] for an arbitrary CSC pattern, which must be
/// structurally symmetric with a full diagonal.
pub fn diag_block_pointer_csc(a: &CscMatrix) -> Result<DiagBlockPointer> {
    check_symmetric_full_diagonal(a)?;
    Ok(block_pointer_from_arrays(a.n(), a.col_ptr(), a.row_idx()))
}

/// `round(k * n / sample_points)` with halves rounded up, in exact integer math.
pub(crate) fn sample_to_index(k: usize, n: usize, sample_points: usize) -> usize {
    let num = 2 * (k as u128) * (n as u128) + sample_points as u128;
    (num / (2 * sample_points as u128)) as usize
}

/// Normalized diagonal-block curve sampled at `sample_points + 1` positions.
#[derive(Debug, Clone, PartialEq)]
pub struct PercentCurve {
    n: usize,
    sample_points: usize,
    pct: Vec<f64>,
}

impl PercentCurve {
    /// Builds a curve from raw samples, checking endpoints and monotonicity.
    pub fn from_samples(n: usize, pct: Vec<f64>) -> Result<Self> {
        if pct.len() < 2 {
            return Err(Error::DegenerateCurve("needs at least two samples".into()));
        }
        if n == 0 {
            return Err(Error::DegenerateCurve("order zero".into()));
        }
        if pct[0] != 0.0 || pct[pct.len() - 1] != 1.0 {
            return Err(Error::DegenerateCurve("curve must run from 0 to 1".into()));
        }
        if pct.windows(2).any(|w| w[1].partial_cmp(&w[0]).is_none_or(|o| o.is_lt())) || pct.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::DegenerateCurve("curve must be non-decreasing in [0, 1]".into()));
        }
        Ok(PercentCurve {
            n,
            sample_points: pct.len() - 1,
            pct,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sample_points(&self) -> usize {
        self.sample_points
    }

    pub fn pct(&self) -> &[f64] {
        &self.pct
    }

    /// Matrix index that sample `k` corresponds to.
    pub fn sample_index(&self, k: usize) -> usize {
        sample_to_index(k, self.n, self.sample_points)
    }
}

pub fn percentage_curve(ptr: &DiagBlockPointer, sample_points: usize) -> Result<PercentCurve> {
    if sample_points < 2 {
        return Err(Error::BadParams(format!(
            "sample_points must be at least 2, got {sample_points}"
        )));
    }
    let n = ptr.n();
    let total = ptr.total();
    if total == 0 {
        return Err(Error::DegenerateMatrix);
    }
    let sp = sample_points.min(n);
    let bp = ptr.as_slice();
    let pct = (0..=sp)
        .map(|k| bp[sample_to_index(k, n, sp)] as f64 / total as f64)
        .collect();
    Ok(PercentCurve {
        n,
        sample_points: sp,
        pct,
    })
}

/// Coarse shape of a percentage curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StructureClass {
    /// Nonzeros grow evenly along the diagonal (banded).
    Linear,
    /// Nonzeros grow with the area of the leading block (uniform density).
    Quadratic,
    /// Single samples carry outsized mass (dense rows/columns).
    Jumpy,
    Mixed,
}

impl std::fmt::Display for StructureClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StructureClass::Linear => "linear",
            StructureClass::Quadratic => "quadratic",
            StructureClass::Jumpy => "jumpy",
            StructureClass::Mixed => "mixed",
        };
        f.write_str(s)
    }
}

pub const SHAPE_TOLERANCE: f64 = 0.02;
pub const JUMP_FACTOR: f64 = 10.0;

pub fn classify_curve(curve: &PercentCurve) -> StructureClass {
    let sp = curve.sample_points() as f64;
    let pct = curve.pct();
    let max_dev = |law: fn(f64) -> f64| {
        pct.iter()
            .enumerate()
            .map(|(k, &y)| (y - law(k as f64 / sp)).abs())
            .fold(0.0, f64::max)
    };
    if max_dev(|x| x) < SHAPE_TOLERANCE {
        return StructureClass::Linear;
    }
    if max_dev(|x| x * x) < SHAPE_TOLERANCE {
        return StructureClass::Quadratic;
    }
    let mean_increment = (pct[pct.len() - 1] - pct[0]) / sp;
    if pct.windows(2).any(|w| w[1] - w[0] > JUMP_FACTOR * mean_increment) {
        return StructureClass::Jumpy;
    }
    StructureClass::Mixed
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csc::Triplet;
    use crate::generate::{generate, GenKind, GenParams};
    use crate::symbolic::{symbolic_factorize, symmetrize_pattern};

    fn filled(a: &CscMatrix) -> FilledPattern {
        symbolic_factorize(&symmetrize_pattern(a)).unwrap()
    }

    #[test]
    fn identity_pointer() {
        let f = filled(&CscMatrix::identity(4));
        assert_eq!(diag_block_pointer(&f).unwrap().as_slice(), &[0, 1, 2, 3, 4]);
    }

    #[test]
    fn dense_pointer() {
        let a = generate(GenKind::Dense, 3, GenParams::seeded(0)).unwrap();
        assert_eq!(diag_block_pointer(&filled(&a)).unwrap().as_slice(), &[0, 1, 4, 9]);
    }

    #[test]
    fn tridiagonal_pointer_matches_enumeration() {
        let a = generate(GenKind::Tridiagonal, 4, GenParams::seeded(0)).unwrap();
        let brute: Vec<usize> = (0..=4)
            .map(|k| a.triplets().iter().filter(|t| t.row < k && t.col < k).count())
            .collect();
        assert_eq!(brute, vec![0, 1, 4, 7, 10]);
        assert_eq!(diag_block_pointer(&filled(&a)).unwrap().as_slice(), &brute[..]);
    }

    #[test]
    fn csc_variant_validates() {
        let a = CscMatrix::from_triplets(2, &[Triplet::new(0, 0, 1.0), Triplet::new(1, 0, 1.0)])
            .unwrap();
        assert!(matches!(diag_block_pointer_csc(&a), Err(Error::MissingDiagonal(1))));
        let b = CscMatrix::from_triplets(
            2,
            &[Triplet::new(0, 0, 1.0), Triplet::new(1, 0, 1.0), Triplet::new(1, 1, 1.0)],
        )
        .unwrap();
        assert!(matches!(diag_block_pointer_csc(&b), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn dense_curve_is_quadratic() {
        let a = generate(GenKind::Dense, 100, GenParams::seeded(0)).unwrap();
        let c = percentage_curve(&diag_block_pointer(&filled(&a)).unwrap(), 10).unwrap();
        for (k, &v) in c.pct().iter().enumerate() {
            assert_eq!(v, (k * k) as f64 / 100.0);
        }
        assert_eq!(classify_curve(&c), StructureClass::Quadratic);
    }

    #[test]
    fn identity_curve_is_linear() {
        let f = filled(&CscMatrix::identity(100));
        let c = percentage_curve(&diag_block_pointer(&f).unwrap(), 10).unwrap();
        for (k, &v) in c.pct().iter().enumerate() {
            assert_eq!(v, k as f64 / 10.0);
        }
        assert_eq!(classify_curve(&c), StructureClass::Linear);
    }

    #[test]
    fn tridiagonal_curve_formula() {
        let a = generate(GenKind::Tridiagonal, 1000, GenParams::seeded(0)).unwrap();
        let c = percentage_curve(&diag_block_pointer(&filled(&a)).unwrap(), 10).unwrap();
        assert_eq!(c.pct()[0], 0.0);
        for k in 1..=10 {
            assert_eq!(c.pct()[k], (300 * k - 2) as f64 / 2998.0);
        }
    }

    #[test]
    fn sampling_is_clamped_and_rounded_half_up() {
        let f = filled(&CscMatrix::identity(5));
        let c = percentage_curve(&diag_block_pointer(&f).unwrap(), 1000).unwrap();
        assert_eq!(c.sample_points(), 5);
        assert_eq!(sample_to_index(1, 5, 2), 3);
        assert_eq!(sample_to_index(1, 7, 2), 4);
        assert_eq!(sample_to_index(2, 7, 2), 7);
    }

    #[test]
    fn bad_sampling_and_degenerate_input() {
        let f = filled(&CscMatrix::identity(5));
        let ptr = diag_block_pointer(&f).unwrap();
        assert!(matches!(percentage_curve(&ptr, 1), Err(Error::BadParams(_))));
        let empty = DiagBlockPointer {
            n: 3,
            blockptr: vec![0; 4],
        };
        assert!(matches!(percentage_curve(&empty, 10), Err(Error::DegenerateMatrix)));
    }

    #[test]
    fn arrowhead_curve_is_not_smooth() {
        let a = generate(GenKind::Arrowhead, 1000, GenParams::seeded(0).with_border(100)).unwrap();
        let c = percentage_curve(&diag_block_pointer(&filled(&a)).unwrap(), 1000).unwrap();
        let class = classify_curve(&c);
        assert!(matches!(class, StructureClass::Jumpy | StructureClass::Mixed), "{class}");
    }

    #[test]
    fn from_samples_validates() {
        assert!(PercentCurve::from_samples(10, vec![0.0, 0.5, 1.0]).is_ok());
        assert!(PercentCurve::from_samples(10, vec![0.0, 0.6, 0.5, 1.0]).is_err());
        assert!(PercentCurve::from_samples(10, vec![0.1, 1.0]).is_err());
        assert!(PercentCurve::from_samples(10, vec![0.0]).is_err());
    }
}
