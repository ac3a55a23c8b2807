//! Deterministic synthetic test matrices.
//!
//! All generators produce matrices that are strictly diagonally dominant by
//! rows and by columns, so partial pivoting never leaves the diagonal and
//! blocked elimination without global pivoting is stable.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::csc::{CscMatrix, Triplet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum GenKind {
    Tridiagonal,
    Dense,
    /// Diagonal body plus dense trailing `border` rows and columns.
    Arrowhead,
    /// Symmetric random pattern with symmetric values.
    RandomSpd,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GenParams {
    /// Border width for `Arrowhead`.
    pub border: usize,
    /// Off-diagonal pair probability for `RandomSpd`; `None` means about four
    /// neighbours per row.
    pub density: Option<f64>,
    pub seed: u64,
}

impl GenParams {
    pub fn seeded(seed: u64) -> Self {
        GenParams {
            seed,
            ..Default::default()
        }
    }

    pub fn with_border(mut self, border: usize) -> Self {
        self.border = border;
        self
    }

    pub fn with_density(mut self, density: f64) -> Self {
        self.density = Some(density);
        self
    }
}

fn off_diagonal_value(rng: &mut ChaCha8Rng) -> f64 {
    let mag = rng.gen_range(0.1..1.0);
    if rng.gen_bool(0.5) {
        mag
    } else {
        -mag
    }
}

/// Appends a dominant diagonal to a set of off-diagonal entries.
fn with_dominant_diagonal(n: usize, mut off: Vec<Triplet>, rng: &mut ChaCha8Rng) -> Result<CscMatrix> {
    let mut row_sum = vec![0.0f64; n];
    let mut col_sum = vec![0.0f64; n];
    for t in &off {
        row_sum[t.row] += t.value.abs();
        col_sum[t.col] += t.value.abs();
    }
    for i in 0..n {
        let margin = rng.gen_range(1.0..2.0);
        off.push(Triplet::new(i, i, margin + row_sum[i].max(col_sum[i])));
    }
    CscMatrix::from_triplets(n, &off)
}

pub fn generate(kind: GenKind, n: usize, params: GenParams) -> Result<CscMatrix> {
    if n == 0 {
        return Err(Error::BadParams("order must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut off = Vec::new();
    match kind {
        GenKind::Tridiagonal => {
            for i in 1..n {
                off.push(Triplet::new(i, i - 1, off_diagonal_value(&mut rng)));
                off.push(Triplet::new(i - 1, i, off_diagonal_value(&mut rng)));
            }
        }
        GenKind::Dense => {
            for j in 0..n {
                for i in 0..n {
                    if i != j {
                        off.push(Triplet::new(i, j, off_diagonal_value(&mut rng)));
                    }
                }
            }
        }
        GenKind::Arrowhead => {
            let b = params.border;
            if b >= n {
                return Err(Error::BadParams(format!(
                    "arrowhead border {b} must be smaller than the order {n}"
                )));
            }
            let body = n - b;
            for j in 0..n {
                for i in body..n {
                    if i != j {
                        off.push(Triplet::new(i, j, off_diagonal_value(&mut rng)));
                    }
                }
            }
            for j in body..n {
                for i in 0..body {
                    off.push(Triplet::new(i, j, off_diagonal_value(&mut rng)));
                }
            }
        }
        GenKind::RandomSpd => {
            let pairs_total = n * (n - 1) / 2;
            let density = params.density.unwrap_or(if n > 1 {
                (4.0 / (n - 1) as f64).min(1.0)
            } else {
                0.0
            });
            if !(0.0..=1.0).contains(&density) {
                return Err(Error::BadParams(format!("density {density} outside [0, 1]")));
            }
            let target = ((density * pairs_total as f64).round() as usize).min(pairs_total);
            let mut pairs = BTreeSet::new();
            if target == pairs_total {
                for j in 0..n {
                    for i in j + 1..n {
                        pairs.insert((i, j));
                    }
                }
            } else {
                while pairs.len() < target {
                    let i = rng.gen_range(0..n);
                    let j = rng.gen_range(0..n);
                    if i != j {
                        pairs.insert((i.max(j), i.min(j)));
                    }
                }
            }
            for (i, j) in pairs {
                let v = off_diagonal_value(&mut rng);
                off.push(Triplet::new(i, j, v));
                off.push(Triplet::new(j, i, v));
            }
        }
    }
    with_dominant_diagonal(n, off, &mut rng)
}

/// Reverses the ordering, e.g. turning a trailing arrowhead border into a
/// leading one.
pub fn reverse_ordering(a: &CscMatrix) -> CscMatrix {
    let n = a.n();
    let perm: Vec<usize> = (0..n).rev().collect();
    a.permute_symmetric(&perm).expect("reversal is a permutation")
}
