#![allow(dead_code)]

use std::collections::BTreeSet;

use lublock::blocking::BlockingPlan;
use lublock::csc::{CscMatrix, Triplet};
use lublock::factorize::LuFactors;
use lublock::generate::{generate, GenKind, GenParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Case {
    pub name: String,
    pub a: CscMatrix,
}

/// Diagonally dominant matrices: tridiagonal and two arrowhead borders for
/// each `n`, plus random symmetric patterns. Unordered random patterns fill
/// in heavily, so the largest size gets a single seed.
pub fn corpus(sizes: &[usize]) -> Vec<Case> {
    let mut out = Vec::new();
    for &n in sizes {
        let mut push = |name: String, kind, params| {
            out.push(Case {
                name,
                a: generate(kind, n, params).unwrap(),
            })
        };
        push(format!("tridiagonal-{n}"), GenKind::Tridiagonal, GenParams::seeded(0));
        for b in [n / 20, n / 10] {
            push(
                format!("arrowhead-{n}-b{b}"),
                GenKind::Arrowhead,
                GenParams::seeded(1).with_border(b),
            );
        }
        let seeds = if n >= 2000 { 1 } else { 5 };
        for seed in 0..seeds {
            push(format!("random-{n}-s{seed}"), GenKind::RandomSpd, GenParams::seeded(seed));
        }
    }
    out
}

/// Random symmetric pattern with a full diagonal. Off-diagonal values are
/// independent in each triangle; the diagonal is `n` when `dominant`.
pub fn random_symmetric(n: usize, seed: u64, dominant: bool) -> CscMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = rng.gen_range(0.02..0.5);
    let mut t = Vec::new();
    for j in 0..n {
        for i in j + 1..n {
            if rng.gen_bool(p) {
                t.push(Triplet::new(i, j, rng.gen_range(-1.0..1.0)));
                t.push(Triplet::new(j, i, rng.gen_range(-1.0..1.0)));
            }
        }
        let d = if dominant {
            n as f64
        } else {
            rng.gen_range(0.5..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 }
        };
        t.push(Triplet::new(j, j, d));
    }
    CscMatrix::from_triplets(n, &t).unwrap()
}

pub fn pattern_set(a: &CscMatrix) -> BTreeSet<(usize, usize)> {
    let mut s = BTreeSet::new();
    for j in 0..a.n() {
        for &i in a.col(j).0 {
            s.insert((i, j));
        }
    }
    s
}

/// Graph elimination on explicit sets: eliminating `k` connects every pair
/// of its remaining neighbours.
pub fn elimination_oracle(a: &CscMatrix) -> BTreeSet<(usize, usize)> {
    let n = a.n();
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (i, j) in pattern_set(a) {
        adj[i].insert(j);
        adj[j].insert(i);
    }
    let mut filled: BTreeSet<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
    for k in 0..n {
        let later: Vec<usize> = adj[k].iter().copied().filter(|&x| x > k).collect();
        for &x in &later {
            filled.insert((x, k));
            filled.insert((k, x));
            for &y in &later {
                if x != y {
                    adj[x].insert(y);
                }
            }
        }
    }
    filled
}

/// `out[k]` counts pattern entries with both indices below `k`.
pub fn leading_counts(entries: &BTreeSet<(usize, usize)>, n: usize) -> Vec<usize> {
    (0..=n)
        .map(|k| entries.iter().filter(|&&(i, j)| i < k && j < k).count())
        .collect()
}

pub struct DenseLu {
    pub perm: Vec<usize>,
    pub l: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
}

/// Scalar right-looking LU on a dense copy. The pivot of column `t` is the
/// largest magnitude among rows of the same diagonal block not yet used,
/// ties to the lowest original row. `None` when a pivot falls below
/// `tol` times the largest magnitude of that column inside its block at
/// the start of the block step.
pub fn dense_block_lu(a: &CscMatrix, plan: &BlockingPlan, tol: f64) -> Option<DenseLu> {
    let n = a.n();
    let mut m = a.to_dense();
    let mut orig: Vec<usize> = (0..n).collect();
    let pos = plan.positions();
    for w in pos.windows(2) {
        let (s, e) = (w[0], w[1]);
        let col_max: Vec<f64> = (s..e)
            .map(|t| (s..e).map(|r| m[r][t].abs()).fold(0.0, f64::max))
            .collect();
        for t in s..e {
            let q = (t..e)
                .max_by(|&x, &y| {
                    m[x][t]
                        .abs()
                        .partial_cmp(&m[y][t].abs())
                        .unwrap()
                        .then(orig[y].cmp(&orig[x]))
                })
                .unwrap();
            m.swap(t, q);
            orig.swap(t, q);
            let piv = m[t][t];
            if piv == 0.0 || piv.abs() < tol * col_max[t - s] {
                return None;
            }
            for r in t + 1..n {
                m[r][t] /= piv;
            }
            for r in t + 1..n {
                let l = m[r][t];
                if l != 0.0 {
                    for c in t + 1..n {
                        m[r][c] -= l * m[t][c];
                    }
                }
            }
        }
    }
    let tri = |lower: bool| -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| match (lower, i.cmp(&j)) {
                        (true, std::cmp::Ordering::Equal) => 1.0,
                        (true, std::cmp::Ordering::Greater) | (false, std::cmp::Ordering::Less | std::cmp::Ordering::Equal) => {
                            m[i][j]
                        }
                        _ => 0.0,
                    })
                    .collect()
            })
            .collect()
    };
    Some(DenseLu {
        perm: orig,
        l: tri(true),
        u: tri(false),
    })
}

/// `‖PA − LU‖_F / ‖A‖_F` from the assembled factors, one dense column at a
/// time.
pub fn relative_residual(a: &CscMatrix, f: &LuFactors) -> f64 {
    let n = a.n();
    let l = f.l_factor();
    let u = f.u_factor();
    let perm = f.perm();
    let mut pinv = vec![0; n];
    for (g, &r) in perm.iter().enumerate() {
        pinv[r] = g;
    }
    let mut col = vec![0.0; n];
    let mut err = 0.0;
    let mut norm = 0.0;
    for j in 0..n {
        col.iter_mut().for_each(|v| *v = 0.0);
        let (ri, rv) = a.col(j);
        for (&r, &v) in ri.iter().zip(rv) {
            col[pinv[r]] += v;
            norm += v * v;
        }
        let (ui, uv) = u.col(j);
        for (&k, &ukj) in ui.iter().zip(uv) {
            let (li, lv) = l.col(k);
            for (&r, &lrk) in li.iter().zip(lv) {
                col[r] -= lrk * ukj;
            }
        }
        err += col.iter().map(|v| v * v).sum::<f64>();
    }
    (err / norm).sqrt()
}

/// Seeded `x` in [-1, 1).
pub fn manufactured(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn max_rel_error(got: &[f64], want: &[f64]) -> f64 {
    let scale = want.iter().map(|v| v.abs()).fold(0.0, f64::max);
    got.iter().zip(want).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max) / scale
}

/// A strictly increasing curve from 0 to 1 with random increments,
/// occasionally flat or steep.
pub fn random_monotone_curve(rng: &mut ChaCha8Rng, sp: usize) -> Vec<f64> {
    let inc: Vec<f64> = (0..sp)
        .map(|_| match rng.gen_range(0..10) {
            0 => 0.0,
            1 => rng.gen_range(5.0..50.0),
            _ => rng.gen_range(0.0..1.0),
        })
        .collect();
    let total: f64 = inc.iter().sum::<f64>().max(f64::MIN_POSITIVE);
    let mut acc = 0.0;
    let mut pct = vec![0.0];
    for v in &inc {
        acc += v;
        pct.push((acc / total).min(1.0));
    }
    pct[sp] = 1.0;
    pct
}
