//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria 6 and 8 are reported without failing the run; every other
//! criterion exits non-zero on failure.

mod common;

use std::path::{Path, PathBuf};
use std::time::Instant;

use common::*;
use lublock::blocking::{irregular_plan, regular_plan, BlockingPlan, IrregularParams, Threshold, WindowMode};
use lublock::cli::{cmd_bench, NumericArgs, PlanArgs, PlanKind, BENCH_HEADER};
use lublock::csc::{CscMatrix, Triplet};
use lublock::factorize::{factorize, solve, FactorOptions};
use lublock::features::{
    classify_curve, diag_block_pointer, diag_block_pointer_csc, percentage_curve, PercentCurve, StructureClass,
};
use lublock::generate::{generate, GenKind, GenParams};
use lublock::grid::dependency_levels;
use lublock::io::write_matrix_market;
use lublock::metrics::{block_nnz_stats, level_work_stats, makespan_model, CostModel};
use lublock::pipeline::{prepare, PlanSpec};
use lublock::symbolic::{symbolic_factorize, symmetrize_pattern};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn correctness() -> Outcome {
    let start = Instant::now();
    let mut worst_res = 0.0f64;
    let mut worst_solve = 0.0f64;
    let mut runs = 0;
    let mut failures = Vec::new();
    let cases = corpus(&[100, 500, 2000]);
    for case in &cases {
        let n = case.a.n();
        let p = prepare(case.a.clone()).unwrap();
        let specs = [
            PlanSpec::Regular(1),
            PlanSpec::Regular(2),
            PlanSpec::Regular(n / 10),
            PlanSpec::Regular(n),
            PlanSpec::Irregular(IrregularParams::default()),
        ];
        let x = manufactured(n, 7);
        let b = case.a.mul_vec(&x).unwrap();
        for spec in &specs {
            let plan = p.plan(spec).unwrap();
            let f = match factorize(&p.grid(&plan).unwrap(), &FactorOptions::default()) {
                Ok(f) => f,
                Err(e) => {
                    failures.push(format!("{} {spec:?}: {e}", case.name));
                    continue;
                }
            };
            let res = relative_residual(&case.a, &f);
            let err = max_rel_error(&solve(&f, &b).unwrap(), &x);
            if !(res <= 1e-10 && err <= 1e-10) {
                failures.push(format!("{} {spec:?}: residual {res:e} solve {err:e}", case.name));
            }
            worst_res = worst_res.max(res);
            worst_solve = worst_solve.max(err);
            runs += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = failures.is_empty() && cases.len() >= 20 && secs < 120.0;
    outcome(
        pass,
        format!(
            "{} matrices, {runs} factorizations, max residual {worst_res:.2e}, max solve error {worst_solve:.2e}, {secs:.1}s{}",
            cases.len(),
            if failures.is_empty() {
                String::new()
            } else {
                format!(", failures: {failures:?}")
            }
        ),
    )
}

fn oracle_equivalence() -> Outcome {
    let mut symbolic_bad = 0;
    let mut lu_compared = 0;
    let mut lu_bad = Vec::new();
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let n = 1 + (seed as usize * 37) % 64;
        let a = random_symmetric(n, seed, seed % 2 == 0);
        let f = symbolic_factorize(&symmetrize_pattern(&a)).unwrap();
        if pattern_set(&f.to_csc()) != elimination_oracle(&a) {
            symbolic_bad += 1;
        }
        let p = prepare(a.clone()).unwrap();
        let mut plans = vec![p.plan(&PlanSpec::Irregular(IrregularParams::default())).unwrap()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        plans.push(regular_plan(n, rng.gen_range(1..=n)).unwrap());
        let scale = a.max_abs();
        for plan in &plans {
            let got = factorize(&p.grid(plan).unwrap(), &FactorOptions::default());
            let want = dense_block_lu(&a, plan, 1e-12);
            match (got, want) {
                (Ok(f), Some(want)) => {
                    let dl = max_entry_diff(&f.l_factor().to_dense(), &want.l);
                    let du = max_entry_diff(&f.u_factor().to_dense(), &want.u);
                    let d = dl.max(du);
                    worst = worst.max(d / scale);
                    if f.perm() != want.perm || d > 1e-13 * scale {
                        lu_bad.push(seed);
                    }
                    lu_compared += 1;
                }
                (Err(lublock::Error::ZeroPivot { .. }), None) => {}
                _ => lu_bad.push(seed),
            }
        }
    }
    outcome(
        symbolic_bad == 0 && lu_bad.is_empty() && lu_compared >= 150,
        format!(
            "symbolic mismatches {symbolic_bad}/100; blocked LU {lu_compared} comparisons, max |diff|/|A|max {worst:.1e}, mismatches {lu_bad:?}"
        ),
    )
}

fn max_entry_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn block_pointer_fidelity() -> Outcome {
    let mut bad = Vec::new();
    for seed in 0..100u64 {
        let n = 1 + (seed as usize * 53) % 256;
        let a = random_symmetric(n, 1000 + seed, true);
        let f = symbolic_factorize(&symmetrize_pattern(&a)).unwrap();
        let want_a = leading_counts(&pattern_set(&a), n);
        let want_f = leading_counts(&pattern_set(&f.to_csc()), n);
        if diag_block_pointer_csc(&a).unwrap().as_slice() != want_a.as_slice()
            || diag_block_pointer(&f).unwrap().as_slice() != want_f.as_slice()
        {
            bad.push(seed);
        }
    }
    let mut laws = true;
    for n in [1, 2, 5, 64, 300] {
        let dense = generate(GenKind::Dense, n, GenParams::seeded(0)).unwrap();
        let ptr = diag_block_pointer_csc(&dense).unwrap();
        laws &= ptr.as_slice().iter().enumerate().all(|(k, &v)| v == k * k);
        let tri = generate(GenKind::Tridiagonal, n, GenParams::seeded(0)).unwrap();
        let ptr = diag_block_pointer_csc(&tri).unwrap();
        laws &= ptr.as_slice()[0] == 0 && (1..=n).all(|k| ptr.as_slice()[k] == 3 * k - 2);
    }
    outcome(
        bad.is_empty() && laws,
        format!("brute-force mismatches {bad:?}; dense k² and tridiagonal 3k-2 laws hold: {laws}"),
    )
}

fn curve_of(a: &CscMatrix, sp: usize) -> PercentCurve {
    let f = symbolic_factorize(&symmetrize_pattern(a)).unwrap();
    percentage_curve(&diag_block_pointer(&f).unwrap(), sp).unwrap()
}

fn linear_deviation(c: &PercentCurve) -> f64 {
    let sp = c.sample_points() as f64;
    c.pct()
        .iter()
        .enumerate()
        .map(|(k, &y)| (y - k as f64 / sp).abs())
        .fold(0.0, f64::max)
}

fn curve_laws() -> Outcome {
    let mut detail = Vec::new();
    let mut pass = true;
    for (n, sp) in [(1000, 1000), (1000, 100), (300, 1000)] {
        let c = curve_of(&generate(GenKind::Dense, n, GenParams::seeded(0)).unwrap(), sp);
        let sp = c.sample_points();
        let exact = c
            .pct()
            .iter()
            .enumerate()
            .all(|(k, &y)| y == (k * k) as f64 / (sp * sp) as f64);
        let class = classify_curve(&c);
        pass &= exact && class == StructureClass::Quadratic;
        detail.push(format!("dense n={n} sp={sp}: exact={exact} class={class}"));
    }
    let identity = CscMatrix::identity(1000);
    let tri = generate(GenKind::Tridiagonal, 1000, GenParams::seeded(0)).unwrap();
    for (name, a) in [("identity", identity), ("tridiagonal", tri)] {
        let n = a.n() as f64;
        let c = curve_of(&a, 1000);
        let dev = linear_deviation(&c);
        let class = classify_curve(&c);
        pass &= dev <= 1.0 / n && class == StructureClass::Linear;
        detail.push(format!("{name}: max deviation {dev:.1e} (limit {:.1e}) class={class}", 1.0 / n));
    }
    // Half-bandwidth w: blockptr[k] = (2w+1)k - w(w+1) once k > w, so the
    // curve sits w(w+1)/nnz below the diagonal line.
    let (n, w) = (1000usize, 3usize);
    let mut band = Vec::new();
    for i in 0..n {
        for j in i.saturating_sub(w)..(i + w + 1).min(n) {
            band.push(Triplet::new(i, j, if i == j { 10.0 } else { 1.0 }));
        }
    }
    let band = CscMatrix::from_triplets(n, &band).unwrap();
    let c = curve_of(&band, 1000);
    let dev = linear_deviation(&c);
    let limit = (w * (w + 1)) as f64 / band.nnz() as f64 + 1e-15;
    let class = classify_curve(&c);
    pass &= dev <= limit && class == StructureClass::Linear;
    detail.push(format!("band w={w}: max deviation {dev:.1e} (limit {limit:.1e}) class={class}"));
    outcome(pass, detail.join("; "))
}

fn plan_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut bad = Vec::new();
    for t in 0..1000 {
        let sp = rng.gen_range(2..200);
        let n = rng.gen_range(sp..20 * sp);
        let pct = random_monotone_curve(&mut rng, sp);
        let params = IrregularParams {
            sample_points: sp,
            step: rng.gen_range(1..=sp.min(8)),
            max_num: rng.gen_range(1..6),
            threshold: if rng.gen_bool(0.5) {
                Threshold::Linear
            } else {
                Threshold::Fixed(rng.gen_range(0.001..0.5))
            },
            window: if rng.gen_bool(0.8) {
                WindowMode::Disjoint
            } else {
                WindowMode::Overlapping
            },
        };
        let curve = PercentCurve::from_samples(n, pct).unwrap();
        let plan = irregular_plan(&curve, &params).unwrap();
        let pos = plan.positions();
        let bound = (params.max_num + 1) as f64 * params.step as f64 * n as f64 / sp as f64;
        let ok = pos.first() == Some(&0)
            && pos.last() == Some(&n)
            && pos.windows(2).all(|w| w[0] < w[1])
            && plan.spans().all(|s| s as f64 <= bound.ceil())
            && plan.validate().is_ok();
        if !ok {
            bad.push(t);
        }
    }
    let frozen = frozen_vectors();
    outcome(
        bad.is_empty() && frozen,
        format!("1000 random curves, violations {bad:?}; frozen vectors reproduce: {frozen}"),
    )
}

fn frozen_vectors() -> bool {
    let params = IrregularParams {
        sample_points: 10,
        step: 2,
        max_num: 3,
        threshold: Threshold::Fixed(0.2),
        window: WindowMode::Disjoint,
    };
    let run = |pct: Vec<f64>| -> Vec<usize> {
        let c = PercentCurve::from_samples(1000, pct).unwrap();
        irregular_plan(&c, &params).unwrap().positions().to_vec()
    };
    let flat_tail = vec![0.0, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 1.0];
    let dense_head = vec![0.0, 0.15, 0.30, 0.45, 0.60, 0.75, 0.80, 0.85, 0.90, 0.95, 1.0];
    let parabola = (0..=10).map(|k| (k * k) as f64 / 100.0).collect();
    run(flat_tail) == [0, 800, 1000]
        && run(dense_head) == [0, 200, 400, 600, 1000]
        && run(parabola) == [0, 600, 800, 1000]
}

struct Balance {
    blocks: usize,
    cv: f64,
    lls: f64,
    makespan: u64,
    makespan_flops: u64,
}

fn balance(p: &lublock::pipeline::Prepared, plan: &BlockingPlan) -> Balance {
    let grid = p.grid(plan).unwrap();
    let tree = dependency_levels(&grid);
    Balance {
        blocks: plan.num_blocks(),
        cv: block_nnz_stats(&grid).cv,
        lls: level_work_stats(&tree).last_level_share,
        makespan: makespan_model(&tree, 4, |t| CostModel::Nnz.cost(t)).unwrap(),
        makespan_flops: makespan_model(&tree, 4, |t| CostModel::Flops.cost(t)).unwrap(),
    }
}

fn load_balance() -> Outcome {
    let mut pairs = 0;
    let (mut cv_ok, mut lls_ok, mut ms_ok, mut all_ok, mut flops_ok) = (0, 0, 0, 0, 0);
    let mut finer = Vec::new();
    for n in [1000usize, 5000] {
        for b in [n / 10, 3 * n / 20, n / 5] {
            let a = generate(GenKind::Arrowhead, n, GenParams::seeded(1).with_border(b)).unwrap();
            let p = prepare(a).unwrap();
            let irr = balance(&p, &p.plan(&PlanSpec::Irregular(IrregularParams::default())).unwrap());
            let mut sizes: Vec<usize> = lublock::blocking::PANGULU_SIZES
                .iter()
                .copied()
                .filter(|&s| s < n)
                .collect();
            sizes.push(p.pangulu_size().min(n));
            sizes.sort_unstable();
            sizes.dedup();
            for bs in sizes {
                let reg = balance(&p, &regular_plan(n, bs).unwrap());
                if reg.blocks > irr.blocks {
                    continue;
                }
                pairs += 1;
                let c = irr.cv < reg.cv;
                let l = irr.lls <= reg.lls;
                let m = irr.makespan <= reg.makespan;
                cv_ok += c as usize;
                lls_ok += l as usize;
                ms_ok += m as usize;
                all_ok += (c && l && m) as usize;
                flops_ok += (irr.makespan_flops <= reg.makespan_flops) as usize;
            }
            // Regular blocking with at least as many blocks as the irregular plan.
            let reg = balance(&p, &regular_plan(n, (n / irr.blocks).max(1)).unwrap());
            finer.push(format!(
                "n={n} b={b}: cv {:.3}/{:.3} lls {:.1e}/{:.1e} ms {}/{}",
                irr.cv, reg.cv, irr.lls, reg.lls, irr.makespan, reg.makespan
            ));
        }
    }
    let share = all_ok as f64 / pairs as f64;
    outcome(
        share >= 0.8,
        format!(
            "{all_ok}/{pairs} comparisons satisfy all three (cv {cv_ok}, last-level share {lls_ok}, nnz makespan {ms_ok}); \
             flop-cost makespan {flops_ok}/{pairs}; vs regular at >= block count (irr/reg): [{}]",
            finer.join("; ")
        ),
    )
}

fn write_corpus(dir: &Path, sizes: &[usize]) -> Vec<PathBuf> {
    corpus(sizes)
        .into_iter()
        .map(|c| {
            let path = dir.join(format!("{}.mtx", c.name));
            write_matrix_market(&c.a, &path).unwrap();
            path
        })
        .collect()
}

fn plan_args() -> PlanArgs {
    let d = IrregularParams::default();
    PlanArgs {
        strategy: PlanKind::Irregular,
        block_size: None,
        sample_points: d.sample_points,
        step: d.step,
        max_num: d.max_num,
        threshold: d.threshold,
        window: d.window,
    }
}

fn numeric_args(workers: usize, repeats: usize) -> NumericArgs {
    NumericArgs {
        workers,
        pivot_tol: 1e-12,
        static_pivot: None,
        dense_fallback: false,
        repeats,
        seed: 0,
    }
}

fn without_timing(path: &Path) -> String {
    let col = BENCH_HEADER.iter().position(|&h| h == "numeric_seconds").unwrap();
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|line| {
            let mut cells: Vec<&str> = line.split(',').collect();
            cells.remove(col);
            cells.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn determinism() -> Outcome {
    let mut cases = corpus(&[500]);
    cases.extend(corpus(&[100]).into_iter().take(3));
    let mut mismatches = Vec::new();
    for case in &cases {
        let p = prepare(case.a.clone()).unwrap();
        for spec in [PlanSpec::Irregular(IrregularParams::default()), PlanSpec::Regular(7)] {
            let grid = p.grid(&p.plan(&spec).unwrap()).unwrap();
            let base = factorize(&grid, &FactorOptions::default()).unwrap();
            for w in [2, 8] {
                let f = factorize(&grid, &FactorOptions::default().with_workers(w)).unwrap();
                if f != base || f.fingerprint() != base.fingerprint() {
                    mismatches.push(format!("{} {spec:?} workers={w}", case.name));
                }
            }
        }
    }
    let dir = tempfile::tempdir().unwrap();
    let files = write_corpus(dir.path(), &[300]);
    let runs: Vec<String> = (0..2)
        .map(|r| {
            let out = dir.path().join(format!("bench{r}.csv"));
            cmd_bench(&files, &plan_args(), &numeric_args(2, 1), None, &out, &mut std::io::sink()).unwrap();
            without_timing(&out)
        })
        .collect();
    let same = runs[0] == runs[1];
    outcome(
        mismatches.is_empty() && same,
        format!(
            "{} matrices x 2 plans x workers {{1,2,8}}: mismatches {mismatches:?}; bench CSV ({} rows) identical without timing: {same}",
            cases.len(),
            runs[0].lines().count() - 1
        ),
    )
}

fn relative_timing() -> Outcome {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let mtx = dir.join("arrowhead-5000-b500.mtx");
    let a = generate(GenKind::Arrowhead, 5000, GenParams::seeded(1).with_border(500)).unwrap();
    write_matrix_market(&a, &mtx).unwrap();
    let csv_path = dir.join("relative_timing_bench.csv");
    cmd_bench(
        &[mtx],
        &plan_args(),
        &numeric_args(1, 3),
        Some(&[200, 300, 500, 1000]),
        &csv_path,
        &mut std::io::sink(),
    )
    .unwrap();
    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    let headers = reader.headers().unwrap().clone();
    let idx = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (plan_col, secs_col) = (idx("plan"), idx("numeric_seconds"));
    let mut irregular = f64::NAN;
    let mut best = f64::INFINITY;
    for rec in reader.records() {
        let rec = rec.unwrap();
        let secs: f64 = rec[secs_col].parse().unwrap_or(f64::NAN);
        match &rec[plan_col] {
            "irregular" => irregular = secs,
            "regular" => best = best.min(secs),
            _ => {}
        }
    }
    let ratio = irregular / best;
    outcome(
        ratio <= 1.1,
        format!(
            "irregular {irregular:.3}s vs best regular {best:.3}s, ratio {ratio:.2} (limit 1.10); csv {}",
            csv_path.display()
        ),
    )
}

type Criterion = (u32, &'static str, bool, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        (1, "correctness", true, correctness),
        (2, "oracle equivalence", true, oracle_equivalence),
        (3, "diagonal block pointer", true, block_pointer_fidelity),
        (4, "curve laws", true, curve_laws),
        (5, "irregular plan properties", true, plan_properties),
        (6, "load balance", false, load_balance),
        (7, "determinism", true, determinism),
        (8, "relative timing (soft)", false, relative_timing),
    ];
    // Optional criterion numbers select a subset; other arguments (harness
    // flags passed through by cargo) are ignored.
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut gated_failures = 0;
    for (id, name, gated, check) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        let note = if gated || o.pass { "" } else { " [reported, not gated]" };
        println!("criterion {id} {verdict}{note}: {name}: {}", o.detail);
        if gated && !o.pass {
            gated_failures += 1;
        }
    }
    if gated_failures > 0 {
        eprintln!("{gated_failures} gated criteria failed");
        std::process::exit(1);
    }
}
