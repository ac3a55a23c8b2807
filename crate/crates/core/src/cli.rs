//! Command-line front end: `analyze`, `plan`, `factor`, `bench`, `generate`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::blocking::{BlockingPlan, IrregularParams, Threshold, WindowMode, PANGULU_SIZES};
use crate::factorize::{factorize, residual, solve, FactorOptions, LuFactors};
use crate::features::{classify_curve, DEFAULT_SAMPLE_POINTS};
use crate::generate::{generate, GenKind, GenParams};
use crate::grid::{dependency_levels, BlockGrid, DependencyTree};
use crate::io::{read_matrix_market, read_plan_json, write_curve_csv, write_matrix_market, write_plan_json, write_report_csv};
use crate::metrics::{block_nnz_stats, level_work_stats, makespan_model, CostModel};
use crate::pipeline::{prepare, PlanSpec, Prepared};
use crate::symbolic::fill_ratio;
use crate::{Error, Result};

/// Worker count used by the makespan columns.
pub const MODEL_WORKERS: usize = 4;

pub const BENCH_HEADER: [&str; 11] = [
    "matrix",
    "plan",
    "block_size",
    "blocks",
    "cv_block_nnz",
    "last_level_share",
    "makespan_w4",
    "makespan_flops_w4",
    "residual",
    "numeric_seconds",
    "status",
];

pub const REPORT_HEADER: [&str; 4] = ["metric", "plan", "blocks", "value"];

#[derive(Debug, Parser)]
#[command(name = "lublock", version, about = "Sparse LU factorization with structure-aware 2D blocking")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fill analysis, diagonal nonzero curve and its structure class.
    Analyze {
        matrix: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SAMPLE_POINTS)]
        sample_points: usize,
        /// Curve CSV destination.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute a blocking plan.
    Plan {
        matrix: PathBuf,
        #[command(flatten)]
        plan: PlanArgs,
        /// Plan JSON destination.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Factor one matrix and report residual, timing and factor statistics.
    Factor {
        matrix: PathBuf,
        #[command(flatten)]
        plan: PlanArgs,
        /// Use a plan JSON file instead of computing one.
        #[arg(long, conflicts_with = "strategy")]
        plan_file: Option<PathBuf>,
        #[command(flatten)]
        numeric: NumericArgs,
        /// Report CSV destination (`metric,plan,blocks,value`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare irregular and regular plans over a list of matrices.
    Bench {
        matrices: Vec<PathBuf>,
        #[command(flatten)]
        plan: PlanArgs,
        #[command(flatten)]
        numeric: NumericArgs,
        /// Regular block sizes to try (default: the fixed candidate list).
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic diagonally dominant matrix.
    Generate {
        #[arg(value_enum)]
        kind: GenKind,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        border: usize,
        #[arg(long)]
        density: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlanKind {
    Irregular,
    Regular,
    /// Regular with the size picked by the block-size lookup.
    Pangulu,
}

#[derive(Debug, Clone, Args)]
pub struct PlanArgs {
    #[arg(long, value_enum, default_value_t = PlanKind::Irregular)]
    pub strategy: PlanKind,
    #[arg(long)]
    pub block_size: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_POINTS)]
    pub sample_points: usize,
    #[arg(long, default_value_t = 2)]
    pub step: usize,
    #[arg(long, default_value_t = 3)]
    pub max_num: usize,
    /// A number in (0, 1] or `linear` for step / sample_points.
    #[arg(long, default_value = "linear")]
    pub threshold: Threshold,
    #[arg(long, value_enum, default_value_t = WindowMode::Disjoint)]
    pub window: WindowMode,
}

impl PlanArgs {
    pub fn irregular(&self) -> IrregularParams {
        IrregularParams {
            sample_points: self.sample_points,
            step: self.step,
            max_num: self.max_num,
            threshold: self.threshold,
            window: self.window,
        }
    }

    pub fn spec(&self) -> Result<PlanSpec> {
        match self.strategy {
            PlanKind::Irregular => Ok(PlanSpec::Irregular(self.irregular())),
            PlanKind::Regular => self
                .block_size
                .map(PlanSpec::Regular)
                .ok_or_else(|| Error::BadParams("--strategy regular needs --block-size".into())),
            PlanKind::Pangulu => Ok(PlanSpec::Pangulu),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct NumericArgs {
    #[arg(long, env = "LUBLOCK_WORKERS", default_value_t = 1)]
    pub workers: usize,
    #[arg(long, default_value_t = 1e-12)]
    pub pivot_tol: f64,
    /// Replace rejected pivots by `eps * max|A|` instead of failing.
    #[arg(long, value_name = "EPS")]
    pub static_pivot: Option<f64>,
    /// Factor diagonal blocks that are at least half full with dense loops.
    #[arg(long)]
    pub dense_fallback: bool,
    /// Timed numeric runs; the median is reported.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    /// Seed of the manufactured solution used for the solve check.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl NumericArgs {
    pub fn options(&self) -> FactorOptions {
        FactorOptions {
            workers: self.workers,
            pivot_tol: self.pivot_tol,
            static_pivot: self.static_pivot,
            dense_fallback: self.dense_fallback,
        }
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match execute(&cli.command, &mut out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command, out: &mut impl Write) -> Result<()> {
    match command {
        Command::Analyze {
            matrix,
            sample_points,
            out: path,
        } => cmd_analyze(matrix, *sample_points, path.as_deref(), out),
        Command::Plan { matrix, plan, out: path } => cmd_plan(matrix, plan, path.as_deref(), out),
        Command::Factor {
            matrix,
            plan,
            plan_file,
            numeric,
            out: path,
        } => cmd_factor(matrix, plan, plan_file.as_deref(), numeric, path.as_deref(), out),
        Command::Bench {
            matrices,
            plan,
            numeric,
            sizes,
            out: path,
        } => cmd_bench(matrices, plan, numeric, sizes.as_deref(), path, out),
        Command::Generate {
            kind,
            n,
            border,
            density,
            seed,
            out: path,
        } => {
            let mut params = GenParams::seeded(*seed).with_border(*border);
            if let Some(d) = density {
                params = params.with_density(*d);
            }
            let a = generate(*kind, *n, params)?;
            write_matrix_market(&a, path)?;
            say(out, format_args!("wrote {} (n = {}, nnz = {})", path.display(), a.n(), a.nnz()))
        }
    }
}

fn say(out: &mut impl Write, line: std::fmt::Arguments) -> Result<()> {
    writeln!(out, "{line}").map_err(|e| Error::io("<stdout>", e))
}

fn load(path: &Path) -> Result<Prepared> {
    prepare(read_matrix_market(path)?)
}

pub fn cmd_analyze(matrix: &Path, sample_points: usize, path: Option<&Path>, out: &mut impl Write) -> Result<()> {
    let p = load(matrix)?;
    let curve = p.curve(sample_points)?;
    say(out, format_args!("n: {}", p.n()))?;
    say(out, format_args!("nnz(A): {}", p.a.nnz()))?;
    say(out, format_args!("nnz(L+U): {}", p.filled.nnz_filled()))?;
    say(out, format_args!("fill_ratio: {:.6}", fill_ratio(&p.a, &p.filled)?))?;
    say(out, format_args!("class: {}", classify_curve(&curve)))?;
    if let Some(path) = path {
        write_curve_csv(&curve, path)?;
        say(out, format_args!("curve: {}", path.display()))?;
    }
    Ok(())
}

pub fn cmd_plan(matrix: &Path, args: &PlanArgs, path: Option<&Path>, out: &mut impl Write) -> Result<()> {
    let p = load(matrix)?;
    let plan = p.plan(&args.spec()?)?;
    say(out, format_args!("strategy: {}", plan_label(&plan, args.strategy)))?;
    say(out, format_args!("blocks: {}", plan.num_blocks()))?;
    say(out, format_args!("min_span: {}", plan.min_span()))?;
    say(out, format_args!("max_span: {}", plan.max_span()))?;
    if let Some(path) = path {
        write_plan_json(&plan, path)?;
        say(out, format_args!("plan: {}", path.display()))?;
    }
    Ok(())
}

fn plan_label(plan: &BlockingPlan, kind: PlanKind) -> String {
    match kind {
        PlanKind::Irregular => "irregular".into(),
        PlanKind::Regular => format!("regular-{}", plan.max_span()),
        PlanKind::Pangulu => format!("pangulu-{}", plan.max_span()),
    }
}

/// Outcome of timing and validating one plan.
#[derive(Debug)]
pub struct PlanRun {
    pub blocks: usize,
    pub cv_block_nnz: f64,
    pub last_level_share: f64,
    pub makespan: u64,
    pub makespan_flops: u64,
    pub tasks: usize,
    pub numeric: Result<NumericRun>,
}

#[derive(Debug)]
pub struct NumericRun {
    pub factors: LuFactors,
    pub seconds: f64,
    pub residual: f64,
    pub solve_error: f64,
}

fn model(grid: &BlockGrid, tree: &DependencyTree) -> Result<(f64, f64, u64, u64)> {
    let stats = block_nnz_stats(grid);
    let levels = level_work_stats(tree);
    let nnz = makespan_model(tree, MODEL_WORKERS, |t| CostModel::Nnz.cost(t))?;
    let flops = makespan_model(tree, MODEL_WORKERS, |t| CostModel::Flops.cost(t))?;
    Ok((stats.cv, levels.last_level_share, nnz, flops))
}

/// Relative max-norm error of solving `A x = A x_true` for a seeded `x_true`.
pub fn manufactured_solve_error(p: &Prepared, f: &LuFactors, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..p.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let b = p.a.mul_vec(&x)?;
    let got = solve(f, &b)?;
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let err = got.iter().zip(&x).fold(0.0f64, |m, (g, w)| m.max((g - w).abs()));
    Ok(err / scale)
}

pub fn run_plan(p: &Prepared, plan: &BlockingPlan, numeric: &NumericArgs) -> Result<PlanRun> {
    if numeric.repeats == 0 {
        return Err(Error::BadParams("--repeats must be at least 1".into()));
    }
    let grid = p.grid(plan)?;
    let tree = dependency_levels(&grid);
    let (cv, lls, makespan, makespan_flops) = model(&grid, &tree)?;
    let options = numeric.options();
    let numeric = (|| {
        let mut times = Vec::with_capacity(numeric.repeats);
        let mut factors = None;
        for _ in 0..numeric.repeats {
            let start = Instant::now();
            let f = factorize(&grid, &options)?;
            times.push(start.elapsed().as_secs_f64());
            factors = Some(f);
        }
        times.sort_by(f64::total_cmp);
        let factors = factors.expect("at least one run");
        Ok(NumericRun {
            residual: residual(&p.a, &factors)?,
            solve_error: manufactured_solve_error(p, &factors, numeric.seed)?,
            seconds: times[times.len() / 2],
            factors,
        })
    })();
    Ok(PlanRun {
        blocks: plan.num_blocks(),
        cv_block_nnz: cv,
        last_level_share: lls,
        makespan,
        makespan_flops,
        tasks: tree.len(),
        numeric,
    })
}

#[derive(Serialize)]
struct ReportRow<'a> {
    metric: &'a str,
    plan: &'a str,
    blocks: usize,
    value: f64,
}

pub fn cmd_factor(
    matrix: &Path,
    args: &PlanArgs,
    plan_file: Option<&Path>,
    numeric: &NumericArgs,
    path: Option<&Path>,
    out: &mut impl Write,
) -> Result<()> {
    let start = Instant::now();
    let p = load(matrix)?;
    let (plan, label) = match plan_file {
        Some(file) => {
            let plan = read_plan_json(file)?;
            if plan.n() != p.n() {
                return Err(Error::DimensionMismatch {
                    expected: p.n(),
                    found: plan.n(),
                });
            }
            (plan, "file".to_string())
        }
        None => {
            let plan = p.plan(&args.spec()?)?;
            let label = plan_label(&plan, args.strategy);
            (plan, label)
        }
    };
    let preprocess = start.elapsed().as_secs_f64();
    let run = run_plan(&p, &plan, numeric)?;
    let num = run.numeric?;
    let stats = num.factors.stats();
    let (nnz_l, nnz_u) = num.factors.nnz();

    say(out, format_args!("n: {}", p.n()))?;
    say(out, format_args!("plan: {label}"))?;
    say(out, format_args!("blocks: {}", run.blocks))?;
    say(out, format_args!("workers: {}", numeric.workers))?;
    say(
        out,
        format_args!(
            "tasks: {} (GETRF {}, GESSM {}, TSTRF {}, SSSSM {})",
            stats.tasks(),
            stats.getrf,
            stats.gessm,
            stats.tstrf,
            stats.ssssm
        ),
    )?;
    say(out, format_args!("nnz(L): {nnz_l}"))?;
    say(out, format_args!("nnz(U): {nnz_u}"))?;
    say(out, format_args!("perturbed_pivots: {}", stats.perturbed_pivots))?;
    say(out, format_args!("preprocess_seconds: {preprocess:.6}"))?;
    say(out, format_args!("numeric_seconds: {:.6}", num.seconds))?;
    say(out, format_args!("residual: {:e}", num.residual))?;
    say(out, format_args!("residual_bits: {:#018x}", num.residual.to_bits()))?;
    say(out, format_args!("solve_error: {:e}", num.solve_error))?;
    say(out, format_args!("cv_block_nnz: {:.6}", run.cv_block_nnz))?;
    say(out, format_args!("last_level_share: {:e}", run.last_level_share))?;
    say(out, format_args!("makespan_w4: {}", run.makespan))?;
    say(out, format_args!("fingerprint: {:#018x}", num.factors.fingerprint()))?;

    if let Some(path) = path {
        let metrics: [(&str, f64); 11] = [
            ("residual", num.residual),
            ("solve_error", num.solve_error),
            ("numeric_seconds", num.seconds),
            ("preprocess_seconds", preprocess),
            ("cv_block_nnz", run.cv_block_nnz),
            ("last_level_share", run.last_level_share),
            ("makespan_w4", run.makespan as f64),
            ("makespan_flops_w4", run.makespan_flops as f64),
            ("tasks", stats.tasks() as f64),
            ("nnz_l", nnz_l as f64),
            ("nnz_u", nnz_u as f64),
        ];
        let rows: Vec<ReportRow> = metrics
            .iter()
            .map(|&(metric, value)| ReportRow {
                metric,
                plan: &label,
                blocks: run.blocks,
                value,
            })
            .collect();
        write_report_csv(&REPORT_HEADER, &rows, path)?;
        say(out, format_args!("report: {}", path.display()))?;
    }
    Ok(())
}

/// One line of the bench CSV. Empty cells mark values that could not be
/// computed; `status` says why.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub matrix: String,
    pub plan: String,
    pub block_size: Option<usize>,
    pub blocks: Option<usize>,
    pub cv_block_nnz: Option<f64>,
    pub last_level_share: Option<f64>,
    pub makespan_w4: Option<u64>,
    pub makespan_flops_w4: Option<u64>,
    pub residual: Option<f64>,
    pub numeric_seconds: Option<f64>,
    pub status: String,
}

impl BenchRow {
    fn failed(matrix: &str, plan: &str, block_size: Option<usize>, e: &Error) -> Self {
        BenchRow {
            matrix: matrix.into(),
            plan: plan.into(),
            block_size,
            blocks: None,
            cv_block_nnz: None,
            last_level_share: None,
            makespan_w4: None,
            makespan_flops_w4: None,
            residual: None,
            numeric_seconds: None,
            status: format!("error: {e}"),
        }
    }

    fn from_run(matrix: &str, plan: &str, block_size: Option<usize>, run: &PlanRun) -> Self {
        let (residual, seconds, status) = match &run.numeric {
            Ok(n) => (Some(n.residual), Some(n.seconds), "ok".to_string()),
            Err(e) => (None, None, format!("error: {e}")),
        };
        BenchRow {
            matrix: matrix.into(),
            plan: plan.into(),
            block_size,
            blocks: Some(run.blocks),
            cv_block_nnz: Some(run.cv_block_nnz),
            last_level_share: Some(run.last_level_share),
            makespan_w4: Some(run.makespan),
            makespan_flops_w4: Some(run.makespan_flops),
            residual,
            numeric_seconds: seconds,
            status,
        }
    }
}

fn matrix_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Rows for one matrix: irregular, every regular size up to `n`, the
/// looked-up size, and the regular size with the smallest modelled
/// makespan (ties to the smaller size).
pub fn bench_matrix(path: &Path, args: &PlanArgs, numeric: &NumericArgs, sizes: &[usize]) -> Vec<BenchRow> {
    let name = matrix_name(path);
    let p = match load(path) {
        Ok(p) => p,
        Err(e) => return vec![BenchRow::failed(&name, "all", None, &e)],
    };
    let n = p.n();
    let mut rows = Vec::new();
    let mut push_run = |label: &str, bs: Option<usize>, plan: Result<BlockingPlan>| -> Option<PlanRun> {
        match plan.and_then(|plan| run_plan(&p, &plan, numeric)) {
            Ok(run) => {
                rows.push(BenchRow::from_run(&name, label, bs, &run));
                Some(run)
            }
            Err(e) => {
                rows.push(BenchRow::failed(&name, label, bs, &e));
                None
            }
        }
    };
    push_run("irregular", None, p.plan(&PlanSpec::Irregular(args.irregular())));

    let mut regular: Vec<(usize, PlanRun)> = Vec::new();
    let mut candidates: Vec<usize> = sizes.iter().copied().filter(|&bs| bs >= 1 && bs <= n).collect();
    candidates.sort_unstable();
    candidates.dedup();
    for &bs in &candidates {
        if let Some(run) = push_run("regular", Some(bs), p.plan(&PlanSpec::Regular(bs))) {
            regular.push((bs, run));
        }
    }
    let chosen = p.pangulu_size().min(n);
    match regular.iter().position(|(bs, _)| *bs == chosen) {
        Some(i) => {
            rows.push(BenchRow::from_run(&name, "pangulu", Some(chosen), &regular[i].1));
        }
        None => {
            push_run("pangulu", Some(chosen), p.plan(&PlanSpec::Regular(chosen)));
        }
    }
    if let Some((bs, run)) = regular
        .iter()
        .filter(|(_, r)| r.numeric.is_ok())
        .min_by_key(|(bs, r)| (r.makespan, *bs))
    {
        rows.push(BenchRow::from_run(&name, "best-regular", Some(*bs), run));
    }
    rows
}

pub fn cmd_bench(
    matrices: &[PathBuf],
    args: &PlanArgs,
    numeric: &NumericArgs,
    sizes: Option<&[usize]>,
    path: &Path,
    out: &mut impl Write,
) -> Result<()> {
    let sizes = sizes.unwrap_or(&PANGULU_SIZES);
    let mut rows = Vec::new();
    for m in matrices {
        let r = bench_matrix(m, args, numeric, sizes);
        for row in &r {
            say(
                out,
                format_args!(
                    "{} {} {} {}",
                    row.matrix,
                    row.plan,
                    row.block_size.map_or("-".into(), |b| b.to_string()),
                    row.status
                ),
            )?;
        }
        rows.extend(r);
    }
    write_report_csv(&BENCH_HEADER, &rows, path)?;
    say(out, format_args!("bench: {} rows -> {}", rows.len(), path.display()))
}
