//! Command-line front end: `solve`, `bench`, `oracle-check`, `generate`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::irr::{random_factor, solve_increasing_rank, IrrConfig, IrrOutcome};
use crate::manifold::{FactorPoint, MetricChoice};
use crate::precond::PrecondChoice;
use crate::problems::{
    best_low_rank_factor, dense_oracle_solve, gen_poisson, load_manifest, relative_residual, relative_residual_raw,
    write_dense, write_manifest, write_symmetric, LyapunovProblem, DEFAULT_DENSE_LIMIT,
};
use crate::tnewton::{solve_fixed_rank_with, SolveContext, TnewtonConfig};

#[derive(Parser, Debug)]
#[command(name = "irrlyap", version, about = "Low-rank solver for generalized Lyapunov equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve with the increasing-rank method and write trace and summary.
    Solve(SolveArgs),
    /// Fixed-rank comparison over metrics, preconditioners and seeds.
    Bench(BenchArgs),
    /// Compare against the dense solution and its best low-rank truncations.
    OracleCheck(OracleArgs),
    /// Write a generated problem as Matrix Market files plus a manifest.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Generator {
    Poisson,
}

#[derive(Args, Debug, Clone)]
#[command(group(ArgGroup::new("source").required(true).args(["gen", "manifest"])))]
pub struct ProblemArgs {
    /// Built-in problem generator.
    #[arg(long, value_enum, requires = "n")]
    pub gen: Option<Generator>,
    /// Problem size for the generator.
    #[arg(long)]
    pub n: Option<usize>,
    /// Manifest with `a=`, `m=`, `b=` Matrix Market paths.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Seed for the generator and the initial factor.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl ProblemArgs {
    fn load(&self) -> Result<LyapunovProblem> {
        match (&self.gen, &self.manifest) {
            (Some(Generator::Poisson), _) => gen_poisson(self.n.unwrap_or(0), self.seed),
            (None, Some(path)) => load_manifest(path),
            (None, None) => Err(Error::InvalidArgument("no problem source".into())),
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    #[arg(long, default_value = "1", value_parser = parse_metric)]
    pub metric: MetricChoice,
    #[arg(long, default_value = "proposed", value_parser = parse_precond)]
    pub precond: PrecondChoice,
    /// Target relative residual.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 1)]
    pub p_min: usize,
    #[arg(long, default_value_t = 40)]
    pub p_max: usize,
    #[arg(long, default_value_t = 1)]
    pub p_inc: usize,
    /// Outer iteration cap per rank.
    #[arg(long, default_value_t = 500)]
    pub max_outer: usize,
}

fn parse_metric(s: &str) -> std::result::Result<MetricChoice, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_precond(s: &str) -> std::result::Result<PrecondChoice, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_list<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<Vec<T>> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(str::parse).collect()
}

impl SolverArgs {
    fn irr_config(&self, seed: u64) -> IrrConfig {
        IrrConfig {
            p_min: self.p_min,
            p_max: self.p_max,
            p_inc: self.p_inc,
            tau: self.tol,
            seed,
            ..IrrConfig::default()
        }
    }

    fn tnewton_config(&self) -> TnewtonConfig {
        TnewtonConfig {
            max_outer: self.max_outer,
            ..TnewtonConfig::default()
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
    #[arg(long)]
    pub summary_out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct BenchArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Fixed rank of every cell.
    #[arg(long, default_value_t = 3)]
    pub p: usize,
    /// Comma-separated metrics.
    #[arg(long, default_value = "1,2,3")]
    pub metrics: String,
    /// Comma-separated preconditioners.
    #[arg(long, default_value = "none,proposed,bart")]
    pub preconds: String,
    /// Number of instances (seeds `seed`, `seed+1`, ...).
    #[arg(long, default_value_t = 1)]
    pub instances: usize,
    /// Relative gradient tolerance of each fixed-rank solve.
    #[arg(long, default_value_t = 1e-6)]
    pub grad_tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_outer: usize,
    /// Output table; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct OracleArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value_t = DEFAULT_DENSE_LIMIT)]
    pub dense_limit: usize,
    /// Per-rank report; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
    #[arg(long)]
    pub summary_out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value = "poisson")]
    pub gen: Generator,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory receiving `A.mtx`, `M.mtx`, `B.mtx` and `problem.manifest`.
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// One row of the benchmark table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub n: usize,
    pub seed: u64,
    pub p: usize,
    pub metric: u8,
    pub precond: String,
    pub iter: f64,
    #[serde(rename = "nH")]
    pub nh: f64,
    pub rel_res: f64,
    pub ms: f64,
    pub status: String,
}

/// One row of the oracle comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub p: usize,
    pub irr_rel_res: f64,
    pub best_rel_res: f64,
}

#[derive(Serialize)]
struct ErrorReport {
    error: String,
    kind: &'static str,
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::RankSolveFailed { source, .. } => error_kind(source),
        Error::DimensionMismatch { .. } => "dimension_mismatch",
        Error::NotSymmetric { .. } => "not_symmetric",
        Error::NotPositiveDefinite { .. } => "not_positive_definite",
        Error::ZeroRightHandSide => "zero_rhs",
        Error::DenseLimitExceeded { .. } => "dense_limit",
        Error::Parse { .. } => "parse",
        Error::Io { .. } => "io",
        Error::RankDeficient | Error::RetractionLeftManifold { .. } => "rank_deficient",
        Error::MetricMismatch { .. } => "metric_mismatch",
        Error::NonFinite { .. } => "non_finite",
        Error::NotDescent { .. } => "not_descent",
        Error::LineSearchFailed { .. } => "line_search",
        Error::Preconditioner(_) => "preconditioner",
        Error::InvalidArgument(_) => "invalid_argument",
    }
}

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidArgument(_)
            | Error::Parse { .. }
            | Error::Io { .. }
            | Error::DenseLimitExceeded { .. }
            | Error::DimensionMismatch { .. }
            | Error::NotSymmetric { .. }
    )
}

fn report_error(e: &Error) -> i32 {
    let report = ErrorReport {
        error: e.to_string(),
        kind: error_kind(e),
    };
    println!("{}", serde_json::to_string(&report).expect("error report serializes"));
    if is_config_error(e) {
        2
    } else {
        1
    }
}

/// Parses arguments and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Bench(a) => cmd_bench(a),
        Command::OracleCheck(a) => cmd_oracle_check(a),
        Command::Generate(a) => cmd_generate(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => report_error(&e),
    }
}

fn write_text(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn emit(path: Option<&PathBuf>, body: &str) -> Result<()> {
    match path {
        Some(p) => write_text(p, body),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn write_outputs(out: &IrrOutcome, trace: Option<&PathBuf>, summary: Option<&PathBuf>) -> Result<()> {
    if let Some(p) = trace {
        out.trace.write_csv(p)?;
    }
    let json = serde_json::to_string_pretty(&out.summary()).expect("summary serializes");
    match summary {
        Some(p) => write_text(p, &json),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn run_irr(problem: &LyapunovProblem, pa: &ProblemArgs, sa: &SolverArgs) -> Result<IrrOutcome> {
    solve_increasing_rank(
        problem,
        sa.metric,
        &sa.irr_config(pa.seed),
        &sa.tnewton_config(),
        sa.precond,
    )
}

pub fn cmd_solve(args: &SolveArgs) -> Result<i32> {
    let problem = args.problem.load()?;
    let out = match run_irr(&problem, &args.problem, &args.solver) {
        Ok(out) => out,
        Err(e) => {
            if let (Error::RankSolveFailed { partial_trace, .. }, Some(p)) = (&e, &args.trace_out) {
                partial_trace.write_csv(p)?;
            }
            return Err(e);
        }
    };
    write_outputs(&out, args.trace_out.as_ref(), args.summary_out.as_ref())?;
    if out.converged {
        Ok(0)
    } else {
        println!(
            "{}",
            serde_json::json!({
                "error": format!("tolerance {:e} not reached by rank {}", args.solver.tol, out.final_rank()),
                "kind": "not_converged",
                "rel_res": out.rel_res(),
            })
        );
        Ok(1)
    }
}

pub fn cmd_bench(args: &BenchArgs) -> Result<i32> {
    let metrics: Vec<MetricChoice> = parse_list(&args.metrics)?;
    let preconds: Vec<PrecondChoice> = parse_list(&args.preconds)?;
    if args.instances == 0 || args.p == 0 {
        return Err(Error::InvalidArgument("need at least one instance and p >= 1".into()));
    }
    let cfg = TnewtonConfig {
        grad_tol_rel: args.grad_tol,
        max_outer: args.max_outer,
        ..TnewtonConfig::default()
    };
    cfg.validate()?;
    let mut rows = Vec::new();
    for inst in 0..args.instances {
        let seed = args.problem.seed + inst as u64;
        let pa = ProblemArgs {
            seed,
            ..args.problem.clone()
        };
        let problem = pa.load()?;
        if args.p > problem.n() {
            return Err(Error::InvalidArgument(format!("p = {} exceeds n = {}", args.p, problem.n())));
        }
        let y0 = FactorPoint::new(random_factor(problem.n(), args.p, seed))?;
        for &metric in &metrics {
            for &pc in &preconds {
                rows.push(bench_cell(&problem, metric, pc, y0.clone(), &cfg, seed, args.p));
            }
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?)
        .expect("csv output is utf-8");
    emit(args.out.as_ref(), &body)?;
    Ok(0)
}

/// Runs one benchmark cell; failures become a row of NaNs.
pub fn bench_cell(
    problem: &LyapunovProblem,
    metric: MetricChoice,
    precond: PrecondChoice,
    y0: FactorPoint,
    cfg: &TnewtonConfig,
    seed: u64,
    p: usize,
) -> BenchRow {
    let ctx = SolveContext::default();
    let base = BenchRow {
        n: problem.n(),
        seed,
        p,
        metric: metric.index(),
        precond: precond.to_string(),
        iter: f64::NAN,
        nh: f64::NAN,
        rel_res: f64::NAN,
        ms: f64::NAN,
        status: String::new(),
    };
    match solve_fixed_rank_with(problem, metric, y0, cfg, precond, ctx) {
        Ok(out) => BenchRow {
            iter: out.trace.outer_iterations() as f64,
            nh: out.nh as f64,
            rel_res: relative_residual(problem, &out.point).unwrap_or(f64::NAN),
            ms: ctx.start.elapsed().as_secs_f64() * 1e3,
            status: format!("{:?}", out.termination).to_lowercase(),
            ..base
        },
        Err(e) => BenchRow {
            status: format!("error: {}", error_kind(&e)),
            ..base
        },
    }
}

pub fn cmd_oracle_check(args: &OracleArgs) -> Result<i32> {
    let problem = args.problem.load()?;
    let x = dense_oracle_solve(&problem, args.dense_limit)?;
    let out = run_irr(&problem, &args.problem, &args.solver)?;
    let rows = oracle_rows(&problem, &x, &out)?;
    let mut body = String::from("p,irr_rel_res,best_rel_res\n");
    for r in &rows {
        let _ = writeln!(body, "{},{:e},{:e}", r.p, r.irr_rel_res, r.best_rel_res);
    }
    emit(args.out.as_ref(), &body)?;
    if args.trace_out.is_some() || args.summary_out.is_some() {
        write_outputs(&out, args.trace_out.as_ref(), args.summary_out.as_ref())?;
    }
    Ok(0)
}

/// Per visited rank: the achieved residual and the best rank-`p` residual.
pub fn oracle_rows(problem: &LyapunovProblem, x: &crate::linalg::Mat, out: &IrrOutcome) -> Result<Vec<OracleRow>> {
    out.ranks
        .iter()
        .map(|r| {
            let best = relative_residual_raw(problem, &best_low_rank_factor(x, r.p))?;
            Ok(OracleRow {
                p: r.p,
                irr_rel_res: r.rel_res,
                best_rel_res: best,
            })
        })
        .collect()
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<i32> {
    let problem = match args.gen {
        Generator::Poisson => gen_poisson(args.n, args.seed)?,
    };
    std::fs::create_dir_all(&args.out_dir).map_err(|source| Error::Io {
        path: args.out_dir.clone(),
        source,
    })?;
    let dir = &args.out_dir;
    write_symmetric(dir.join("A.mtx"), problem.a())?;
    write_symmetric(dir.join("M.mtx"), problem.m())?;
    write_dense(dir.join("B.mtx"), problem.b())?;
    write_manifest(
        dir.join("problem.manifest"),
        Path::new("A.mtx"),
        Path::new("M.mtx"),
        Path::new("B.mtx"),
    )?;
    Ok(0)
}
