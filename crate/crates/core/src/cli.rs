//! Batch command-line front end.
//!
//! Exit codes: 0 success, 1 solver failure, 2 usage error. Output goes to
//! `--out` when given, otherwise to stdout. `--nu` names the sign of
//! `u = -v`: `minus` is the convex branch.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::branch::{branch_endpoints, count_solutions, detect_fold, trace_branch, Branch, CountReport, Fold};
use crate::domain_bounds::{bounds_from_radii, unit_window, ExistenceReport, Interval};
use crate::eigensolver::{lambda1_shoot, mu1_inverse_iteration, mu1_scan, EigenResult, InverseOptions, Method};
use crate::error::{Error, Result};
use crate::nonlinearity::{check_subhomogeneity, classify, log_space, AsymptoticClass, ClassifyOptions, Nonlinearity};
use crate::profile::{RadialProfile, Sign};
use crate::radial_solver::{solve_at_lambda, ScanOptions, SolverOptions};
use crate::stability::{branch_stability_sweep, identity_residual, linearized_eigs};

#[derive(Debug, Parser)]
#[command(name = "ma-radial", version, about = "Radial one-sign solutions of a Monge-Ampere eigenvalue problem")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Asymptotic class (f0, f_inf) and the sign/subhomogeneity checks of f.
    Classify(Common),
    /// First eigenvalue of the homogeneous problem.
    Eigen(EigenArgs),
    /// All one-sign solutions at a given lambda.
    Solve(LambdaArgs),
    /// Trace lambda(a) over the amplitude window.
    Branch(BranchArgs),
    /// Number of solutions at each requested lambda.
    Count(BranchArgs),
    /// Linearized stability along the branch, or of the solutions at --lambda.
    Stability(BranchArgs),
    /// Existence/nonexistence intervals for a domain between two balls.
    DomainBounds(DomainArgs),
    /// Principal eigenvalue of the auxiliary p-problem over a p range.
    ScanMu1(ScanArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Sign of `u = -v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Nu {
    Plus,
    Minus,
}

impl Nu {
    fn sign(self) -> Sign {
        match self {
            Nu::Minus => Sign::Positive,
            Nu::Plus => Sign::Negative,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Nu::Plus => "+",
            Nu::Minus => "-",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Shoot,
    Inverse,
    Both,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Space dimension N >= 1.
    #[arg(long = "N", value_parser = clap::value_parser!(u32).range(1..))]
    pub dim: u32,
    /// Nonlinearity spec `name:p1,p2,...`, e.g. power:2, power_mix:2,2, gelfand.
    #[arg(long = "f", default_value = "gelfand")]
    pub f: String,
    /// Radial grid cells.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Solver tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// key=value file with tolerance overrides; explicit flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Clone, Args)]
pub struct EigenArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "shoot")]
    pub method: MethodArg,
}

#[derive(Debug, Clone, Args)]
pub struct Window {
    #[arg(long = "a-min", default_value_t = 1e-4)]
    pub a_min: f64,
    #[arg(long = "a-max", default_value_t = 1e4)]
    pub a_max: f64,
    /// Amplitude samples per decade.
    #[arg(long, default_value_t = 200)]
    pub ppd: usize,
    #[arg(long, value_enum, default_value = "minus")]
    pub nu: Nu,
}

#[derive(Debug, Clone, Args)]
pub struct LambdaArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub window: Window,
    #[arg(long, required = true)]
    pub lambda: f64,
}

#[derive(Debug, Clone, Args)]
pub struct BranchArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub window: Window,
    /// λ values to count solutions at; repeatable.
    #[arg(long)]
    pub lambda: Vec<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct DomainArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub window: Window,
    #[arg(long = "r-in")]
    pub r_in: f64,
    #[arg(long = "r-out")]
    pub r_out: f64,
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    #[arg(long = "p-from", default_value_t = 2.0)]
    pub p_from: f64,
    #[arg(long = "p-to", default_value_t = 5.0)]
    pub p_to: f64,
    #[arg(long, default_value_t = 0.1)]
    pub step: f64,
    /// Start each p from the previous eigenfunction.
    #[arg(long)]
    pub warm: bool,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

/// Tolerances resolved from defaults, the config file and flags, in that order.
#[derive(Debug, Clone, Copy)]
pub struct Settings {
    pub solver: SolverOptions,
    pub inverse: InverseOptions,
    pub classify: ClassifyOptions,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            inverse: InverseOptions::default(),
            classify: ClassifyOptions::default(),
        }
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

impl Settings {
    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_config(&mut self, text: &str) -> Result<()> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("config line {}: expected key=value", no + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            let num = || -> Result<f64> {
                v.parse::<f64>()
                    .map_err(|_| usage(format!("config line {}: `{v}` is not a number", no + 1)))
            };
            let count = || -> Result<usize> {
                v.parse::<usize>()
                    .map_err(|_| usage(format!("config line {}: `{v}` is not a count", no + 1)))
            };
            match k {
                "grid" => {
                    self.solver.grid = count()?;
                    self.inverse.grid = self.solver.grid;
                }
                "tol" => self.solver.tol = num()?,
                "lambda_min" => self.solver.lambda_min = num()?,
                "lambda_max" => self.solver.lambda_max = num()?,
                "cap" => self.solver.cap = num()?,
                "inverse_tol" => self.inverse.tol = num()?,
                "inverse_maxiter" => self.inverse.maxiter = count()?,
                "slope_tol" => self.classify.slope_tol = num()?,
                other => return Err(usage(format!("config line {}: unknown key `{other}`", no + 1))),
            }
        }
        Ok(())
    }

    fn resolve(config: Option<&Path>, grid: Option<usize>, tol: Option<f64>) -> Result<Self> {
        let mut s = Self::default();
        if let Some(path) = config {
            let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
            s.apply_config(&text)?;
        }
        if let Some(g) = grid {
            s.solver.grid = g;
            s.inverse.grid = g;
        }
        if let Some(t) = tol {
            s.solver.tol = t;
        }
        if !(s.solver.tol > 0.0) || s.solver.grid < 8 || s.inverse.grid < 8 || !(s.inverse.tol > 0.0) {
            return Err(usage("grid must be >= 8 and tolerances positive"));
        }
        Ok(s)
    }
}

/// Parses `argv` (including the program name), runs, and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let stage = stage_name(&cli.command);
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let usage_error = matches!(
                e,
                Error::UnknownFamily(_) | Error::InvalidParameter { .. } | Error::InvalidArgument(_)
            );
            eprintln!("error [{stage}]: {e}");
            if usage_error {
                eprintln!("run `ma-radial {stage} --help` for the argument grammar");
                2
            } else {
                1
            }
        }
    }
}

fn stage_name(c: &Command) -> &'static str {
    match c {
        Command::Classify(_) => "classify",
        Command::Eigen(_) => "eigen",
        Command::Solve(_) => "solve",
        Command::Branch(_) => "branch",
        Command::Count(_) => "count",
        Command::Stability(_) => "stability",
        Command::DomainBounds(_) => "domain-bounds",
        Command::ScanMu1(_) => "scan-mu1",
    }
}

/// Dispatches one parsed command.
pub fn execute(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Classify(c) => cmd_classify(c),
        Command::Eigen(a) => cmd_eigen(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Branch(a) => cmd_branch(a),
        Command::Count(a) => cmd_count(a),
        Command::Stability(a) => cmd_stability(a),
        Command::DomainBounds(a) => cmd_domain(a),
        Command::ScanMu1(a) => cmd_scan(a),
    }
}

struct Ctx {
    f: Nonlinearity,
    dim: u32,
    settings: Settings,
}

fn context(c: &Common) -> Result<Ctx> {
    if c.threads == 0 {
        return Err(usage("--threads must be at least 1"));
    }
    Ok(Ctx {
        f: Nonlinearity::parse(&c.f)?,
        dim: c.dim,
        settings: Settings::resolve(c.config.as_deref(), c.grid, c.tol)?,
    })
}

fn scan_options(w: &Window, threads: usize) -> ScanOptions {
    ScanOptions {
        a_min: w.a_min,
        a_max: w.a_max,
        points_per_decade: w.ppd,
        threads,
    }
}

/// Writes to `out` or stdout.
fn emit(out: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match out {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            body(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            body(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn emit_json(out: Option<&Path>, value: &Value) -> Result<()> {
    emit(out, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

/// `None` for non-finite numbers, so JSON carries `null`.
fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn class_json(class: &AsymptoticClass) -> Value {
    json!({ "f0": class.f0.label(), "f_inf": class.f_inf.label(), "label": class.label() })
}

fn cmd_classify(c: &Common) -> Result<()> {
    let ctx = context(c)?;
    let class = classify(&ctx.f, ctx.dim, &ctx.settings.classify)?;
    // Probe only where f is representable; e^s overflows well inside 1e4.
    let grid: Vec<f64> = log_space(1e-4, 1e4, 161)
        .into_iter()
        .filter(|&s| ctx.f.eval(s).is_finite() && ctx.f.eval(-s).is_finite())
        .collect();
    let signum = ctx.f.satisfies_signum(ctx.dim, &grid);
    let sub = if ctx.f.has_analytic_derivative() {
        Some(check_subhomogeneity(&ctx.f, ctx.dim, &grid)?.holds)
    } else {
        None
    };
    match c.format.unwrap_or(Format::Json) {
        Format::Json => emit_json(
            c.out.as_deref(),
            &json!({
                "f": ctx.f.spec(),
                "N": ctx.dim,
                "class": class_json(&class),
                "signum_condition": signum,
                "subhomogeneous": sub,
                "probe_range": [grid.first(), grid.last()],
            }),
        ),
        Format::Csv => emit(c.out.as_deref(), |w| {
            let mut wr = csv::Writer::from_writer(w);
            wr.write_record(["f", "N", "f0", "f_inf", "signum_condition", "subhomogeneous"])?;
            wr.write_record([
                ctx.f.spec(),
                ctx.dim.to_string(),
                class.f0.label(),
                class.f_inf.label(),
                signum.to_string(),
                sub.map(|s| s.to_string()).unwrap_or_default(),
            ])?;
            wr.flush()?;
            Ok(())
        }),
    }
}

fn eigen_json(r: &EigenResult) -> Value {
    json!({
        "method": match r.method { Method::Shooting => "shoot", Method::InverseIteration => "inverse" },
        "lambda": r.value,
        "p": r.p,
        "residual": r.residual,
        "eta": r.eta,
        "iterations": r.iterations,
    })
}

/// Saves `profile` to `path`, or to `path` with an `_k` suffix when several are written.
fn numbered(path: &Path, k: usize, total: usize) -> PathBuf {
    if total <= 1 {
        return path.to_path_buf();
    }
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = path.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into());
    path.with_file_name(format!("{stem}_{k}.{ext}"))
}

fn cmd_eigen(a: &EigenArgs) -> Result<()> {
    let ctx = context(&a.common)?;
    let mut results = Vec::new();
    if matches!(a.method, MethodArg::Shoot | MethodArg::Both) {
        results.push(lambda1_shoot(ctx.dim, &ctx.settings.solver)?);
    }
    if matches!(a.method, MethodArg::Inverse | MethodArg::Both) {
        results.push(mu1_inverse_iteration(ctx.dim as f64 + 1.0, &ctx.settings.inverse, None)?);
    }
    match a.common.format.unwrap_or(Format::Json) {
        Format::Json => {
            let mut body = json!({
                "N": ctx.dim,
                "results": results.iter().map(eigen_json).collect::<Vec<_>>(),
            });
            if results.len() == 2 {
                body["relative_difference"] = json!((results[0].value - results[1].value).abs() / results[0].value);
            }
            if let Some(path) = &a.common.out {
                for (k, r) in results.iter().enumerate() {
                    r.eigenfunction.save(&numbered(&path.with_extension("csv"), k + 1, results.len()))?;
                }
                emit_json(Some(&path.with_extension("json")), &body)?;
                println!("{}", serde_json::to_string_pretty(&body)?);
                Ok(())
            } else {
                emit_json(None, &body)
            }
        }
        Format::Csv => emit(a.common.out.as_deref(), |w| {
            let mut wr = csv::Writer::from_writer(w);
            wr.write_record(["method", "p", "lambda", "residual", "iterations", "eta"])?;
            for r in &results {
                let m = eigen_json(r);
                wr.write_record([
                    m["method"].as_str().unwrap_or_default().to_string(),
                    r.p.to_string(),
                    r.value.to_string(),
                    r.residual.to_string(),
                    r.iterations.to_string(),
                    r.eta.map(|e| e.to_string()).unwrap_or_default(),
                ])?;
            }
            wr.flush()?;
            Ok(())
        }),
    }
}

fn profile_summary(p: &RadialProfile) -> Value {
    json!({
        "amplitude": p.amplitude(),
        "lambda": p.lambda,
        "terminal": p.terminal(),
        "grid": p.grid,
    })
}

fn cmd_solve(a: &LambdaArgs) -> Result<()> {
    let ctx = context(&a.common)?;
    let scan = scan_options(&a.window, a.common.threads);
    let sols = solve_at_lambda(&ctx.f, ctx.dim, a.lambda, a.window.nu.sign(), &scan, &ctx.settings.solver)?;
    let mut files = Vec::new();
    if let Some(path) = &a.common.out {
        for (k, p) in sols.iter().enumerate() {
            let file = numbered(path, k + 1, sols.len());
            p.save(&file)?;
            files.push(file.display().to_string());
        }
    }
    match a.common.format.unwrap_or(Format::Json) {
        Format::Json => emit_json(
            None,
            &json!({
                "f": ctx.f.spec(),
                "N": ctx.dim,
                "nu": a.window.nu.symbol(),
                "lambda": a.lambda,
                "count": sols.len(),
                "solutions": sols.iter().map(profile_summary).collect::<Vec<_>>(),
                "files": files,
            }),
        ),
        Format::Csv => emit(None, |w| {
            let mut wr = csv::Writer::from_writer(w);
            wr.write_record(["index", "amplitude", "lambda", "terminal"])?;
            for (k, p) in sols.iter().enumerate() {
                wr.write_record([
                    (k + 1).to_string(),
                    p.amplitude().to_string(),
                    p.lambda.to_string(),
                    p.terminal().to_string(),
                ])?;
            }
            wr.flush()?;
            Ok(())
        }),
    }
}

struct Traced {
    ctx: Ctx,
    branch: Branch,
    folds: Vec<Fold>,
}

fn traced(a: &BranchArgs) -> Result<Traced> {
    let ctx = context(&a.common)?;
    let scan = scan_options(&a.window, a.common.threads);
    let branch = trace_branch(&ctx.f, ctx.dim, a.window.nu.sign(), &scan, &ctx.settings.solver, false)?;
    if branch.points.is_empty() {
        return Err(Error::NotConverged(format!(
            "no branch point converged in [{}, {}]",
            a.window.a_min, a.window.a_max
        )));
    }
    let folds = detect_fold(&branch)?;
    Ok(Traced { ctx, branch, folds })
}

fn count_json(branch: &Branch, lambdas: &[f64], folds: &[Fold]) -> Result<Vec<Value>> {
    lambdas
        .iter()
        .map(|&l| match count_solutions(branch, l, folds) {
            Ok(CountReport { lambda, count, amplitudes, near_fold }) => Ok(json!({
                "lambda": lambda,
                "count": count,
                "amplitudes": amplitudes,
                "near_fold": near_fold,
                "continuum": false,
            })),
            Err(Error::Continuum { .. }) => Ok(json!({
                "lambda": l,
                "count": Value::Null,
                "amplitudes": [],
                "near_fold": false,
                "continuum": true,
            })),
            Err(e) => Err(e),
        })
        .collect()
}

fn branch_summary(t: &Traced, nu: Nu, lambdas: &[f64]) -> Result<Value> {
    let b = &t.branch;
    let endpoints = match (
        classify(&b.f, t.ctx.dim, &t.ctx.settings.classify),
        lambda1_shoot(t.ctx.dim, &t.ctx.settings.solver),
    ) {
        (Ok(class), Ok(l1)) => match branch_endpoints(b, &class, l1.value, 1e-3) {
            Ok(rep) => json!({ "class": class_json(&class), "lambda1": l1.value, "report": rep }),
            Err(e) => json!({ "class": class_json(&class), "lambda1": l1.value, "error": e.to_string() }),
        },
        (Err(e), _) | (_, Err(e)) => json!({ "error": e.to_string() }),
    };
    Ok(json!({
        "f": b.f.spec(),
        "N": b.dim,
        "nu": nu.symbol(),
        "points": b.points.len(),
        "gaps": b.gaps.iter().map(|g| json!({ "a": g.amplitude, "reason": g.reason })).collect::<Vec<_>>(),
        "continuum": b.continuum(),
        "folds": t.folds,
        "endpoints": endpoints,
        "counts": count_json(b, lambdas, &t.folds)?,
    }))
}

/// Branch CSV to `--out` (with a `.json` summary beside it) or stdout.
fn emit_branch(common: &Common, t: &Traced, summary: &Value) -> Result<()> {
    match common.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            emit(common.out.as_deref(), |w| t.branch.write_csv(w, &t.folds))?;
            if let Some(p) = &common.out {
                emit_json(Some(&p.with_extension("json")), summary)?;
            }
            Ok(())
        }
        Format::Json => emit_json(common.out.as_deref(), summary),
    }
}

fn cmd_branch(a: &BranchArgs) -> Result<()> {
    let t = traced(a)?;
    let summary = branch_summary(&t, a.window.nu, &a.lambda)?;
    emit_branch(&a.common, &t, &summary)
}

fn cmd_count(a: &BranchArgs) -> Result<()> {
    if a.lambda.is_empty() {
        return Err(usage("count needs at least one --lambda"));
    }
    let t = traced(a)?;
    let counts = count_json(&t.branch, &a.lambda, &t.folds)?;
    match a.common.format.unwrap_or(Format::Json) {
        Format::Json => emit_json(
            a.common.out.as_deref(),
            &json!({
                "f": t.branch.f.spec(),
                "N": t.branch.dim,
                "nu": a.window.nu.symbol(),
                "window": [a.window.a_min, a.window.a_max],
                "folds": t.folds,
                "counts": counts,
            }),
        ),
        Format::Csv => emit(a.common.out.as_deref(), |w| {
            let mut wr = csv::Writer::from_writer(w);
            wr.write_record(["lambda", "count", "near_fold", "continuum", "amplitudes"])?;
            for c in &counts {
                let amps: Vec<String> = c["amplitudes"]
                    .as_array()
                    .map(|v| v.iter().map(|x| x.to_string()).collect())
                    .unwrap_or_default();
                wr.write_record([
                    c["lambda"].to_string(),
                    if c["count"].is_null() { String::new() } else { c["count"].to_string() },
                    c["near_fold"].to_string(),
                    c["continuum"].to_string(),
                    amps.join(";"),
                ])?;
            }
            wr.flush()?;
            Ok(())
        }),
    }
}

fn cmd_stability(a: &BranchArgs) -> Result<()> {
    if !a.lambda.is_empty() {
        return stability_at_lambdas(a);
    }
    let mut t = traced(a)?;
    let report = branch_stability_sweep(&mut t.branch, &t.folds, a.common.threads)?;
    let mut summary = branch_summary(&t, a.window.nu, &[])?;
    summary["stability"] = serde_json::to_value(&report)?;
    emit_branch(&a.common, &t, &summary)
}

fn stability_at_lambdas(a: &BranchArgs) -> Result<()> {
    let ctx = context(&a.common)?;
    let scan = scan_options(&a.window, a.common.threads);
    let mut rows = Vec::new();
    for &lambda in &a.lambda {
        for p in solve_at_lambda(&ctx.f, ctx.dim, lambda, a.window.nu.sign(), &scan, &ctx.settings.solver)? {
            let s = linearized_eigs(&p, &ctx.f, ctx.dim, 2)?;
            let res = identity_residual(&p, &s.phi1, s.mu1(), &ctx.f, ctx.dim);
            rows.push(json!({
                "lambda": lambda,
                "amplitude": p.amplitude(),
                "mu1": s.mu1(),
                "mu2": s.eigenvalues.get(1),
                "morse": s.morse,
                "identity_residual": res,
            }));
        }
    }
    match a.common.format.unwrap_or(Format::Json) {
        Format::Json => emit_json(
            a.common.out.as_deref(),
            &json!({ "f": ctx.f.spec(), "N": ctx.dim, "nu": a.window.nu.symbol(), "solutions": rows }),
        ),
        Format::Csv => emit(a.common.out.as_deref(), |w| {
            let mut wr = csv::Writer::from_writer(w);
            wr.write_record(["lambda", "amplitude", "mu1", "morse", "identity_residual"])?;
            for r in &rows {
                wr.write_record(
                    ["lambda", "amplitude", "mu1", "morse", "identity_residual"].map(|k| r[k].to_string()),
                )?;
            }
            wr.flush()?;
            Ok(())
        }),
    }
}

fn cmd_domain(a: &DomainArgs) -> Result<()> {
    let ctx = context(&a.common)?;
    let scan = scan_options(&a.window, a.common.threads);
    let class = classify(&ctx.f, ctx.dim, &ctx.settings.classify)?;
    let l1 = lambda1_shoot(ctx.dim, &ctx.settings.solver)?.value;
    // Only the convex branch enters the domain comparison.
    let branch = trace_branch(&ctx.f, ctx.dim, Sign::Positive, &scan, &ctx.settings.solver, false)?;
    let folds = detect_fold(&branch)?;
    let window = unit_window(&branch, &folds, &class, l1)?;
    let report = bounds_from_radii(window, &class.label(), a.r_in, a.r_out)?;
    match a.common.format.unwrap_or(Format::Json) {
        Format::Json => emit_json(a.common.out.as_deref(), &report.to_json()),
        Format::Csv => emit(a.common.out.as_deref(), |w| write_report_csv(w, &report)),
    }
}

fn write_report_csv(w: &mut dyn Write, r: &ExistenceReport) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["set", "lo", "hi"])?;
    let sets: [(&str, &Vec<Interval>); 3] = [("exists", &r.exists_on), ("none", &r.none_on), ("unresolved", &r.unresolved)];
    for (name, set) in sets {
        for i in set {
            let cell = |x: f64| if x.is_finite() { x.to_string() } else { "inf".to_string() };
            wr.write_record([name.to_string(), cell(i.lo), cell(i.hi)])?;
        }
    }
    wr.flush()?;
    Ok(())
}

fn cmd_scan(a: &ScanArgs) -> Result<()> {
    if a.threads == 0 {
        return Err(usage("--threads must be at least 1"));
    }
    let s = Settings::resolve(a.config.as_deref(), a.grid, a.tol)?;
    let mut inverse = s.inverse;
    if let Some(t) = a.tol {
        inverse.tol = t;
    }
    let scan = mu1_scan(a.p_from, a.p_to, a.step, &inverse, a.warm, a.threads)?;
    match a.format.unwrap_or(Format::Csv) {
        Format::Csv => emit(a.out.as_deref(), |w| scan.write_csv(w)),
        Format::Json => emit_json(
            a.out.as_deref(),
            &json!({
                "rows": scan.rows.iter().map(|r| json!({
                    "p": r.p, "mu1": r.mu1, "eta1": num(r.eta1), "residual": r.residual, "iterations": r.iterations,
                })).collect::<Vec<_>>(),
                "max_jump": scan.max_jump,
            }),
        ),
    }
}
