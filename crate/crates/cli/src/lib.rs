//! Batch driver for the Gaussian log-Sobolev and trace checks: campaign
//! files, single checks, scans and weighted PDE solves.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod campaign;
pub mod jobs;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use logtrace::testbed::{self, Family};
use logtrace::verify::InequalityId;
use logtrace::weighted_pde::Weighting;
use logtrace::Domain;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use jobs::{JobKind, JobSpec, Outcome};

pub const SUMMARY_SCHEMA: &str = "logtrace.summary/1";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }
}

#[derive(Parser)]
#[command(name = "logtrace", version, about = "Numerical checks of logarithmic Sobolev, Zygmund embedding and trace inequalities in Gauss space")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every job of a campaign file and write one report per job.
    Run {
        campaign: PathBuf,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Print the field catalog with its membership claims.
    ListCatalog {
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Check one inequality on one field.
    Check {
        inequality: String,
        #[command(flatten)]
        params: Params,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Sharpness scan of the logarithmic exponent.
    Scan {
        inequality: String,
        /// Comma-separated exponent grid (overrides --alpha/--beta).
        #[arg(long)]
        grid: Option<String>,
        #[command(flatten)]
        params: Params,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Solve `neumann`, `poincare` or `best-trace` on a mesh.
    Solve {
        problem: String,
        /// Use the boundary-mean-zero subspace for `poincare`.
        #[arg(long)]
        boundary: bool,
        #[command(flatten)]
        params: Params,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Leading eigenpairs of `oscillator` or `steklov`.
    Spectrum {
        problem: String,
        #[arg(long, default_value_t = 3)]
        k: usize,
        /// `gamma` (default) or `lebesgue`.
        #[arg(long)]
        weighting: Option<String>,
        #[command(flatten)]
        params: Params,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Args, Clone, Default)]
struct Params {
    /// Domain in key=value form, e.g. "kind=halfplane omega=0".
    #[arg(long)]
    domain: Option<String>,
    /// Catalog field name.
    #[arg(long)]
    field: Option<String>,
    #[arg(long)]
    p: Option<f64>,
    /// Zygmund exponent grid for EmbedP/EmbedInf scans (comma-separated).
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
    /// Trace exponent: one value for checks, a comma list for scans.
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Mesh width.
    #[arg(long)]
    h: Option<f64>,
    /// Rearrangement levels at the fine resolution.
    #[arg(long)]
    levels: Option<usize>,
    /// Quadrature tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Clone, Default)]
struct OutputArgs {
    /// Report directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the report JSON instead of a table.
    #[arg(long)]
    json: bool,
    /// Omit runtimes and timestamps so reruns are byte-identical.
    #[arg(long)]
    no_timestamps: bool,
}

/// Parse `args` (program name first) and run; returns the process exit code.
pub fn run_cli<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code as u8;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn dispatch(cmd: Command) -> Result<u8, CliError> {
    match cmd {
        Command::Run { campaign, out } => run_campaign(&campaign, &out),
        Command::ListCatalog { family, json } => list_catalog(family.as_deref(), json),
        Command::Check { inequality, params, out } => {
            let job = single_job(JobKind::Check, &inequality, &params, None)?;
            run_single(job, &out)
        }
        Command::Scan { inequality, grid, params, out } => {
            let grid = grid.or_else(|| params.alpha.clone()).or_else(|| params.beta.clone());
            let job = single_job(JobKind::Scan, &inequality, &Params { beta: None, ..params }, grid.as_deref())?;
            run_single(job, &out)
        }
        Command::Solve { problem, boundary, params, out } => {
            let mut job = single_job(JobKind::Solve, &problem, &params, None)?;
            job.boundary_subspace = boundary;
            run_single(job, &out)
        }
        Command::Spectrum { problem, k, weighting, params, out } => {
            let mut job = single_job(JobKind::Spectrum, &problem, &params, None)?;
            job.k = k;
            if let Some(w) = weighting {
                job.weighting = Weighting::parse(&w).ok_or_else(|| CliError::Usage(format!("unknown weighting `{w}`")))?;
            }
            job.validate().map_err(CliError::Usage)?;
            run_single(job, &out)
        }
    }
}

fn single_job(kind: JobKind, target: &str, a: &Params, grid: Option<&str>) -> Result<JobSpec, CliError> {
    let usage = CliError::Usage;
    match kind {
        JobKind::Check | JobKind::Scan if InequalityId::parse(target).is_none() => {
            let keys: Vec<&str> = InequalityId::ALL.iter().map(|i| i.key()).collect();
            return Err(usage(format!("unknown inequality `{target}`; expected one of {}", keys.join(", "))));
        }
        JobKind::Solve | JobKind::Spectrum if !jobs::known_problem(kind, target) => {
            return Err(usage(format!("unknown {} problem `{target}`", kind.name())));
        }
        _ => {}
    }
    let mut job = JobSpec::new(kind.name(), kind, target);
    if let Some(f) = &a.field {
        if testbed::entry(f).is_none() {
            return Err(usage(format!("unknown field `{f}` (see `logtrace list-catalog`)")));
        }
        job.field = Some(f.clone());
    }
    if let Some(d) = &a.domain {
        job.domain = Some(Domain::parse(d).map_err(|e| usage(e.to_string()))?);
    }
    if let Some(g) = grid {
        job.grid = Some(campaign::parse_grid(g).ok_or_else(|| usage(format!("bad exponent grid `{g}`")))?);
    }
    if let Some(b) = &a.beta {
        job.beta = Some(b.trim().parse().map_err(|_| usage(format!("--beta must be a number for `{}`, got `{b}`", kind.name())))?);
    }
    job.p = a.p.unwrap_or(job.p);
    job.lambda = a.lambda.unwrap_or(job.lambda);
    job.h = a.h;
    job.levels = a.levels;
    job.tol = a.tol;
    job.validate().map_err(usage)?;
    Ok(job)
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn stamp(o: &mut Outcome, timestamps: bool) {
    if timestamps {
        o.report.runtime_seconds = Some(o.runtime);
        o.report.timestamp = Some(unix_now());
    }
}

fn to_pretty<T: Serialize>(t: &T) -> String {
    let mut s = serde_json::to_string_pretty(t).expect("reports serialize");
    s.push('\n');
    s
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// Write the report and artifacts of `o` into `dir`; returns the report path.
fn write_outcome(dir: &Path, o: &Outcome) -> Result<PathBuf, CliError> {
    for (name, contents) in &o.files {
        write(&dir.join(name), contents)?;
    }
    let path = dir.join(format!("{}.json", o.report.job));
    write(&path, &to_pretty(&o.report))?;
    Ok(path)
}

fn run_single(job: JobSpec, out: &OutputArgs) -> Result<u8, CliError> {
    let mut o = jobs::execute(&job);
    stamp(&mut o, !out.no_timestamps);
    if let Some(dir) = &out.out {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        write_outcome(dir, &o)?;
    }
    if out.json {
        print!("{}", to_pretty(&o.report));
    } else {
        print_table(std::slice::from_ref(&o), None);
        if let Some(err) = o.report.result.get("error").and_then(Value::as_str) {
            eprintln!("error: {err}");
        }
    }
    Ok(if o.report.completed && !o.report.tripwire { 0 } else { 1 })
}

fn fmt_c(c: Option<f64>) -> String {
    match c {
        None => "-".to_string(),
        Some(c) if c == 0.0 || (1e-3..1e6).contains(&c.abs()) => format!("{c:.6}"),
        Some(c) => format!("{c:.4e}"),
    }
}

fn print_table(outcomes: &[Outcome], paths: Option<&[PathBuf]>) {
    let w = outcomes.iter().map(|o| o.report.job.len()).max().unwrap_or(3).max(3);
    println!("{:<w$}  {:<9} {:<24} {:>14} {:>10}", "job", "kind", "verdict", "fitted C", "runtime");
    for (i, o) in outcomes.iter().enumerate() {
        let mut verdict = o.report.verdict.clone();
        if o.report.tripwire {
            verdict.push_str(" [TRIPWIRE]");
        }
        println!(
            "{:<w$}  {:<9} {:<24} {:>14} {:>9.2}s",
            o.report.job,
            o.report.kind,
            verdict,
            fmt_c(o.report.fitted_c),
            o.runtime
        );
        if let (Some(p), true) = (paths, o.report.tripwire || !o.report.completed) {
            println!("{:<w$}  -> {}", "", p[i].display());
        }
    }
}

fn run_campaign(path: &Path, args: &OutputArgs) -> Result<u8, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let c = match campaign::parse(&text) {
        Ok(c) => c,
        Err(CliError::Parse { line, message }) => {
            eprintln!("{}:{line}: {message}", path.display());
            return Ok(2);
        }
        Err(e) => return Err(e),
    };
    let dir = args.out.clone().or_else(|| c.out.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("reports"));
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;

    // Jobs run concurrently; `collect` keeps config order for writing.
    let mut outcomes: Vec<Outcome> = c.jobs.par_iter().map(jobs::execute).collect();
    let timestamps = !args.no_timestamps;
    let mut paths = Vec::with_capacity(outcomes.len());
    for o in &mut outcomes {
        stamp(o, timestamps);
        paths.push(write_outcome(&dir, o)?);
    }

    let rows: Vec<Value> = outcomes
        .iter()
        .zip(&paths)
        .map(|(o, p)| {
            let mut row = json!({
                "job": o.report.job,
                "kind": o.report.kind,
                "target": o.report.target,
                "verdict": o.report.verdict,
                "fitted_c": o.report.fitted_c,
                "tripwire": o.report.tripwire,
                "completed": o.report.completed,
                "report": p.file_name().map(|f| f.to_string_lossy().into_owned()),
            });
            if timestamps {
                row["runtime_seconds"] = json!(o.runtime);
            }
            row
        })
        .collect();
    let tripwires = outcomes.iter().filter(|o| o.report.tripwire).count();
    let failures = outcomes.iter().filter(|o| !o.report.completed).count();
    let mut summary = json!({
        "schema": SUMMARY_SCHEMA,
        "campaign": path.file_name().map(|f| f.to_string_lossy().into_owned()),
        "seed": c.seed,
        "jobs": rows,
        "tripwires": tripwires,
        "failures": failures,
    });
    if timestamps {
        summary["timestamp"] = json!(unix_now());
    }
    write(&dir.join("summary.json"), &to_pretty(&summary))?;

    if args.json {
        print!("{}", to_pretty(&summary));
    } else {
        print_table(&outcomes, Some(&paths));
        println!("{} jobs, {tripwires} tripwires, {failures} failures; reports in {}", outcomes.len(), dir.display());
    }
    for (o, p) in outcomes.iter().zip(&paths) {
        if o.report.tripwire {
            eprintln!("tripwire fired: {}", p.display());
        } else if !o.report.completed {
            eprintln!("job failed: {}", p.display());
        }
    }
    Ok(if tripwires == 0 && failures == 0 { 0 } else { 1 })
}

/// `p = ∞` is written as the string `"inf"`.
fn exponent_json(p: f64) -> Value {
    if p.is_infinite() {
        json!("inf")
    } else {
        json!(p)
    }
}

fn list_catalog(family: Option<&str>, as_json: bool) -> Result<u8, CliError> {
    let filter = match family {
        Some(f) => Some(Family::parse(f).ok_or_else(|| {
            let names: Vec<&str> = Family::ALL.iter().map(Family::name).collect();
            CliError::Usage(format!("unknown family `{f}`; expected one of {}", names.join(", ")))
        })?),
        None => None,
    };
    let entries: Vec<_> = testbed::catalog().into_iter().filter(|e| filter.is_none_or(|f| e.family == f)).collect();
    if as_json {
        let items: Vec<Value> = entries
            .iter()
            .map(|e| {
                json!({
                    "name": e.name,
                    "family": e.family.name(),
                    "home": e.home.spec_string(),
                    "dim": e.field.dim,
                    "memberships": e.memberships.iter().map(|m| json!({
                        "space": "zygmund",
                        "p": exponent_json(m.p),
                        "alpha": m.alpha,
                        "finite": m.finite,
                        "citation": m.citation,
                    })).collect::<Vec<_>>(),
                    "sobolev": e.sobolev.iter().map(|s| json!({
                        "space": "w1p",
                        "p": exponent_json(s.p),
                        "finite": s.finite,
                        "citation": s.citation,
                    })).collect::<Vec<_>>(),
                })
            })
            .collect();
        print!("{}", to_pretty(&json!({ "schema": "logtrace.catalog/1", "entries": items })));
        return Ok(0);
    }
    let w = entries.iter().map(|e| e.name.len()).max().unwrap_or(4).max(4);
    println!("{:<w$}  {:<12} home", "name", "family");
    for e in &entries {
        println!("{:<w$}  {:<12} {}", e.name, e.family.name(), e.home.spec_string());
        for m in &e.memberships {
            let p = if m.p.is_infinite() { "inf".to_string() } else { m.p.to_string() };
            let state = if m.finite { "finite" } else { "infinite" };
            println!("{:<w$}    L^{p}(log L)^{}: {state}  [{}]", "", m.alpha, m.citation);
        }
        for s in &e.sobolev {
            let state = if s.finite { "finite" } else { "infinite" };
            println!("{:<w$}    W^(1,{}): {state}  [{}]", "", s.p, s.citation);
        }
    }
    println!("{} entries", entries.len());
    Ok(0)
}
