//! Job execution and report assembly.

use std::time::Instant;

use logtrace::testbed;
use logtrace::verify::{self, CheckOptions, InequalityId, Resolutions, SharpnessScan};
use logtrace::weighted_pde::{self as pde, RayleighProblem, Subspace, Weighting, WeightedMesh};
use logtrace::Domain;
use serde::Serialize;
use serde_json::{json, Value};

pub const REPORT_SCHEMA: &str = "logtrace.report/1";

/// Rayleigh cross-check settings shared by every solve.
const RAYLEIGH_TOL: f64 = 1e-10;
const RAYLEIGH_MAX_ITER: usize = 200_000;
/// Relative slack before a Rayleigh minimum below the eigensolver's value
/// counts as a missed eigenvalue.
const RAYLEIGH_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JobKind {
    Check,
    Scan,
    Spectrum,
    Solve,
}

impl JobKind {
    pub fn name(&self) -> &'static str {
        match self {
            JobKind::Check => "check",
            JobKind::Scan => "scan",
            JobKind::Spectrum => "spectrum",
            JobKind::Solve => "solve",
        }
    }
}

pub fn known_problem(kind: JobKind, name: &str) -> bool {
    match kind {
        JobKind::Spectrum => matches!(name, "oscillator" | "steklov"),
        JobKind::Solve => matches!(name, "neumann" | "poincare" | "best-trace" | "best_trace"),
        _ => false,
    }
}

#[derive(Debug, Clone)]
pub struct JobSpec {
    pub id: String,
    pub kind: JobKind,
    /// Inequality key or problem name.
    pub target: String,
    pub domain: Option<Domain>,
    pub field: Option<String>,
    pub p: f64,
    pub lambda: f64,
    pub beta: Option<f64>,
    pub grid: Option<Vec<f64>>,
    pub h: Option<f64>,
    pub k: usize,
    pub weighting: Weighting,
    pub levels: Option<usize>,
    pub tol: Option<f64>,
    pub boundary_subspace: bool,
}

impl JobSpec {
    pub fn new(id: &str, kind: JobKind, target: &str) -> Self {
        Self {
            id: id.to_string(),
            kind,
            target: target.to_string(),
            domain: None,
            field: None,
            p: 2.0,
            lambda: 0.5,
            beta: None,
            grid: None,
            h: None,
            k: 3,
            weighting: Weighting::MassGamma,
            levels: None,
            tol: None,
            boundary_subspace: false,
        }
    }

    /// Cross-key requirements that the line-level parser cannot see.
    pub fn validate(&self) -> Result<(), String> {
        if !(self.p >= 1.0) {
            return Err(format!("job `{}`: p must be at least 1, got {}", self.id, self.p));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(format!("job `{}`: lambda must lie in (0, 1), got {}", self.id, self.lambda));
        }
        if let Some(h) = self.h {
            if !(h > 0.0) {
                return Err(format!("job `{}`: h must be positive, got {h}", self.id));
            }
        }
        if self.levels == Some(0) || self.tol.is_some_and(|t| !(t > 0.0)) {
            return Err(format!("job `{}`: levels and tol must be positive", self.id));
        }
        match self.kind {
            JobKind::Check if self.field.is_none() => Err(format!("job `{}`: a check needs `field`", self.id)),
            JobKind::Scan => {
                let id = InequalityId::parse(&self.target).ok_or_else(|| format!("unknown inequality `{}`", self.target))?;
                if verify::default_grid(id).is_empty() {
                    return Err(format!("job `{}`: {} has no sharpness scan", self.id, id));
                }
                Ok(())
            }
            JobKind::Spectrum | JobKind::Solve if self.domain.is_none() => {
                Err(format!("job `{}`: a {} job needs `domain`", self.id, self.kind.name()))
            }
            JobKind::Spectrum if self.k == 0 => Err(format!("job `{}`: k must be at least 1", self.id)),
            JobKind::Solve if self.target == "neumann" && self.field.is_none() => {
                Err(format!("job `{}`: neumann needs `field` (the right-hand side)", self.id))
            }
            _ => Ok(()),
        }
    }

    fn resolutions(&self) -> Resolutions {
        match (self.levels, self.tol) {
            (None, None) => Resolutions::default(),
            (levels, tol) => {
                let d = Resolutions::default();
                Resolutions::new(levels.unwrap_or(d.fine.levels), tol.unwrap_or(d.fine.rule.tol))
            }
        }
    }

    fn mesh_width(&self, d: &Domain) -> f64 {
        self.h.unwrap_or(if d.dim() == 1 { 0.01 } else { 0.1 })
    }
}

/// One JSON report; field order is the on-disk order.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub job: String,
    pub kind: &'static str,
    pub target: String,
    pub verdict: String,
    pub fitted_c: Option<f64>,
    pub tripwire: bool,
    pub completed: bool,
    pub result: Value,
    pub artifacts: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
}

/// A finished job: its report plus CSV artifacts as `(file name, contents)`.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub files: Vec<(String, String)>,
    pub runtime: f64,
}

struct Body {
    verdict: String,
    fitted_c: Option<f64>,
    tripwire: bool,
    result: Value,
    files: Vec<(String, String)>,
}

pub fn execute(job: &JobSpec) -> Outcome {
    let start = Instant::now();
    let body = match job.kind {
        JobKind::Check => run_check(job),
        JobKind::Scan => run_scan(job),
        JobKind::Spectrum => run_spectrum(job),
        JobKind::Solve => run_solve(job),
    };
    let runtime = start.elapsed().as_secs_f64();
    let (body, completed) = match body {
        Ok(b) => (b, true),
        Err(e) => (
            Body { verdict: "Error".into(), fitted_c: None, tripwire: false, result: json!({ "error": e }), files: vec![] },
            false,
        ),
    };
    let files: Vec<(String, String)> = body.files.into_iter().map(|(suffix, c)| (format!("{}.{suffix}", job.id), c)).collect();
    Outcome {
        report: Report {
            schema: REPORT_SCHEMA,
            job: job.id.clone(),
            kind: job.kind.name(),
            target: job.target.clone(),
            verdict: body.verdict,
            fitted_c: body.fitted_c.filter(|c| c.is_finite()),
            tripwire: body.tripwire,
            completed,
            result: body.result,
            artifacts: files.iter().map(|(n, _)| n.clone()).collect(),
            runtime_seconds: None,
            timestamp: None,
        },
        files,
        runtime,
    }
}

fn to_value<T: Serialize>(t: &T) -> Result<Value, String> {
    serde_json::to_value(t).map_err(|e| e.to_string())
}

fn field_and_domain(job: &JobSpec) -> Result<(testbed::CatalogEntry, Domain), String> {
    let name = job.field.as_deref().ok_or("no field given")?;
    let e = testbed::entry(name).ok_or_else(|| format!("unknown field `{name}`"))?;
    let d = job.domain.clone().unwrap_or_else(|| e.home.clone());
    Ok((e, d))
}

fn run_check(job: &JobSpec) -> Result<Body, String> {
    let id = InequalityId::parse(&job.target).ok_or_else(|| format!("unknown inequality `{}`", job.target))?;
    let (e, d) = field_and_domain(job)?;
    let opts = CheckOptions { p: job.p, lambda: job.lambda, beta: job.beta, resolutions: job.resolutions() };
    let r = verify::check_with(id, &e.field, &d, &opts).map_err(|e| e.to_string())?;
    Ok(Body {
        verdict: format!("{:?}", r.verdict),
        fitted_c: Some(r.fitted_c),
        tripwire: r.tripwire,
        result: to_value(&r)?,
        files: vec![],
    })
}

/// Long-form growth curves: one row per (term, exponent, step).
fn scan_csv(s: &SharpnessScan) -> String {
    let mut out = format!("term,{},step,growth,verdict\n", s.exponent);
    let mut rows = |name: &str, growth: &[Vec<f64>], verdicts: &[logtrace::rearrange::Verdict]| {
        for ((x, g), v) in s.grid.iter().zip(growth).zip(verdicts) {
            for (k, gk) in g.iter().enumerate() {
                out.push_str(&format!("{name},{x:e},{},{gk:e},{v:?}\n", k + 1));
            }
        }
    };
    rows("total", &s.growth, &s.verdicts);
    for t in &s.terms {
        rows(&t.name, &t.growth, &t.verdicts);
    }
    out
}

fn run_scan(job: &JobSpec) -> Result<Body, String> {
    let id = InequalityId::parse(&job.target).ok_or_else(|| format!("unknown inequality `{}`", job.target))?;
    let grid = job.grid.clone().unwrap_or_else(|| verify::default_grid(id));
    let s = verify::sharpness_scan(id, &grid, job.p, job.lambda).map_err(|e| e.to_string())?;
    let verdict = match s.critical {
        Some(c) => format!("critical {}={c}", s.exponent),
        None => "no transition".to_string(),
    };
    Ok(Body { verdict, fitted_c: None, tripwire: false, result: to_value(&s)?, files: vec![("scan.csv".into(), scan_csv(&s))] })
}

fn mesh_for(job: &JobSpec) -> Result<WeightedMesh, String> {
    let d = job.domain.as_ref().ok_or("no domain given")?;
    pde::assemble(d, job.mesh_width(d)).map_err(|e| e.to_string())
}

fn run_spectrum(job: &JobSpec) -> Result<Body, String> {
    let mesh = mesh_for(job)?;
    let (sol, rp) = match job.target.as_str() {
        "oscillator" => (pde::oscillator_spectrum(&mesh, job.k, job.weighting), RayleighProblem::Oscillator(job.weighting)),
        "steklov" => (pde::steklov_spectrum(&mesh, job.k), RayleighProblem::Steklov),
        other => return Err(format!("unknown spectrum problem `{other}`")),
    };
    let sol = sol.map_err(|e| e.to_string())?;
    let mut result = to_value(&sol)?;
    let mut tripwire = false;
    let mut fitted_c = None;
    if let Some(&l2) = sol.values.get(1) {
        let r = pde::rayleigh_minimum(&mesh, rp, RAYLEIGH_TOL, RAYLEIGH_MAX_ITER).map_err(|e| e.to_string())?;
        let rel = (r.value - l2).abs() / l2;
        tripwire = r.value < l2 * (1.0 - RAYLEIGH_SLACK);
        fitted_c = Some(1.0 / l2.sqrt());
        result["rayleigh"] = to_value(&r)?;
        result["rayleigh_relative_difference"] = json!(rel);
    }
    let names: Vec<String> = (1..=sol.vectors.len()).map(|i| format!("v{i}")).collect();
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    let cols: Vec<&[f64]> = sol.vectors.iter().map(Vec::as_slice).collect();
    let mut spectrum = String::from("index,value,residual\n");
    for (i, (v, r)) in sol.values.iter().zip(&sol.residuals).enumerate() {
        spectrum.push_str(&format!("{},{v:e},{r:e}\n", i + 1));
    }
    Ok(Body {
        verdict: "Solved".into(),
        fitted_c,
        tripwire,
        result,
        files: vec![("spectrum.csv".into(), spectrum), ("eigenvectors.csv".into(), mesh.values_csv(&names, &cols))],
    })
}

fn run_solve(job: &JobSpec) -> Result<Body, String> {
    let mesh = mesh_for(job)?;
    match job.target.as_str() {
        "neumann" => {
            let (e, _) = field_and_domain(job)?;
            let out = pde::solve_neumann(&mesh, &e.field).map_err(|e| e.to_string())?;
            let files = match out.solution() {
                Some(s) => vec![("solution.csv".into(), mesh.values_csv(&["u"], &[&s.values]))],
                None => vec![],
            };
            let verdict = if out.is_compatible() { "Solved" } else { "Incompatible" };
            Ok(Body { verdict: verdict.into(), fitted_c: None, tripwire: false, result: to_value(&out)?, files })
        }
        "poincare" => {
            let sub = if job.boundary_subspace { Subspace::BoundaryMeanZero } else { Subspace::MeanZero };
            let est = pde::poincare_constant_in(&mesh, job.p, sub).map_err(|e| e.to_string())?;
            let verdict = if est.exact { "Solved" } else { "LowerBound" };
            Ok(Body { verdict: verdict.into(), fitted_c: Some(est.constant), tripwire: false, result: to_value(&est)?, files: vec![] })
        }
        "best-trace" | "best_trace" => {
            let bt = pde::best_trace_constant(&mesh).map_err(|e| e.to_string())?;
            let r = pde::rayleigh_minimum(&mesh, RayleighProblem::BestTrace, RAYLEIGH_TOL, RAYLEIGH_MAX_ITER).map_err(|e| e.to_string())?;
            // The constant function is feasible, so its ratio bounds μ from above.
            let tripwire = bt.mu > bt.constant_ratio * (1.0 + RAYLEIGH_SLACK) || r.value < bt.mu * (1.0 - RAYLEIGH_SLACK);
            let mut result = to_value(&bt)?;
            result["rayleigh"] = to_value(&r)?;
            result["rayleigh_relative_difference"] = json!((r.value - bt.mu).abs() / bt.mu);
            Ok(Body {
                verdict: "Solved".into(),
                fitted_c: Some(bt.constant),
                tripwire,
                result,
                files: vec![("extremal.csv".into(), mesh.values_csv(&["v"], &[&bt.extremal]))],
            })
        }
        other => Err(format!("unknown solve problem `{other}`")),
    }
}
