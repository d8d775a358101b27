//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line to stderr
//! (uncaptured) and then asserts it.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use logtrace::gaussian;
use logtrace::quadrature::{integrate_interior_fn, QuadratureRule};
use logtrace::rearrange::{self, ZygmundParams};
use logtrace::testbed;
use logtrace::verify::{self, CheckOptions, InequalityId, ReportVerdict};
use logtrace::weighted_pde::{self as pde, RayleighProblem, Weighting, WeightedMesh};
use logtrace::Domain;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One sub-check: description and outcome.
struct Check(String, bool);

fn check(ok: bool, detail: impl Into<String>) -> Check {
    Check(detail.into(), ok)
}

fn conclude(n: u32, title: &str, checks: Vec<Check>) {
    let pass = checks.iter().all(|c| c.1);
    let detail: Vec<String> = checks
        .iter()
        .map(|c| if c.1 { c.0.clone() } else { format!("FAILED {}", c.0) })
        .collect();
    let line = format!("acceptance {n} {} {title}: {}", if pass { "PASS" } else { "FAIL" }, detail.join("; "));
    // libtest only captures the print macros; a locked handle reaches the terminal
    let _ = writeln!(std::io::stderr().lock(), "{line}");
    assert!(pass, "{line}");
}

fn suite_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../cli/campaigns/paper_suite.cfg")
}

fn run_suite(out: &Path) -> u8 {
    let suite = suite_path();
    let args = ["logtrace", "run", suite.to_str().unwrap(), "--out", out.to_str().unwrap(), "--no-timestamps"];
    logtrace_cli::run_cli(args)
}

// ---------------------------------------------------------------------------

const C1_TOL: f64 = 1e-3;
const C1_SECONDS: f64 = 10.0;

#[test]
fn criterion_1_rearrangement_oracle() {
    let d = Domain::half_line(0.0).unwrap();
    let mut checks = vec![];
    for delta in [-0.05, -0.3, -0.45] {
        let start = Instant::now();
        let prof = rearrange::rearrangement(&testbed::power_field(delta), &d, 128).unwrap();
        let (lo, hi) = (1e-6f64.ln(), 0.5f64.ln());
        let err = (0..=400)
            .map(|k| {
                let s = (lo + (hi - lo) * k as f64 / 400.0).exp();
                (prof.value_at(s) / s.powf(delta) - 1.0).abs()
            })
            .fold(0.0, f64::max);
        let secs = start.elapsed().as_secs_f64();
        checks.push(check(err <= C1_TOL && secs < C1_SECONDS, format!("delta={delta}: max rel err {err:.2e} <= {C1_TOL:e}, {secs:.2}s < {C1_SECONDS}s")));
    }
    conclude(1, "measured rearrangement of Phi^delta(x_N) matches s^delta", checks);
}

// ---------------------------------------------------------------------------

const C2_FLOOR: f64 = 0.9;

#[test]
fn criterion_2_isoperimetric_asymptotics() {
    let start = Instant::now();
    let ratio = |t: f64| gaussian::isoperimetric(t).unwrap() / (t * (2.0 * (1.0 / t).ln()).sqrt());
    // from t = 1e−3 down to 1e−12 the ratio must approach 1 monotonically
    let ts: Vec<f64> = (3..=12).map(|k| 10f64.powi(-k)).collect();
    let r: Vec<f64> = ts.iter().map(|&t| ratio(t)).collect();
    let monotone = r.windows(2).all(|w| (1.0 - w[1]).abs() < (1.0 - w[0]).abs());
    let at6 = ratio(1e-6);
    let secs = start.elapsed().as_secs_f64();
    conclude(
        2,
        "isoperimetric ratio I(t)/(t sqrt(2 log 1/t)) tends to 1",
        vec![
            check(monotone, format!("monotone toward 1 over t=1e-3..1e-12 (r(1e-3)={:.4}, r(1e-12)={:.4})", r[0], r[r.len() - 1])),
            check(at6 >= C2_FLOOR, format!("r(1e-6)={at6:.4} >= {C2_FLOOR}")),
            check(secs < 1.0, format!("{secs:.3}s < 1s")),
        ],
    );
}

// ---------------------------------------------------------------------------

const C3_SECONDS: f64 = 300.0;

fn within(c: Option<f64>, target: f64, tol: f64) -> bool {
    c.is_some_and(|c| (c - target).abs() <= tol + 1e-12)
}

fn show(c: Option<f64>) -> String {
    c.map_or_else(|| "none".into(), |c| format!("{c}"))
}

#[test]
fn criterion_3_sharpness_exponents() {
    let mut checks = vec![];

    let grid = [0.3, 0.4, 0.5, 0.6, 0.7];
    let start = Instant::now();
    let s = verify::scan_embed_p(2.0, &grid).unwrap();
    let secs = start.elapsed().as_secs_f64();
    checks.push(check(
        within(s.critical, 0.5, 0.1) && secs < C3_SECONDS,
        format!("EmbedP critical alpha {} = 1/2 +- 0.1 ({secs:.1}s)", show(s.critical)),
    ));

    let grid = [-0.7, -0.6, -0.5, -0.4, -0.3];
    let start = Instant::now();
    let s = verify::scan_embed_inf(0.5, &grid).unwrap();
    let secs = start.elapsed().as_secs_f64();
    checks.push(check(
        within(s.critical, -0.5, 0.1) && secs < C3_SECONDS,
        format!("EmbedInf critical alpha {} = -1/2 +- 0.1 ({secs:.1}s)", show(s.critical)),
    ));

    let grid = [0.25, 0.5, 0.75, 1.0, 1.25];
    let step = 0.25;
    let start = Instant::now();
    let s = verify::scan_trace_logp(2.0, &grid).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let term = |name: &str| s.terms.iter().find(|t| t.name == name).and_then(|t| t.critical);
    checks.push(check(
        s.critical.is_some_and(|c| (0.5..=1.0).contains(&c)) && secs < C3_SECONDS,
        format!("TraceLogP critical beta {} in [0.5, 1.0] ({secs:.1}s)", show(s.critical)),
    ));
    checks.push(check(within(term("A1"), 0.5, step), format!("A1 critical {} = (p-1)/2 = 0.5 +- {step}", show(term("A1")))));
    checks.push(check(within(term("A3"), 1.0, step), format!("A3 critical {} = p/2 = 1.0 +- {step}", show(term("A3")))));

    conclude(3, "critical logarithmic exponents", checks);
}

// ---------------------------------------------------------------------------

const C4_STABILITY: f64 = 0.2;

#[test]
fn criterion_4_inequality_direction() {
    let mut checks = vec![];
    let mut cases = vec![(InequalityId::Gross, 0.5), (InequalityId::EmbedP, 0.5), (InequalityId::TraceLogP, 0.5)];
    cases.extend([0.3, 0.5, 0.9].map(|l| (InequalityId::TraceExp, l)));
    let (mut applicable, mut bad) = (0, vec![]);
    for e in testbed::catalog() {
        for &(id, lambda) in &cases {
            let opts = CheckOptions { lambda, ..CheckOptions::default() };
            let r = verify::check_with(id, &e.field, &e.home, &opts).unwrap();
            if r.verdict == ReportVerdict::Inapplicable {
                continue;
            }
            applicable += 1;
            if r.verdict != ReportVerdict::Holds || !r.refinement.stable(C4_STABILITY) || r.tripwire {
                let param = if id == InequalityId::TraceExp { format!("(lambda={lambda})") } else { String::new() };
                bad.push(format!("{id}/{}{param}: {:?}, C ratio {:.3}", e.name, r.verdict, r.refinement.ratio));
            }
        }
    }
    checks.push(check(
        bad.is_empty(),
        format!("{applicable} applicable pairs hold with C stable within {C4_STABILITY} ({})", if bad.is_empty() { "all".into() } else { bad.join(", ") }),
    ));

    let dir = tempfile::tempdir().unwrap();
    let code = run_suite(dir.path());
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    let tripwires = summary["tripwires"].as_u64().unwrap();
    let reports = summary["jobs"].as_array().unwrap().len();
    checks.push(check(code == 0 && tripwires == 0 && reports == 14, format!("bundled suite: exit {code}, {reports} reports, {tripwires} tripwires")));
    conclude(4, "Gross, EmbedP, TraceLogP and TraceExp hold on the catalog", checks);
}

// ---------------------------------------------------------------------------

const C5_L2_TOL: f64 = 1e-3;
const C5_L3_TOL: f64 = 5e-3;
const C5_L1_MAX: f64 = 1e-8;
const C5_RAYLEIGH_TOL: f64 = 1e-6;
/// Weak-form residual `‖Au − λMu‖ / ‖Mu‖` of the substituted Hermite polynomials.
const C5_SUBSTITUTION_TOL: f64 = 1e-4;
const C5_CONVERGENCE: f64 = 3.5;
const C5_SECONDS: f64 = 60.0;

fn weak_residual(mesh: &WeightedMesh, u: &[f64], lambda: f64) -> f64 {
    let au = mesh.apply_stiffness(u);
    let (mut num, mut den) = (0.0, 0.0);
    for ((a, m), v) in au.iter().zip(&mesh.mass).zip(u) {
        num += (a - lambda * m * v).powi(2);
        den += (m * v).powi(2);
    }
    (num / den).sqrt()
}

#[test]
fn criterion_5_oscillator_spectrum() {
    let start = Instant::now();
    let d = Domain::interval(-8.0, 8.0).unwrap();
    let mesh = pde::assemble(&d, 0.005).unwrap();
    let sol = pde::oscillator_spectrum(&mesh, 3, Weighting::MassGamma).unwrap();
    let l = &sol.values;
    let x: Vec<f64> = (0..mesh.len()).map(|i| mesh.point(i)[0]).collect();
    let h2: Vec<f64> = x.iter().map(|x| x * x - 1.0).collect();
    let r1 = weak_residual(&mesh, &x, 1.0);
    let r2 = weak_residual(&mesh, &h2, 2.0);
    let ray = pde::rayleigh_minimum(&mesh, RayleighProblem::Oscillator(Weighting::MassGamma), 1e-10, 200_000).unwrap();
    let ray_rel = (ray.value - l[1]).abs() / l[1];
    let secs = start.elapsed().as_secs_f64();

    let err_at = |h: f64| {
        let m = pde::assemble(&d, h).unwrap();
        (pde::oscillator_spectrum(&m, 2, Weighting::MassGamma).unwrap().values[1] - 1.0).abs()
    };
    let (e1, e2) = (err_at(0.02), err_at(0.01));

    conclude(
        5,
        "oscillator spectrum on (-8, 8), h = 0.005",
        vec![
            check(l[0].abs() <= C5_L1_MAX, format!("lambda1 {:.1e} <= {C5_L1_MAX:e}", l[0])),
            check((l[1] - 1.0).abs() <= C5_L2_TOL, format!("lambda2 {:.7} = 1 +- {C5_L2_TOL:e}", l[1])),
            check((l[2] - 2.0).abs() <= C5_L3_TOL, format!("lambda3 {:.7} = 2 +- {C5_L3_TOL:e}", l[2])),
            check(r1 <= C5_SUBSTITUTION_TOL && r2 <= C5_SUBSTITUTION_TOL, format!("substitution residuals x: {r1:.1e}, x^2-1: {r2:.1e} <= {C5_SUBSTITUTION_TOL:e}")),
            check(ray_rel <= C5_RAYLEIGH_TOL, format!("Rayleigh lambda2 rel diff {ray_rel:.1e} <= {C5_RAYLEIGH_TOL:e}")),
            check(e1 / e2 >= C5_CONVERGENCE, format!("lambda2 error ratio on halving h {:.2} >= {C5_CONVERGENCE}", e1 / e2)),
            check(secs < C5_SECONDS, format!("{secs:.1}s < {C5_SECONDS}s")),
        ],
    );
}

// ---------------------------------------------------------------------------

const C6_CASES: usize = 100;
const C6_ORDER: f64 = 1.8;
/// Discrete defect allowed for the manufactured data: the continuous data
/// are compatible, but lumped quadrature leaves an O(h²) defect (1e−3 at h = 0.1).
const C6_MANUFACTURED_EPS: f64 = 1e-2;
const C6_SECONDS: f64 = 120.0;

#[test]
fn criterion_6_neumann_compatibility() {
    let start = Instant::now();
    let d = Domain::interval(-6.0, 6.0).unwrap();
    let mesh = pde::assemble(&d, 0.05).unwrap();
    let x: Vec<f64> = (0..mesh.len()).map(|i| mesh.point(i)[0]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut rejected, mut solved) = (0, 0);
    for _ in 0..C6_CASES {
        let c: [f64; 5] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let c0 = rng.gen_range(0.1..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let f: Vec<f64> = x
            .iter()
            .map(|&x| c0 + c[0] * x + c[1] * (x * x - 1.0) + c[2] * (2.0 * x).sin() + c[3] * x.cos() + c[4] * (x * x * x - 3.0 * x))
            .collect();
        if !pde::solve_neumann_values(&mesh, &f, None, None).unwrap().is_compatible() {
            rejected += 1;
        }
        let mean = mesh.gamma_mean(&f);
        let g: Vec<f64> = f.iter().map(|v| v - mean).collect();
        if let pde::NeumannOutcome::Solved(s) = pde::solve_neumann_values(&mesh, &g, None, None).unwrap() {
            solved += usize::from(s.residual <= 1e-10);
        }
    }

    // u = cos x: −u'' + x u' = cos x − x sin x, ∂u/∂ν = −sin 6 at both ends
    let hs = [0.1, 0.05, 0.025, 0.0125];
    let errors: Vec<f64> = hs
        .iter()
        .map(|&h| {
            let m = pde::assemble(&d, h).unwrap();
            let xs: Vec<f64> = (0..m.len()).map(|i| m.point(i)[0]).collect();
            let f: Vec<f64> = xs.iter().map(|x| x.cos() - x * x.sin()).collect();
            let g = vec![-(6f64.sin()); m.boundary.len()];
            let out = pde::solve_neumann_values(&m, &f, Some(&g), Some(C6_MANUFACTURED_EPS)).unwrap();
            let u = match &out {
                pde::NeumannOutcome::Solved(s) => s.values.clone(),
                pde::NeumannOutcome::Incompatible { defect, .. } => panic!("h={h}: defect {defect:e}"),
            };
            let exact: Vec<f64> = xs.iter().map(|x| x.cos()).collect();
            let mean = m.gamma_mean(&exact);
            let e2: f64 = u.iter().zip(&exact).zip(&m.mass).map(|((a, b), w)| w * (a - (b - mean)).powi(2)).sum();
            e2.sqrt()
        })
        .collect();
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let min_order = orders.iter().copied().fold(f64::INFINITY, f64::min);
    let secs = start.elapsed().as_secs_f64();
    conclude(
        6,
        "Neumann compatibility dichotomy",
        vec![
            check(rejected == C6_CASES, format!("{rejected}/{C6_CASES} incompatible data rejected")),
            check(solved == C6_CASES, format!("{solved}/{C6_CASES} mean-zero projections solved")),
            check(min_order >= C6_ORDER, format!("convergence orders {orders:.2?} >= {C6_ORDER}")),
            check(secs < C6_SECONDS, format!("{secs:.1}s < {C6_SECONDS}s")),
        ],
    );
}

// ---------------------------------------------------------------------------

const C7_ZERO: f64 = 1e-8;
const C7_RAYLEIGH_TOL: f64 = 1e-6;
const C7_ORACLE_TOL: f64 = 1e-8;
const C7_SECONDS: f64 = 120.0;

/// Dirichlet-to-Neumann map of a 1D mesh onto its two end nodes, by
/// tridiagonal elimination of the interior (`shift` adds `shift·m_i` to the
/// diagonal).
fn dtn_1d(mesh: &WeightedMesh, shift: f64) -> [[f64; 2]; 2] {
    let n = mesh.len();
    let mut diag: Vec<f64> = mesh.mass.iter().map(|m| shift * m).collect();
    let mut off = vec![0.0; n - 1];
    for e in &mesh.edges {
        let (i, j) = (e.i.min(e.j), e.i.max(e.j));
        assert_eq!(j, i + 1, "1D meshes are chains");
        diag[i] += e.w;
        diag[j] += e.w;
        off[i] -= e.w;
    }
    // interior system for a unit value at one end
    let solve = |rhs_first: f64, rhs_last: f64| {
        let m = n - 2;
        let (mut c, mut dd) = (vec![0.0; m], vec![0.0; m]);
        for k in 0..m {
            let i = k + 1;
            let a = if k > 0 { off[i - 1] } else { 0.0 };
            let r = if k == 0 { rhs_first } else if k == m - 1 { rhs_last } else { 0.0 };
            let denom = diag[i] - a * if k > 0 { c[k - 1] } else { 0.0 };
            c[k] = if k + 1 < m { off[i] / denom } else { 0.0 };
            dd[k] = (r - a * if k > 0 { dd[k - 1] } else { 0.0 }) / denom;
        }
        for k in (0..m - 1).rev() {
            dd[k] -= c[k] * dd[k + 1];
        }
        dd
    };
    let x0 = solve(-off[0], 0.0);
    let x1 = solve(0.0, -off[n - 2]);
    let m = n - 2;
    [
        [diag[0] + off[0] * x0[0], off[0] * x1[0]],
        [off[n - 2] * x0[m - 1], diag[n - 1] + off[n - 2] * x1[m - 1]],
    ]
}

/// Eigenvalues of `S v = λ diag(b) v` for a symmetric 2×2 `S`, ascending.
fn pencil_2x2(s: [[f64; 2]; 2], b: [f64; 2]) -> [f64; 2] {
    let sum = s[0][0] / b[0] + s[1][1] / b[1];
    let prod = (s[0][0] * s[1][1] - s[0][1] * s[1][0]) / (b[0] * b[1]);
    let disc = (sum * sum - 4.0 * prod).max(0.0).sqrt();
    let hi = 0.5 * (sum + disc);
    [prod / hi, hi]
}

#[test]
fn criterion_7_steklov_and_best_trace() {
    let start = Instant::now();
    let mut checks = vec![];

    let d = Domain::half_plane(0.0).unwrap();
    let mesh = pde::assemble(&d, 0.1).unwrap();
    let st = pde::steklov_spectrum(&mesh, 3).unwrap();
    let v1 = &st.vectors[0];
    let vmax = v1.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let spread = v1.iter().fold(f64::NEG_INFINITY, |a: f64, &v| a.max(v)) - v1.iter().fold(f64::INFINITY, |a: f64, &v| a.min(v));
    checks.push(check(
        st.values[0].abs() <= C7_ZERO && st.residuals[0] <= C7_ZERO && spread / vmax <= 1e-6,
        format!("lambda1 {:.1e}, residual {:.1e}, eigenfunction spread {:.1e}", st.values[0], st.residuals[0], spread / vmax),
    ));
    let ray = pde::rayleigh_minimum(&mesh, RayleighProblem::Steklov, 1e-10, 200_000).unwrap();
    let rel = (ray.value - st.values[1]).abs() / st.values[1];
    checks.push(check(rel <= C7_RAYLEIGH_TOL, format!("lambda2 {:.6} vs Rayleigh rel {rel:.1e} <= {C7_RAYLEIGH_TOL:e}", st.values[1])));

    let bt = pde::best_trace_constant(&mesh).unwrap();
    let v = &bt.extremal;
    let av = mesh.apply_stiffness(v);
    let b = mesh.boundary_vector();
    let res: f64 = (0..mesh.len()).map(|i| (av[i] + mesh.mass[i] * v[i] - bt.mu * b[i] * v[i]).powi(2)).sum::<f64>().sqrt()
        / v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let const_ratio = mesh.mass.iter().sum::<f64>() / b.iter().sum::<f64>();
    checks.push(check(
        res <= C7_ZERO && bt.mu <= const_ratio,
        format!("best trace mu {:.6}: weak-form residual {res:.1e} <= {C7_ZERO:e}, below constant ratio {const_ratio:.6}", bt.mu),
    ));

    // 1D: closed-form 2×2 pencils of the exact interior elimination
    let mesh = pde::assemble(&Domain::interval(-2.0, 2.0).unwrap(), 0.005).unwrap();
    let bw = [mesh.boundary_weights[0], mesh.boundary_weights[1]];
    let oracle_st = pencil_2x2(dtn_1d(&mesh, 0.0), bw)[1];
    let oracle_bt = pencil_2x2(dtn_1d(&mesh, 1.0), bw)[0];
    let st = pde::steklov_spectrum(&mesh, 2).unwrap().values[1];
    let bt = pde::best_trace_constant(&mesh).unwrap().mu;
    let (e_st, e_bt) = ((st - oracle_st).abs() / oracle_st, (bt - oracle_bt).abs() / oracle_bt);
    checks.push(check(
        e_st <= C7_ORACLE_TOL && e_bt <= C7_ORACLE_TOL,
        format!("1D oracle: Steklov lambda2 rel {e_st:.1e}, best trace rel {e_bt:.1e} <= {C7_ORACLE_TOL:e}"),
    ));
    let secs = start.elapsed().as_secs_f64();
    checks.push(check(secs < C7_SECONDS, format!("{secs:.1}s < {C7_SECONDS}s")));
    conclude(7, "Steklov spectrum and best trace constant", checks);
}

// ---------------------------------------------------------------------------

const C8_EQUIMEASURE_TOL: f64 = 1e-3;

/// Catalog pairs with `|u| ≤ |v|` pointwise on their common home domain.
const C8_ORDERED: [(&str, &str); 7] = [
    ("power(-0.05)", "power(-0.1)"),
    ("power(-0.1)", "power(-0.2)"),
    ("power(-0.2)", "power(-0.3)"),
    ("power(-0.3)", "power(-0.45)"),
    ("log(0.1)", "log(0.25)"),
    ("log(0.25)", "log(0.5)"),
    ("const(1)", "const(2)"),
];

#[test]
fn criterion_8_invariants_and_determinism() {
    let mut checks = vec![];
    let rule = QuadratureRule::default();
    let (mut eq_bad, mut mono_bad, mut compared, mut skipped) = (vec![], vec![], 0, 0);
    let catalog = testbed::catalog();
    for e in &catalog {
        let inverted = rearrange::rearrangement(&e.field, &e.home, 128).unwrap();
        for p in [1.0, 2.0, 3.0] {
            let direct = integrate_interior_fn(&e.home, &|x: &[f64]| e.field.value(x).abs().powf(p), &rule);
            if direct.possibly_divergent || !direct.value.is_finite() {
                skipped += 1;
                continue;
            }
            compared += 1;
            let rel = (inverted.lp_integral(p) - direct.value).abs() / direct.value;
            if rel > C8_EQUIMEASURE_TOL {
                eq_bad.push(format!("{}(p={p}): {rel:.1e}", e.name));
            }
        }
        let prof = e.profile_on_home(128).unwrap();
        for p in [1.0, 2.0, 4.0, f64::INFINITY] {
            let norms: Vec<f64> = [-1.0, -0.5, 0.0, 0.5, 1.0]
                .iter()
                .map(|&a| rearrange::zygmund_norm(&prof, ZygmundParams::new(p, a).unwrap()).value)
                .collect();
            if norms.windows(2).any(|w| w[1] < w[0] * (1.0 - 1e-12)) {
                mono_bad.push(format!("{}(p={p})", e.name));
            }
        }
    }
    checks.push(check(
        eq_bad.is_empty(),
        format!("equimeasurability p=1,2,3 within {C8_EQUIMEASURE_TOL:e} on {compared} field/p pairs ({skipped} divergent skipped) {eq_bad:?}"),
    ));
    checks.push(check(mono_bad.is_empty(), format!("norms non-decreasing in alpha {mono_bad:?}")));

    let mut order_bad = vec![];
    for (a, b) in C8_ORDERED {
        let (ea, eb) = (testbed::entry(a).unwrap(), testbed::entry(b).unwrap());
        let (pa, pb) = (rearrange::rearrangement(&ea.field, &ea.home, 64).unwrap(), rearrange::rearrangement(&eb.field, &eb.home, 64).unwrap());
        if pa.ln_u.iter().zip(&pb.ln_u).any(|(x, y)| x > &(y + 1e-12)) {
            order_bad.push(format!("{a} <= {b}"));
        }
    }
    checks.push(check(order_bad.is_empty(), format!("order preserved on {} catalog pairs {order_bad:?}", C8_ORDERED.len())));

    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let codes = (run_suite(a.path()), run_suite(b.path()));
    let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    let identical = names.iter().all(|f| std::fs::read(a.path().join(f)).unwrap() == std::fs::read(b.path().join(f)).unwrap())
        && std::fs::read_dir(b.path()).unwrap().count() == names.len();
    checks.push(check(codes == (0, 0) && identical, format!("two suite runs byte-identical across {} files", names.len())));
    conclude(8, "rearrangement invariants and campaign determinism", checks);
}
