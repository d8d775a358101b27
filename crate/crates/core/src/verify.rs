//! Inequality reports and sharpness scans.
//!
//! Every check evaluates both sides at a coarse and a fine resolution and
//! reports the fitted constant `C = LHS/RHS` at each; the constant itself is
//! never asserted, only the direction of the inequality and its stability.
//!
//! Sharpness of the logarithmic exponents cannot be seen on one member of
//! the power family: every `Φ^δ(x_N)` with `δp > −1` lies in every
//! `L^p(log L)^α`. What blows up is the ratio of the two sides as
//! `δ → −1/p`, so the power-family scans follow `ε_k = 1 + δ_k p = 0.1·2^{−k}`
//! and classify the ratio by its growth per halving of `ε`. The log-family
//! scans are genuine single-profile divergences and use depth doubling.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domains::{Domain, DomainKind};
use crate::error::{Error, Result};
use crate::field::{LevelForm, ScalarField};
use crate::gaussian;
use crate::quadrature::{self, integrate_boundary_fn, integrate_interior_fn, Estimate, QuadratureRule};
use crate::rearrange::{self, RearrangementProfile, Verdict, ZygmundParams, ANALYTIC_PROFILE_DEPTH};
use crate::testbed::{self, level_form_integrals};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InequalityId {
    Gross,
    EmbedP,
    EmbedInf,
    PoincareWirtinger,
    TraceLogP,
    TraceExp,
    TraceL2,
    PoincareTrace,
}

impl InequalityId {
    pub const ALL: [InequalityId; 8] = [
        InequalityId::Gross,
        InequalityId::EmbedP,
        InequalityId::EmbedInf,
        InequalityId::PoincareWirtinger,
        InequalityId::TraceLogP,
        InequalityId::TraceExp,
        InequalityId::TraceL2,
        InequalityId::PoincareTrace,
    ];

    /// Command-line spelling.
    pub fn key(&self) -> &'static str {
        match self {
            InequalityId::Gross => "gross",
            InequalityId::EmbedP => "embed_p",
            InequalityId::EmbedInf => "embed_inf",
            InequalityId::PoincareWirtinger => "poincare_wirtinger",
            InequalityId::TraceLogP => "trace_logp",
            InequalityId::TraceExp => "trace_exp",
            InequalityId::TraceL2 => "trace_l2",
            InequalityId::PoincareTrace => "poincare_trace",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        Self::ALL.iter().copied().find(|i| i.key() == norm)
    }
}

impl fmt::Display for InequalityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReportVerdict {
    Holds,
    Diverges,
    Indeterminate,
    /// A precondition of the inequality fails for this field/domain pair.
    Inapplicable,
}

/// Fitted constants at the two resolutions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub coarse: f64,
    pub fine: f64,
    /// `fine / coarse` (1 when both vanish).
    pub ratio: f64,
}

impl Refinement {
    fn new(coarse: f64, fine: f64) -> Self {
        let ratio = if coarse == fine { 1.0 } else { fine / coarse };
        Self { coarse, fine, ratio }
    }

    /// Fitted constant moved by at most `tol` relative under refinement.
    pub fn stable(&self, tol: f64) -> bool {
        (self.ratio - 1.0).abs() <= tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub inequality: InequalityId,
    pub domain: String,
    pub field: String,
    pub params: BTreeMap<String, f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub fitted_c: f64,
    pub verdict: ReportVerdict,
    pub refinement: Refinement,
    /// Divergent left side against a finite right side.
    pub tripwire: bool,
    pub notes: Vec<String>,
}

/// Quadrature cell width and profile level count of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolution {
    pub rule: QuadratureRule,
    pub levels: usize,
}

impl Resolution {
    pub fn coarse() -> Self {
        Self { rule: QuadratureRule { cell: 0.5, ..QuadratureRule::default() }, levels: 64 }
    }

    pub fn fine() -> Self {
        Self { rule: QuadratureRule::default(), levels: 128 }
    }
}

/// The coarse/fine pair every check evaluates at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolutions {
    pub coarse: Resolution,
    pub fine: Resolution,
}

impl Default for Resolutions {
    fn default() -> Self {
        Self { coarse: Resolution::coarse(), fine: Resolution::fine() }
    }
}

impl Resolutions {
    /// Fine level count `levels` (coarse gets half) and quadrature tolerance `tol`.
    pub fn new(levels: usize, tol: f64) -> Self {
        let mut r = Self::default();
        r.fine.levels = levels.max(32);
        r.coarse.levels = (levels / 2).max(16);
        r.fine.rule.tol = tol;
        r.coarse.rule.tol = tol;
        r
    }
}

/// Parameters of [`check_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    pub p: f64,
    pub lambda: f64,
    /// Logarithmic exponent of the trace check; `(p−1)/2` when absent.
    pub beta: Option<f64>,
    pub resolutions: Resolutions,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self { p: 2.0, lambda: 0.5, beta: None, resolutions: Resolutions::default() }
    }
}

/// One side of an inequality with its finiteness state.
#[derive(Debug, Clone, Copy)]
struct Side {
    value: f64,
    state: Verdict,
}

impl Side {
    fn finite(value: f64) -> Self {
        Self { value, state: if value.is_finite() { Verdict::Finite } else { Verdict::Divergent } }
    }

    fn from_estimate(e: &Estimate) -> Self {
        let state = if e.possibly_divergent || !e.value.is_finite() {
            Verdict::Divergent
        } else if e.converged || e.error <= 1e-5 * e.magnitude {
            Verdict::Finite
        } else {
            Verdict::Indeterminate
        };
        Self { value: e.value, state }
    }

    fn map(self, f: impl Fn(f64) -> f64) -> Self {
        Self { value: f(self.value), state: self.state }
    }
}

fn worst(a: Verdict, b: Verdict) -> Verdict {
    match (a, b) {
        (Verdict::Divergent, _) | (_, Verdict::Divergent) => Verdict::Divergent,
        (Verdict::Indeterminate, _) | (_, Verdict::Indeterminate) => Verdict::Indeterminate,
        _ => Verdict::Finite,
    }
}

fn fitted(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else {
        lhs / rhs
    }
}

struct Draft {
    id: InequalityId,
    res: Resolutions,
    domain: String,
    field: String,
    params: BTreeMap<String, f64>,
    notes: Vec<String>,
}

impl Draft {
    fn new(id: InequalityId, u: &ScalarField, d: &Domain, res: &Resolutions) -> Self {
        Self { id, res: *res, domain: d.to_string(), field: u.name.clone(), params: BTreeMap::new(), notes: Vec::new() }
    }

    fn param(mut self, k: &str, v: f64) -> Self {
        self.params.insert(k.into(), v);
        self
    }

    fn inapplicable(self, why: impl Into<String>) -> InequalityReport {
        let mut notes = self.notes;
        notes.push(why.into());
        InequalityReport {
            inequality: self.id,
            domain: self.domain,
            field: self.field,
            params: self.params,
            lhs: f64::NAN,
            rhs: f64::NAN,
            fitted_c: f64::NAN,
            verdict: ReportVerdict::Inapplicable,
            refinement: Refinement { coarse: f64::NAN, fine: f64::NAN, ratio: f64::NAN },
            tripwire: false,
            notes,
        }
    }

    /// Evaluate both sides at both resolutions and classify.
    fn finish(self, eval: impl Fn(&Resolution) -> Result<(Side, Side)>) -> Result<InequalityReport> {
        let (cl, cr) = eval(&self.res.coarse)?;
        let (lhs, rhs) = eval(&self.res.fine)?;
        let mut notes = self.notes;
        let (verdict, tripwire) = if rhs.state != Verdict::Finite {
            notes.push(format!("right side is {:?}", rhs.state));
            (ReportVerdict::Inapplicable, false)
        } else {
            match lhs.state {
                Verdict::Finite => (ReportVerdict::Holds, false),
                Verdict::Divergent => (ReportVerdict::Diverges, true),
                Verdict::Indeterminate => (ReportVerdict::Indeterminate, false),
            }
        };
        Ok(InequalityReport {
            inequality: self.id,
            domain: self.domain,
            field: self.field,
            params: self.params,
            lhs: lhs.value,
            rhs: rhs.value,
            fitted_c: fitted(lhs.value, rhs.value),
            verdict,
            refinement: Refinement::new(fitted(cl.value, cr.value), fitted(lhs.value, rhs.value)),
            tripwire,
            notes,
        })
    }
}

fn half_space_omega(d: &Domain) -> Option<f64> {
    match d.kind {
        DomainKind::HalfLine { omega } | DomainKind::HalfPlane { omega } => Some(omega),
        _ => None,
    }
}

fn require_fits(u: &ScalarField, d: &Domain) -> Result<()> {
    if u.fits(d) {
        Ok(())
    } else {
        Err(Error::Precondition(format!("field `{}` is {}-dimensional, domain is {}-dimensional", u.name, u.dim, d.dim())))
    }
}

fn profile_at(u: &ScalarField, d: &Domain, levels: usize) -> Result<RearrangementProfile> {
    match (u.level_form(), half_space_omega(d)) {
        (Some(form), Some(omega)) => Ok(RearrangementProfile::analytic(form, omega, 2 * levels + 128, ANALYTIC_PROFILE_DEPTH)),
        _ => rearrange::rearrangement(u, d, levels),
    }
}

fn w1p_side(u: &ScalarField, d: &Domain, p: f64, res: &Resolution) -> Result<Side> {
    let n = testbed::w1p_norm_with(u, d, p, &res.rule)?;
    Ok(Side { value: n.value, state: n.verdict })
}

/// Largest `|u|` and `|∇u|` over the interior nodes (tail depth 32).
fn sup_norms(u: &ScalarField, d: &Domain, rule: &QuadratureRule) -> (f64, f64) {
    let nodes = rule.interior_nodes(d, 0, 32.0);
    (0..nodes.len())
        .into_par_iter()
        .map(|i| {
            let x = nodes.point(i);
            (u.value(x).abs(), u.gradient_norm(x))
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)))
}

/// `|u| ≤ 1e−6·max(1, sup|u|)` on the truncation shell of unbounded domains.
pub fn decays_at_infinity(u: &ScalarField, d: &Domain) -> bool {
    let r = d.truncation_radius;
    let (sup, _) = sup_norms(u, d, &QuadratureRule::default());
    let tol = 1e-6 * sup.max(1.0);
    let shell: Vec<Vec<f64>> = match d.kind {
        DomainKind::HalfLine { .. } => vec![vec![-r]],
        DomainKind::HalfPlane { omega } => (0..=64)
            .map(|k| {
                let th = std::f64::consts::PI * k as f64 / 64.0;
                vec![r * th.cos(), -r * th.sin() + omega.min(0.0)]
            })
            .collect(),
        _ => Vec::new(),
    };
    shell.iter().all(|x| u.value(x).abs() <= tol)
}

/// Gross's logarithmic Sobolev inequality in `L^p` form:
/// `∫|u|^p ln|u| ≤ (p/2)∫|∇u|²|u|^{p−2} sign u + ‖u‖_p^p ln‖u‖_p`.
///
/// The fitted constant is the factor the gradient term would need,
/// `(LHS − ‖u‖_p^p ln‖u‖_p) / ((p/2)∫|∇u|²|u|^{p−2})`; it is at most 1
/// exactly when the inequality holds, and equals 1 for exponentials.
pub fn check_gross(u: &ScalarField, d: &Domain, p: f64) -> Result<InequalityReport> {
    gross_impl(u, d, p, &Resolutions::default())
}

fn gross_impl(u: &ScalarField, d: &Domain, p: f64, res: &Resolutions) -> Result<InequalityReport> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Domain(format!("Gross check needs 1 < p < inf, got {p}")));
    }
    require_fits(u, d)?;
    let draft = Draft::new(InequalityId::Gross, u, d, res).param("p", p);
    if d.gamma_measure < 1.0 - 1e-12 {
        return Ok(draft.inapplicable("the inequality is stated on the whole space; domain misses Gaussian mass"));
    }
    if !u.has_gradient() {
        return Err(Error::Precondition(format!("`{}` has no gradient", u.name)));
    }
    let rule = QuadratureRule::default();
    let neg = integrate_interior_fn(d, &|x: &[f64]| if u.value(x) < 0.0 { 1.0 } else { 0.0 }, &rule).value;
    if neg > 0.0 && p < 2.0 {
        return Ok(draft.inapplicable("signed fields are restricted to p >= 2"));
    }
    let zero = integrate_interior_fn(d, &|x: &[f64]| if u.value(x) == 0.0 { 1.0 } else { 0.0 }, &rule).value;
    if zero > 0.0 && p < 2.0 {
        let mut r = draft.inapplicable("|u|^(p-2) is singular on the zero set of u");
        r.verdict = ReportVerdict::Indeterminate;
        return Ok(r);
    }
    let tol = 1e-6;
    let eval = |res: &Resolution| -> (Estimate, Estimate, Estimate) {
        let a = integrate_interior_fn(d, &|x: &[f64]| {
            let v = u.value(x).abs();
            if v == 0.0 { 0.0 } else { v.powf(p) * v.ln() }
        }, &res.rule);
        let b = integrate_interior_fn(d, &|x: &[f64]| {
            let v = u.value(x);
            let g2 = u.gradient_norm(x).powi(2);
            let w = if v == 0.0 { if p == 2.0 { 1.0 } else { 0.0 } } else { v.abs().powf(p - 2.0) * v.signum() };
            g2 * w
        }, &res.rule);
        let n = integrate_interior_fn(d, &|x: &[f64]| u.value(x).abs().powf(p), &res.rule);
        (a, b, n)
    };
    let constant_of = |a: f64, b: f64, n: f64| {
        let excess = a - n * n.ln() / p;
        let grad = 0.5 * p * b;
        if grad == 0.0 {
            if excess.abs() <= 1e-12 * n.abs().max(1.0) { 0.0 } else { f64::INFINITY }
        } else {
            excess / grad
        }
    };
    let (ca, cb, cn) = eval(&res.coarse);
    let (a, b, n) = eval(&res.fine);
    let rhs = 0.5 * p * b.value + n.value * n.value.ln() / p;
    let slack = tol * rhs.abs() + a.error + b.error * p + n.error * (1.0 + n.value.ln().abs());
    let states = [Side::from_estimate(&a), Side::from_estimate(&b), Side::from_estimate(&n)];
    let state = states.iter().fold(Verdict::Finite, |acc, s| worst(acc, s.state));
    let (verdict, notes) = match state {
        Verdict::Finite if a.value <= rhs + slack => (ReportVerdict::Holds, vec![]),
        Verdict::Finite => (ReportVerdict::Diverges, vec![format!("LHS exceeds RHS by {}", a.value - rhs)]),
        Verdict::Divergent => (ReportVerdict::Inapplicable, vec!["an integral of the inequality diverges".to_string()]),
        Verdict::Indeterminate => (ReportVerdict::Indeterminate, vec!["quadrature did not settle".to_string()]),
    };
    let mut notes = notes;
    notes.push(format!("gap RHS - LHS = {:e}", rhs - a.value));
    if neg > 0.0 {
        // the displayed integrand carries sign u; without it this is Gross's form
        let unsigned = integrate_interior_fn(d, &|x: &[f64]| {
            let v = u.value(x).abs();
            let g2 = u.gradient_norm(x).powi(2);
            if v == 0.0 { if p == 2.0 { g2 } else { 0.0 } } else { g2 * v.powf(p - 2.0) }
        }, &res.fine.rule);
        let rhs_unsigned = 0.5 * p * unsigned.value + n.value * n.value.ln() / p;
        notes.push(format!("u changes sign; with |u|^(p-2) in place of |u|^(p-2) sign u the RHS is {rhs_unsigned:e}"));
    }
    let fine_c = constant_of(a.value, b.value, n.value);
    Ok(InequalityReport {
        inequality: InequalityId::Gross,
        domain: draft.domain,
        field: draft.field,
        params: draft.params,
        lhs: a.value,
        rhs,
        fitted_c: fine_c,
        tripwire: verdict == ReportVerdict::Diverges,
        verdict,
        refinement: Refinement::new(constant_of(ca.value, cb.value, cn.value), fine_c),
        notes,
    })
}

/// `‖u‖_{L^p(log L)^{1/2}} ≤ C ‖u‖_{W^{1,p}}`.
pub fn check_embedding_p(u: &ScalarField, d: &Domain, p: f64) -> Result<InequalityReport> {
    embedding_p_impl(u, d, p, &Resolutions::default())
}

fn embedding_p_impl(u: &ScalarField, d: &Domain, p: f64, res: &Resolutions) -> Result<InequalityReport> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::Domain(format!("embedding needs 1 <= p < inf, got {p}")));
    }
    require_fits(u, d)?;
    let params = ZygmundParams::new(p, 0.5)?;
    Draft::new(InequalityId::EmbedP, u, d, res).param("p", p).param("alpha", 0.5).finish(|res| {
        let rhs = w1p_side(u, d, p, res)?;
        let z = rearrange::zygmund_norm(&profile_at(u, d, res.levels)?, params);
        Ok((Side { value: z.value, state: z.verdict }, rhs))
    })
}

/// `‖u‖_{L^∞(log L)^{−1/2}} ≤ C(‖∇u‖_∞ + ‖u‖_∞)` for fields vanishing at infinity.
pub fn check_embedding_inf(u: &ScalarField, d: &Domain) -> Result<InequalityReport> {
    embedding_inf_impl(u, d, &Resolutions::default())
}

fn embedding_inf_impl(u: &ScalarField, d: &Domain, res: &Resolutions) -> Result<InequalityReport> {
    require_fits(u, d)?;
    let draft = Draft::new(InequalityId::EmbedInf, u, d, res).param("alpha", -0.5);
    let params = ZygmundParams::new(f64::INFINITY, -0.5)?;
    if !decays_at_infinity(u, d) {
        let mut r = draft.inapplicable("u does not vanish at infinity; the inequality assumes u -> 0 as |x| -> inf");
        if let Ok(profile) = profile_at(u, d, 128) {
            let z = rearrange::zygmund_norm(&profile, params);
            r.lhs = z.value;
            r.notes.push(format!("sup (1-log s)^(-1/2) u*(s) = {} ({:?})", z.value, z.verdict));
        }
        return Ok(r);
    }
    draft.finish(|res| {
        let z = rearrange::zygmund_norm(&profile_at(u, d, res.levels)?, params);
        let (s, g) = sup_norms(u, d, &res.rule);
        Ok((Side { value: z.value, state: z.verdict }, Side::finite(s + g)))
    })
}

/// `ln(2 + e^{l})` without overflow.
fn ln_two_plus_exp(l: f64) -> f64 {
    if l > 40.0 {
        l + (2.0 * (-l).exp()).ln_1p()
    } else {
        (2.0 + l.exp()).ln()
    }
}

/// `∫_{∂Ω} |u|^p log^{(p−1)/2}(2+|u|) φ dS ≤ C ‖u‖^p_{W^{1,p}}`.
///
/// The logarithmic exponent `p/(2p')` of the embedding chain equals `(p−1)/2`,
/// so a single integrand serves both readings.
pub fn check_trace_logp(u: &ScalarField, d: &Domain, p: f64) -> Result<InequalityReport> {
    check_trace_logp_beta(u, d, p, 0.5 * (p - 1.0))
}

/// As [`check_trace_logp`] with the logarithmic exponent `β` free.
pub fn check_trace_logp_beta(u: &ScalarField, d: &Domain, p: f64, beta: f64) -> Result<InequalityReport> {
    trace_logp_impl(u, d, p, beta, &Resolutions::default())
}

fn trace_logp_impl(u: &ScalarField, d: &Domain, p: f64, beta: f64, res: &Resolutions) -> Result<InequalityReport> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::Domain(format!("trace inequality needs 1 <= p < inf, got {p}")));
    }
    require_fits(u, d)?;
    Draft::new(InequalityId::TraceLogP, u, d, res).param("p", p).param("beta", beta).finish(|res| {
        let lhs = integrate_boundary_fn(d, &|x: &[f64]| {
            let v = u.value(x).abs();
            if v == 0.0 { 0.0 } else { (p * v.ln() + beta * ln_two_plus_exp(v.ln()).ln()).exp() }
        }, &res.rule);
        let rhs = w1p_side(u, d, p, res)?.map(|w| w.powf(p));
        Ok((Side::from_estimate(&lhs), rhs))
    })
}

/// `∫_{∂Ω} exp(λ|u|²) φ dS ≤ C exp[(G+S)²](G(G+S)+1)` with `G = ‖∇u‖_∞`,
/// `S = ‖u‖_∞`, for `λ ∈ (0, 1)` and fields vanishing at infinity.
///
/// The report also carries `∫₀¹ s^{−λ}(1−ln s)^{1/2} ds`, the integral that
/// controls the constant and blows up like `(1−λ)^{−3/2}`.
pub fn check_trace_exp(u: &ScalarField, d: &Domain, lambda: f64) -> Result<InequalityReport> {
    trace_exp_impl(u, d, lambda, &Resolutions::default())
}

fn trace_exp_impl(u: &ScalarField, d: &Domain, lambda: f64, res: &Resolutions) -> Result<InequalityReport> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Domain(format!("lambda must lie in (0, 1), got {lambda}")));
    }
    require_fits(u, d)?;
    let rate = quadrature::ln_integral_tail(&|t: f64| -(1.0 - lambda) * t + 0.5 * t.ln_1p(), 0.0, 1e7, 8);
    let draft = Draft::new(InequalityId::TraceExp, u, d, res)
        .param("lambda", lambda)
        .param("rate_integral", rate.ln_value.exp());
    if !decays_at_infinity(u, d) {
        return Ok(draft.inapplicable("u does not vanish at infinity; the inequality assumes u -> 0 as |x| -> inf"));
    }
    draft.finish(|res| {
        let lhs = integrate_boundary_fn(d, &|x: &[f64]| (lambda * u.value(x).powi(2)).exp(), &res.rule);
        let (s, g) = sup_norms(u, d, &res.rule);
        let rhs = ((g + s).powi(2)).exp() * (g * (g + s) + 1.0);
        Ok((Side::from_estimate(&lhs), Side::finite(rhs)))
    })
}

/// `‖u − u_Ω‖_{L^p} ≤ C ‖∇u‖_{L^p}` with `u_Ω` the γ-mean over `Ω`.
pub fn check_poincare_wirtinger(u: &ScalarField, d: &Domain, p: f64) -> Result<InequalityReport> {
    poincare_wirtinger_impl(u, d, p, &Resolutions::default())
}

fn poincare_wirtinger_impl(u: &ScalarField, d: &Domain, p: f64, res: &Resolutions) -> Result<InequalityReport> {
    require_fits(u, d)?;
    Draft::new(InequalityId::PoincareWirtinger, u, d, res).param("p", p).finish(|res| {
        let mean = integrate_interior_fn(d, &|x: &[f64]| u.value(x), &res.rule).value / d.gamma_measure;
        let lhs = integrate_interior_fn(d, &|x: &[f64]| (u.value(x) - mean).abs().powf(p), &res.rule);
        let rhs = integrate_interior_fn(d, &|x: &[f64]| u.gradient_norm(x).powf(p), &res.rule);
        Ok((Side::from_estimate(&lhs).map(|v| v.powf(1.0 / p)), Side::from_estimate(&rhs).map(|v| v.powf(1.0 / p))))
    })
}

/// `‖Tu‖_{L²(∂Ω,γ)} ≤ C ‖u‖_{W^{1,2}}`.
pub fn check_trace_l2(u: &ScalarField, d: &Domain) -> Result<InequalityReport> {
    trace_l2_impl(u, d, &Resolutions::default())
}

fn trace_l2_impl(u: &ScalarField, d: &Domain, res: &Resolutions) -> Result<InequalityReport> {
    require_fits(u, d)?;
    Draft::new(InequalityId::TraceL2, u, d, res).param("p", 2.0).finish(|res| {
        let lhs = integrate_boundary_fn(d, &|x: &[f64]| u.value(x).powi(2), &res.rule);
        Ok((Side::from_estimate(&lhs).map(f64::sqrt), w1p_side(u, d, 2.0, res)?))
    })
}

/// `‖Tv‖_{L²(∂Ω,γ)} ≤ C ‖∇v‖_{L²}` for `v = u − (boundary mean)`, i.e. on
/// the subspace with `∫_{∂Ω} v φ dS = 0`.
pub fn check_poincare_trace(u: &ScalarField, d: &Domain) -> Result<InequalityReport> {
    poincare_trace_impl(u, d, &Resolutions::default())
}

fn poincare_trace_impl(u: &ScalarField, d: &Domain, res: &Resolutions) -> Result<InequalityReport> {
    require_fits(u, d)?;
    Draft::new(InequalityId::PoincareTrace, u, d, res).param("p", 2.0).finish(|res| {
        let b1 = integrate_boundary_fn(d, &|_: &[f64]| 1.0, &res.rule).value;
        let bu = integrate_boundary_fn(d, &|x: &[f64]| u.value(x), &res.rule).value;
        let mean = bu / b1;
        let lhs = integrate_boundary_fn(d, &|x: &[f64]| (u.value(x) - mean).powi(2), &res.rule);
        let rhs = integrate_interior_fn(d, &|x: &[f64]| u.gradient_norm(x).powi(2), &res.rule);
        Ok((Side::from_estimate(&lhs).map(f64::sqrt), Side::from_estimate(&rhs).map(f64::sqrt)))
    })
}

/// Run the check for `id` with default resolutions.
pub fn check(id: InequalityId, u: &ScalarField, d: &Domain, p: f64, lambda: f64) -> Result<InequalityReport> {
    check_with(id, u, d, &CheckOptions { p, lambda, ..CheckOptions::default() })
}

pub fn check_with(id: InequalityId, u: &ScalarField, d: &Domain, o: &CheckOptions) -> Result<InequalityReport> {
    let res = &o.resolutions;
    match id {
        InequalityId::Gross => gross_impl(u, d, o.p, res),
        InequalityId::EmbedP => embedding_p_impl(u, d, o.p, res),
        InequalityId::EmbedInf => embedding_inf_impl(u, d, res),
        InequalityId::PoincareWirtinger => poincare_wirtinger_impl(u, d, o.p, res),
        InequalityId::TraceLogP => trace_logp_impl(u, d, o.p, o.beta.unwrap_or(0.5 * (o.p - 1.0)), res),
        InequalityId::TraceExp => trace_exp_impl(u, d, o.lambda, res),
        InequalityId::TraceL2 => trace_l2_impl(u, d, res),
        InequalityId::PoincareTrace => poincare_trace_impl(u, d, res),
    }
}

// ---------------------------------------------------------------------------
// Sharpness scans

/// `ε_k = 0.1·2^{−k}`, `k = 0..8`: distance `1 + δp` of the power family
/// from the Sobolev threshold.
pub fn family_epsilons() -> Vec<f64> {
    (0..=8).map(|k| 0.1 * 0.5f64.powi(k)).collect()
}

/// Relative growth per step needed, twice in a row, for divergence.
pub const SCAN_DIVERGENCE: f64 = 0.05;

/// Verdicts and growth record of one scanned quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermScan {
    pub name: String,
    pub verdicts: Vec<Verdict>,
    /// Per exponent: relative growth of the quantity along the family or ladder.
    pub growth: Vec<Vec<f64>>,
    /// Midpoint of the last finite and first divergent exponent.
    pub critical: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessScan {
    pub inequality: InequalityId,
    /// `alpha`, `beta` or `q`.
    pub exponent: String,
    pub grid: Vec<f64>,
    pub family: String,
    pub params: BTreeMap<String, f64>,
    /// Verdict of the scanned total (for TraceLogP: `A₁ + A₂ + A₃`).
    pub verdicts: Vec<Verdict>,
    pub growth: Vec<Vec<f64>>,
    pub critical: Option<f64>,
    /// Individual terms, when the quantity decomposes.
    pub terms: Vec<TermScan>,
}

fn growth_of(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| w[1] / w[0] - 1.0).collect()
}

fn scan_verdict(growth: &[f64]) -> Verdict {
    let n = growth.len();
    if n >= 2 && growth[n - 1] >= SCAN_DIVERGENCE && growth[n - 2] >= SCAN_DIVERGENCE {
        Verdict::Divergent
    } else {
        Verdict::Finite
    }
}

fn critical_of(grid: &[f64], verdicts: &[Verdict], what: &str) -> Result<Option<f64>> {
    let first_div = verdicts.iter().position(|v| *v == Verdict::Divergent);
    if let Some(k) = first_div {
        if verdicts[k..].iter().any(|v| *v != Verdict::Divergent) {
            return Err(Error::Quadrature(format!("non-monotone verdicts in {what} scan: {verdicts:?}")));
        }
        if k == 0 {
            return Ok(None);
        }
        return Ok(Some(0.5 * (grid[k - 1] + grid[k])));
    }
    Ok(None)
}

fn term_scan(name: &str, grid: &[f64], values: Vec<Vec<f64>>) -> Result<TermScan> {
    let growth: Vec<Vec<f64>> = values.iter().map(|v| growth_of(v)).collect();
    let verdicts: Vec<Verdict> = growth.iter().map(|g| scan_verdict(g)).collect();
    let critical = critical_of(grid, &verdicts, name)?;
    Ok(TermScan { name: name.into(), verdicts, growth, critical })
}

/// `‖u‖_{W^{1,p}}` of the power-family member `δ` on `{x_N < 0}`.
fn power_w1p(delta: f64, p: f64) -> Result<f64> {
    let (lp, grad) = level_form_integrals(LevelForm::Power { delta }, 0.0, p);
    if !(lp.decayed && grad.decayed) {
        return Err(Error::Quadrature(format!("W^(1,{p}) integral of power({delta}) did not decay")));
    }
    Ok((lp.ln_value / p).exp() + (grad.ln_value / p).exp())
}

fn ln_tail(l: &(dyn Fn(f64) -> f64 + Sync), t0: f64) -> Result<f64> {
    let e = quadrature::ln_integral_tail(&|t| l(t), t0, 2e6, 8);
    if !e.decayed {
        return Err(Error::Quadrature("level integral did not decay before t = 2e6".into()));
    }
    Ok(e.ln_value)
}

/// Ratio `‖u_δ‖_{L^p(log L)^α} / ‖u_δ‖_{W^{1,p}}` along the power family.
pub fn embed_p_ratios(p: f64, alpha: f64) -> Result<Vec<f64>> {
    family_epsilons()
        .into_iter()
        .map(|eps| {
            let delta = (eps - 1.0) / p;
            let form = LevelForm::Power { delta };
            let ln_lhs = ln_tail(&|t: f64| alpha * p * t.ln_1p() + p * form.ln_value(t) - t, std::f64::consts::LN_2)?;
            Ok((ln_lhs / p).exp() / power_w1p(delta, p)?)
        })
        .collect()
}

/// EmbedP α-scan along the power family on `{x_N < 0}`.
pub fn scan_embed_p(p: f64, grid: &[f64]) -> Result<SharpnessScan> {
    let values: Vec<Vec<f64>> = grid.par_iter().map(|&a| embed_p_ratios(p, a)).collect::<Result<_>>()?;
    let total = term_scan("ratio", grid, values)?;
    Ok(SharpnessScan {
        inequality: InequalityId::EmbedP,
        exponent: "alpha".into(),
        grid: grid.to_vec(),
        family: format!("power, delta = (eps-1)/{p}, eps = 0.1*2^-k"),
        params: BTreeMap::from([("p".into(), p)]),
        verdicts: total.verdicts,
        growth: total.growth,
        critical: total.critical,
        terms: vec![],
    })
}

/// EmbedInf α-scan: `sup (1 − ln s)^α u^⊛(s)` on the log-family profile,
/// classified by depth doubling out to `t = 512`.
pub fn scan_embed_inf(delta: f64, grid: &[f64]) -> Result<SharpnessScan> {
    let profile = RearrangementProfile::analytic(LevelForm::Log { delta }, 0.0, 512, ANALYTIC_PROFILE_DEPTH);
    let norms: Vec<_> = grid
        .iter()
        .map(|&a| Ok(rearrange::zygmund_norm(&profile, ZygmundParams::new(f64::INFINITY, a)?)))
        .collect::<Result<_>>()?;
    let growth: Vec<Vec<f64>> = norms.iter().map(|n| n.growth.clone()).collect();
    let verdicts: Vec<Verdict> = growth.iter().map(|g| scan_verdict(g)).collect();
    let critical = critical_of(grid, &verdicts, "embed_inf")?;
    Ok(SharpnessScan {
        inequality: InequalityId::EmbedInf,
        exponent: "alpha".into(),
        grid: grid.to_vec(),
        family: format!("log, delta = {delta}"),
        params: BTreeMap::from([("delta".into(), delta)]),
        verdicts,
        growth,
        critical,
        terms: vec![],
    })
}

/// Interior terms of the boundary integral of `|u|^p log^β(2+|u|)` for
/// `u = F(Φ(x_N))` on `{x_N < 0}`, in log form:
/// `A₁ = ∫ p|u|^{p−1} log^β(2+|u|) |∂_N u| dγ`,
/// `A₂ = ∫ β|u|^p log^{β−1}(2+|u|)/(2+|u|) |∂_N u| dγ`,
/// `A₃ = −∫ |u|^p log^β(2+|u|) x_N dγ`.
///
/// The divergence theorem gives `∫_{∂Ω} = A₃ − A₁ − A₂` when all are finite.
pub fn trace_terms(form: LevelForm, p: f64, beta: f64) -> Result<[f64; 3]> {
    let t0 = std::f64::consts::LN_2;
    let grad = move |t: f64| form.ln_slope(t) + gaussian::ln_isoperimetric_ratio(t).expect("positive level");
    let llog = move |t: f64| ln_two_plus_exp(form.ln_value(t)).ln();
    let a1 = ln_tail(&|t: f64| p.ln() + (p - 1.0) * form.ln_value(t) + beta * llog(t) + grad(t) - t, t0)?;
    let a2 = if beta == 0.0 {
        f64::NEG_INFINITY
    } else {
        ln_tail(
            &|t: f64| beta.ln() + p * form.ln_value(t) + (beta - 1.0) * llog(t) - ln_two_plus_exp(form.ln_value(t)) + grad(t) - t,
            t0,
        )?
    };
    let a3 = ln_tail(
        &|t: f64| p * form.ln_value(t) + beta * llog(t) + (-quadrature::lower_tail_x(t)).ln() - t,
        t0,
    )?;
    Ok([a1.exp(), a2.exp(), a3.exp()])
}

/// TraceLogP β-scan: `A₁, A₂, A₃` and their sum, each over `‖u_δ‖^p_{W^{1,p}}`,
/// along the power family.
pub fn scan_trace_logp(p: f64, grid: &[f64]) -> Result<SharpnessScan> {
    let per_beta: Vec<Vec<[f64; 4]>> = grid
        .par_iter()
        .map(|&beta| {
            family_epsilons()
                .into_iter()
                .map(|eps| {
                    let delta = (eps - 1.0) / p;
                    let w = power_w1p(delta, p)?.powf(p);
                    let [a1, a2, a3] = trace_terms(LevelForm::Power { delta }, p, beta)?;
                    Ok([a1 / w, a2 / w, a3 / w, (a1 + a2 + a3) / w])
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let column = |j: usize| per_beta.iter().map(|row| row.iter().map(|v| v[j]).collect()).collect::<Vec<Vec<f64>>>();
    let total = term_scan("A1+A2+A3", grid, column(3))?;
    let terms = vec![term_scan("A1", grid, column(0))?, term_scan("A2", grid, column(1))?, term_scan("A3", grid, column(2))?];
    Ok(SharpnessScan {
        inequality: InequalityId::TraceLogP,
        exponent: "beta".into(),
        grid: grid.to_vec(),
        family: format!("power, delta = (eps-1)/{p}, eps = 0.1*2^-k"),
        params: BTreeMap::from([("p".into(), p), ("expected_threshold".into(), 0.5 * (p - 1.0))]),
        verdicts: total.verdicts,
        growth: total.growth,
        critical: total.critical,
        terms,
    })
}

/// Depths of the ladder used by the exponential-trace scan.
pub const EXP_SCAN_DEPTHS: [f64; 3] = [128.0, 256.0, 512.0];

/// Interior terms of the boundary integral of `exp(λ|u|^q)` for the log
/// family `u = (1 − ln Φ(x_N))^δ` on `{x_N < 0}`, integrated to `depth`:
/// `E₁ = ∫ λq|u|^{q−1} e^{λ|u|^q} |∂_N u| dγ` and `E₃ = −∫ e^{λ|u|^q} x_N dγ`.
pub fn exp_trace_terms(delta: f64, lambda: f64, q: f64, depth: f64) -> [f64; 2] {
    let form = LevelForm::Log { delta };
    let t0 = std::f64::consts::LN_2;
    let grad = move |t: f64| form.ln_slope(t) + gaussian::ln_isoperimetric_ratio(t).expect("positive level");
    let e1 = quadrature::ln_integral_tail(
        &|t: f64| (lambda * q).ln() + (q - 1.0) * form.ln_value(t) + lambda * (q * form.ln_value(t)).exp() + grad(t) - t,
        t0,
        depth,
        8,
    );
    let e3 = quadrature::ln_integral_tail(
        &|t: f64| lambda * (q * form.ln_value(t)).exp() + (-quadrature::lower_tail_x(t)).ln() - t,
        t0,
        depth,
        8,
    );
    [e1.ln_value.exp(), e3.ln_value.exp()]
}

/// TraceExp scan of the power `q` in `exp(λ|u|^q)` on the log family with `δ = 1/2`.
pub fn scan_trace_exp(lambda: f64, grid: &[f64]) -> Result<SharpnessScan> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Domain(format!("lambda must lie in (0, 1), got {lambda}")));
    }
    let delta = 0.5;
    let rows: Vec<Vec<[f64; 3]>> = grid
        .par_iter()
        .map(|&q| {
            EXP_SCAN_DEPTHS
                .iter()
                .map(|&depth| {
                    let [e1, e3] = exp_trace_terms(delta, lambda, q, depth);
                    [e1, e3, e1 + e3]
                })
                .collect()
        })
        .collect();
    let column = |j: usize| rows.iter().map(|row| row.iter().map(|v| v[j]).collect()).collect::<Vec<Vec<f64>>>();
    let total = term_scan("E1+E3", grid, column(2))?;
    let terms = vec![term_scan("E1", grid, column(0))?, term_scan("E3", grid, column(1))?];
    Ok(SharpnessScan {
        inequality: InequalityId::TraceExp,
        exponent: "q".into(),
        grid: grid.to_vec(),
        family: format!("log, delta = {delta}"),
        params: BTreeMap::from([("lambda".into(), lambda)]),
        verdicts: total.verdicts,
        growth: total.growth,
        critical: total.critical,
        terms,
    })
}

/// Dispatch on the inequality; `p` is used by EmbedP and TraceLogP, `lambda`
/// by TraceExp.
pub fn sharpness_scan(id: InequalityId, grid: &[f64], p: f64, lambda: f64) -> Result<SharpnessScan> {
    match id {
        InequalityId::EmbedP => scan_embed_p(p, grid),
        InequalityId::EmbedInf => scan_embed_inf(0.5, grid),
        InequalityId::TraceLogP => scan_trace_logp(p, grid),
        InequalityId::TraceExp => scan_trace_exp(lambda, grid),
        other => Err(Error::Precondition(format!("no sharpness scan for {other}"))),
    }
}

/// Default exponent grids of the bundled scans.
pub fn default_grid(id: InequalityId) -> Vec<f64> {
    match id {
        InequalityId::EmbedP => vec![0.3, 0.4, 0.5, 0.6, 0.7],
        InequalityId::EmbedInf => vec![-0.7, -0.6, -0.5, -0.4, -0.3],
        InequalityId::TraceLogP => vec![0.25, 0.5, 0.75, 1.0, 1.25],
        InequalityId::TraceExp => vec![1.5, 1.75, 2.0, 2.25, 2.5],
        _ => vec![],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{density_1d, FRAC_1_SQRT_2PI};
    use crate::testbed::*;

    #[test]
    fn ids_round_trip() {
        for id in InequalityId::ALL {
            assert_eq!(InequalityId::parse(id.key()), Some(id));
        }
        assert_eq!(InequalityId::parse("trace-logp"), Some(InequalityId::TraceLogP));
    }

    #[test]
    fn gross_constants_saturate() {
        let r = check_gross(&ScalarField::constant(3.0), &line_domain(), 2.0).unwrap();
        assert_eq!(r.verdict, ReportVerdict::Holds);
        assert!((r.lhs - 9.0 * 3f64.ln()).abs() < 1e-9);
        assert!((r.lhs - r.rhs).abs() < 1e-9);
    }

    #[test]
    fn gross_exponential_is_equality() {
        // u = e^{λx}: ∫u^p ln u = pλ² e^{p²λ²/2}, (p/2)∫|u'|²u^{p−2} = (p/2)λ² e^{p²λ²/2},
        // ‖u‖_p^p ln‖u‖_p = e^{p²λ²/2}·pλ²/2
        for p in [2.0, 3.0] {
            let lam = 0.5;
            let r = check_gross(&exponential_field(lam), &line_domain(), p).unwrap();
            let want = p * lam * lam * (p * p * lam * lam / 2.0).exp();
            assert!((r.lhs / want - 1.0).abs() < 1e-10);
            assert!((r.rhs / want - 1.0).abs() < 1e-10);
            assert!((r.fitted_c - 1.0).abs() < 1e-9);
            assert_eq!(r.verdict, ReportVerdict::Holds);
        }
    }

    #[test]
    fn gross_polynomial_holds_with_gap() {
        let r = check_gross(&one_plus_square_field(), &line_domain(), 2.0).unwrap();
        assert_eq!(r.verdict, ReportVerdict::Holds);
        assert!(r.fitted_c < 1.0 && r.fitted_c > 0.0);
    }

    #[test]
    fn gross_singular_cases() {
        let r = check_gross(&hermite1_field(), &line_domain(), 1.5).unwrap();
        assert_eq!(r.verdict, ReportVerdict::Inapplicable);
        let r = check_gross(&ScalarField::constant(1.0), &Domain::half_line(0.0).unwrap(), 2.0).unwrap();
        assert_eq!(r.verdict, ReportVerdict::Inapplicable);
    }

    #[test]
    fn embedding_holds_on_power_member() {
        let d = Domain::half_line(0.0).unwrap();
        let r = check_embedding_p(&power_field(-0.3), &d, 2.0).unwrap();
        assert_eq!(r.verdict, ReportVerdict::Holds);
        assert!(r.refinement.stable(0.2));
        assert!(!r.tripwire);
    }

    #[test]
    fn embedding_is_one_homogeneous() {
        let d = Domain::half_plane(0.0).unwrap();
        let u = bump_field([0.0, -0.5]);
        let a = check_embedding_p(&u, &d, 2.0).unwrap();
        let b = check_embedding_p(&u.scaled(2.0), &d, 2.0).unwrap();
        assert!((b.lhs / a.lhs - 2.0).abs() < 1e-12);
        assert!((b.rhs / a.rhs - 2.0).abs() < 1e-12);
    }

    #[test]
    fn trace_logp_closed_forms() {
        let hp = Domain::half_plane(0.0).unwrap();
        let r = check_trace_logp(&ScalarField::constant(1.0), &hp, 2.0).unwrap();
        assert!((r.lhs - 3f64.ln().sqrt() * FRAC_1_SQRT_2PI).abs() < 1e-13);
        assert!((r.rhs - 0.5).abs() < 1e-12);
        let delta = -0.3;
        let r = check_trace_logp(&power_field(delta), &hp, 2.0).unwrap();
        let b = 0.5f64.powf(delta);
        let want = b * b * (2.0 + b).ln().sqrt() * density_1d(0.0);
        assert!((r.lhs - want).abs() < 1e-12);
        assert_eq!(r.verdict, ReportVerdict::Holds);
    }

    #[test]
    fn trace_terms_reproduce_boundary_integral() {
        for (delta, beta) in [(-0.3, 0.5), (-0.45, 0.75), (-0.1, 1.0)] {
            let p = 2.0;
            let [a1, a2, a3] = trace_terms(LevelForm::Power { delta }, p, beta).unwrap();
            let b = 0.5f64.powf(delta);
            let boundary = b.powf(p) * (2.0 + b).ln().powf(beta) * density_1d(0.0);
            assert!(((a3 - a1 - a2) / boundary - 1.0).abs() < 1e-8, "{delta} {beta}");
        }
    }

    #[test]
    fn exp_terms_reproduce_boundary_integral() {
        let (lambda, q) = (0.5, 2.0);
        let [e1, e3] = exp_trace_terms(0.5, lambda, q, 1e4);
        let boundary = (lambda * (1.0 + std::f64::consts::LN_2).powf(q * 0.5)).exp() * density_1d(0.0);
        assert!(((e3 - e1) / boundary - 1.0).abs() < 1e-8);
    }

    #[test]
    fn trace_exp_rejects_bad_lambda_and_grows() {
        let hp = Domain::half_plane(0.0).unwrap();
        assert!(check_trace_exp(&ScalarField::constant(0.0), &hp, 1.0).is_err());
        let u = cutoff_log_field(0.5);
        let a = check_trace_exp(&u, &hp, 0.5).unwrap();
        let b = check_trace_exp(&u, &hp, 0.99).unwrap();
        assert_eq!(a.verdict, ReportVerdict::Holds);
        assert!(b.fitted_c > a.fitted_c);
        assert!(b.params["rate_integral"] > 100.0 * a.params["rate_integral"]);
        let z = check_trace_exp(&ScalarField::constant(0.0), &hp, 0.5).unwrap();
        assert!((z.lhs - FRAC_1_SQRT_2PI).abs() < 1e-14);
    }

    #[test]
    fn embedding_inf_cases() {
        let hp = Domain::half_plane(0.0).unwrap();
        let z = check_embedding_inf(&ScalarField::constant(0.0), &hp).unwrap();
        assert_eq!((z.lhs, z.rhs, z.verdict), (0.0, 0.0, ReportVerdict::Holds));
        let b = check_embedding_inf(&bump_field([0.0, -0.5]), &hp).unwrap();
        assert_eq!(b.verdict, ReportVerdict::Holds);
        let raw = check_embedding_inf(&log_field(0.5), &hp).unwrap();
        assert_eq!(raw.verdict, ReportVerdict::Inapplicable);
        assert!((raw.lhs - 1.0).abs() < 1e-12);
    }

    #[test]
    fn critical_midpoint_and_monotonicity() {
        use Verdict::*;
        let g = [0.1, 0.2, 0.3];
        assert_eq!(critical_of(&g, &[Finite, Divergent, Divergent], "t").unwrap(), Some(0.15000000000000002));
        assert!(critical_of(&g, &[Divergent, Finite, Divergent], "t").is_err());
        assert_eq!(critical_of(&g, &[Finite, Finite, Finite], "t").unwrap(), None);
    }
}
