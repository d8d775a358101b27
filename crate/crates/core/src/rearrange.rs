//! Distribution functions, decreasing rearrangements with respect to the
//! Gauss measure, and Zygmund norms `L^p(log L)^α`.
//!
//! Profiles are stored in the level coordinate `t = −ln s` together with
//! `ln u^⊛`, so that tails down to `s = e^{−512}` cost nothing special.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domains::{interval_measure, Axis, Domain, DomainKind};
use crate::error::{Error, Result};
use crate::field::{LevelForm, ScalarField};
use crate::gaussian;
use crate::quadrature::{self, axis_segments, log_sum_exp, AxisRule, Segment};

/// Depth (in `t = −ln Φ`) of the sampling mesh behind numerical distribution functions.
pub const SAMPLING_DEPTH: f64 = 112.0;
/// Default depth of numerically inverted profiles.
pub const NUMERIC_PROFILE_DEPTH: f64 = 96.0;
/// Default depth of analytic profiles.
pub const ANALYTIC_PROFILE_DEPTH: f64 = 512.0;

/// Sub-samples per mesh cell when scanning for level crossings.
const SAMPLES_PER_CELL: usize = 4;

/// One line of the domain along which `|u|` is sampled.
#[derive(Debug, Clone)]
struct Slice {
    /// Outer Gauss weight (1 in one dimension).
    weight: f64,
    /// Fixed first coordinate in two dimensions.
    x1: Option<f64>,
    xs: Vec<f64>,
    vals: Vec<f64>,
    /// Mass beyond the first and last sample.
    below: f64,
    above: f64,
    /// `cum[k]` is the `γ₁` mass between the first sample and sample `k`.
    cum: Vec<f64>,
    /// Maximal monotone runs of `vals` as `(first, last, increasing)`.
    runs: Vec<(usize, usize, bool)>,
    /// Whole-line mass and the range of `vals`, for levels that miss the line.
    total: f64,
    min: f64,
    max: f64,
}

/// Cached samples of `|u|` for repeated distribution-function queries.
pub struct DistributionSampler<'a> {
    u: &'a ScalarField,
    slices: Vec<Slice>,
    sup: f64,
    /// Mass not covered by any sample interval.
    unresolved: f64,
}

/// Shrink `[a, b]` with `g(a) > 0 ≥ g(b)` around the sign change of `g` until
/// `done(a, b)`. Illinois false position, with a bisection step whenever two
/// steps in a row fail to halve the bracket (plateaus, kinks, infinities).
fn bracket_root(mut a: f64, mut b: f64, g: &dyn Fn(f64) -> f64, done: impl Fn(f64, f64) -> bool) -> (f64, f64) {
    let (mut ga, mut gb) = (g(a), g(b));
    let mut side = 0i8;
    let mut slow = 0;
    for _ in 0..400 {
        if done(a, b) {
            break;
        }
        let width = b - a;
        let mut m = 0.5 * (a + b);
        if slow < 2 && ga.is_finite() && gb.is_finite() && ga > 0.0 && gb <= 0.0 {
            let f = b - gb * (b - a) / (gb - ga);
            if f > a && f < b {
                m = f;
            }
        }
        if m <= a || m >= b {
            break;
        }
        let gm = g(m);
        if gm > 0.0 {
            a = m;
            ga = gm;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        } else {
            b = m;
            gb = gm;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        }
        slow = if b - a > 0.5 * width { slow + 1 } else { 0 };
    }
    (a, b)
}

/// Split `vals` into maximal weakly monotone runs sharing their end samples.
fn monotone_runs(vals: &[f64]) -> Vec<(usize, usize, bool)> {
    let mut runs = Vec::new();
    let mut a = 0;
    while a + 1 < vals.len() {
        let mut b = a + 1;
        // direction set by the first strict step; flat steps join either
        let mut dir: Option<bool> = None;
        while b < vals.len() {
            let step = vals[b].partial_cmp(&vals[b - 1]);
            match (step, dir) {
                (Some(std::cmp::Ordering::Equal) | None, _) => {}
                (Some(o), None) => dir = Some(o == std::cmp::Ordering::Greater),
                (Some(o), Some(up)) if (o == std::cmp::Ordering::Greater) == up => {}
                _ => break,
            }
            b += 1;
        }
        runs.push((a, b - 1, dir.unwrap_or(true)));
        a = b - 1;
    }
    runs
}

fn slice_points(axis: Axis) -> Vec<f64> {
    let mut xs = Vec::new();
    for seg in axis_segments(axis, 0.25, 0, SAMPLING_DEPTH) {
        let pts: Vec<f64> = match seg {
            Segment::Cell { a, b } => (0..SAMPLES_PER_CELL).map(|k| a + (b - a) * k as f64 / SAMPLES_PER_CELL as f64).collect(),
            Segment::LowerTail { ta, tb } => (0..SAMPLES_PER_CELL)
                .map(|k| quadrature::lower_tail_x(tb - (tb - ta) * k as f64 / SAMPLES_PER_CELL as f64))
                .collect(),
            Segment::UpperTail { ta, tb } => (0..SAMPLES_PER_CELL)
                .map(|k| -quadrature::lower_tail_x(ta + (tb - ta) * k as f64 / SAMPLES_PER_CELL as f64))
                .collect(),
        };
        xs.extend(pts);
    }
    let (_, last) = axis_segments(axis, 0.25, 0, SAMPLING_DEPTH)
        .last()
        .map(Segment::x_range)
        .expect("non-empty axis");
    xs.push(last);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

impl<'a> DistributionSampler<'a> {
    pub fn new(u: &'a ScalarField, d: &Domain) -> Self {
        let lines: Vec<(f64, Option<f64>, Axis)> = match d.kind {
            DomainKind::Interval { a, b } => vec![(1.0, None, Axis::bounded(a, b))],
            DomainKind::HalfLine { omega } => vec![(1.0, None, Axis::below(omega))],
            DomainKind::Rectangle { a, b, c, d: dd } => AxisRule::new(Axis::bounded(a, b), 8, 0.5, 0)
                .nodes
                .into_iter()
                .map(|(x1, w)| (w, Some(x1), Axis::bounded(c, dd)))
                .collect(),
            DomainKind::HalfPlane { omega } => AxisRule::with_depth(Axis::real_line(), 8, 0.5, 0, 32.0)
                .nodes
                .into_iter()
                .map(|(x1, w)| (w, Some(x1), Axis::below(omega)))
                .collect(),
            DomainKind::GraphStrip { profile, c, d: dd, beta } => AxisRule::new(Axis::bounded(c, dd), 8, 0.25, 0)
                .nodes
                .into_iter()
                .map(|(x1, w)| {
                    let g = profile.value(x1);
                    (w, Some(x1), Axis::bounded(g, g + beta))
                })
                .collect(),
        };
        let slices: Vec<Slice> = lines
            .into_par_iter()
            .map(|(weight, x1, axis)| {
                let xs = slice_points(axis);
                let vals: Vec<f64> = xs
                    .iter()
                    .map(|&x| match x1 {
                        Some(x1) => u.value(&[x1, x]).abs(),
                        None => u.value(&[x]).abs(),
                    })
                    .collect();
                let below = interval_measure(axis.lower.unwrap_or(f64::NEG_INFINITY), xs[0]);
                let above = interval_measure(*xs.last().unwrap(), axis.upper.unwrap_or(f64::INFINITY));
                let mut cum = Vec::with_capacity(xs.len());
                cum.push(0.0);
                for w in xs.windows(2) {
                    cum.push(cum.last().unwrap() + interval_measure(w[0], w[1]));
                }
                let total = below + cum.last().unwrap() + above;
                let runs = monotone_runs(&vals);
                let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
                let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                Slice { weight, x1, xs, vals, below, above, cum, runs, total, min, max }
            })
            .collect();
        let sup = slices
            .iter()
            .flat_map(|s| s.vals.iter().copied())
            .filter(|v| v.is_finite())
            .fold(0.0, f64::max);
        let unresolved = slices.iter().map(|s| s.weight * (s.below + s.above)).sum();
        Self { u, slices, sup, unresolved }
    }

    /// Largest sampled `|u|`.
    pub fn sup(&self) -> f64 {
        self.sup
    }

    fn eval(&self, x1: Option<f64>, x: f64) -> f64 {
        match x1 {
            Some(x1) => self.u.value(&[x1, x]).abs(),
            None => self.u.value(&[x]).abs(),
        }
    }

    /// Crossing of `|u| = t` between two samples straddling it.
    fn crossing(&self, x1: Option<f64>, a: f64, b: f64, a_above: bool, t: f64) -> f64 {
        let g = |x: f64| if a_above { self.eval(x1, x) - t } else { t - self.eval(x1, x) };
        let (a, b) = bracket_root(a, b, &g, |a, b| b - a <= 1e-15 * a.abs().max(b.abs()).max(1.0));
        0.5 * (a + b)
    }

    fn slice_measure(&self, s: &Slice, t: f64) -> f64 {
        if s.min > t {
            return s.total;
        }
        if !(s.max > t) {
            return 0.0;
        }
        let n = s.xs.len();
        let mut total = 0.0;
        if s.vals[0] > t {
            total += s.below;
        }
        if s.vals[n - 1] > t {
            total += s.above;
        }
        for &(a, b, increasing) in &s.runs {
            let run = &s.vals[a..=b];
            if increasing {
                // samples above t form the suffix starting at j
                let j = a + run.partition_point(|&v| !(v > t));
                if j > b {
                    continue;
                }
                total += s.cum[b] - s.cum[j];
                if j > a {
                    total += interval_measure(self.crossing(s.x1, s.xs[j - 1], s.xs[j], false, t), s.xs[j]);
                }
            } else {
                // samples above t form the prefix ending before j
                let j = a + run.partition_point(|&v| v > t);
                if j == a {
                    continue;
                }
                total += s.cum[j - 1] - s.cum[a];
                if j <= b {
                    total += interval_measure(s.xs[j - 1], self.crossing(s.x1, s.xs[j - 1], s.xs[j], true, t));
                }
            }
        }
        total
    }

    /// `γ({|u| > t})`.
    pub fn measure(&self, t: f64) -> f64 {
        let terms: Vec<f64> = self.slices.iter().map(|s| s.weight * self.slice_measure(s, t)).collect();
        quadrature::pairwise_sum(&terms)
    }
}

/// `γ_u(t) = γ({x ∈ Ω : |u(x)| > t})`.
///
/// Super-level sets are located exactly along sampling lines (crossings found
/// by bisection) and measured with differences of `Φ`; in two dimensions the
/// line measures are integrated against the first marginal.
pub fn distribution_function(u: &ScalarField, d: &Domain, t: f64) -> f64 {
    DistributionSampler::new(u, d).measure(t.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileSource {
    Analytic,
    Inverted,
}

/// Non-increasing table `s ↦ u^⊛(s)` on `(0, γ(Ω)]`, kept as
/// `t_i = −ln s_i` ascending and `ln u^⊛(s_i)` non-decreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RearrangementProfile {
    pub gamma: f64,
    pub t: Vec<f64>,
    pub ln_u: Vec<f64>,
    pub levels: usize,
    pub source: ProfileSource,
    /// Against the analytic profile, when the field has one.
    pub max_rel_deviation: Option<f64>,
}

/// Level grid on `[−ln γ, t_max]`, dense near `s = γ` and spaced up to
/// `2(t_max − t₀)/levels` in the deep tail.
pub fn level_grid(gamma: f64, levels: usize, t_max: f64) -> Vec<f64> {
    let t0 = -gamma.ln();
    let n = levels.max(2);
    (0..n)
        .map(|i| {
            let r = i as f64 / (n - 1) as f64;
            t0 + (t_max - t0) * r * r
        })
        .collect()
}

impl RearrangementProfile {
    /// Profile of `F(Φ(x_N))` on `{x_N < ω}`: `u^⊛ = F` on `(0, Φ(ω)]`.
    pub fn analytic(form: LevelForm, omega: f64, levels: usize, t_max: f64) -> Self {
        Self::from_ln_fn(gaussian::cdf(omega), &|t| form.ln_value(t), levels, t_max)
    }

    /// Tabulate a known profile given as `t ↦ ln u^⊛(e^{−t})`.
    pub fn from_ln_fn(gamma: f64, ln_u: &dyn Fn(f64) -> f64, levels: usize, t_max: f64) -> Self {
        let t = level_grid(gamma, levels, t_max);
        let ln_u = t.iter().map(|&ti| ln_u(ti)).collect();
        Self { gamma, t, ln_u, levels, source: ProfileSource::Analytic, max_rel_deviation: None }
    }

    /// Constant profile `c` on `(0, γ]`.
    pub fn constant(c: f64, gamma: f64, levels: usize) -> Self {
        let t = level_grid(gamma, levels, NUMERIC_PROFILE_DEPTH);
        let ln_u = vec![c.abs().ln(); t.len()];
        Self { gamma, t, ln_u, levels, source: ProfileSource::Analytic, max_rel_deviation: None }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn s(&self, i: usize) -> f64 {
        (-self.t[i]).exp()
    }

    pub fn value(&self, i: usize) -> f64 {
        self.ln_u[i].exp()
    }

    pub fn depth(&self) -> f64 {
        *self.t.last().expect("non-empty profile")
    }

    /// `u^⊛(s)` by interpolation (log-linear in `t` where both ends are positive).
    pub fn value_at(&self, s: f64) -> f64 {
        let t = -s.ln();
        let k = self.t.partition_point(|&ti| ti < t);
        if k == 0 {
            return self.value(0);
        }
        if k >= self.len() {
            return self.value(self.len() - 1);
        }
        let (ta, tb) = (self.t[k - 1], self.t[k]);
        let r = (t - ta) / (tb - ta);
        interp(self.ln_u[k - 1], self.ln_u[k], r)
    }

    /// The profile cut at depth `t_cut`.
    pub fn truncated(&self, t_cut: f64) -> Self {
        let k = self.t.partition_point(|&ti| ti <= t_cut).max(2);
        let mut out = self.clone();
        out.t.truncate(k);
        out.ln_u.truncate(k);
        out
    }

    /// `ln ∫_{s_min}^{γ} w(t) (u^⊛)^p ds` with `ln w` given in `t`.
    fn ln_weighted_integral(&self, p: f64, ln_w: &(dyn Fn(f64) -> f64 + Sync)) -> f64 {
        const NODES: [f64; 4] = [-0.861_136_311_594_052_6, -0.339_981_043_584_856_3, 0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
        const WEIGHTS: [f64; 4] = [0.347_854_845_137_453_9, 0.652_145_154_862_546_1, 0.652_145_154_862_546_1, 0.347_854_845_137_453_9];
        let terms: Vec<f64> = (0..self.len() - 1)
            .into_par_iter()
            .flat_map_iter(|i| {
                let (ta, tb) = (self.t[i], self.t[i + 1]);
                let (la, lb) = (self.ln_u[i], self.ln_u[i + 1]);
                let half = 0.5 * (tb - ta);
                NODES.iter().zip(WEIGHTS).map(move |(z, w)| {
                    let r = 0.5 * (1.0 + z);
                    let t = ta + 2.0 * half * r;
                    let ln_u = interp(la, lb, r).ln();
                    (w * half).ln() + ln_w(t) + p * ln_u - t
                })
            })
            .collect();
        log_sum_exp(&terms)
    }

    /// `∫₀^{γ} (u^⊛)^p ds` over the tabulated range.
    pub fn lp_integral(&self, p: f64) -> f64 {
        self.ln_weighted_integral(p, &|_| 0.0).exp()
    }

    /// CSV with columns `s,u_star`, deepest level first.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,u_star\n");
        for i in (0..self.len()).rev() {
            let _ = writeln!(out, "{:.17e},{:.17e}", self.s(i), self.value(i));
        }
        out
    }
}

/// Largest log-ratio of neighbouring levels that is still interpolated
/// geometrically. Larger jumps only occur where `u^⊛` runs into a zero, and
/// there `u^⊛` is close to linear in `t`.
const MAX_GEOMETRIC_JUMP: f64 = 2.772_588_722_239_781; // ln 16

/// Interpolate `u` between `e^{la}` and `e^{lb}`: geometric when both are
/// positive and comparable, linear otherwise.
fn interp(la: f64, lb: f64, r: f64) -> f64 {
    if la.is_finite() && lb.is_finite() && (lb - la).abs() <= MAX_GEOMETRIC_JUMP {
        (la + (lb - la) * r).exp()
    } else {
        la.exp() + (lb.exp() - la.exp()) * r
    }
}

/// `u^⊛` on `levels` grid points by inverting the distribution function.
///
/// Each level is solved by bisection in `ln τ`. Fields of the level-form
/// families on half-spaces are also compared with their analytic profile.
pub fn rearrangement(u: &ScalarField, d: &Domain, levels: usize) -> Result<RearrangementProfile> {
    rearrangement_to_depth(u, d, levels, NUMERIC_PROFILE_DEPTH)
}

pub fn rearrangement_to_depth(u: &ScalarField, d: &Domain, levels: usize, t_max: f64) -> Result<RearrangementProfile> {
    if levels < 16 {
        return Err(Error::Rearrangement(format!("need at least 16 levels, got {levels}")));
    }
    if t_max > SAMPLING_DEPTH - 8.0 {
        return Err(Error::Rearrangement(format!(
            "profile depth {t_max} exceeds the sampling mesh; supply an analytic profile"
        )));
    }
    let sampler = DistributionSampler::new(u, d);
    let gamma = d.gamma_measure;
    let t = level_grid(gamma, levels, t_max);
    let s_min = (-t_max).exp();
    if sampler.unresolved > 0.1 * s_min && sampler.unresolved > 0.0 {
        return Err(Error::Rearrangement(format!(
            "unresolved mass {} beyond the sampling mesh exceeds the deepest level {s_min}",
            sampler.unresolved
        )));
    }
    let sup = sampler.sup();
    let invert = |ti: f64| -> f64 {
        // just inside the level so that u^⊛(γ(Ω)) is the essential infimum
        let s = (-ti).exp() * (1.0 - 1e-10);
        if sup == 0.0 || sampler.measure(0.0) <= s {
            return f64::NEG_INFINITY;
        }
        // y = ln τ; ln γ_u(e^y) − ln s is positive below the level
        let ln_s = s.ln();
        let hi = (sup * (1.0 + 1e-12)).ln();
        let lo = hi - 690.0;
        let h = |y: f64| sampler.measure(y.exp()).ln() - ln_s;
        if !(h(lo) > 0.0) {
            return f64::NEG_INFINITY;
        }
        let (_, hi) = bracket_root(lo, hi, &h, |a, b| b - a < 1e-13);
        hi
    };
    let ln_u: Vec<f64> = t.par_iter().map(|&ti| invert(ti)).collect();
    let (t, mut ln_u) = refine_levels(t, ln_u, levels, &invert);
    // enforce monotonicity against bisection round-off
    for i in 1..ln_u.len() {
        if ln_u[i] < ln_u[i - 1] {
            ln_u[i] = ln_u[i - 1];
        }
    }
    let max_rel_deviation = match (u.level_form(), d.kind) {
        (Some(form), DomainKind::HalfLine { .. } | DomainKind::HalfPlane { .. }) => Some(
            t.iter()
                .zip(&ln_u)
                .map(|(&ti, &l)| (l - form.ln_value(ti)).exp_m1().abs())
                .fold(0.0, f64::max),
        ),
        _ => None,
    };
    Ok(RearrangementProfile { gamma, t, ln_u, levels, source: ProfileSource::Inverted, max_rel_deviation })
}

/// Share of `∫ (u^⊛)^q ds` (q = 1, 3) one cell may lose to interpolation.
const REFINE_TOL: f64 = 2e-6;
const REFINE_PASSES: usize = 8;

/// Bisect the cells of a level grid where the interpolant misses the inverted
/// value at the cell midpoint, typically where `u^⊛` runs into a zero or a
/// flat edge. Every evaluated midpoint is kept.
fn refine_levels(mut t: Vec<f64>, mut ln_u: Vec<f64>, levels: usize, invert: &(dyn Fn(f64) -> f64 + Sync)) -> (Vec<f64>, Vec<f64>) {
    let max_nodes = 16 * levels;
    let mut open: Vec<bool> = vec![true; t.len().saturating_sub(1)];
    for _ in 0..REFINE_PASSES {
        let coarse = RearrangementProfile {
            gamma: 0.0,
            t: t.clone(),
            ln_u: ln_u.clone(),
            levels,
            source: ProfileSource::Inverted,
            max_rel_deviation: None,
        };
        let scale = [coarse.lp_integral(1.0), coarse.lp_integral(3.0)];
        let cells: Vec<usize> = (0..t.len() - 1).filter(|&i| open[i]).collect();
        if cells.is_empty() || t.len() + cells.len() > max_nodes || !scale.iter().all(|v| v.is_finite() && *v > 0.0) {
            break;
        }
        let mids: Vec<(f64, f64, bool)> = cells
            .par_iter()
            .map(|&i| {
                let tm = 0.5 * (t[i] + t[i + 1]);
                let lm = invert(tm);
                let (um, ui) = (lm.exp(), interp(ln_u[i], ln_u[i + 1], 0.5));
                let ds = (-t[i]).exp() - (-t[i + 1]).exp();
                let miss = [1.0, 3.0].iter().zip(scale).any(|(&q, sc)| (um.powf(q) - ui.powf(q)).abs() * ds > REFINE_TOL * sc);
                (tm, lm, miss)
            })
            .collect();
        let mut nt = Vec::with_capacity(t.len() + mids.len());
        let mut nl = Vec::with_capacity(nt.capacity());
        let mut nopen = Vec::with_capacity(nt.capacity());
        let mut next = mids.iter().zip(&cells).peekable();
        for i in 0..t.len() {
            nt.push(t[i]);
            nl.push(ln_u[i]);
            if i + 1 == t.len() {
                break;
            }
            match next.peek() {
                Some((&(tm, lm, miss), &c)) if c == i => {
                    nt.push(tm);
                    nl.push(lm);
                    nopen.extend([miss, miss]);
                    next.next();
                }
                _ => nopen.push(false),
            }
        }
        t = nt;
        ln_u = nl;
        open = nopen;
    }
    (t, ln_u)
}

/// Profile of `u` on `d`: analytic for the level-form families on
/// half-spaces, otherwise inverted numerically.
pub fn profile_for(u: &ScalarField, d: &Domain, levels: usize) -> Result<RearrangementProfile> {
    match (u.level_form(), d.kind) {
        (Some(form), DomainKind::HalfLine { omega } | DomainKind::HalfPlane { omega }) => {
            Ok(RearrangementProfile::analytic(form, omega, levels.max(256), ANALYTIC_PROFILE_DEPTH))
        }
        _ => rearrangement(u, d, levels),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZygmundParams {
    /// `p ∈ [1, ∞]`.
    pub p: f64,
    pub alpha: f64,
}

impl ZygmundParams {
    pub fn new(p: f64, alpha: f64) -> Result<Self> {
        if !(p >= 1.0) || alpha.is_nan() {
            return Err(Error::Domain(format!("Zygmund parameters need p >= 1, got p={p}, alpha={alpha}")));
        }
        Ok(Self { p, alpha })
    }

    /// The space is non-trivial iff `p < ∞`, or `p = ∞` and `α ≤ 0`.
    pub fn nontrivial(&self) -> bool {
        self.p.is_finite() || self.alpha <= 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Finite,
    Divergent,
    Indeterminate,
}

/// Thresholds of the refinement-growth test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerdictRule {
    /// Divergent when the last two relative growths both reach this.
    pub diverge: f64,
    /// Finite when the last relative growth is at most this.
    pub converge: f64,
    /// Also finite when the growth is below `diverge` and shrinks at least by
    /// this factor per doubling (sup norms approach their limit like `1/t`).
    pub decay: f64,
}

impl Default for VerdictRule {
    fn default() -> Self {
        Self { diverge: 0.05, converge: 1e-4, decay: 0.6 }
    }
}

impl VerdictRule {
    pub fn classify(&self, growth: &[f64]) -> Verdict {
        let n = growth.len();
        if n >= 2 && growth[n - 1] >= self.diverge && growth[n - 2] >= self.diverge {
            Verdict::Divergent
        } else if (n >= 1 && growth[n - 1].abs() <= self.converge)
            || (n >= 2 && growth[n - 1] < self.diverge && growth[n - 1].abs() <= self.decay * growth[n - 2].abs())
        {
            Verdict::Finite
        } else {
            Verdict::Indeterminate
        }
    }
}

/// A Zygmund norm with its growth record across depth doublings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZygmundNorm {
    /// Value on the full profile.
    pub value: f64,
    pub verdict: Verdict,
    /// Depths of the nested truncations, ascending.
    pub depths: Vec<f64>,
    pub values: Vec<f64>,
    /// Relative growth between consecutive truncations.
    pub growth: Vec<f64>,
}

fn norm_on(profile: &RearrangementProfile, params: ZygmundParams) -> f64 {
    let alpha = params.alpha;
    if params.p.is_infinite() {
        profile
            .t
            .iter()
            .zip(&profile.ln_u)
            .map(|(&t, &l)| (alpha * t.ln_1p() + l).exp())
            .fold(0.0, f64::max)
    } else {
        let p = params.p;
        (profile.ln_weighted_integral(p, &move |t: f64| alpha * p * t.ln_1p()) / p).exp()
    }
}

/// `‖u‖_{L^p(log L)^α} = (∫₀^{γ} [(1 − ln s)^α u^⊛(s)]^p ds)^{1/p}`, or the
/// supremum for `p = ∞`.
///
/// The verdict compares the norm on the profile cut at a quarter, half and
/// all of its depth (a third, two thirds and all for inverted profiles).
pub fn zygmund_norm(profile: &RearrangementProfile, params: ZygmundParams) -> ZygmundNorm {
    zygmund_norm_with(profile, params, VerdictRule::default())
}

pub fn zygmund_norm_with(profile: &RearrangementProfile, params: ZygmundParams, rule: VerdictRule) -> ZygmundNorm {
    let full = profile.depth();
    let t0 = profile.t[0];
    // inverted profiles are shallow and bounded fields saturate inside them,
    // so their ladder starts deeper
    let fractions = match profile.source {
        ProfileSource::Analytic => [0.25, 0.5, 1.0],
        ProfileSource::Inverted => [1.0 / 3.0, 2.0 / 3.0, 1.0],
    };
    let depths: Vec<f64> = fractions.iter().map(|f| (f * full).max(t0 + 1.0).min(full)).collect();
    let values: Vec<f64> = depths.iter().map(|&d| norm_on(&profile.truncated(d), params)).collect();
    let growth: Vec<f64> = values
        .windows(2)
        .map(|w| if w[0] == w[1] { 0.0 } else { w[1] / w[0] - 1.0 })
        .collect();
    let value = *values.last().expect("three depths");
    let verdict = if value.is_infinite() { Verdict::Divergent } else { rule.classify(&growth) };
    ZygmundNorm { value, verdict, depths, values, growth }
}

/// Outcome of testing `L^p(log L)^α ⊆ L^r(log L)^β` on one field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionReport {
    pub high: ZygmundNorm,
    pub low: ZygmundNorm,
    /// False only if the `(p, α)` norm is finite while the `(r, β)` norm diverges.
    pub consistent: bool,
}

pub fn zygmund_inclusion_check(
    u: &ScalarField,
    d: &Domain,
    p: f64,
    r: f64,
    alpha: f64,
    beta: f64,
) -> Result<InclusionReport> {
    if !(1.0 <= r && r < p) {
        return Err(Error::Domain(format!("inclusion needs 1 <= r < p, got r={r}, p={p}")));
    }
    let profile = profile_for(u, d, 128)?;
    Ok(inclusion_on_profile(&profile, ZygmundParams::new(p, alpha)?, ZygmundParams::new(r, beta)?))
}

pub fn inclusion_on_profile(profile: &RearrangementProfile, high: ZygmundParams, low: ZygmundParams) -> InclusionReport {
    let high = zygmund_norm(profile, high);
    let low = zygmund_norm(profile, low);
    let consistent = !(high.verdict == Verdict::Finite && low.verdict == Verdict::Divergent);
    InclusionReport { high, low, consistent }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::cdf;

    fn power(delta: f64, dim: usize) -> ScalarField {
        ScalarField::new("power", dim, move |x| (delta * gaussian::ln_cdf(x[dim - 1])).exp())
            .with_level_form(LevelForm::Power { delta })
    }

    #[test]
    fn distribution_of_constant() {
        let d = Domain::interval(-1.0, 2.0).unwrap();
        let u = ScalarField::constant(3.0);
        assert!((distribution_function(&u, &d, 2.9) / d.gamma_measure - 1.0).abs() < 1e-14);
        assert_eq!(distribution_function(&u, &d, 3.0), 0.0);
    }

    #[test]
    fn distribution_of_power_field() {
        let d = Domain::half_line(0.0).unwrap();
        let u = power(-0.3, 1);
        for t in [0.5, 1.0, 1.5, 10.0, 1e3] {
            let want = 0.5f64.min(f64::powf(t, 1.0 / -0.3));
            let got = distribution_function(&u, &d, t);
            assert!((got - want).abs() <= 1e-10 * want, "t={t}: {got} vs {want}");
        }
    }

    #[test]
    fn distribution_of_modulus() {
        let d = Domain::interval(-9.0, 9.0).unwrap();
        let u = ScalarField::new("|x|", 1, |x| x[0].abs());
        for t in [0.1, 1.0, 3.0] {
            let want = 2.0 * cdf(-t) - 2.0 * cdf(-9.0);
            assert!((distribution_function(&u, &d, t) - want).abs() < 1e-13);
        }
    }

    #[test]
    fn power_profile_is_recovered() {
        let d = Domain::half_line(0.0).unwrap();
        let prof = rearrangement(&power(-0.3, 1), &d, 64).unwrap();
        let dev = prof.max_rel_deviation.unwrap();
        assert!(dev < 1e-8, "{dev}");
    }

    #[test]
    fn constant_profile_and_norm() {
        let d = Domain::rectangle(-1.0, 1.0, -1.0, 0.5).unwrap();
        let u = ScalarField::constant(2.0);
        let prof = rearrangement(&u, &d, 32).unwrap();
        assert!(prof.ln_u.iter().all(|&l| (l - 2f64.ln()).abs() < 1e-12));
        let n = zygmund_norm(&prof, ZygmundParams::new(2.0, 0.0).unwrap());
        assert!((n.value - 2.0 * d.gamma_measure.sqrt()).abs() < 1e-9 * n.value);
        assert_eq!(n.verdict, Verdict::Finite);
    }

    #[test]
    fn log_profile_sup_norm_threshold() {
        let prof = RearrangementProfile::analytic(LevelForm::Log { delta: 0.5 }, 0.0, 256, ANALYTIC_PROFILE_DEPTH);
        let at = |alpha| zygmund_norm(&prof, ZygmundParams::new(f64::INFINITY, alpha).unwrap()).verdict;
        assert_eq!(at(-0.6), Verdict::Finite);
        assert_eq!(at(-0.5), Verdict::Finite);
        assert_eq!(at(-0.4), Verdict::Divergent);
    }

    #[test]
    fn verdict_rule() {
        let r = VerdictRule::default();
        assert_eq!(r.classify(&[0.06, 0.05]), Verdict::Divergent);
        assert_eq!(r.classify(&[0.06, 0.04]), Verdict::Indeterminate);
        assert_eq!(r.classify(&[0.06, 1e-5]), Verdict::Finite);
        assert_eq!(r.classify(&[0.01, 0.005]), Verdict::Finite);
        assert_eq!(r.classify(&[0.035, 0.035]), Verdict::Indeterminate);
    }

    #[test]
    fn csv_export() {
        let prof = RearrangementProfile::constant(1.5, 0.5, 16);
        let csv = prof.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("s,u_star"));
        let last = csv.lines().last().unwrap();
        let mut it = last.split(',').map(|v| v.parse::<f64>().unwrap());
        assert!((it.next().unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(it.next().unwrap(), 1.5);
    }
}
