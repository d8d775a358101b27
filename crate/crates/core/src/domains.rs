//! Catalog of computational domains with graph-type boundaries.
//!
//! Every domain is a product or a vertical strip over a Lipschitz graph, so its
//! boundary splits into a handful of disjoint charts, each the graph of a
//! function over a parameter interval.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian;
use crate::quadrature::AxisRule;

/// Gaussian mass allowed outside the truncation box, summed over all sides.
pub const TRUNCATION_MASS: f64 = 1e-14;

/// Analytic Lipschitz profile `g` of a graph boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GraphShape {
    Flat { level: f64 },
    Affine { level: f64, slope: f64 },
    Sine { level: f64, amp: f64, freq: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphProfile {
    pub shape: GraphShape,
    /// Declared Lipschitz constant; checked on construction.
    pub lipschitz: f64,
}

impl GraphProfile {
    pub fn flat(level: f64) -> Self {
        Self { shape: GraphShape::Flat { level }, lipschitz: 0.0 }
    }

    pub fn sine(level: f64, amp: f64, freq: f64, lipschitz: f64) -> Self {
        Self { shape: GraphShape::Sine { level, amp, freq }, lipschitz }
    }

    pub fn value(&self, x: f64) -> f64 {
        match self.shape {
            GraphShape::Flat { level } => level,
            GraphShape::Affine { level, slope } => level + slope * x,
            GraphShape::Sine { level, amp, freq } => level + amp * (freq * x).sin(),
        }
    }

    pub fn slope(&self, x: f64) -> f64 {
        match self.shape {
            GraphShape::Flat { .. } => 0.0,
            GraphShape::Affine { slope, .. } => slope,
            GraphShape::Sine { amp, freq, .. } => amp * freq * (freq * x).cos(),
        }
    }

    /// Largest difference quotient over `samples` equispaced points of `[c, d]`.
    fn observed_lipschitz(&self, c: f64, d: f64, samples: usize) -> f64 {
        let h = (d - c) / (samples - 1) as f64;
        let mut worst = 0.0f64;
        let mut prev = self.value(c);
        for i in 1..samples {
            let x = c + h * i as f64;
            let v = self.value(x);
            worst = worst.max(((v - prev) / h).abs()).max(self.slope(x).abs());
            prev = v;
        }
        worst.max(self.slope(c).abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DomainKind {
    /// `(a, b)` in one dimension.
    Interval { a: f64, b: f64 },
    /// `(−∞, ω)` in one dimension.
    HalfLine { omega: f64 },
    /// `(a, b) × (c, d)`.
    Rectangle { a: f64, b: f64, c: f64, d: f64 },
    /// `{x₂ < ω}`.
    HalfPlane { omega: f64 },
    /// `{c < x₁ < d, g(x₁) < x₂ < g(x₁) + β}`.
    GraphStrip { profile: GraphProfile, c: f64, d: f64, beta: f64 },
}

/// A domain of the catalog together with its cached Gauss measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub kind: DomainKind,
    /// Unbounded sides are cut at this radius for meshing.
    pub truncation_radius: f64,
    pub gamma_measure: f64,
}

/// One end of a coordinate axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Axis {
    pub fn bounded(a: f64, b: f64) -> Self {
        Self { lower: Some(a), upper: Some(b) }
    }

    pub fn real_line() -> Self {
        Self { lower: None, upper: None }
    }

    pub fn below(omega: f64) -> Self {
        Self { lower: None, upper: Some(omega) }
    }

    /// Gauss measure of the axis interval.
    pub fn measure(&self) -> f64 {
        interval_measure(self.lower.unwrap_or(f64::NEG_INFINITY), self.upper.unwrap_or(f64::INFINITY))
    }
}

/// `Φ(b) − Φ(a)` evaluated on the side where it does not cancel.
pub fn interval_measure(a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if a >= 0.0 {
        gaussian::cdf(-a) - gaussian::cdf(-b)
    } else if b <= 0.0 {
        gaussian::cdf(b) - gaussian::cdf(a)
    } else {
        1.0 - gaussian::cdf(a) - gaussian::cdf(-b)
    }
}

fn truncation_radius_for(sides: usize) -> f64 {
    -gaussian::quantile(TRUNCATION_MASS / sides as f64).expect("valid probability")
}

impl Domain {
    pub fn new(kind: DomainKind) -> Result<Self> {
        let finite = |v: f64, name: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::DomainSpec(format!("{name} must be finite")))
            }
        };
        match kind {
            DomainKind::Interval { a, b } => {
                finite(a, "a")?;
                finite(b, "b")?;
                if a >= b {
                    return Err(Error::DomainSpec(format!("empty interval ({a}, {b})")));
                }
            }
            DomainKind::HalfLine { omega } | DomainKind::HalfPlane { omega } => finite(omega, "omega")?,
            DomainKind::Rectangle { a, b, c, d } => {
                for (v, n) in [(a, "a"), (b, "b"), (c, "c"), (d, "d")] {
                    finite(v, n)?;
                }
                if a >= b || c >= d {
                    return Err(Error::DomainSpec("empty rectangle".into()));
                }
            }
            DomainKind::GraphStrip { profile, c, d, beta } => {
                finite(c, "c")?;
                finite(d, "d")?;
                finite(beta, "beta")?;
                if c >= d {
                    return Err(Error::DomainSpec("empty strip base".into()));
                }
                if beta <= 0.0 {
                    return Err(Error::DomainSpec("strip height beta must be positive".into()));
                }
                if !(profile.lipschitz >= 0.0 && profile.lipschitz.is_finite()) {
                    return Err(Error::DomainSpec("undeclared Lipschitz constant".into()));
                }
                let observed = profile.observed_lipschitz(c, d, 1000);
                if observed > profile.lipschitz * (1.0 + 1e-9) + 1e-12 {
                    return Err(Error::Lipschitz { declared: profile.lipschitz, observed });
                }
            }
        }
        let unbounded_sides = match kind {
            DomainKind::Interval { .. } | DomainKind::Rectangle { .. } | DomainKind::GraphStrip { .. } => 1,
            DomainKind::HalfLine { .. } => 1,
            DomainKind::HalfPlane { .. } => 3,
        };
        let mut domain = Domain {
            kind,
            truncation_radius: truncation_radius_for(unbounded_sides),
            gamma_measure: 0.0,
        };
        domain.gamma_measure = domain.compute_measure();
        if !(domain.gamma_measure > 0.0) {
            return Err(Error::DomainSpec("domain has zero Gauss measure".into()));
        }
        Ok(domain)
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::new(DomainKind::Interval { a, b })
    }

    pub fn half_line(omega: f64) -> Result<Self> {
        Self::new(DomainKind::HalfLine { omega })
    }

    pub fn rectangle(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        Self::new(DomainKind::Rectangle { a, b, c, d })
    }

    pub fn half_plane(omega: f64) -> Result<Self> {
        Self::new(DomainKind::HalfPlane { omega })
    }

    pub fn graph_strip(profile: GraphProfile, c: f64, d: f64, beta: f64) -> Result<Self> {
        Self::new(DomainKind::GraphStrip { profile, c, d, beta })
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            DomainKind::Interval { .. } | DomainKind::HalfLine { .. } => 1,
            _ => 2,
        }
    }

    /// Coordinate axes of a product domain; `None` for graph strips.
    pub fn axes(&self) -> Option<Vec<Axis>> {
        match self.kind {
            DomainKind::Interval { a, b } => Some(vec![Axis::bounded(a, b)]),
            DomainKind::HalfLine { omega } => Some(vec![Axis::below(omega)]),
            DomainKind::Rectangle { a, b, c, d } => Some(vec![Axis::bounded(a, b), Axis::bounded(c, d)]),
            DomainKind::HalfPlane { omega } => Some(vec![Axis::real_line(), Axis::below(omega)]),
            DomainKind::GraphStrip { .. } => None,
        }
    }

    /// Bounding box after truncation of unbounded sides, one `(lo, hi)` per axis.
    pub fn truncated_box(&self) -> Vec<(f64, f64)> {
        let r = self.truncation_radius;
        match self.kind {
            DomainKind::GraphStrip { profile, c, d, beta } => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for i in 0..=1000 {
                    let x = c + (d - c) * i as f64 / 1000.0;
                    let g = profile.value(x);
                    lo = lo.min(g);
                    hi = hi.max(g + beta);
                }
                vec![(c, d), (lo, hi)]
            }
            _ => self
                .axes()
                .expect("product domain")
                .iter()
                .map(|ax| (ax.lower.unwrap_or(-r).max(-r), ax.upper.unwrap_or(r)))
                .collect(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self.kind {
            DomainKind::Interval { a, b } => x[0] > a && x[0] < b,
            DomainKind::HalfLine { omega } => x[0] < omega,
            DomainKind::Rectangle { a, b, c, d } => x[0] > a && x[0] < b && x[1] > c && x[1] < d,
            DomainKind::HalfPlane { omega } => x[1] < omega,
            DomainKind::GraphStrip { profile, c, d, beta } => {
                let g = profile.value(x[0]);
                x[0] > c && x[0] < d && x[1] > g && x[1] < g + beta
            }
        }
    }

    fn compute_measure(&self) -> f64 {
        match self.kind {
            DomainKind::GraphStrip { profile, c, d, beta } => {
                let rule = AxisRule::new(Axis::bounded(c, d), 16, 0.125, 0);
                let terms: Vec<f64> = rule
                    .nodes
                    .iter()
                    .map(|&(x, w)| {
                        let g = profile.value(x);
                        w * interval_measure(g, g + beta)
                    })
                    .collect();
                crate::quadrature::pairwise_sum(&terms)
            }
            _ => self.axes().expect("product domain").iter().map(Axis::measure).product(),
        }
    }

    /// Disjoint boundary charts covering `∂Ω` (truncation cuts excluded).
    pub fn boundary_charts(&self) -> Vec<BoundaryChart> {
        let shapes: Vec<(ChartShape, (f64, f64))> = match self.kind {
            DomainKind::Interval { a, b } => vec![
                (ChartShape::Point { x: a, normal: -1.0 }, (0.0, 0.0)),
                (ChartShape::Point { x: b, normal: 1.0 }, (0.0, 0.0)),
            ],
            DomainKind::HalfLine { omega } => {
                vec![(ChartShape::Point { x: omega, normal: 1.0 }, (0.0, 0.0))]
            }
            DomainKind::HalfPlane { omega } => vec![(
                ChartShape::Horizontal { level: omega, normal: 1.0 },
                (f64::NEG_INFINITY, f64::INFINITY),
            )],
            DomainKind::Rectangle { a, b, c, d } => vec![
                (ChartShape::Horizontal { level: c, normal: -1.0 }, (a, b)),
                (ChartShape::Vertical { at: b, normal: 1.0 }, (c, d)),
                (ChartShape::Horizontal { level: d, normal: 1.0 }, (a, b)),
                (ChartShape::Vertical { at: a, normal: -1.0 }, (c, d)),
            ],
            DomainKind::GraphStrip { profile, c, d, beta } => vec![
                (ChartShape::Graph { profile, offset: 0.0, normal: -1.0 }, (c, d)),
                (ChartShape::Vertical { at: d, normal: 1.0 }, (profile.value(d), profile.value(d) + beta)),
                (ChartShape::Graph { profile, offset: beta, normal: 1.0 }, (c, d)),
                (ChartShape::Vertical { at: c, normal: -1.0 }, (profile.value(c), profile.value(c) + beta)),
            ],
        };
        shapes
            .into_iter()
            .enumerate()
            .map(|(index, (shape, param))| BoundaryChart { index, param, shape })
            .collect()
    }

    /// Key/value form understood by [`Domain::parse`].
    pub fn spec_string(&self) -> String {
        self.to_string()
    }

    /// Parse the key/value grammar, e.g. `kind=halfplane omega=0.0`.
    ///
    /// Graph strips take `profile=flat|affine|sine` with `level`, `slope`,
    /// `amp`, `freq` and the declared `lipschitz` constant.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut kind = None;
        let mut vals = std::collections::BTreeMap::new();
        for tok in spec.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::DomainSpec(format!("expected key=value, got `{tok}`")))?;
            if k == "kind" || k == "profile" {
                if k == "kind" {
                    kind = Some(v.to_ascii_lowercase());
                } else {
                    vals.insert("profile".to_string(), f64::NAN);
                    vals.insert(format!("profile:{}", v.to_ascii_lowercase()), 0.0);
                }
                continue;
            }
            let x: f64 = v
                .parse()
                .map_err(|_| Error::DomainSpec(format!("`{k}` is not a number: `{v}`")))?;
            if vals.insert(k.to_string(), x).is_some() {
                return Err(Error::DomainSpec(format!("duplicate key `{k}`")));
            }
        }
        let get = |k: &str| {
            vals.get(k)
                .copied()
                .ok_or_else(|| Error::DomainSpec(format!("missing key `{k}`")))
        };
        let opt = |k: &str, default: f64| vals.get(k).copied().unwrap_or(default);
        let kind = kind.ok_or_else(|| Error::DomainSpec("missing `kind`".into()))?;
        let dk = match kind.as_str() {
            "interval" => DomainKind::Interval { a: get("a")?, b: get("b")? },
            "halfline" => DomainKind::HalfLine { omega: opt("omega", 0.0) },
            "rectangle" => DomainKind::Rectangle { a: get("a")?, b: get("b")?, c: get("c")?, d: get("d")? },
            "halfplane" => DomainKind::HalfPlane { omega: opt("omega", 0.0) },
            "graphstrip" => {
                let level = opt("level", 0.0);
                let shape = if vals.contains_key("profile:sine") {
                    GraphShape::Sine { level, amp: get("amp")?, freq: get("freq")? }
                } else if vals.contains_key("profile:affine") {
                    GraphShape::Affine { level, slope: get("slope")? }
                } else if vals.contains_key("profile:flat") || !vals.contains_key("profile") {
                    GraphShape::Flat { level }
                } else {
                    return Err(Error::DomainSpec("unknown graph profile".into()));
                };
                let lipschitz = match shape {
                    GraphShape::Flat { .. } => opt("lipschitz", 0.0),
                    _ => get("lipschitz")?,
                };
                DomainKind::GraphStrip {
                    profile: GraphProfile { shape, lipschitz },
                    c: get("c")?,
                    d: get("d")?,
                    beta: get("beta")?,
                }
            }
            other => return Err(Error::DomainSpec(format!("unknown kind `{other}`"))),
        };
        Domain::new(dk)
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            DomainKind::Interval { a, b } => write!(f, "kind=interval a={a} b={b}"),
            DomainKind::HalfLine { omega } => write!(f, "kind=halfline omega={omega}"),
            DomainKind::Rectangle { a, b, c, d } => write!(f, "kind=rectangle a={a} b={b} c={c} d={d}"),
            DomainKind::HalfPlane { omega } => write!(f, "kind=halfplane omega={omega}"),
            DomainKind::GraphStrip { profile, c, d, beta } => {
                write!(f, "kind=graphstrip c={c} d={d} beta={beta} ")?;
                match profile.shape {
                    GraphShape::Flat { level } => write!(f, "profile=flat level={level}"),
                    GraphShape::Affine { level, slope } => {
                        write!(f, "profile=affine level={level} slope={slope} lipschitz={}", profile.lipschitz)
                    }
                    GraphShape::Sine { level, amp, freq } => write!(
                        f,
                        "profile=sine level={level} amp={amp} freq={freq} lipschitz={}",
                        profile.lipschitz
                    ),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChartShape {
    /// A boundary point of a one-dimensional domain.
    Point { x: f64, normal: f64 },
    /// `x₂ = level`, parameter `x₁`; `normal` is the sign of ν₂.
    Horizontal { level: f64, normal: f64 },
    /// `x₁ = at`, parameter `x₂`; `normal` is the sign of ν₁.
    Vertical { at: f64, normal: f64 },
    /// `x₂ = g(x₁) + offset`, parameter `x₁`; `normal` is the sign of ν₂.
    Graph { profile: GraphProfile, offset: f64, normal: f64 },
}

/// One chart `Λ_r` of the boundary, parameterized over `param`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryChart {
    pub index: usize,
    /// Parameter interval; infinite ends allowed.
    pub param: (f64, f64),
    pub shape: ChartShape,
}

impl BoundaryChart {
    pub fn is_point(&self) -> bool {
        matches!(self.shape, ChartShape::Point { .. })
    }

    /// Boundary point at parameter `tau`.
    pub fn point(&self, tau: f64) -> Vec<f64> {
        match self.shape {
            ChartShape::Point { x, .. } => vec![x],
            ChartShape::Horizontal { level, .. } => vec![tau, level],
            ChartShape::Vertical { at, .. } => vec![at, tau],
            ChartShape::Graph { profile, offset, .. } => vec![tau, profile.value(tau) + offset],
        }
    }

    /// Surface-measure Jacobian; at least one.
    pub fn jacobian(&self, tau: f64) -> f64 {
        match self.shape {
            ChartShape::Graph { profile, .. } => (1.0 + profile.slope(tau).powi(2)).sqrt(),
            _ => 1.0,
        }
    }

    /// Outward unit normal.
    pub fn normal(&self, tau: f64) -> Vec<f64> {
        match self.shape {
            ChartShape::Point { normal, .. } => vec![normal],
            ChartShape::Horizontal { normal, .. } => vec![0.0, normal],
            ChartShape::Vertical { normal, .. } => vec![normal, 0.0],
            ChartShape::Graph { profile, normal, .. } => {
                let s = profile.slope(tau);
                let n = (1.0 + s * s).sqrt();
                vec![-normal * s / n, normal / n]
            }
        }
    }

    /// `∫_{Λ_r} φ dH^{N−1}`.
    pub fn weighted_length(&self) -> f64 {
        crate::quadrature::integrate_chart(self, &|_| 1.0, 16, 0)
    }
}

/// `∫_{∂Ω} φ dH^{N−1}` summed over the charts.
pub fn weighted_boundary_measure(domain: &Domain) -> f64 {
    domain.boundary_charts().iter().map(BoundaryChart::weighted_length).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{cdf, density_1d};

    #[test]
    fn measures_of_simple_domains() {
        assert!((Domain::half_line(0.0).unwrap().gamma_measure - 0.5).abs() < 1e-16);
        let d = Domain::interval(-1.0, 1.0).unwrap();
        assert!((d.gamma_measure - 0.682_689_492_137_085_897_17).abs() < 1e-15);
        assert_eq!(d.gamma_measure, cdf(1.0) - cdf(-1.0));
        let strip = Domain::graph_strip(GraphProfile::flat(0.0), -1.0, 1.0, 1.0).unwrap();
        // (Φ(1)−Φ(−1))·(Φ(1)−Φ(0)) at 40 digits
        assert!((strip.gamma_measure - 0.233_032_471_337_196_133_51).abs() < 1e-13);
    }

    #[test]
    fn rectangle_measure_is_additive() {
        let whole = Domain::rectangle(-1.0, 2.0, -0.5, 1.5).unwrap();
        let left = Domain::rectangle(-1.0, 0.3, -0.5, 1.5).unwrap();
        let right = Domain::rectangle(0.3, 2.0, -0.5, 1.5).unwrap();
        assert!((whole.gamma_measure - left.gamma_measure - right.gamma_measure).abs() < 1e-13);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(Domain::interval(1.0, 1.0).is_err());
        assert!(Domain::graph_strip(GraphProfile::flat(0.0), -1.0, 1.0, 0.0).is_err());
        // sin with amp·freq = 0.6 declared as 0.5
        let lying = GraphProfile::sine(0.0, 0.3, 2.0, 0.5);
        assert!(matches!(
            Domain::graph_strip(lying, -1.0, 1.0, 1.0),
            Err(Error::Lipschitz { .. })
        ));
        let honest = GraphProfile::sine(0.0, 0.3, 2.0, 0.6);
        assert!(Domain::graph_strip(honest, -1.0, 1.0, 1.0).is_ok());
        assert!(Domain::half_plane(f64::NAN).is_err());
    }

    #[test]
    fn truncation_leaves_negligible_mass() {
        for (d, sides) in [(Domain::half_line(0.0).unwrap(), 1.0), (Domain::half_plane(0.0).unwrap(), 3.0)] {
            let r = d.truncation_radius;
            assert!(sides * cdf(-r) <= TRUNCATION_MASS * (1.0 + 1e-9));
        }
    }

    #[test]
    fn charts_of_half_plane_and_interval() {
        let hp = Domain::half_plane(0.3).unwrap();
        let charts = hp.boundary_charts();
        assert_eq!(charts.len(), 1);
        assert!((charts[0].weighted_length() - density_1d(0.3)).abs() < 1e-13);

        let iv = Domain::interval(-0.5, 2.0).unwrap();
        let w: Vec<f64> = iv.boundary_charts().iter().map(|c| c.weighted_length()).collect();
        assert_eq!(w, vec![density_1d(-0.5), density_1d(2.0)]);
    }

    #[test]
    fn flat_strip_bottom_chart() {
        let strip = Domain::graph_strip(GraphProfile::flat(0.0), -1.0, 1.5, 1.0).unwrap();
        let bottom = &strip.boundary_charts()[0];
        let want = density_1d(0.0) * (cdf(1.5) - cdf(-1.0));
        assert!((bottom.weighted_length() - want).abs() < 1e-12);
    }

    #[test]
    fn jacobians_at_least_one_and_normals_unit() {
        let p = GraphProfile::sine(0.2, 0.4, 1.5, 0.6);
        let strip = Domain::graph_strip(p, -2.0, 2.0, 1.0).unwrap();
        for ch in strip.boundary_charts() {
            for i in 0..=20 {
                let tau = ch.param.0 + (ch.param.1 - ch.param.0) * i as f64 / 20.0;
                assert!(ch.jacobian(tau) >= 1.0);
                let n = ch.normal(tau);
                assert!((n[0].hypot(n[1]) - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn parse_round_trip() {
        for spec in [
            "kind=halfplane omega=0",
            "kind=interval a=-8 b=8",
            "kind=halfline omega=0.5",
            "kind=rectangle a=-1 b=1 c=-2 d=0",
            "kind=graphstrip c=-1 d=1 beta=1 profile=sine level=0 amp=0.3 freq=1 lipschitz=0.3",
        ] {
            let d = Domain::parse(spec).unwrap();
            assert_eq!(Domain::parse(&d.to_string()).unwrap(), d);
        }
        assert!(Domain::parse("kind=disk r=1").is_err());
        assert!(Domain::parse("kind=interval a=0").is_err());
        assert!(Domain::parse("omega=1").is_err());
        assert!(Domain::parse("kind=interval a=0 b=x").is_err());
    }
}
