//! Gaussian-weighted Neumann, oscillator, Steklov and trace problems.
//!
//! Discretization is lumped-mass P1: vertex unknowns, edge weights
//! `w_ij = φ(midpoint)·(cot θ + cot θ')/2` (in 1D `φ(midpoint)/h`), so the
//! stiffness acts as `(Ax)_i = Σ_j w_ij (x_i − x_j)` and `A·1 = 0` holds
//! exactly in floating point. Masses `m_i = ∫ φ ψ_i` and boundary weights
//! `b_i = ∫_{∂Ω} φ ψ_i dS` are integrated with Gauss–Legendre rules.
//!
//! Unbounded sides are cut at the domain's truncation radius and carry the
//! natural (zero-flux) condition; only true boundary sides get weights.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domains::{Domain, DomainKind};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::gaussian::{density, density_1d};
use crate::quadrature::gauss_legendre;

/// Largest mesh accepted by [`assemble`].
pub const MAX_UNKNOWNS: usize = 2_000_000;

/// Seed of every randomized start vector.
pub const SEED: u64 = 0x005e_ed0f_9a55;

// ---------------------------------------------------------------------------
// Banded symmetric matrices

/// Symmetric band matrix, lower band stored row by row.
#[derive(Debug, Clone)]
struct Banded {
    n: usize,
    bw: usize,
    a: Vec<f64>,
}

impl Banded {
    fn zeros(n: usize, bw: usize) -> Self {
        Self { n, bw, a: vec![0.0; n * (bw + 1)] }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (j + self.bw - i)
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let k = self.idx(i, j);
        self.a[k] += v;
    }

    /// In-place Cholesky factor `L` with `LLᵀ = self`.
    fn cholesky(mut self) -> Result<Self> {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bw));
                let mut s = self.a[self.idx(i, j)];
                let ri = i * (bw + 1) + bw - i;
                let rj = j * (bw + 1) + bw - j;
                for k in k0..j {
                    s -= self.a[ri + k] * self.a[rj + k];
                }
                if i == j {
                    if !(s > 0.0) {
                        return Err(Error::Solver(format!("banded Cholesky lost definiteness at row {i} (pivot {s:e})")));
                    }
                    let k = self.idx(i, i);
                    self.a[k] = s.sqrt();
                } else {
                    let d = self.a[self.idx(j, j)];
                    let k = self.idx(i, j);
                    self.a[k] = s / d;
                }
            }
        }
        Ok(self)
    }

    /// Solve `LLᵀx = b` in place with a factor from [`Banded::cholesky`].
    fn solve(&self, b: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let ri = i * (bw + 1) + bw - i;
            let mut s = b[i];
            for k in i.saturating_sub(bw)..i {
                s -= self.a[ri + k] * b[k];
            }
            b[i] = s / self.a[ri + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..(i + bw + 1).min(n) {
                s -= self.a[self.idx(k, i)] * b[k];
            }
            b[i] = s / self.a[self.idx(i, i)];
        }
    }
}

// ---------------------------------------------------------------------------
// Mesh

/// One simplex: an interval in 1D, a triangle in 2D.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub nodes: Vec<usize>,
    /// Gradients of the barycentric hat functions, one per node.
    pub grads: Vec<Vec<f64>>,
    /// `∫_cell φ`.
    pub gamma: f64,
}

/// Edge of the weighted stiffness graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

#[derive(Debug, Clone)]
pub struct WeightedMesh {
    pub domain: Domain,
    pub dim: usize,
    /// Requested mesh size.
    pub h: f64,
    /// Nodes per axis.
    pub shape: Vec<usize>,
    /// Flat coordinates, `dim` per node.
    pub coords: Vec<f64>,
    pub cells: Vec<Cell>,
    pub edges: Vec<Edge>,
    /// `m_i = ∫ φ ψ_i`.
    pub mass: Vec<f64>,
    /// `∫ ψ_i`.
    pub lebesgue_mass: Vec<f64>,
    /// Nodes on true boundary sides, ascending.
    pub boundary: Vec<usize>,
    /// `b_i = ∫_{∂Ω} φ ψ_i dS`, parallel to `boundary`.
    pub boundary_weights: Vec<f64>,
    bandwidth: usize,
}

/// Right-hand-side mass of the oscillator problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Weighting {
    /// `∫∇u·∇v φ = λ∫uv φ`: the Rayleigh quotient is the λ₂ characterization.
    #[default]
    MassGamma,
    /// `∫∇u·∇v φ = λ∫uv`: the right side of the strong form read literally.
    MassLebesgueWeighted,
}

impl Weighting {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "massgamma" | "gamma" => Some(Weighting::MassGamma),
            "masslebesgueweighted" | "lebesgue" => Some(Weighting::MassLebesgueWeighted),
            _ => None,
        }
    }
}

impl WeightedMesh {
    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn mass_for(&self, weighting: Weighting) -> &[f64] {
        match weighting {
            Weighting::MassGamma => &self.mass,
            Weighting::MassLebesgueWeighted => &self.lebesgue_mass,
        }
    }

    /// `Ax` in divergence form; constants map to exact zeros.
    pub fn apply_stiffness(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for e in &self.edges {
            let f = e.w * (x[e.i] - x[e.j]);
            y[e.i] += f;
            y[e.j] -= f;
        }
        y
    }

    /// `xᵀAx = Σ w_ij (x_i − x_j)²`.
    pub fn energy(&self, x: &[f64]) -> f64 {
        self.edges.iter().map(|e| e.w * (x[e.i] - x[e.j]).powi(2)).sum()
    }

    /// Stiffness entry `A_ij`.
    pub fn stiffness_entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.edges.iter().filter(|e| e.i == i || e.j == i).map(|e| e.w).sum()
        } else {
            let (a, b) = (i.min(j), i.max(j));
            -self.edges.iter().filter(|e| e.i == a && e.j == b).map(|e| e.w).sum::<f64>()
        }
    }

    /// Boundary weights as a full vector (zeros inside).
    pub fn boundary_vector(&self) -> Vec<f64> {
        let mut b = vec![0.0; self.len()];
        for (&i, &w) in self.boundary.iter().zip(&self.boundary_weights) {
            b[i] = w;
        }
        b
    }

    /// Field values at the nodes.
    pub fn sample(&self, u: &ScalarField) -> Result<Vec<f64>> {
        if !u.fits(&self.domain) {
            return Err(Error::Precondition(format!("field `{}` does not fit a {}-dimensional mesh", u.name, self.dim)));
        }
        Ok((0..self.len()).map(|i| u.value(self.point(i))).collect())
    }

    /// `Σ m_i x_i / Σ m_i`.
    pub fn gamma_mean(&self, x: &[f64]) -> f64 {
        dot(&self.mass, x) / self.mass.iter().sum::<f64>()
    }

    /// Banded `A + σ·diag(m)`, with the rows and columns of `pinned` replaced
    /// by identity rows.
    fn banded(&self, sigma: f64, mass: &[f64], pinned: &[bool]) -> Banded {
        let mut k = Banded::zeros(self.len(), self.bandwidth);
        for e in &self.edges {
            if !pinned[e.i] {
                k.add(e.i, e.i, e.w);
            }
            if !pinned[e.j] {
                k.add(e.j, e.j, e.w);
            }
            if !pinned[e.i] && !pinned[e.j] {
                k.add(e.i, e.j, -e.w);
            }
        }
        for (i, &m) in mass.iter().enumerate() {
            if pinned[i] {
                k.add(i, i, 1.0);
            } else {
                k.add(i, i, sigma * m);
            }
        }
        k
    }

    /// Nodes as CSV (`x[,y],mass,boundary_weight`).
    pub fn to_csv(&self) -> String {
        let b = self.boundary_vector();
        let mut out = String::from(if self.dim == 1 { "x,mass,boundary_weight\n" } else { "x,y,mass,boundary_weight\n" });
        for i in 0..self.len() {
            for c in self.point(i) {
                out.push_str(&format!("{c:e},"));
            }
            out.push_str(&format!("{:e},{:e}\n", self.mass[i], b[i]));
        }
        out
    }

    /// Node coordinates and the given columns as CSV.
    pub fn values_csv(&self, names: &[&str], columns: &[&[f64]]) -> String {
        let mut out = String::from(if self.dim == 1 { "x" } else { "x,y" });
        for n in names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for i in 0..self.len() {
            let row: Vec<String> = self.point(i).iter().chain(columns.iter().map(|c| &c[i])).map(|v| format!("{v:e}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Mesh of the (truncated) domain with mesh size about `h`.
pub fn assemble(d: &Domain, h: f64) -> Result<WeightedMesh> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("mesh size must be positive, got {h}")));
    }
    match d.dim() {
        1 => assemble_1d(d, h),
        _ => assemble_2d(d, h),
    }
}

/// `[lower, upper]` and whether each end is a true boundary.
fn mesh_extent(lower: Option<f64>, upper: Option<f64>, r: f64) -> (f64, f64, bool, bool) {
    (lower.unwrap_or(-r), upper.unwrap_or(r), lower.is_some(), upper.is_some())
}

fn cells_for(len: f64, h: f64) -> Result<usize> {
    let n = (len / h).round().max(1.0);
    if n > MAX_UNKNOWNS as f64 {
        return Err(Error::MeshTooLarge { nodes: n as usize + 1, limit: MAX_UNKNOWNS });
    }
    Ok(n as usize)
}

fn assemble_1d(d: &Domain, h: f64) -> Result<WeightedMesh> {
    let axis = d.axes().expect("1D domains are intervals")[0];
    let (a, b, lo_bd, hi_bd) = mesh_extent(axis.lower, axis.upper, d.truncation_radius);
    let n = cells_for(b - a, h)?;
    if n + 1 > MAX_UNKNOWNS {
        return Err(Error::MeshTooLarge { nodes: n + 1, limit: MAX_UNKNOWNS });
    }
    let hh = (b - a) / n as f64;
    let x: Vec<f64> = (0..=n).map(|k| if k == n { b } else { a + k as f64 * hh }).collect();
    let (gx, gw) = gauss_legendre(8);
    // per cell: (∫φψ_left, ∫φψ_right, ∫φ)
    let parts: Vec<(f64, f64, f64)> = (0..n)
        .into_par_iter()
        .map(|k| {
            let (l, r) = (x[k], x[k + 1]);
            let half = 0.5 * (r - l);
            let (mut ml, mut mr) = (0.0, 0.0);
            for (&z, &w) in gx.iter().zip(&gw) {
                let t = 0.5 * (z + 1.0);
                let f = w * half * density_1d(l + (r - l) * t);
                ml += f * (1.0 - t);
                mr += f * t;
            }
            (ml, mr, ml + mr)
        })
        .collect();
    let mut mass = vec![0.0; n + 1];
    let mut leb = vec![0.0; n + 1];
    let mut cells = Vec::with_capacity(n);
    let mut edges = Vec::with_capacity(n);
    for (k, &(ml, mr, g)) in parts.iter().enumerate() {
        let len = x[k + 1] - x[k];
        mass[k] += ml;
        mass[k + 1] += mr;
        leb[k] += 0.5 * len;
        leb[k + 1] += 0.5 * len;
        edges.push(Edge { i: k, j: k + 1, w: density_1d(0.5 * (x[k] + x[k + 1])) / len });
        cells.push(Cell { nodes: vec![k, k + 1], grads: vec![vec![-1.0 / len], vec![1.0 / len]], gamma: g });
    }
    let mut boundary = Vec::new();
    let mut weights = Vec::new();
    if lo_bd {
        boundary.push(0);
        weights.push(density_1d(a));
    }
    if hi_bd {
        boundary.push(n);
        weights.push(density_1d(b));
    }
    Ok(WeightedMesh {
        domain: d.clone(),
        dim: 1,
        h,
        shape: vec![n + 1],
        coords: x,
        cells,
        edges,
        mass,
        lebesgue_mass: leb,
        boundary,
        boundary_weights: weights,
        bandwidth: 1,
    })
}

/// Structured grid description: `point(ix, iy)` and which sides are real.
struct Grid {
    nx: usize,
    ny: usize,
    /// bottom, right, top, left
    sides: [bool; 4],
    kind: DomainKind,
    xr: (f64, f64),
    yr: (f64, f64),
}

impl Grid {
    fn point(&self, ix: usize, iy: usize) -> [f64; 2] {
        let tx = ix as f64 / self.nx as f64;
        let ty = iy as f64 / self.ny as f64;
        let x = self.xr.0 + (self.xr.1 - self.xr.0) * tx;
        match self.kind {
            DomainKind::GraphStrip { profile, beta, .. } => [x, profile.value(x) + beta * ty],
            _ => [x, self.yr.0 + (self.yr.1 - self.yr.0) * ty],
        }
    }
}

/// Duffy-collapsed Gauss–Legendre points on the reference triangle:
/// `(λ1, λ2, weight)` with weights summing to 1/2.
fn triangle_rule() -> Vec<(f64, f64, f64)> {
    let (gx, gw) = gauss_legendre(6);
    let mut out = Vec::new();
    for (&a, &wa) in gx.iter().zip(&gw) {
        let u = 0.5 * (a + 1.0);
        for (&b, &wb) in gx.iter().zip(&gw) {
            let v = 0.5 * (b + 1.0);
            out.push((u, v * (1.0 - u), 0.25 * wa * wb * (1.0 - u)));
        }
    }
    out
}

struct TriangleParts {
    nodes: [usize; 3],
    /// Edge weights for (1,2), (2,0), (0,1).
    w: [f64; 3],
    mass: [f64; 3],
    area: f64,
    grads: [[f64; 2]; 3],
}

fn triangle(nodes: [usize; 3], p: [[f64; 2]; 3], rule: &[(f64, f64, f64)]) -> TriangleParts {
    let e = |a: usize, b: usize| [p[b][0] - p[a][0], p[b][1] - p[a][1]];
    let cross = |u: [f64; 2], v: [f64; 2]| u[0] * v[1] - u[1] * v[0];
    let twice_area = cross(e(0, 1), e(0, 2));
    let area = 0.5 * twice_area.abs();
    let mut w = [0.0; 3];
    for k in 0..3 {
        // angle at vertex k, opposite edge (k+1, k+2)
        let (a, b) = ((k + 1) % 3, (k + 2) % 3);
        let (u, v) = (e(k, a), e(k, b));
        let cot = (u[0] * v[0] + u[1] * v[1]) / cross(u, v).abs();
        let mid = [0.5 * (p[a][0] + p[b][0]), 0.5 * (p[a][1] + p[b][1])];
        w[k] = 0.5 * cot * density(&mid);
    }
    let mut mass = [0.0; 3];
    for &(l1, l2, wt) in rule {
        let l0 = 1.0 - l1 - l2;
        let x = [
            l0 * p[0][0] + l1 * p[1][0] + l2 * p[2][0],
            l0 * p[0][1] + l1 * p[1][1] + l2 * p[2][1],
        ];
        let f = wt * 2.0 * area * density(&x);
        mass[0] += f * l0;
        mass[1] += f * l1;
        mass[2] += f * l2;
    }
    // ∇λ_k = rot90(opposite edge) / (2·area), sign fixed by orientation
    let mut grads = [[0.0; 2]; 3];
    for (k, g) in grads.iter_mut().enumerate() {
        let (a, b) = ((k + 1) % 3, (k + 2) % 3);
        let ed = e(a, b);
        *g = [-ed[1] / twice_area, ed[0] / twice_area];
    }
    TriangleParts { nodes, w, mass, area, grads }
}

fn assemble_2d(d: &Domain, h: f64) -> Result<WeightedMesh> {
    let r = d.truncation_radius;
    let grid = match d.kind {
        DomainKind::GraphStrip { profile, c, d: dd, beta } => {
            let nx = cells_for(dd - c, h)?;
            let ny = cells_for(beta, h)?;
            let _ = profile;
            Grid { nx, ny, sides: [true; 4], kind: d.kind, xr: (c, dd), yr: (0.0, 1.0) }
        }
        _ => {
            let axes = d.axes().expect("product domain");
            let (x0, x1, left, right) = mesh_extent(axes[0].lower, axes[0].upper, r);
            let (y0, y1, bottom, top) = mesh_extent(axes[1].lower, axes[1].upper, r);
            Grid {
                nx: cells_for(x1 - x0, h)?,
                ny: cells_for(y1 - y0, h)?,
                sides: [bottom, right, top, left],
                kind: d.kind,
                xr: (x0, x1),
                yr: (y0, y1),
            }
        }
    };
    let (nx, ny) = (grid.nx, grid.ny);
    let nodes = (nx + 1) * (ny + 1);
    if nodes > MAX_UNKNOWNS {
        return Err(Error::MeshTooLarge { nodes, limit: MAX_UNKNOWNS });
    }
    // shorter axis runs fastest to keep the band narrow
    let x_fast = nx <= ny;
    let id = |ix: usize, iy: usize| if x_fast { iy * (nx + 1) + ix } else { ix * (ny + 1) + iy };
    let mut coords = vec![0.0; 2 * nodes];
    for iy in 0..=ny {
        for ix in 0..=nx {
            let p = grid.point(ix, iy);
            let k = id(ix, iy);
            coords[2 * k] = p[0];
            coords[2 * k + 1] = p[1];
        }
    }
    let rule = triangle_rule();
    let quads: Vec<(usize, usize)> = (0..ny).flat_map(|iy| (0..nx).map(move |ix| (ix, iy))).collect();
    let tris: Vec<[TriangleParts; 2]> = quads
        .par_iter()
        .map(|&(ix, iy)| {
            let ll = (id(ix, iy), grid.point(ix, iy));
            let lr = (id(ix + 1, iy), grid.point(ix + 1, iy));
            let ur = (id(ix + 1, iy + 1), grid.point(ix + 1, iy + 1));
            let ul = (id(ix, iy + 1), grid.point(ix, iy + 1));
            let dist = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
            // the shorter diagonal keeps both opposite angles acute
            let (t1, t2) = if dist(ll.1, ur.1) <= dist(lr.1, ul.1) {
                ([ll, lr, ur], [ll, ur, ul])
            } else {
                ([ll, lr, ul], [lr, ur, ul])
            };
            let mk = |t: [(usize, [f64; 2]); 3]| triangle([t[0].0, t[1].0, t[2].0], [t[0].1, t[1].1, t[2].1], &rule);
            [mk(t1), mk(t2)]
        })
        .collect();
    let mut mass = vec![0.0; nodes];
    let mut leb = vec![0.0; nodes];
    let mut weights: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut cells = Vec::with_capacity(2 * quads.len());
    for t in tris.iter().flatten() {
        for k in 0..3 {
            let (a, b) = (t.nodes[(k + 1) % 3], t.nodes[(k + 2) % 3]);
            *weights.entry((a.min(b), a.max(b))).or_insert(0.0) += t.w[k];
            mass[t.nodes[k]] += t.mass[k];
            leb[t.nodes[k]] += t.area / 3.0;
        }
        cells.push(Cell {
            nodes: t.nodes.to_vec(),
            grads: t.grads.iter().map(|g| g.to_vec()).collect(),
            gamma: t.mass.iter().sum(),
        });
    }
    let edges: Vec<Edge> = weights.into_iter().filter(|&(_, w)| w != 0.0).map(|((i, j), w)| Edge { i, j, w }).collect();
    let bandwidth = edges.iter().map(|e| e.j - e.i).max().unwrap_or(0);

    // boundary sides as node chains: bottom, right, top, left
    let chains: [Vec<(usize, usize)>; 4] = [
        (0..=nx).map(|ix| (ix, 0)).collect(),
        (0..=ny).map(|iy| (nx, iy)).collect(),
        (0..=nx).map(|ix| (ix, ny)).collect(),
        (0..=ny).map(|iy| (0, iy)).collect(),
    ];
    let (gx, gw) = gauss_legendre(8);
    let mut bw = vec![0.0; nodes];
    let mut on_boundary = vec![false; nodes];
    for (side, chain) in chains.iter().enumerate() {
        if !grid.sides[side] {
            continue;
        }
        for seg in chain.windows(2) {
            let (pa, pb) = (grid.point(seg[0].0, seg[0].1), grid.point(seg[1].0, seg[1].1));
            let len = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
            let (mut wa, mut wb) = (0.0, 0.0);
            for (&z, &w) in gx.iter().zip(&gw) {
                let t = 0.5 * (z + 1.0);
                let x = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
                let f = 0.5 * w * len * density(&x);
                wa += f * (1.0 - t);
                wb += f * t;
            }
            let (ia, ib) = (id(seg[0].0, seg[0].1), id(seg[1].0, seg[1].1));
            bw[ia] += wa;
            bw[ib] += wb;
            on_boundary[ia] = true;
            on_boundary[ib] = true;
        }
    }
    let boundary: Vec<usize> = (0..nodes).filter(|&i| on_boundary[i]).collect();
    let boundary_weights = boundary.iter().map(|&i| bw[i]).collect();
    Ok(WeightedMesh {
        domain: d.clone(),
        dim: 2,
        h,
        shape: vec![nx + 1, ny + 1],
        coords,
        cells,
        edges,
        mass,
        lebesgue_mass: leb,
        boundary,
        boundary_weights,
        bandwidth,
    })
}

// ---------------------------------------------------------------------------
// Neumann problems

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeumannSolution {
    /// Nodal values, normalized to `Σ m_i u_i = 0`.
    pub values: Vec<f64>,
    /// `‖Au − b‖ / ‖b‖` after projection of the data.
    pub residual: f64,
    /// Measured `∫f dγ (+ ∫g φ dS)` before projection.
    pub defect: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NeumannOutcome {
    Solved(NeumannSolution),
    /// The data violate the compatibility condition.
    Incompatible { defect: f64, tolerance: f64 },
}

impl NeumannOutcome {
    pub fn solution(&self) -> Option<&NeumannSolution> {
        match self {
            NeumannOutcome::Solved(s) => Some(s),
            NeumannOutcome::Incompatible { .. } => None,
        }
    }

    pub fn is_compatible(&self) -> bool {
        matches!(self, NeumannOutcome::Solved(_))
    }
}

/// `1e−8·(‖f‖_{L²(γ)} + ‖g‖_{L²(∂Ω,γ)} + 1)`.
pub fn default_compat_tolerance(mesh: &WeightedMesh, f: &[f64], g: Option<&[f64]>) -> f64 {
    let fl2 = dot(&mesh.mass, &f.iter().map(|v| v * v).collect::<Vec<_>>()).sqrt();
    let gl2 = g.map_or(0.0, |g| mesh.boundary_weights.iter().zip(g).map(|(b, v)| b * v * v).sum::<f64>().sqrt());
    1e-8 * (fl2 + gl2 + 1.0)
}

/// `−div(φ∇u) = fφ` with zero flux, i.e. `∫∇u·∇v φ = ∫ f v φ`.
pub fn solve_neumann(mesh: &WeightedMesh, f: &ScalarField) -> Result<NeumannOutcome> {
    let fv = mesh.sample(f)?;
    solve_neumann_values(mesh, &fv, None, None)
}

/// As [`solve_neumann`] with boundary flux `∂u/∂ν = g`.
pub fn solve_nonhomogeneous_neumann(mesh: &WeightedMesh, f: &ScalarField, g: &ScalarField) -> Result<NeumannOutcome> {
    let fv = mesh.sample(f)?;
    let gv: Vec<f64> = mesh.boundary.iter().map(|&i| g.value(mesh.point(i))).collect();
    solve_neumann_values(mesh, &fv, Some(&gv), None)
}

/// Nodal data `f` (one per node), optional `g` (one per boundary node) and an
/// optional compatibility tolerance.
pub fn solve_neumann_values(mesh: &WeightedMesh, f: &[f64], g: Option<&[f64]>, eps: Option<f64>) -> Result<NeumannOutcome> {
    if f.len() != mesh.len() || g.is_some_and(|g| g.len() != mesh.boundary.len()) {
        return Err(Error::Precondition("data length does not match the mesh".into()));
    }
    if f.iter().chain(g.unwrap_or(&[])).any(|v| !v.is_finite()) {
        // bounded data lie in every Zygmund space with α ≤ 0
        return Err(Error::Precondition("data must be finite at every node".into()));
    }
    let mut b: Vec<f64> = mesh.mass.iter().zip(f).map(|(m, v)| m * v).collect();
    if let Some(g) = g {
        for ((&i, &w), &v) in mesh.boundary.iter().zip(&mesh.boundary_weights).zip(g) {
            b[i] += w * v;
        }
    }
    let defect: f64 = b.iter().sum();
    let tolerance = eps.unwrap_or_else(|| default_compat_tolerance(mesh, f, g));
    if defect.abs() > tolerance {
        return Ok(NeumannOutcome::Incompatible { defect, tolerance });
    }
    // project onto the range of A, which is {b : Σ b = 0}
    let total: f64 = mesh.mass.iter().sum();
    for (bi, m) in b.iter_mut().zip(&mesh.mass) {
        *bi -= defect * m / total;
    }
    // pin the heaviest node; pinning a far node with weight 1e−15 would make
    // the reduced system numerically singular
    let pin = (0..mesh.len()).max_by(|&i, &j| mesh.mass[i].total_cmp(&mesh.mass[j])).expect("non-empty mesh");
    let mut pinned = vec![false; mesh.len()];
    pinned[pin] = true;
    let k = mesh.banded(0.0, &mesh.mass, &pinned).cholesky()?;
    let mut u = b.clone();
    u[pin] = 0.0;
    k.solve(&mut u);
    let mean = mesh.gamma_mean(&u);
    for v in &mut u {
        *v -= mean;
    }
    let au = mesh.apply_stiffness(&u);
    let scale = norm(&b).max(f64::MIN_POSITIVE);
    let residual = au.iter().zip(&b).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / scale;
    if residual > 1e-10 {
        return Err(Error::Solver(format!("Neumann residual {residual:e} exceeds 1e-10")));
    }
    Ok(NeumannOutcome::Solved(NeumannSolution { values: u, residual, defect, tolerance }))
}

// ---------------------------------------------------------------------------
// Eigenproblems

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Problem {
    Oscillator(Weighting),
    Steklov,
    BestTrace,
}

/// Leading eigenpairs of a weighted pencil.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSolution {
    pub problem: Problem,
    pub domain: String,
    pub h: f64,
    pub nodes: usize,
    /// Ascending.
    pub values: Vec<f64>,
    /// Orthonormal in the right-hand-side inner product.
    #[serde(skip)]
    pub vectors: Vec<Vec<f64>>,
    /// `‖Av − λSv‖ / ‖v‖` per pair.
    pub residuals: Vec<f64>,
    /// `max |VᵀSV − I|`.
    pub orthonormality: f64,
    pub iterations: usize,
}

impl EigenSolution {
    /// Eigenvalues as a JSON array.
    pub fn spectrum_json(&self) -> String {
        let items: Vec<String> = self.values.iter().map(|v| format!("{v:e}")).collect();
        format!("[{}]", items.join(","))
    }
}

/// `Y ← Y` with columns `S`-orthonormalized (two passes of Gram–Schmidt).
fn s_orthonormalize(y: &mut [Vec<f64>], s: &[f64]) -> Result<()> {
    for j in 0..y.len() {
        for _ in 0..2 {
            for i in 0..j {
                let c: f64 = y[j].iter().zip(&y[i]).zip(s).map(|((a, b), m)| a * b * m).sum();
                let (head, tail) = y.split_at_mut(j);
                for (a, b) in tail[0].iter_mut().zip(&head[i]) {
                    *a -= c * b;
                }
            }
        }
        let nrm: f64 = y[j].iter().zip(s).map(|(a, m)| a * a * m).sum::<f64>().sqrt();
        if !(nrm > 0.0) {
            return Err(Error::Solver("subspace collapsed during orthonormalization".into()));
        }
        for a in &mut y[j] {
            *a /= nrm;
        }
    }
    Ok(())
}

fn seeded_block(n: usize, m: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
}

fn residuals(mesh: &WeightedMesh, s: &[f64], values: &[f64], vectors: &[Vec<f64>], extra: Option<&[f64]>) -> Vec<f64> {
    values
        .iter()
        .zip(vectors)
        .map(|(&l, v)| {
            let av = mesh.apply_stiffness(v);
            let r: f64 = av
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    let a = a + extra.map_or(0.0, |m| m[i] * v[i]);
                    (a - l * s[i] * v[i]).powi(2)
                })
                .sum();
            r.sqrt() / norm(v)
        })
        .collect()
}

fn orthonormality(vectors: &[Vec<f64>], s: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in vectors.iter().enumerate() {
        for (j, b) in vectors.iter().enumerate() {
            let g: f64 = a.iter().zip(b).zip(s).map(|((x, y), m)| x * y * m).sum();
            worst = worst.max((g - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    worst
}

/// Number of eigenvalues of `A v = λ diag(m) v` below `x` for a 1D mesh
/// (Sturm count of the symmetric tridiagonal `M^{−1/2} A M^{−1/2}`).
pub fn sturm_count(mesh: &WeightedMesh, mass: &[f64], x: f64) -> usize {
    assert_eq!(mesh.dim, 1, "Sturm counts need a path graph");
    let n = mesh.len();
    let mut diag = vec![0.0; n];
    for e in &mesh.edges {
        diag[e.i] += e.w;
        diag[e.j] += e.w;
    }
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..n {
        let d = diag[i] / mass[i] - x;
        q = if i == 0 {
            d
        } else {
            let e = mesh.edges[i - 1].w / (mass[i - 1] * mass[i]).sqrt();
            let prev = if q == 0.0 { f64::EPSILON * e.abs().max(1.0) } else { q };
            d - e * e / prev
        };
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// First `k` eigenpairs of `A v = λ diag(s) v` by shift-invert subspace
/// iteration with Rayleigh–Ritz, `diag(s)` positive.
fn subspace_iteration(mesh: &WeightedMesh, s: &[f64], k: usize, sigma: f64) -> Result<(Vec<f64>, Vec<Vec<f64>>, usize)> {
    let n = mesh.len();
    let m = (2 * k).max(k + 6).min(n);
    if k > n {
        return Err(Error::Precondition(format!("asked for {k} eigenpairs of a {n}-node mesh")));
    }
    let factor = mesh.banded(sigma, s, &vec![false; n]).cholesky()?;
    let mut x = seeded_block(n, m, SEED);
    s_orthonormalize(&mut x, s)?;
    let mut prev = vec![f64::INFINITY; k];
    let mut stable = 0;
    for it in 1..=2000 {
        // Y = K⁻¹ S X
        let mut y: Vec<Vec<f64>> = x
            .iter()
            .map(|col| {
                let mut v: Vec<f64> = col.iter().zip(s).map(|(a, m)| a * m).collect();
                factor.solve(&mut v);
                v
            })
            .collect();
        s_orthonormalize(&mut y, s)?;
        let ay: Vec<Vec<f64>> = y.iter().map(|v| mesh.apply_stiffness(v)).collect();
        let g = DMatrix::from_fn(m, m, |i, j| 0.5 * (dot(&y[i], &ay[j]) + dot(&y[j], &ay[i])));
        let eig = SymmetricEigen::new(g);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        x = order
            .iter()
            .map(|&c| {
                let mut v = vec![0.0; n];
                for (r, yr) in y.iter().enumerate() {
                    let coef = eig.eigenvectors[(r, c)];
                    for (vi, yi) in v.iter_mut().zip(yr) {
                        *vi += coef * yi;
                    }
                }
                v
            })
            .collect();
        let values: Vec<f64> = x.iter().take(k).map(|v| mesh.energy(v) / v.iter().zip(s).map(|(a, m)| a * a * m).sum::<f64>()).collect();
        let scale = values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let moved = values.iter().zip(&prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prev = values.clone();
        stable = if moved <= 1e-14 * scale { stable + 1 } else { 0 };
        if stable >= 3 {
            x.truncate(k);
            return Ok((values, x, it));
        }
    }
    Err(Error::Solver("subspace iteration did not settle within 2000 sweeps".into()))
}

/// Lowest `k` eigenpairs of `∫∇u·∇v φ = λ∫uv w` with `w` chosen by `weighting`.
pub fn oscillator_spectrum(mesh: &WeightedMesh, k: usize, weighting: Weighting) -> Result<EigenSolution> {
    if k < 2 {
        return Err(Error::Precondition("need at least two eigenpairs".into()));
    }
    let s = mesh.mass_for(weighting);
    let sigma = match weighting {
        Weighting::MassGamma => 1.0,
        // eigenvalues scale with φ at the far nodes
        Weighting::MassLebesgueWeighted => 1e-3,
    };
    let (mut values, mut vectors, iterations) = subspace_iteration(mesh, s, k, sigma)?;
    for (l, v) in values.iter_mut().zip(vectors.iter_mut()) {
        let nrm = v.iter().zip(s).map(|(a, m)| a * a * m).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= nrm);
        *l = mesh.energy(v);
    }
    if mesh.dim == 1 {
        // no eigenvalue may hide between the computed ones
        let top = values[k - 1];
        let c = sturm_count(mesh, s, top + 1e-9 * top.abs().max(1.0));
        if c != k {
            return Err(Error::Solver(format!("Sturm count {c} below λ_{k}, expected {k}")));
        }
    }
    Ok(EigenSolution {
        problem: Problem::Oscillator(weighting),
        domain: mesh.domain.to_string(),
        h: mesh.h,
        nodes: mesh.len(),
        residuals: residuals(mesh, s, &values, &vectors, None),
        orthonormality: orthonormality(&vectors, s),
        values,
        vectors,
        iterations,
    })
}

/// Harmonic extension from the boundary nodes and the Schur complement of
/// `A (+ M)` onto them.
struct Schur<'a> {
    mesh: &'a WeightedMesh,
    with_mass: bool,
    factor: Banded,
    s: DMatrix<f64>,
}

impl<'a> Schur<'a> {
    fn new(mesh: &'a WeightedMesh, with_mass: bool) -> Result<Self> {
        let nb = mesh.boundary.len();
        if nb == 0 {
            return Err(Error::Precondition("mesh has no boundary nodes".into()));
        }
        let mut pinned = vec![false; mesh.len()];
        for &i in &mesh.boundary {
            pinned[i] = true;
        }
        let sigma = if with_mass { 1.0 } else { 0.0 };
        let factor = mesh.banded(sigma, &mesh.mass, &pinned).cholesky()?;
        let mut this = Self { mesh, with_mass, factor, s: DMatrix::zeros(nb, nb) };
        for k in 0..nb {
            let mut e = vec![0.0; nb];
            e[k] = 1.0;
            let x = this.extend(&e);
            let ax = this.apply(&x);
            for (r, &i) in mesh.boundary.iter().enumerate() {
                this.s[(r, k)] = ax[i];
            }
        }
        this.s = 0.5 * (&this.s + this.s.transpose());
        Ok(this)
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.mesh.apply_stiffness(x);
        if self.with_mass {
            for (yi, (m, xi)) in y.iter_mut().zip(self.mesh.mass.iter().zip(x)) {
                *yi += m * xi;
            }
        }
        y
    }

    /// Full vector with boundary values `v` and operator-harmonic interior.
    fn extend(&self, v: &[f64]) -> Vec<f64> {
        let mut xb = vec![0.0; self.mesh.len()];
        for (&i, &vi) in self.mesh.boundary.iter().zip(v) {
            xb[i] = vi;
        }
        let mut rhs: Vec<f64> = self.apply(&xb).into_iter().map(|a| -a).collect();
        for (&i, &vi) in self.mesh.boundary.iter().zip(v) {
            rhs[i] = vi;
        }
        self.factor.solve(&mut rhs);
        rhs
    }
}

/// Smallest `k` eigenpairs of `S v = λ diag(b) v` through the symmetric
/// reduction `L⁻¹ diag(b) L⁻ᵀ` of the shifted pencil, `LLᵀ = S + σ diag(b)`.
///
/// Tiny boundary weights (far corners) stay harmless: the reduced matrix has
/// norm at most `1/σ` instead of `max S/b`.
pub fn dense_generalized_smallest(s: &DMatrix<f64>, b: &[f64], sigma: f64, k: usize) -> Result<(Vec<f64>, Vec<DVector<f64>>)> {
    let n = b.len();
    let bd = DMatrix::from_diagonal(&DVector::from_column_slice(b));
    let c = s + &bd * sigma;
    let chol = c.cholesky().ok_or_else(|| Error::Solver("shifted pencil is not positive definite".into()))?;
    let l = chol.l();
    let linv = l.solve_lower_triangular(&DMatrix::identity(n, n)).ok_or_else(|| Error::Solver("singular factor".into()))?;
    let w = &linv * &bd * linv.transpose();
    let w = 0.5 * (&w + w.transpose());
    let eig = SymmetricEigen::new(w);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut values = Vec::new();
    let mut vectors = Vec::new();
    for &j in order.iter().take(k) {
        let mu = eig.eigenvalues[j];
        if !(mu > 0.0) {
            break;
        }
        values.push(1.0 / mu - sigma);
        vectors.push(linv.transpose() * eig.eigenvectors.column(j));
    }
    Ok((values, vectors))
}

fn boundary_generalized(mesh: &WeightedMesh, k: usize, with_mass: bool, problem: Problem) -> Result<EigenSolution> {
    let schur = Schur::new(mesh, with_mass)?;
    let kk = k.min(mesh.boundary.len());
    if kk < k {
        return Err(Error::Precondition(format!(
            "the boundary has {} nodes, so at most {} finite eigenvalues exist",
            mesh.boundary.len(),
            mesh.boundary.len()
        )));
    }
    let (_, vs) = dense_generalized_smallest(&schur.s, &mesh.boundary_weights, 1.0, k)?;
    let bfull = mesh.boundary_vector();
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    for v in vs {
        let mut x = schur.extend(v.as_slice());
        let bn = x.iter().zip(&bfull).map(|(a, b)| a * a * b).sum::<f64>().sqrt();
        x.iter_mut().for_each(|a| *a /= bn);
        values.push(dot(&x, &schur.apply(&x)));
        vectors.push(x);
    }
    let extra = if with_mass { Some(mesh.mass.as_slice()) } else { None };
    Ok(EigenSolution {
        problem,
        domain: mesh.domain.to_string(),
        h: mesh.h,
        nodes: mesh.len(),
        residuals: residuals(mesh, &bfull, &values, &vectors, extra),
        orthonormality: orthonormality(&vectors, &bfull),
        values,
        vectors,
        iterations: 1,
    })
}

/// Lowest `k` eigenpairs of `∫∇u·∇v φ = λ ∫_{∂Ω} uv φ dS`, interior modes
/// (infinite eigenvalues) eliminated by harmonic extension.
pub fn steklov_spectrum(mesh: &WeightedMesh, k: usize) -> Result<EigenSolution> {
    if k < 2 {
        return Err(Error::Precondition("need at least two eigenpairs".into()));
    }
    boundary_generalized(mesh, k, false, Problem::Steklov)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestTrace {
    /// Smallest `μ` of `(A + M)v = μBv`: the best constant in
    /// `‖Tu‖² ≤ μ⁻¹(‖∇u‖² + ‖u‖²)`.
    pub mu: f64,
    /// `1/√μ`.
    pub constant: f64,
    /// Extremal, normalized to `Σ b_i v_i² = 1`.
    #[serde(skip)]
    pub extremal: Vec<f64>,
    /// `‖(A + M)v − μBv‖ / ‖v‖`.
    pub residual: f64,
    /// `γ(Ω) / ∫_{∂Ω} φ`, the ratio of the constant function.
    pub constant_ratio: f64,
}

/// Best constant of the trace inequality for `p = 2`.
pub fn best_trace_constant(mesh: &WeightedMesh) -> Result<BestTrace> {
    let sol = boundary_generalized(mesh, 1, true, Problem::BestTrace)?;
    let mu = sol.values[0];
    Ok(BestTrace {
        mu,
        constant: 1.0 / mu.sqrt(),
        extremal: sol.vectors[0].clone(),
        residual: sol.residuals[0],
        constant_ratio: mesh.mass.iter().sum::<f64>() / mesh.boundary_weights.iter().sum::<f64>(),
    })
}

// ---------------------------------------------------------------------------
// Rayleigh minimization

/// Result of a constrained Rayleigh-quotient minimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayleighMinimum {
    pub value: f64,
    #[serde(skip)]
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `‖Ax − ρSx‖ / (‖Ax‖ + ρ‖Sx‖)` at exit.
    pub residual: f64,
}

/// Which quotient to minimize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RayleighProblem {
    /// `xᵀAx / xᵀMx` over `Σ m_i x_i = 0`.
    Oscillator(Weighting),
    /// `xᵀAx / xᵀBx` over `Σ b_i x_i = 0`.
    Steklov,
    /// `xᵀ(A+M)x / xᵀBx`, unconstrained.
    BestTrace,
    /// `xᵀAx / xᵀMx` over `Σ b_i x_i = 0`.
    BoundaryMeanZero,
}

/// Minimize the quotient by single-vector locally optimal conjugate
/// gradients with a Jacobi preconditioner, starting from a seeded random
/// vector. Independent of the eigensolvers: no factorization is used.
pub fn rayleigh_minimum(mesh: &WeightedMesh, problem: RayleighProblem, tol: f64, max_iter: usize) -> Result<RayleighMinimum> {
    let n = mesh.len();
    let bfull = mesh.boundary_vector();
    let (s, constraint, with_mass): (Vec<f64>, Option<Vec<f64>>, bool) = match problem {
        RayleighProblem::Oscillator(w) => {
            let m = mesh.mass_for(w).to_vec();
            (m.clone(), Some(m), false)
        }
        RayleighProblem::Steklov => (bfull.clone(), Some(bfull.clone()), false),
        RayleighProblem::BestTrace => (bfull.clone(), None, true),
        RayleighProblem::BoundaryMeanZero => (mesh.mass.clone(), Some(bfull.clone()), false),
    };
    if s.iter().all(|&v| v == 0.0) {
        return Err(Error::Precondition("the denominator vanishes identically".into()));
    }
    let apply_a = |x: &[f64]| {
        let mut y = mesh.apply_stiffness(x);
        if with_mass {
            for (yi, (m, xi)) in y.iter_mut().zip(mesh.mass.iter().zip(x)) {
                *yi += m * xi;
            }
        }
        y
    };
    let apply_s = |x: &[f64]| x.iter().zip(&s).map(|(a, b)| a * b).collect::<Vec<f64>>();
    let csum = constraint.as_ref().map(|c| c.iter().sum::<f64>());
    // project along constants, which leave the numerator unchanged
    let project = |v: &mut Vec<f64>| {
        if let (Some(c), Some(cs)) = (&constraint, csum) {
            let shift = dot(c, v) / cs;
            v.iter_mut().for_each(|a| *a -= shift);
        }
    };
    let mut diag = vec![0.0; n];
    for e in &mesh.edges {
        diag[e.i] += e.w;
        diag[e.j] += e.w;
    }
    let precond: Vec<f64> = (0..n)
        .map(|i| {
            let d = diag[i] + if with_mass { mesh.mass[i] } else { 0.0 } + s[i];
            if d > 0.0 { 1.0 / d } else { 1.0 }
        })
        .collect();

    let mut x = seeded_block(n, 1, SEED ^ 0x9e37).pop().expect("one column");
    project(&mut x);
    let mut p: Option<Vec<f64>> = None;
    let mut best = f64::INFINITY;
    let mut since_best = 0;
    let mut residual = f64::INFINITY;
    let mut rho = f64::NAN;
    for it in 1..=max_iter {
        let nx = norm(&x);
        x.iter_mut().for_each(|a| *a /= nx);
        let ax = apply_a(&x);
        let sx = apply_s(&x);
        rho = dot(&x, &ax) / dot(&x, &sx);
        let r: Vec<f64> = ax.iter().zip(&sx).map(|(a, b)| a - rho * b).collect();
        residual = norm(&r) / (norm(&ax) + rho.abs() * norm(&sx));
        if residual <= tol {
            return Ok(RayleighMinimum { value: rho, vector: x, iterations: it, converged: true, residual });
        }
        if rho < best * (1.0 - 1e-15) {
            best = rho;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > 200 {
                // the quotient stopped moving at machine precision
                return Ok(RayleighMinimum { value: rho, vector: x, iterations: it, converged: residual <= tol.sqrt(), residual });
            }
        }
        let mut w: Vec<f64> = r.iter().zip(&precond).map(|(a, t)| a * t).collect();
        project(&mut w);
        let mut basis = vec![x.clone(), w];
        if let Some(pv) = p.take() {
            basis.push(pv);
        }
        for v in basis.iter_mut().skip(1) {
            let nv = norm(v);
            if nv > 0.0 {
                v.iter_mut().for_each(|a| *a /= nv);
            }
        }
        basis.retain(|v| norm(v) > 0.0);
        let av: Vec<Vec<f64>> = basis.iter().map(|v| apply_a(v)).collect();
        let sv: Vec<Vec<f64>> = basis.iter().map(|v| apply_s(v)).collect();
        let q = basis.len();
        let ga = DMatrix::from_fn(q, q, |i, j| 0.5 * (dot(&basis[i], &av[j]) + dot(&basis[j], &av[i])));
        let gs = DMatrix::from_fn(q, q, |i, j| 0.5 * (dot(&basis[i], &sv[j]) + dot(&basis[j], &sv[i])));
        // whiten with A + S (positive definite on the constrained space),
        // then the largest s/(a+s) is the smallest a/s
        let g = SymmetricEigen::new(&ga + &gs);
        let gmax = g.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let keep: Vec<usize> = (0..q).filter(|&i| g.eigenvalues[i] > 1e-12 * gmax).collect();
        let z = DMatrix::from_fn(q, keep.len(), |r, c| g.eigenvectors[(r, keep[c])] / g.eigenvalues[keep[c]].sqrt());
        let h = z.transpose() * &gs * &z;
        let he = SymmetricEigen::new(0.5 * (&h + h.transpose()));
        let top = (0..keep.len()).max_by(|&a, &b| he.eigenvalues[a].total_cmp(&he.eigenvalues[b])).expect("non-empty");
        let coef = &z * he.eigenvectors.column(top);
        let mut nx_new = vec![0.0; n];
        let mut np = vec![0.0; n];
        for (j, v) in basis.iter().enumerate() {
            for i in 0..n {
                nx_new[i] += coef[j] * v[i];
                if j > 0 {
                    np[i] += coef[j] * v[i];
                }
            }
        }
        x = nx_new;
        project(&mut x);
        p = Some(np);
    }
    Ok(RayleighMinimum { value: rho, vector: x, iterations: max_iter, converged: false, residual })
}

// ---------------------------------------------------------------------------
// Poincaré constants

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subspace {
    /// `∫u dγ = 0`; the constant bounds `‖u − u_Ω‖_p`.
    MeanZero,
    /// `∫_{∂Ω} u φ dS = 0`; the constant bounds `‖u‖_p`.
    BoundaryMeanZero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincareEstimate {
    pub p: f64,
    pub subspace: Subspace,
    /// `C` in `‖u‖_p ≤ C‖∇u‖_p` on the subspace.
    pub constant: f64,
    /// Exact for the discrete space (`p = 2`), otherwise a lower bound from
    /// the best ratio the optimizer found.
    pub exact: bool,
    pub iterations: usize,
    pub converged: bool,
    pub note: String,
}

/// `C` for the mean-zero subspace.
pub fn poincare_constant(mesh: &WeightedMesh, p: f64) -> Result<PoincareEstimate> {
    poincare_constant_in(mesh, p, Subspace::MeanZero)
}

pub fn poincare_constant_in(mesh: &WeightedMesh, p: f64, subspace: Subspace) -> Result<PoincareEstimate> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::Domain(format!("Poincare constant needs 1 <= p < inf, got {p}")));
    }
    if subspace == Subspace::BoundaryMeanZero && mesh.boundary.is_empty() {
        return Err(Error::Precondition("the boundary-mean-zero subspace needs boundary nodes".into()));
    }
    let start = match subspace {
        Subspace::MeanZero => {
            let e = oscillator_spectrum(mesh, 2, Weighting::MassGamma)?;
            if p == 2.0 {
                return Ok(PoincareEstimate {
                    p,
                    subspace,
                    constant: 1.0 / e.values[1].sqrt(),
                    exact: true,
                    iterations: e.iterations,
                    converged: true,
                    note: "1/sqrt(lambda_2) of the oscillator pencil".into(),
                });
            }
            e.vectors[1].clone()
        }
        Subspace::BoundaryMeanZero => {
            let r = rayleigh_minimum(mesh, RayleighProblem::BoundaryMeanZero, 1e-10, 200_000)?;
            if p == 2.0 {
                return Ok(PoincareEstimate {
                    p,
                    subspace,
                    constant: 1.0 / r.value.sqrt(),
                    exact: r.converged,
                    iterations: r.iterations,
                    converged: r.converged,
                    note: "1/sqrt of the constrained Rayleigh minimum".into(),
                });
            }
            r.vector
        }
    };
    let (ratio, iterations, converged) = minimize_p_ratio(mesh, p, subspace, start, 2000);
    Ok(PoincareEstimate {
        p,
        subspace,
        constant: ratio.powf(-1.0 / p),
        exact: false,
        iterations,
        converged,
        note: if converged {
            "lower bound: best ratio of a stationary optimizer run".into()
        } else {
            "lower bound: optimizer stagnated before the iteration cap".into()
        },
    })
}

/// `(Σ_cells ∫φ·|∇u|^p, Σ m_i |u_i − c|^p)` with `c` the γ-mean or 0, and
/// their gradients. `|·|` is smoothed by `ε` for `p < 2`.
fn p_parts(mesh: &WeightedMesh, p: f64, subspace: Subspace, x: &[f64], eps: f64) -> (f64, Vec<f64>, f64, Vec<f64>) {
    let n = x.len();
    let mut e = 0.0;
    let mut ge = vec![0.0; n];
    for c in &mesh.cells {
        let mut g = vec![0.0; mesh.dim];
        for (k, &i) in c.nodes.iter().enumerate() {
            for (gd, cd) in g.iter_mut().zip(&c.grads[k]) {
                *gd += x[i] * cd;
            }
        }
        let g2: f64 = g.iter().map(|v| v * v).sum::<f64>() + eps * eps;
        e += c.gamma * g2.powf(0.5 * p);
        let f = c.gamma * p * g2.powf(0.5 * p - 1.0);
        for (k, &i) in c.nodes.iter().enumerate() {
            ge[i] += f * g.iter().zip(&c.grads[k]).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    let total: f64 = mesh.mass.iter().sum();
    let center = match subspace {
        Subspace::MeanZero => mesh.gamma_mean(x),
        Subspace::BoundaryMeanZero => 0.0,
    };
    let mut dsum = 0.0;
    let mut gd = vec![0.0; n];
    let mut acc = 0.0;
    for i in 0..n {
        let z = x[i] - center;
        let a = (z * z + eps * eps).sqrt();
        dsum += mesh.mass[i] * a.powf(p);
        let s = p * a.powf(p - 2.0) * z;
        gd[i] = mesh.mass[i] * s;
        acc += mesh.mass[i] * s;
    }
    if subspace == Subspace::MeanZero {
        for i in 0..n {
            gd[i] -= mesh.mass[i] / total * acc;
        }
    }
    (e, ge, dsum, gd)
}

/// Nonlinear conjugate gradients on `ln E(x) − ln D(x)` with Armijo steps.
fn minimize_p_ratio(mesh: &WeightedMesh, p: f64, subspace: Subspace, start: Vec<f64>, max_iter: usize) -> (f64, usize, bool) {
    let bfull = mesh.boundary_vector();
    let bsum: f64 = bfull.iter().sum();
    let project = |v: &mut Vec<f64>| {
        if subspace == Subspace::BoundaryMeanZero {
            let shift = dot(&bfull, v) / bsum;
            v.iter_mut().for_each(|a| *a -= shift);
        }
    };
    let scale = start.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let eps = if p < 2.0 { 1e-9 * scale } else { 0.0 };
    let objective = |x: &[f64]| {
        let (e, ge, d, gd) = p_parts(mesh, p, subspace, x, eps);
        let mut g: Vec<f64> = ge.iter().zip(&gd).map(|(a, b)| a / e - b / d).collect();
        project(&mut g);
        ((e / d).ln(), g)
    };
    let mut x = start;
    project(&mut x);
    let (mut f, mut g) = objective(&x);
    let mut dir: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut step = 1e-2 * scale / norm(&g).max(f64::MIN_POSITIVE);
    let mut quiet = 0;
    for it in 1..=max_iter {
        let slope = dot(&g, &dir);
        if slope >= 0.0 {
            dir = g.iter().map(|v| -v).collect();
        }
        let slope = dot(&g, &dir).min(-f64::MIN_POSITIVE);
        let mut t = step;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
            let (ft, gt) = objective(&trial);
            if ft.is_finite() && ft <= f + 1e-4 * t * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            t *= 0.5;
        }
        let Some((xn, fnew, gn)) = accepted else {
            return ((f).exp(), it, true);
        };
        let improvement = f - fnew;
        quiet = if improvement <= 1e-12 * f.abs().max(1.0) { quiet + 1 } else { 0 };
        // Polak–Ribière with restart
        let beta = (dot(&gn, &gn) - dot(&gn, &g)) / dot(&g, &g).max(f64::MIN_POSITIVE);
        dir = gn.iter().zip(&dir).map(|(a, d)| -a + beta.max(0.0) * d).collect();
        x = xn;
        f = fnew;
        g = gn;
        step = 2.0 * t;
        if quiet >= 20 {
            return (f.exp(), it, true);
        }
    }
    (f.exp(), max_iter, false)
}
