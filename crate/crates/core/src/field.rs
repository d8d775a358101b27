//! Scalar fields on catalog domains.

use std::fmt;
use std::sync::Arc;

use crate::domains::Domain;
use crate::error::{Error, Result};

pub type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Fields of the form `u(x) = F(Φ(x_N))` with `F` positive and non-increasing,
/// described in the level coordinate `t = −ln s`, `s = Φ(x_N)`.
///
/// On a half-space `{x_N < ω}` such a field is its own decreasing
/// rearrangement: `u^⊛(s) = F(s)` on `(0, Φ(ω)]`. Its gradient is
/// `|∇u| = |sF'(s)|·I(s)/s` with `I` the isoperimetric function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevelForm {
    /// `F(s) = s^δ`, `δ < 0`.
    Power { delta: f64 },
    /// `F(s) = (1 − ln s)^δ`, `δ > 0`.
    Log { delta: f64 },
}

impl LevelForm {
    /// `ln F(e^{−t})`.
    pub fn ln_value(&self, t: f64) -> f64 {
        match *self {
            LevelForm::Power { delta } => -delta * t,
            LevelForm::Log { delta } => delta * t.ln_1p(),
        }
    }

    /// `ln |s F'(s)|` at `s = e^{−t}`.
    pub fn ln_slope(&self, t: f64) -> f64 {
        match *self {
            LevelForm::Power { delta } => delta.abs().ln() - delta * t,
            LevelForm::Log { delta } => delta.ln() + (delta - 1.0) * t.ln_1p(),
        }
    }

    pub fn value_at_level(&self, t: f64) -> f64 {
        self.ln_value(t).exp()
    }
}

/// A real function on a domain of dimension `dim`, with optional exact
/// gradient and, for the level-form families, an analytic rearrangement.
///
/// `dim = 0` marks fields that read only the last coordinate `x_N` (or none)
/// and so make sense in either dimension.
#[derive(Clone)]
pub struct ScalarField {
    pub name: String,
    pub dim: usize,
    value: ValueFn,
    gradient: Option<GradientFn>,
    level_form: Option<LevelForm>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("gradient", &self.gradient.is_some())
            .field("level_form", &self.level_form)
            .finish()
    }
}

impl ScalarField {
    pub fn new(name: impl Into<String>, dim: usize, value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            dim,
            value: Arc::new(value),
            gradient: None,
            level_form: None,
        }
    }

    pub fn with_gradient(mut self, gradient: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    pub fn with_level_form(mut self, form: LevelForm) -> Self {
        self.level_form = Some(form);
        self
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("const({c})"), 0, move |_| c).with_gradient(|x| vec![0.0; x.len()])
    }

    /// Whether the field can be evaluated on `d`.
    pub fn fits(&self, d: &Domain) -> bool {
        self.dim == 0 || self.dim == d.dim()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn has_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.gradient.as_ref().map(|g| g(x))
    }

    /// `|∇u(x)|`; falls back to central differences without a gradient closure.
    pub fn gradient_norm(&self, x: &[f64]) -> f64 {
        let g = self.gradient(x).unwrap_or_else(|| self.fd_gradient(x));
        g.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn level_form(&self) -> Option<LevelForm> {
        self.level_form
    }

    /// Scaled copy `c·u`, keeping the gradient.
    pub fn scaled(&self, c: f64) -> Self {
        let v = self.value.clone();
        let mut out = Self::new(format!("{c}*{}", self.name), self.dim, move |x| c * v(x));
        if let Some(g) = self.gradient.clone() {
            out = out.with_gradient(move |x| g(x).into_iter().map(|gi| c * gi).collect());
        }
        out
    }

    fn fd_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        (0..x.len())
            .map(|i| {
                let h = 1e-5 * x[i].abs().max(1.0);
                y[i] = x[i] + h;
                let up = self.value(&y);
                y[i] = x[i] - h;
                let dn = self.value(&y);
                y[i] = x[i];
                (up - dn) / (2.0 * h)
            })
            .collect()
    }

    /// Compare the gradient closure with central differences at `n` interior
    /// points of `domain` (a Halton sequence over the truncated box).
    ///
    /// Tolerance per component is `max(1e−6, 1e−4·|∇u|)`.
    pub fn check_gradient(&self, domain: &Domain, n: usize) -> Result<()> {
        if self.gradient.is_none() {
            return Ok(());
        }
        let bbox = domain.truncated_box();
        let mut checked = 0;
        let mut k = 0u64;
        while checked < n && k < 50 * n as u64 {
            k += 1;
            let x: Vec<f64> = bbox
                .iter()
                .enumerate()
                .map(|(i, &(lo, hi))| lo + (hi - lo) * halton(k, [2, 3][i]))
                .collect();
            if !domain.contains(&x) {
                continue;
            }
            checked += 1;
            let exact = self.gradient(&x).expect("gradient present");
            let fd = self.fd_gradient(&x);
            let norm = exact.iter().map(|v| v * v).sum::<f64>().sqrt();
            let tol = (1e-4 * norm).max(1e-6);
            for (e, f) in exact.iter().zip(&fd) {
                if (e - f).abs() > tol {
                    return Err(Error::Precondition(format!(
                        "gradient of `{}` disagrees with finite differences at {x:?}: {e} vs {f}",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }
}

fn halton(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_forms_match_direct_formulas() {
        let p = LevelForm::Power { delta: -0.3 };
        let s: f64 = 1e-4;
        assert!((p.value_at_level(-s.ln()) - s.powf(-0.3)).abs() < 1e-12 * s.powf(-0.3));
        assert!((p.ln_slope(-s.ln()).exp() - 0.3 * s.powf(-0.3)).abs() < 1e-12 * s.powf(-0.3));
        let l = LevelForm::Log { delta: 0.5 };
        let t = 7.0f64;
        assert!((l.value_at_level(t) - 8.0f64.sqrt()).abs() < 1e-14);
        // s·d/ds (1 − ln s)^δ = −δ(1 − ln s)^{δ−1}
        assert!((l.ln_slope(t).exp() - 0.5 / 8.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn gradient_check_catches_wrong_gradient() {
        let d = Domain::rectangle(-2.0, 2.0, -1.0, 1.0).unwrap();
        let good = ScalarField::new("x1*x2", 2, |x| x[0] * x[1]).with_gradient(|x| vec![x[1], x[0]]);
        assert!(good.check_gradient(&d, 1000).is_ok());
        let bad = ScalarField::new("x1*x2", 2, |x| x[0] * x[1]).with_gradient(|x| vec![x[1], 0.0]);
        assert!(bad.check_gradient(&d, 1000).is_err());
    }

    #[test]
    fn scaling_keeps_gradient() {
        let u = ScalarField::new("x", 1, |x| x[0]).with_gradient(|_| vec![1.0]);
        let v = u.scaled(2.0);
        assert_eq!(v.value(&[3.0]), 6.0);
        assert_eq!(v.gradient(&[3.0]), Some(vec![2.0]));
    }
}
