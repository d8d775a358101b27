//! Gaussian rearrangements, Zygmund norms and logarithmic Sobolev / trace
//! inequalities on Gaussian-weighted domains of dimension one and two.
//!
//! Layout:
//!
//! * [`gaussian`]: density, distribution function, quantile, isoperimetric function.
//! * [`domains`]: catalog of computational domains and their boundary charts.
//! * [`quadrature`]: Gaussian-weighted integration over interiors, boundaries and
//!   level-coordinate tails.
//! * [`rearrange`]: distribution functions, decreasing rearrangements, Zygmund norms.
//! * [`testbed`]: the explicit function catalog with analytic profiles.
//! * [`verify`]: inequality reports and sharpness scans.
//! * [`weighted_pde`]: weighted Neumann, oscillator, Steklov and trace problems.

// Coefficient tables are copied at their published precision, and `!(x > 0.0)`
// is the idiom used throughout to reject NaN along with non-positive values.
#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod domains;
pub mod error;
pub mod field;
pub mod gaussian;
pub mod quadrature;
pub mod rearrange;
pub mod testbed;
pub mod verify;
pub mod weighted_pde;

pub use domains::{BoundaryChart, Domain, DomainKind};
pub use error::{Error, Result};
pub use field::ScalarField;
