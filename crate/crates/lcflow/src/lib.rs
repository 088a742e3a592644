//! Locally constrained curvature flows of starshaped hypersurfaces in
//! hyperbolic space, at desk scale.
//!
//! The crate evolves radial graphs over the round sphere under two flow laws —
//! a constrained mean curvature flow driven by a radial weight profile, and a
//! constrained inverse curvature flow driven by a ratio of normalized mean
//! curvatures — and monitors the geometric functionals those flows were built
//! to control: weighted areas, the weighted enclosed volume, Minkowski-formula
//! residuals, and the curvature-weighted Sobolev inequalities whose equality
//! cases are geodesic spheres.
//!
//! Module map:
//!
//! * [`sphere`] — grids on S^n, quadrature, covariant derivatives.
//! * [`geometry`] — extrinsic geometry of a radial graph in hyperbolic space.
//! * [`symm`] — normalized elementary symmetric functions and their identities.
//! * [`profiles`] — the radial and cosh-weight profiles that drive the flows.
//! * [`flow`] — time stepping, stability control, invariant monitoring.
//! * [`functionals`] — curvature integrals, inequality reports, monotonicity audits.
//! * [`experiment`] — declarative run configs, CSV/JSON emission, the CLI backend.

// Validation deliberately spells checks as negated comparisons
// (`!(x > 0.0)`) so that NaN fails them; the positive form `x <= 0.0`
// would let NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod expr;
pub mod flow;
pub mod functionals;
pub mod geometry;
pub mod profiles;
pub mod quad;
pub mod sphere;
pub mod symm;
pub mod tol;

pub use error::{Error, Result};
