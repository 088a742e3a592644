//! Pinned numerical tolerances.
//!
//! Every threshold the runtime monitors or the verification suite asserts is
//! named here, so tests and runtime checks cannot drift apart.

/// Relative slack per recorded step when auditing a monotone functional.
/// Sits above the roundoff of a quadrature sum, far below discretization error.
pub const MONOTONE_SLACK_REL: f64 = 1e-8;

/// Default stopping tolerance on `max |D phi|` for flow runs.
pub const GRAD_STOP_TOL: f64 = 1e-8;

/// Allowed excess over the radial barrier (hull of initial radii and the
/// stationary radius) during a flow run.
pub const BARRIER_SLACK: f64 = 1e-6;

/// Exactness of closed-form sphere geometry: every derived quantity on a
/// radial grid agrees with its closed form to this relative error.
pub const SPHERE_CLOSED_FORM_REL: f64 = 1e-10;

/// Algebraic identities evaluated through eigendecompositions or recursions.
pub const IDENTITY_REL: f64 = 1e-10;

/// Trace-level identities that hold by exact algebra up to rounding
/// (Weingarten trace vs mean curvature, symmetric-function traces).
pub const TRACE_REL: f64 = 1e-12;

/// Newton-MacLaurin gap floor inside the relevant cone.
pub const MACLAURIN_FLOOR: f64 = -1e-12;

/// Max-norm tolerance for a reconstructed constraint function against its
/// prescription, and for the weight-equation plug-in residual.
pub const PROFILE_ROUNDTRIP: f64 = 1e-10;
pub const WEIGHT_ODE_RESIDUAL: f64 = 1e-8;

/// Derivative evaluators must agree with a finite-difference cross-check to
/// this relative error on sampled points.
pub const DERIVATIVE_CROSS_CHECK_REL: f64 = 1e-6;

/// Adaptive tolerance of the radial reference integrator.
pub const RADIAL_ODE_TOL: f64 = 1e-12;

/// Default CFL-style safety factor for the explicit stepper.
pub const CFL_DEFAULT: f64 = 0.2;

/// Cap on the radial coordinate before sinh/cosh precision degrades.
pub const RADIUS_CAP: f64 = 25.0;
