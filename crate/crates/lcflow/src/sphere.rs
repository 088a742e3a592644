//! Discretization of the round sphere S^n: grids, quadrature, and covariant
//! differential operators for the charts used by the radial-graph geometry.
//!
//! Three grid modes are supported.
//!
//! * `Radial` — a single node; describes a round sphere through one radius.
//! * `Axisymmetric` — latitude-only fields on S^n for any n >= 2, using the
//!   warped-product structure of S^n over the polar angle. Nodes are
//!   cell-centered, `theta_i = (i + 1/2) * pi / N`, which keeps the chart away
//!   from the poles.
//! * `Full2D` — a latitude x azimuth grid on S^2 (n = 2 only), periodic in the
//!   azimuth.
//!
//! Quadrature weights are Fejér-type: they integrate `cos(k*theta)` against
//! the `sin^{n-1}` area density exactly for k < N, so constants and low
//! harmonics are integrated to machine precision and smooth fields to spectral
//! accuracy. All reductions run in a fixed node order.
//!
//! Derivatives are second-order central differences. At the polar boundaries
//! the stencil is closed by reflection: axisymmetric scalar fields extend
//! evenly across the poles, and on the 2-D grid the reflected value picks up
//! the antipodal azimuth shift. Fields with odd parity (polar derivatives of
//! scalars) reflect with a sign flip.

use crate::error::{Error, Result};
use crate::quad;

/// Area of the unit sphere S^n, `2 pi^{(n+1)/2} / Gamma((n+1)/2)`.
pub fn omega_n(n: usize) -> f64 {
    let pi = std::f64::consts::PI;
    2.0 * pi.powf((n as f64 + 1.0) / 2.0) / gamma_half_integer(n + 1)
}

/// Gamma(m/2) for integer m >= 1, exact up to rounding.
fn gamma_half_integer(m: usize) -> f64 {
    // Gamma(1/2) = sqrt(pi), Gamma(1) = 1, Gamma(x+1) = x Gamma(x).
    let mut x = if m.is_multiple_of(2) { 1.0 } else { 0.5 };
    let mut acc = if m.is_multiple_of(2) { 1.0 } else { std::f64::consts::PI.sqrt() };
    while 2.0 * x < m as f64 {
        acc *= x;
        x += 1.0;
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridMode {
    Radial,
    Axisymmetric,
    Full2D,
}

/// Grid resolution request: node count per coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resolution {
    Nodes(usize),
    Grid2D(usize, usize),
}

/// Reflection parity of a nodal field across the polar chart boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Debug, Clone)]
pub struct SphereGrid {
    mode: GridMode,
    n: usize,
    res_theta: usize,
    res_psi: usize,
    theta: Vec<f64>,
    weights: Vec<f64>,
    h_theta: f64,
    h_psi: f64,
}

/// Nodal scalar data on a [`SphereGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: &SphereGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::FieldGridMismatch { field: values.len(), grid: grid.node_count() });
        }
        Ok(ScalarField { values })
    }

    pub fn constant(grid: &SphereGrid, value: f64) -> Self {
        ScalarField { values: vec![value; grid.node_count()] }
    }

    /// Build from a function of latitude (works in every mode; on Full2D the
    /// value repeats around each latitude circle).
    pub fn from_latitude(grid: &SphereGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.node_count()).map(|i| f(grid.theta_of(i))).collect();
        ScalarField { values }
    }

    /// Build from a function of (theta, psi). `psi` is 0 except on Full2D.
    pub fn from_angles(grid: &SphereGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values =
            (0..grid.node_count()).map(|i| f(grid.theta_of(i), grid.psi_of(i))).collect();
        ScalarField { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// First and second covariant derivatives of a scalar field with respect to
/// the round metric, stored as components in a per-node orthonormal frame.
///
/// The frame has two distinguished directions: the polar direction and a
/// secondary direction. On axisymmetric grids the secondary direction stands
/// for all n-1 equivalent angular directions (the Hessian is then diagonal
/// with the secondary entry repeated n-1 times); on Full2D it is the azimuth.
#[derive(Debug, Clone)]
pub struct FieldDerivs {
    /// Gradient components (polar, secondary).
    pub grad: [Vec<f64>; 2],
    /// Symmetric Hessian components (polar-polar, polar-secondary,
    /// secondary-secondary).
    pub hess: [Vec<f64>; 3],
}

impl FieldDerivs {
    pub fn zeros(count: usize) -> Self {
        FieldDerivs {
            grad: [vec![0.0; count], vec![0.0; count]],
            hess: [vec![0.0; count], vec![0.0; count], vec![0.0; count]],
        }
    }

    /// |D f|^2 at a node.
    pub fn grad_norm_sq(&self, i: usize) -> f64 {
        self.grad[0][i] * self.grad[0][i] + self.grad[1][i] * self.grad[1][i]
    }
}

impl SphereGrid {
    /// Build a grid. `Radial` ignores the resolution and has exactly one
    /// node; the other modes require at least 8 nodes per coordinate.
    pub fn build(mode: GridMode, n: usize, resolution: Resolution) -> Result<SphereGrid> {
        if n < 2 {
            return Err(Error::UnsupportedGrid(format!(
                "hypersurface dimension n = {n} (need n >= 2)"
            )));
        }
        match mode {
            GridMode::Radial => Ok(SphereGrid {
                mode,
                n,
                res_theta: 1,
                res_psi: 0,
                theta: vec![std::f64::consts::FRAC_PI_2],
                weights: vec![omega_n(n)],
                h_theta: std::f64::consts::PI,
                h_psi: 0.0,
            }),
            GridMode::Axisymmetric => {
                let nt = match resolution {
                    Resolution::Nodes(nt) => nt,
                    Resolution::Grid2D(..) => {
                        return Err(Error::UnsupportedGrid(
                            "axisymmetric mode takes a single resolution".into(),
                        ))
                    }
                };
                if nt < 8 {
                    return Err(Error::ResolutionTooSmall(format!("{nt} < 8 latitude nodes")));
                }
                let (theta, h_theta) = latitude_nodes(nt);
                let weights = latitude_weights(&theta, n - 1, omega_n(n - 1))?;
                Ok(SphereGrid { mode, n, res_theta: nt, res_psi: 0, theta, weights, h_theta, h_psi: 0.0 })
            }
            GridMode::Full2D => {
                if n != 2 {
                    return Err(Error::UnsupportedGrid(format!("full 2-D grids require n = 2, got n = {n}")));
                }
                let (nt, np) = match resolution {
                    Resolution::Grid2D(nt, np) => (nt, np),
                    Resolution::Nodes(_) => {
                        return Err(Error::UnsupportedGrid(
                            "full 2-D mode takes a (theta, psi) resolution pair".into(),
                        ))
                    }
                };
                if nt < 8 || np < 8 {
                    return Err(Error::ResolutionTooSmall(format!("({nt}, {np}); need >= 8 per coordinate")));
                }
                if np % 2 != 0 {
                    return Err(Error::UnsupportedGrid(
                        "full 2-D mode needs an even azimuth count for the polar reflection".into(),
                    ));
                }
                let (theta, h_theta) = latitude_nodes(nt);
                let wt = latitude_weights(&theta, 1, 1.0)?;
                let h_psi = 2.0 * std::f64::consts::PI / np as f64;
                let mut weights = Vec::with_capacity(nt * np);
                for wi in &wt {
                    for _ in 0..np {
                        weights.push(wi * h_psi);
                    }
                }
                Ok(SphereGrid { mode, n, res_theta: nt, res_psi: np, theta, weights, h_theta, h_psi })
            }
        }
    }

    pub fn mode(&self) -> GridMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn node_count(&self) -> usize {
        match self.mode {
            GridMode::Radial => 1,
            GridMode::Axisymmetric => self.res_theta,
            GridMode::Full2D => self.res_theta * self.res_psi,
        }
    }

    pub fn res_theta(&self) -> usize {
        self.res_theta
    }

    pub fn res_psi(&self) -> usize {
        self.res_psi
    }

    /// Mesh spacing (largest coordinate spacing).
    pub fn h(&self) -> f64 {
        match self.mode {
            GridMode::Full2D => self.h_theta.max(self.h_psi),
            _ => self.h_theta,
        }
    }

    pub fn h_theta(&self) -> f64 {
        self.h_theta
    }

    pub fn theta_of(&self, node: usize) -> f64 {
        match self.mode {
            GridMode::Full2D => self.theta[node / self.res_psi],
            _ => self.theta[node.min(self.theta.len() - 1)],
        }
    }

    pub fn psi_of(&self, node: usize) -> f64 {
        match self.mode {
            GridMode::Full2D => (node % self.res_psi) as f64 * self.h_psi + 0.5 * self.h_psi,
            _ => 0.0,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Multiplicity of the secondary frame direction: n-1 equivalent angular
    /// directions on axisymmetric (and radial) grids, a single azimuth on
    /// Full2D.
    pub fn secondary_multiplicity(&self) -> f64 {
        match self.mode {
            GridMode::Full2D => 1.0,
            _ => (self.n - 1) as f64,
        }
    }

    /// Quadrature of a nodal field against the round area element.
    pub fn integrate(&self, field: &ScalarField) -> Result<f64> {
        self.check_field(field)?;
        for (i, v) in field.values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { node: i });
            }
        }
        Ok(self.integrate_values(&field.values))
    }

    /// Fixed-order weighted sum; callers guarantee finiteness.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (v, w) in values.iter().zip(self.weights.iter()) {
            acc += v * w;
        }
        acc
    }

    fn check_field(&self, field: &ScalarField) -> Result<()> {
        if field.values.len() != self.node_count() {
            return Err(Error::FieldGridMismatch { field: field.values.len(), grid: self.node_count() });
        }
        Ok(())
    }

    /// Covariant gradient and Hessian of a scalar field, in the orthonormal
    /// frame of the round metric. Errors on `Radial` grids, where fields are
    /// constant by construction.
    pub fn differentiate(&self, field: &ScalarField) -> Result<FieldDerivs> {
        self.differentiate_with_parity(field, Parity::Even)
    }

    /// As [`differentiate`](Self::differentiate) with an explicit polar
    /// reflection parity. Scalar fields on the sphere are `Even`; `Odd` is for
    /// fields that flip sign across the poles.
    pub fn differentiate_with_parity(&self, field: &ScalarField, parity: Parity) -> Result<FieldDerivs> {
        self.check_field(field)?;
        match self.mode {
            GridMode::Radial => Err(Error::UnsupportedGrid(
                "differentiate on a radial grid (fields there are constant)".into(),
            )),
            GridMode::Axisymmetric => Ok(self.differentiate_axisym(&field.values, parity)),
            GridMode::Full2D => Ok(self.differentiate_full2d(&field.values, parity)),
        }
    }

    fn differentiate_axisym(&self, f: &[f64], parity: Parity) -> FieldDerivs {
        let nt = self.res_theta;
        let h = self.h_theta;
        let sign = match parity {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        };
        let at = |i: isize| -> f64 {
            if i < 0 {
                sign * f[(-i - 1) as usize]
            } else if i as usize >= nt {
                sign * f[2 * nt - 1 - i as usize]
            } else {
                f[i as usize]
            }
        };
        let mut out = FieldDerivs::zeros(nt);
        for i in 0..nt {
            let ii = i as isize;
            let (fm, f0, fp) = (at(ii - 1), f[i], at(ii + 1));
            let d1 = (fp - fm) / (2.0 * h);
            let d2 = (fp - 2.0 * f0 + fm) / (h * h);
            let cot = self.theta[i].cos() / self.theta[i].sin();
            out.grad[0][i] = d1;
            out.hess[0][i] = d2;
            out.hess[2][i] = cot * d1;
        }
        out
    }

    /// Full2D stencils are fourth-order (5-point central). The frame
    /// components divide coordinate derivatives by powers of `sin(theta)`,
    /// which amplifies stencil error by up to `1/theta^2` at pole-adjacent
    /// nodes; a fourth-order interior error keeps the covariant output at
    /// second order uniformly, where second-order stencils would degrade to
    /// first.
    fn differentiate_full2d(&self, f: &[f64], parity: Parity) -> FieldDerivs {
        let (nt, np) = (self.res_theta, self.res_psi);
        let (ht, hp) = (self.h_theta, self.h_psi);
        let sign = match parity {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        };
        // Polar reflection: crossing a pole shifts the azimuth by half a turn
        // (np is even by construction).
        let reflect = |src: &[f64], i: isize, j: usize| -> f64 {
            if i < 0 {
                sign * src[(-i - 1) as usize * np + (j + np / 2) % np]
            } else if i as usize >= nt {
                sign * src[(2 * nt - 1 - i as usize) * np + (j + np / 2) % np]
            } else {
                src[i as usize * np + j]
            }
        };
        let idx = |i: usize, j: usize| i * np + j;
        let count = nt * np;
        let mut d_psi = vec![0.0; count];
        let mut d_psi_psi = vec![0.0; count];
        for i in 0..nt {
            for j in 0..np {
                let jm2 = f[idx(i, (j + np - 2) % np)];
                let jm1 = f[idx(i, (j + np - 1) % np)];
                let j0 = f[idx(i, j)];
                let jp1 = f[idx(i, (j + 1) % np)];
                let jp2 = f[idx(i, (j + 2) % np)];
                d_psi[idx(i, j)] = (jm2 - 8.0 * jm1 + 8.0 * jp1 - jp2) / (12.0 * hp);
                d_psi_psi[idx(i, j)] =
                    (-jm2 + 16.0 * jm1 - 30.0 * j0 + 16.0 * jp1 - jp2) / (12.0 * hp * hp);
            }
        }
        let d1_theta = |src: &[f64], i: isize, j: usize| -> f64 {
            (reflect(src, i - 2, j) - 8.0 * reflect(src, i - 1, j) + 8.0 * reflect(src, i + 1, j)
                - reflect(src, i + 2, j))
                / (12.0 * ht)
        };
        let mut out = FieldDerivs::zeros(count);
        for i in 0..nt {
            let theta = self.theta[i];
            let (sin_t, cos_t) = theta.sin_cos();
            let cot = cos_t / sin_t;
            for j in 0..np {
                let k = idx(i, j);
                let ii = i as isize;
                let d_t = d1_theta(f, ii, j);
                let d_tt = (-reflect(f, ii - 2, j) + 16.0 * reflect(f, ii - 1, j) - 30.0 * f[k]
                    + 16.0 * reflect(f, ii + 1, j)
                    - reflect(f, ii + 2, j))
                    / (12.0 * ht * ht);
                // The azimuthal derivative of a scalar reflects across the
                // pole with the same rule as the scalar itself.
                let d_tp = d1_theta(&d_psi, ii, j);
                // Covariant Hessian on S^2 in (theta, psi) coordinates, then
                // rescaled to the orthonormal frame (e_theta, e_psi/sin).
                let h_tt = d_tt;
                let h_tp_coord = d_tp - cot * d_psi[k];
                let h_pp_coord = d_psi_psi[k] + sin_t * cos_t * d_t;
                out.grad[0][k] = d_t;
                out.grad[1][k] = d_psi[k] / sin_t;
                out.hess[0][k] = h_tt;
                out.hess[1][k] = h_tp_coord / sin_t;
                out.hess[2][k] = h_pp_coord / (sin_t * sin_t);
            }
        }
        out
    }
}

fn latitude_nodes(nt: usize) -> (Vec<f64>, f64) {
    let h = std::f64::consts::PI / nt as f64;
    let theta = (0..nt).map(|i| (i as f64 + 0.5) * h).collect();
    (theta, h)
}

/// Fejér-type weights on cell-centered latitude nodes for the density
/// `angular_factor * sin^p(theta)`: exact on `cos(k theta)` for k < N.
///
/// The weights solve the moment system with the DCT orthogonality of the
/// cell-centered cosine basis, so no linear solve is needed.
fn latitude_weights(theta: &[f64], p: usize, angular_factor: f64) -> Result<Vec<f64>> {
    let nt = theta.len();
    let moments: Vec<f64> = (0..nt)
        .map(|k| {
            angular_factor
                * quad::integrate_composite(
                    |t| (k as f64 * t).cos() * t.sin().powi(p as i32),
                    0.0,
                    std::f64::consts::PI,
                    64,
                    16,
                )
        })
        .collect();
    let mut weights = vec![0.0; nt];
    for (i, w) in weights.iter_mut().enumerate() {
        let mut acc = moments[0] / nt as f64;
        for (k, m) in moments.iter().enumerate().skip(1) {
            acc += 2.0 / nt as f64 * m * (k as f64 * theta[i]).cos();
        }
        *w = acc;
    }
    let total: f64 = weights.iter().sum();
    let expect = angular_factor
        * quad::integrate_composite(|t| t.sin().powi(p as i32), 0.0, std::f64::consts::PI, 64, 16);
    if (total - expect).abs() > 1e-10 * expect.abs() {
        return Err(Error::UnsupportedGrid(format!(
            "quadrature weights sum to {total}, expected {expect}"
        )));
    }
    if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| **w <= 0.0) {
        return Err(Error::UnsupportedGrid(format!("nonpositive quadrature weight {w} at node {i}")));
    }
    Ok(weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const PI: f64 = std::f64::consts::PI;

    #[test]
    fn omega_closed_forms() {
        assert!((omega_n(1) - 2.0 * PI).abs() < 1e-14);
        assert!((omega_n(2) - 4.0 * PI).abs() < 1e-13);
        assert!((omega_n(3) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((omega_n(4) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn build_contracts() {
        let g = SphereGrid::build(GridMode::Axisymmetric, 2, Resolution::Nodes(64)).unwrap();
        assert_eq!(g.node_count(), 64);
        let total: f64 = g.weights().iter().sum();
        assert!((total - 4.0 * PI).abs() < 1e-10 * 4.0 * PI);

        let g2 = SphereGrid::build(GridMode::Full2D, 2, Resolution::Grid2D(64, 128)).unwrap();
        assert_eq!(g2.node_count(), 8192);

        assert!(SphereGrid::build(GridMode::Full2D, 3, Resolution::Grid2D(64, 64)).is_err());
        assert!(SphereGrid::build(GridMode::Axisymmetric, 2, Resolution::Nodes(4)).is_err());
        assert!(SphereGrid::build(GridMode::Axisymmetric, 1, Resolution::Nodes(64)).is_err());

        let r = SphereGrid::build(GridMode::Radial, 2, Resolution::Nodes(1)).unwrap();
        assert_eq!(r.node_count(), 1);
        assert!((r.weights()[0] - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn weights_positive_across_sizes() {
        for n in 2..=5 {
            for nt in [8usize, 16, 64, 256] {
                let g = SphereGrid::build(GridMode::Axisymmetric, n, Resolution::Nodes(nt)).unwrap();
                assert!(g.weights().iter().all(|w| *w > 0.0), "n={n} nt={nt}");
                let total: f64 = g.weights().iter().sum();
                assert!(
                    (total - omega_n(n)).abs() < 1e-10 * omega_n(n),
                    "n={n} nt={nt} sum={total}"
                );
            }
        }
    }

    #[test]
    fn integrate_examples() {
        let g = SphereGrid::build(GridMode::Axisymmetric, 2, Resolution::Nodes(64)).unwrap();
        let one = ScalarField::constant(&g, 1.0);
        assert!((g.integrate(&one).unwrap() - 4.0 * PI).abs() < 1e-10);

        let cos2 = ScalarField::from_latitude(&g, |t| t.cos() * t.cos());
        assert!((g.integrate(&cos2).unwrap() - 4.0 * PI / 3.0).abs() < 1e-8);

        let cos = ScalarField::from_latitude(&g, |t| t.cos());
        assert!(g.integrate(&cos).unwrap().abs() < 1e-12);

        let mut bad = ScalarField::constant(&g, 1.0);
        bad.values[3] = f64::NAN;
        assert!(matches!(g.integrate(&bad), Err(Error::NonFinite { node: 3 })));
    }

    #[test]
    fn derivative_oracles_axisym() {
        // cos(theta) is the first Laplace-Beltrami eigenfunction on S^2:
        // trace of the Hessian is -2 cos(theta), gradient norm is sin(theta).
        let mut errs = Vec::new();
        for nt in [64usize, 128, 256] {
            let g = SphereGrid::build(GridMode::Axisymmetric, 2, Resolution::Nodes(nt)).unwrap();
            let f = ScalarField::from_latitude(&g, |t| t.cos());
            let d = g.differentiate(&f).unwrap();
            let mut lap_err: f64 = 0.0;
            let mut grad_err: f64 = 0.0;
            for i in 0..nt {
                let t = g.theta_of(i);
                let lap = d.hess[0][i] + d.hess[2][i];
                lap_err = lap_err.max((lap + 2.0 * t.cos()).abs());
                grad_err = grad_err.max((d.grad_norm_sq(i) - t.sin() * t.sin()).abs());
            }
            errs.push((lap_err, grad_err));
        }
        for k in 0..2 {
            let order = (errs[k].0 / errs[k + 1].0).log2();
            assert!(order > 1.9, "laplacian order {order}");
            let order_g = (errs[k].1 / errs[k + 1].1).log2();
            assert!(order_g > 1.9, "gradient order {order_g}");
        }
        // absolute size at the coarsest level is already small
        assert!(errs[0].0 < 2e-3 && errs[0].1 < 2e-3);
    }

    #[test]
    fn derivative_oracles_full2d() {
        // f = sin(theta) cos(theta) cos(psi) is smooth on S^2 (the xz harmonic);
        // its Laplace-Beltrami image is -6 f.
        let mut errs = Vec::new();
        for nt in [32usize, 64, 128] {
            let g = SphereGrid::build(GridMode::Full2D, 2, Resolution::Grid2D(nt, 2 * nt)).unwrap();
            let f = ScalarField::from_angles(&g, |t, p| t.sin() * t.cos() * p.cos());
            let d = g.differentiate(&f).unwrap();
            let mut lap_err: f64 = 0.0;
            for i in 0..g.node_count() {
                let (t, p) = (g.theta_of(i), g.psi_of(i));
                let lap = d.hess[0][i] + d.hess[2][i];
                lap_err = lap_err.max((lap + 6.0 * t.sin() * t.cos() * p.cos()).abs());
            }
            errs.push(lap_err);
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 1.9, "full2d laplacian order {order}, errs {errs:?}");
    }

    #[test]
    fn integral_convergence_order() {
        // |cos|^3 is C^2 but not smooth, so the quadrature error is visible
        // above rounding and must shrink at order >= 1.9 under refinement
        // (smooth fields hit the roundoff floor immediately).
        let exact = 2.0 * PI * 2.0 / 4.0; // 2 pi int_0^pi |cos t|^3 sin t dt = 2 pi * (2/4)
        let mut errs = Vec::new();
        for nt in [16usize, 32, 64] {
            let g = SphereGrid::build(GridMode::Axisymmetric, 2, Resolution::Nodes(nt)).unwrap();
            let f = ScalarField::from_latitude(&g, |t| t.cos().abs().powi(3));
            errs.push((g.integrate(&f).unwrap() - exact).abs());
        }
        for k in 0..2 {
            let order = (errs[k] / errs[k + 1]).log2();
            assert!(order > 1.9, "integral order {order}, errs {errs:?}");
        }
    }

    #[test]
    fn odd_parity_reflection() {
        // sin(theta) extends oddly across both poles; with the odd closure the
        // derivative stays second-order accurate.
        let g = SphereGrid::build(GridMode::Axisymmetric, 2, Resolution::Nodes(128)).unwrap();
        let f = ScalarField::from_latitude(&g, |t| t.sin());
        let d = g.differentiate_with_parity(&f, Parity::Odd).unwrap();
        let mut err: f64 = 0.0;
        for i in 0..g.node_count() {
            err = err.max((d.grad[0][i] - g.theta_of(i).cos()).abs());
        }
        assert!(err < 5e-4, "odd-parity derivative error {err}");
    }

    #[test]
    fn constant_fields_have_zero_derivatives() {
        let g = SphereGrid::build(GridMode::Axisymmetric, 3, Resolution::Nodes(32)).unwrap();
        let f = ScalarField::constant(&g, 2.5);
        let d = g.differentiate(&f).unwrap();
        for i in 0..g.node_count() {
            assert_eq!(d.grad[0][i], 0.0);
            assert_eq!(d.hess[0][i], 0.0);
            assert_eq!(d.hess[2][i], 0.0);
        }
    }

    #[test]
    fn radial_mode_contracts() {
        let g = SphereGrid::build(GridMode::Radial, 3, Resolution::Nodes(1)).unwrap();
        let f = ScalarField::constant(&g, 1.0);
        assert!(g.differentiate(&f).is_err());
        assert!((g.integrate(&f).unwrap() - omega_n(3)).abs() < 1e-12);
    }

    #[test]
    fn field_grid_mismatch() {
        let g = SphereGrid::build(GridMode::Axisymmetric, 2, Resolution::Nodes(16)).unwrap();
        let f = ScalarField { values: vec![0.0; 8] };
        assert!(matches!(
            g.differentiate(&f),
            Err(Error::FieldGridMismatch { field: 8, grid: 16 })
        ));
    }

    proptest! {
        #[test]
        fn differentiate_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let g = SphereGrid::build(GridMode::Axisymmetric, 2, Resolution::Nodes(32)).unwrap();
            let u = ScalarField::from_latitude(&g, |t| t.cos());
            let v = ScalarField::from_latitude(&g, |t| (2.0 * t).cos());
            let w = ScalarField::new(&g, u.values.iter().zip(&v.values)
                .map(|(x, y)| a * x + b * y).collect()).unwrap();
            let du = g.differentiate(&u).unwrap();
            let dv = g.differentiate(&v).unwrap();
            let dw = g.differentiate(&w).unwrap();
            for i in 0..g.node_count() {
                let lin = a * du.grad[0][i] + b * dv.grad[0][i];
                prop_assert!((dw.grad[0][i] - lin).abs() <= 1e-12 * (1.0 + lin.abs()));
                let lin_h = a * du.hess[0][i] + b * dv.hess[0][i];
                prop_assert!((dw.hess[0][i] - lin_h).abs() <= 1e-10 * (1.0 + lin_h.abs()));
            }
        }
    }
}
