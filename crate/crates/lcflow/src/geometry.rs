//! Extrinsic geometry of a starshaped radial graph in hyperbolic space.
//!
//! Hyperbolic space is the warped product `dr^2 + sinh^2(r) sigma` over the
//! round sphere. A starshaped hypersurface is the graph of a radial function
//! `r` on S^n; all derived quantities are computed from the rescaled graph
//! function `phi` with `D phi = D r / sinh r`, in the orthonormal frame of the
//! round metric:
//!
//! * induced metric      `g = lambda^2 (I + a a^T)`, `a = D phi`
//! * second fundamental  `h = (lambda' / (lambda v)) g - (lambda / v) D^2 phi`
//! * mean curvature      `H = n lambda' / (lambda v) - tr(P D^2 phi) / (lambda v)`
//!   with the projector `P = I - a a^T / v^2`, `v = sqrt(1 + |a|^2)`
//! * support function    `u = lambda / v`, positive exactly on starshaped graphs
//! * area element        `d mu = lambda^n v dsigma`
//!
//! Principal curvatures are the eigenvalues of the Weingarten map, obtained
//! from the symmetric generalized problem `h x = kappa g x` (never from the
//! nonsymmetric `g^{-1} h`), so they are real by construction.

use crate::error::{Error, Result};
use crate::sphere::{FieldDerivs, GridMode, ScalarField, SphereGrid};
use crate::symm;
use crate::tol;
use rayon::prelude::*;

/// Warp factors of hyperbolic space at radius `r >= 0`:
/// `(sinh r, cosh r, cosh r - 1)`.
pub fn warp_factors(r: f64) -> Result<(f64, f64, f64)> {
    if r < 0.0 {
        return Err(Error::NegativeRadius(r));
    }
    if r > tol::RADIUS_CAP {
        return Err(Error::RadiusCap { node: 0, r, cap: tol::RADIUS_CAP });
    }
    let lambda = r.sinh();
    let lambda_prime = r.cosh();
    Ok((lambda, lambda_prime, lambda_prime - 1.0))
}

/// A starshaped hypersurface as a radial graph over a sphere grid.
#[derive(Debug, Clone)]
pub struct GraphHypersurface {
    grid: SphereGrid,
    r: ScalarField,
    phi: ScalarField,
}

impl GraphHypersurface {
    /// Validates `0 < r <= cap` and finiteness, and derives the graph
    /// function `phi = log tanh(r/2)` (the antiderivative of `1/sinh`).
    pub fn new(grid: SphereGrid, r: ScalarField) -> Result<Self> {
        if r.values.len() != grid.node_count() {
            return Err(Error::FieldGridMismatch { field: r.values.len(), grid: grid.node_count() });
        }
        for (i, &v) in r.values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { node: i });
            }
            if v <= 0.0 {
                return Err(Error::DegenerateRadius { node: i, r: v });
            }
            if v > tol::RADIUS_CAP {
                return Err(Error::RadiusCap { node: i, r: v, cap: tol::RADIUS_CAP });
            }
        }
        let phi = ScalarField {
            values: r.values.iter().map(|&x| (x / 2.0).tanh().ln()).collect(),
        };
        Ok(GraphHypersurface { grid, r, phi })
    }

    pub fn grid(&self) -> &SphereGrid {
        &self.grid
    }

    pub fn radius(&self) -> &ScalarField {
        &self.r
    }

    pub fn phi(&self) -> &ScalarField {
        &self.phi
    }

    pub fn r_min_max(&self) -> (f64, f64) {
        let mut lo = f64::MAX;
        let mut hi = f64::MIN;
        for &v in &self.r.values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// Full extrinsic geometry snapshot.
    pub fn geometry(&self) -> Result<GeometryData> {
        let count = self.grid.node_count();
        let derivs = match self.grid.mode() {
            GridMode::Radial => FieldDerivs::zeros(count),
            _ => self.grid.differentiate(&self.phi)?,
        };
        GeometryData::from_parts(self, derivs)
    }
}

/// Per-node extrinsic data of a graph hypersurface. Immutable snapshot; all
/// vectors are indexed by grid node.
#[derive(Debug, Clone)]
pub struct GeometryData {
    pub n: usize,
    pub mode: GridMode,
    /// Multiplicity of the secondary frame direction (n-1 on axisymmetric
    /// grids, 1 on Full2D).
    pub mult: f64,
    pub r: Vec<f64>,
    pub lambda: Vec<f64>,
    pub lambda_prime: Vec<f64>,
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    /// Graph-function derivatives in the round orthonormal frame.
    pub phi_derivs: FieldDerivs,
    /// Induced metric frame components (tt, ts, ss).
    pub g_frame: [Vec<f64>; 3],
    /// Second fundamental form frame components (tt, ts, ss).
    pub h_frame: [Vec<f64>; 3],
    pub mean_curvature: Vec<f64>,
    /// Principal curvatures, ascending, flattened with stride `n`.
    kappa: Vec<f64>,
    /// `lambda^n v` per node; `d mu = area_weight * w dsigma`.
    pub area_weight: Vec<f64>,
    quad_weights: Vec<f64>,
    /// Largest relative mismatch between the Weingarten trace and the mean
    /// curvature across nodes.
    pub trace_residual_max: f64,
}

struct NodeGeom {
    lambda: f64,
    lambda_prime: f64,
    v: f64,
    u: f64,
    g: [f64; 3],
    h: [f64; 3],
    mean: f64,
    kappa2: [f64; 2], // (polar, secondary) before sorting/expansion
    trace_res: f64,
}

impl GeometryData {
    fn from_parts(hyp: &GraphHypersurface, derivs: FieldDerivs) -> Result<GeometryData> {
        let grid = &hyp.grid;
        let n = grid.dim();
        let count = grid.node_count();
        let mult = grid.secondary_multiplicity();
        let nf = n as f64;

        // Data-parallel over nodes for large grids; the map is pure and the
        // collection ordered, so the result is bitwise identical to the
        // sequential path regardless of thread count.
        const PAR_THRESHOLD: usize = 1024;
        let node_geom = |i: usize| -> std::result::Result<NodeGeom, Error> {
                let r = hyp.r.values[i];
                let lambda = r.sinh();
                let lambda_prime = r.cosh();
                let a = [derivs.grad[0][i], derivs.grad[1][i]];
                let l = [derivs.hess[0][i], derivs.hess[1][i], derivs.hess[2][i]];
                for x in a.iter().chain(l.iter()) {
                    if !x.is_finite() {
                        return Err(Error::NonFinite { node: i });
                    }
                }
                let v = (1.0 + a[0] * a[0] + a[1] * a[1]).sqrt();
                let u = lambda / v;
                if !(u > 0.0) {
                    return Err(Error::NotStarshaped { node: i, u });
                }
                let l2 = lambda * lambda;
                let g = [l2 * (1.0 + a[0] * a[0]), l2 * a[0] * a[1], l2 * (1.0 + a[1] * a[1])];
                let s = lambda_prime / (lambda * v);
                let q = lambda / v;
                let h = [s * g[0] - q * l[0], s * g[1] - q * l[1], s * g[2] - q * l[2]];
                let v2 = v * v;
                let p = [1.0 - a[0] * a[0] / v2, -a[0] * a[1] / v2, 1.0 - a[1] * a[1] / v2];
                let tr_pl = p[0] * l[0] + 2.0 * p[1] * l[1] + mult * p[2] * l[2];
                let mean = nf * s - tr_pl / (lambda * v);
                let kappa2 = match grid.mode() {
                    GridMode::Full2D => {
                        let (k1, k2) = symm::generalized_eigen_2x2((h[0], h[1], h[2]), (g[0], g[1], g[2]))
                            .ok_or(Error::MetricNotSpd { node: i })?;
                        [k1, k2]
                    }
                    _ => {
                        if !(g[0] > 0.0 && g[2] > 0.0) {
                            return Err(Error::MetricNotSpd { node: i });
                        }
                        [h[0] / g[0], h[2] / g[2]]
                    }
                };
                let trace = kappa2[0] + mult * kappa2[1];
                let trace_res = (trace - mean).abs() / (1.0 + mean.abs());
                Ok(NodeGeom { lambda, lambda_prime, v, u, g, h, mean, kappa2, trace_res })
        };
        let nodes: Vec<std::result::Result<NodeGeom, Error>> = if count >= PAR_THRESHOLD {
            (0..count).into_par_iter().map(node_geom).collect()
        } else {
            (0..count).map(node_geom).collect()
        };

        let mut out = GeometryData {
            n,
            mode: grid.mode(),
            mult,
            r: hyp.r.values.clone(),
            lambda: Vec::with_capacity(count),
            lambda_prime: Vec::with_capacity(count),
            v: Vec::with_capacity(count),
            u: Vec::with_capacity(count),
            phi_derivs: derivs,
            g_frame: [Vec::with_capacity(count), Vec::with_capacity(count), Vec::with_capacity(count)],
            h_frame: [Vec::with_capacity(count), Vec::with_capacity(count), Vec::with_capacity(count)],
            mean_curvature: Vec::with_capacity(count),
            kappa: Vec::with_capacity(count * n),
            area_weight: Vec::with_capacity(count),
            quad_weights: grid.weights().to_vec(),
            trace_residual_max: 0.0,
        };
        for node in nodes {
            let nd = node?;
            out.lambda.push(nd.lambda);
            out.lambda_prime.push(nd.lambda_prime);
            out.v.push(nd.v);
            out.u.push(nd.u);
            for c in 0..3 {
                out.g_frame[c].push(nd.g[c]);
                out.h_frame[c].push(nd.h[c]);
            }
            out.mean_curvature.push(nd.mean);
            out.area_weight.push(nd.lambda.powi(n as i32) * nd.v);
            let mut kv = Vec::with_capacity(n);
            kv.push(nd.kappa2[0]);
            let reps = if grid.mode() == GridMode::Full2D { 1 } else { n - 1 };
            for _ in 0..reps {
                kv.push(nd.kappa2[1]);
            }
            kv.sort_by(|x, y| x.partial_cmp(y).unwrap());
            out.kappa.extend_from_slice(&kv);
            out.trace_residual_max = out.trace_residual_max.max(nd.trace_res);
        }
        Ok(out)
    }

    pub fn node_count(&self) -> usize {
        self.r.len()
    }

    /// Principal curvatures at a node, ascending.
    pub fn kappa_at(&self, i: usize) -> &[f64] {
        &self.kappa[i * self.n..(i + 1) * self.n]
    }

    /// `int f dmu` over the hypersurface, fixed summation order.
    pub fn integrate_mu(&self, values: &[f64]) -> f64 {
        let mut acc = 0.0;
        for ((f, aw), w) in values.iter().zip(&self.area_weight).zip(&self.quad_weights) {
            acc += f * aw * w;
        }
        acc
    }

    /// `int f dmu` with `f` given per node.
    pub fn integrate_mu_with(&self, f: impl Fn(usize) -> f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.node_count() {
            acc += f(i) * self.area_weight[i] * self.quad_weights[i];
        }
        acc
    }

    pub fn area(&self) -> f64 {
        self.integrate_mu_with(|_| 1.0)
    }

    pub fn max_grad_phi_sq(&self) -> f64 {
        (0..self.node_count()).fold(0.0f64, |m, i| m.max(self.phi_derivs.grad_norm_sq(i)))
    }

    /// Normalized symmetric function `E_l` of the principal curvatures,
    /// per node, for all `l = 0..=lmax`.
    pub fn elementary_all(&self, lmax: usize) -> Vec<Vec<f64>> {
        (0..self.node_count())
            .map(|i| symm::normalized_elementary_all(self.kappa_at(i), lmax))
            .collect()
    }

    /// First node (if any) whose curvature vector leaves the strict cone
    /// `E_1..E_k > 0`.
    pub fn cone_violation(&self, k: usize) -> Result<Option<usize>> {
        for i in 0..self.node_count() {
            if !symm::in_garding_cone(self.kappa_at(i), k)? {
                return Ok(Some(i));
            }
        }
        Ok(None)
    }
}

/// Re-derive principal curvatures from the stored frame tensors through the
/// symmetric generalized eigenproblem, validating positive-definiteness of
/// the metric node by node.
pub fn principal_curvatures(geom: &GeometryData) -> Result<Vec<f64>> {
    let count = geom.node_count();
    let mut out = Vec::with_capacity(count * geom.n);
    for i in 0..count {
        let g = (geom.g_frame[0][i], geom.g_frame[1][i], geom.g_frame[2][i]);
        let h = (geom.h_frame[0][i], geom.h_frame[1][i], geom.h_frame[2][i]);
        let (k1, k2) = symm::generalized_eigen_2x2(h, g).ok_or(Error::MetricNotSpd { node: i })?;
        let mut kv = Vec::with_capacity(geom.n);
        if geom.mode == GridMode::Full2D {
            kv.push(k1);
            kv.push(k2);
        } else {
            // the polar/secondary ratios, labeled before sorting
            let kt = h.0 / g.0;
            let ks = h.2 / g.2;
            kv.push(kt);
            for _ in 0..geom.n - 1 {
                kv.push(ks);
            }
            kv.sort_by(|x, y| x.partial_cmp(y).unwrap());
        }
        out.extend_from_slice(&kv);
    }
    Ok(out)
}

/// Residuals of the two structure identities of the warp potential
/// `cosh r` restricted to the hypersurface:
///
/// * gradient:  `grad (cosh r) - lambda * grad r` (tangential),
/// * Hessian:   `Hess_M (cosh r) - (lambda' g - u h)`.
///
/// The surface Hessian is assembled covariantly: round-sphere second
/// derivatives corrected by the metric's difference tensor, which is closed
/// form in `phi` and its frame derivatives. Both residuals vanish identically
/// on round spheres and decay at second order under grid refinement.
#[derive(Debug, Clone, Copy)]
pub struct IdentityResiduals {
    pub grad_max: f64,
    pub hess_max: f64,
}

pub fn geometry_identity_residuals(
    hyp: &GraphHypersurface,
    geom: &GeometryData,
) -> Result<IdentityResiduals> {
    let grid = hyp.grid();
    if grid.mode() == GridMode::Radial {
        // no tangential variation: both identities are exact
        return Ok(IdentityResiduals { grad_max: 0.0, hess_max: 0.0 });
    }
    let omega = ScalarField {
        values: geom.lambda_prime.clone(),
    };
    let d_omega = grid.differentiate(&omega)?;
    let d_r = grid.differentiate(hyp.radius())?;

    let mut grad_max: f64 = 0.0;
    let mut hess_max: f64 = 0.0;
    for i in 0..geom.node_count() {
        let lambda = geom.lambda[i];
        let lambda_prime = geom.lambda_prime[i];
        let u = geom.u[i];
        let a = [geom.phi_derivs.grad[0][i], geom.phi_derivs.grad[1][i]];
        let l = sym_to_mat(&geom.phi_derivs, i);
        let v2 = geom.v[i] * geom.v[i];
        let l2 = lambda * lambda;

        for c in 0..2 {
            grad_max = grad_max.max((d_omega.grad[c][i] - lambda * d_r.grad[c][i]).abs());
        }

        // Difference tensor of g = lambda^2 (sigma + dphi dphi) relative to
        // the round connection: C^k_ij = (1/2) g^{kl} (T_{i,jl} + T_{j,il} - T_{l,ij})
        // with T_{i,jl} = D_i g_{jl} expanded through D lambda = lambda lambda' D phi.
        let mut t = [[[0.0f64; 2]; 2]; 2];
        for i1 in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let delta = if j == k { 1.0 } else { 0.0 };
                    t[i1][j][k] = 2.0 * l2 * lambda_prime * a[i1] * (delta + a[j] * a[k])
                        + l2 * (l[j][i1] * a[k] + a[j] * l[k][i1]);
                }
            }
        }
        // inverse metric in the frame: lambda^{-2} (I - a a^T / v^2)
        let ginv = [
            [(1.0 - a[0] * a[0] / v2) / l2, -a[0] * a[1] / v2 / l2],
            [-a[0] * a[1] / v2 / l2, (1.0 - a[1] * a[1] / v2) / l2],
        ];
        let grad_omega = [d_omega.grad[0][i], d_omega.grad[1][i]];
        let hess_omega = sym_to_mat(&d_omega, i);
        let g_mat = [[geom.g_frame[0][i], geom.g_frame[1][i]], [geom.g_frame[1][i], geom.g_frame[2][i]]];
        let h_mat = [[geom.h_frame[0][i], geom.h_frame[1][i]], [geom.h_frame[1][i], geom.h_frame[2][i]]];
        for ii in 0..2 {
            for jj in ii..2 {
                let mut corr = 0.0;
                for k in 0..2 {
                    let mut c_kij = 0.0;
                    for ll in 0..2 {
                        c_kij += 0.5 * ginv[k][ll] * (t[ii][jj][ll] + t[jj][ii][ll] - t[ll][ii][jj]);
                    }
                    corr += c_kij * grad_omega[k];
                }
                let lhs = hess_omega[ii][jj] - corr;
                let rhs = lambda_prime * g_mat[ii][jj] - u * h_mat[ii][jj];
                hess_max = hess_max.max((lhs - rhs).abs());
            }
        }
    }
    Ok(IdentityResiduals { grad_max, hess_max })
}

fn sym_to_mat(d: &FieldDerivs, i: usize) -> [[f64; 2]; 2] {
    [[d.hess[0][i], d.hess[1][i]], [d.hess[1][i], d.hess[2][i]]]
}
