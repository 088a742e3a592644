//! Declarative experiment runner: JSON configs in, deterministic CSV/JSON
//! artifacts out.
//!
//! A config names one of four commands:
//!
//! * `geometry` — build a grid and shape, report its extrinsic geometry and
//!   identity residuals (header-only CSV, JSON summary);
//! * `simulate` — integrate a flow, write the time series CSV and a JSON
//!   summary with the monotonicity audit;
//! * `verify` — evaluate the curvature-weighted inequality on the configured
//!   shape plus seeded random starshaped perturbations, with a two-resolution
//!   discretization-error estimate per sample;
//! * `audit` — re-audit a previously written series CSV column by column.
//!
//! Outputs are bit-reproducible: fixed node orderings, fixed reduction
//! orders, a fixed RNG (seeded), 17-significant-digit CSV floats, `\n` line
//! endings, and JSON with a fixed key order. Reruns with the same seed and
//! thread count or different thread counts produce identical bytes.

use crate::error::{Error, Result};
use crate::flow::{
    run_flow, FlowLaw, FlowState, RunOptions, SeriesRow, StopReason, TimeSeries,
};
use crate::functionals::{
    self, curvature_integrals, michael_simon_report, AmbientWeight, AuditTarget, InequalityReport,
    MonotonicityAudit,
};
use crate::geometry::{geometry_identity_residuals, GeometryData, GraphHypersurface};
use crate::profiles::{profile_from_fhat, RadialProfile, WeightProfile};
use crate::sphere::{GridMode, Resolution, ScalarField, SphereGrid};
use crate::tol;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Geometry,
    Simulate,
    Verify,
    Audit,
}

impl std::fmt::Display for CommandKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CommandKind::Geometry => "geometry",
            CommandKind::Simulate => "simulate",
            CommandKind::Verify => "verify",
            CommandKind::Audit => "audit",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: CommandKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub shape: ShapeSpec,
    #[serde(default)]
    pub flow: Option<FlowSpec>,
    #[serde(default)]
    pub verify: Option<VerifySpec>,
    #[serde(default)]
    pub audit: Option<AuditSpec>,
    #[serde(default)]
    pub outputs: OutputSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub mode: GridMode,
    pub n: usize,
    pub resolution: ResolutionSpec,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ResolutionSpec {
    Nodes(usize),
    Grid2D([usize; 2]),
}

impl ResolutionSpec {
    fn to_resolution(self) -> Resolution {
        match self {
            ResolutionSpec::Nodes(n) => Resolution::Nodes(n),
            ResolutionSpec::Grid2D([a, b]) => Resolution::Grid2D(a, b),
        }
    }

    fn doubled(self) -> ResolutionSpec {
        match self {
            ResolutionSpec::Nodes(n) => ResolutionSpec::Nodes(2 * n),
            ResolutionSpec::Grid2D([a, b]) => ResolutionSpec::Grid2D([2 * a, 2 * b]),
        }
    }
}

/// Initial shape `r(theta) = radius * (1 + sum_j amp_j cos(j theta))`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeSpec {
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default)]
    pub harmonics: Vec<Harmonic>,
}

impl Default for ShapeSpec {
    fn default() -> Self {
        ShapeSpec { radius: 1.0, harmonics: Vec::new() }
    }
}

fn default_radius() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Harmonic {
    pub j: u32,
    pub amp: f64,
}

impl ShapeSpec {
    fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius < tol::RADIUS_CAP) {
            return Err(Error::Config(format!(
                "shape.radius: {} outside (0, {})",
                self.radius,
                tol::RADIUS_CAP
            )));
        }
        let total: f64 = self.harmonics.iter().map(|h| h.amp.abs()).sum();
        if !total.is_finite() || total >= 1.0 {
            return Err(Error::Config(format!(
                "shape.harmonics: total amplitude {total} must stay below 1 to keep r positive"
            )));
        }
        Ok(())
    }

    fn build(&self, grid: &SphereGrid) -> ScalarField {
        ScalarField::from_latitude(grid, |t| {
            let mut s = 1.0;
            for h in &self.harmonics {
                s += h.amp * (h.j as f64 * t).cos();
            }
            self.radius * s
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawKind {
    ConstrainedMcf,
    InverseCurvature,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    pub law: LawKind,
    #[serde(default)]
    pub k: Option<usize>,
    /// Constraint-function descriptor; the profile is constructed so its
    /// recomputed constraint function equals this expression.
    #[serde(default)]
    pub fhat: Option<String>,
    /// Alternatively a direct weight descriptor (optionally with derivative
    /// descriptors; finite differences otherwise).
    #[serde(default)]
    pub fbar: Option<String>,
    #[serde(default)]
    pub dfbar: Option<String>,
    #[serde(default)]
    pub d2fbar: Option<String>,
    #[serde(default = "default_domain")]
    pub domain: [f64; 2],
    #[serde(default = "default_normalization")]
    pub normalization: f64,
    #[serde(default)]
    pub weight: Option<WeightSpec>,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
    #[serde(default = "default_c_cfl")]
    pub c_cfl: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

fn default_domain() -> [f64; 2] {
    [0.2, 5.0]
}

fn default_normalization() -> f64 {
    1.0
}

fn default_t_max() -> f64 {
    20.0
}

fn default_grad_tol() -> f64 {
    tol::GRAD_STOP_TOL
}

fn default_c_cfl() -> f64 {
    tol::CFL_DEFAULT
}

fn default_record_every() -> usize {
    10
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    #[serde(default)]
    pub gtilde: Option<String>,
    #[serde(default)]
    pub ftilde: Option<String>,
    #[serde(default)]
    pub ode: Option<WeightOdeSpec>,
    /// Domain in `lambda' = cosh r` for expression-backed weights.
    #[serde(default)]
    pub domain: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightOdeSpec {
    pub s_domain: [f64; 2],
    pub boundary: [f64; 2],
    #[serde(default = "default_ode_nodes")]
    pub nodes: usize,
    #[serde(default)]
    pub homogeneous: bool,
}

fn default_ode_nodes() -> usize {
    2_001
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    pub k: usize,
    pub f: FSpec,
    #[serde(default)]
    pub samples: usize,
    #[serde(default = "default_amplitude_range")]
    pub amplitude_range: [f64; 2],
    #[serde(default = "default_modes")]
    pub modes: Vec<u32>,
    #[serde(default = "default_true")]
    pub include_round_sphere: bool,
    /// Skip the doubled-resolution discretization-error estimate.
    #[serde(default)]
    pub skip_refinement_estimate: bool,
    #[serde(default)]
    pub pk_f_const: Option<f64>,
    /// For k >= 2 with a constant weight, rescale the constant per shape to
    /// the equality value `1 / sinh(h0^{-1}(W0))`. The two sides of the k-th
    /// inequality scale with different powers of a constant weight, so this
    /// is the normalization at which spheres balance exactly.
    #[serde(default)]
    pub adapt_equality_constant: bool,
}

fn default_amplitude_range() -> [f64; 2] {
    [2e-3, 5e-2]
}

fn default_modes() -> Vec<u32> {
    vec![1, 2, 3, 4]
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum FSpec {
    Constant { value: f64 },
    Radial {
        fbar: String,
        #[serde(default)]
        dfbar: Option<String>,
        #[serde(default)]
        d2fbar: Option<String>,
        #[serde(default = "default_domain")]
        domain: [f64; 2],
    },
    LambdaPrime {
        #[serde(default)]
        ftilde: Option<String>,
        #[serde(default)]
        gtilde: Option<String>,
        #[serde(default)]
        domain: Option<[f64; 2]>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSpec {
    pub series_csv: String,
    pub law: LawKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_csv_name")]
    pub csv: String,
    #[serde(default = "default_json_name")]
    pub json: String,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { csv: default_csv_name(), json: default_json_name() }
    }
}

fn default_csv_name() -> String {
    "series.csv".into()
}

fn default_json_name() -> String {
    "summary.json".into()
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Paths of the artifacts a run wrote.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub csv_path: PathBuf,
    pub json_path: PathBuf,
}

pub fn run_config(cfg: &RunConfig, out_dir: &Path, quiet: bool) -> Result<RunArtifacts> {
    let csv_path = out_dir.join(&cfg.outputs.csv);
    let json_path = out_dir.join(&cfg.outputs.json);
    match cfg.command {
        CommandKind::Geometry => run_geometry(cfg, &csv_path, &json_path)?,
        CommandKind::Simulate => run_simulate(cfg, &csv_path, &json_path)?,
        CommandKind::Verify => run_verify(cfg, &csv_path, &json_path)?,
        CommandKind::Audit => run_audit(cfg, &csv_path, &json_path)?,
    }
    if !quiet {
        println!("wrote {}", csv_path.display());
        println!("wrote {}", json_path.display());
    }
    Ok(RunArtifacts { csv_path, json_path })
}

fn build_grid(cfg: &RunConfig) -> Result<SphereGrid> {
    let spec = cfg
        .grid
        .as_ref()
        .ok_or_else(|| Error::Config(format!("grid: required for {}", cfg.command)))?;
    SphereGrid::build(spec.mode, spec.n, spec.resolution.to_resolution())
}

fn build_law(n: usize, spec: &FlowSpec) -> Result<FlowLaw> {
    match spec.law {
        LawKind::ConstrainedMcf => {
            let domain = (spec.domain[0], spec.domain[1]);
            let profile = if let Some(fhat) = &spec.fhat {
                let f = crate::expr::Expr::compile(fhat)?;
                profile_from_fhat(f, n, domain, spec.normalization)?
            } else if let Some(fbar) = &spec.fbar {
                RadialProfile::from_exprs(
                    n,
                    domain,
                    fbar,
                    spec.dfbar.as_deref(),
                    spec.d2fbar.as_deref(),
                )?
            } else {
                return Err(Error::Config("flow: constrained_mcf needs `fhat` or `fbar`".into()));
            };
            Ok(FlowLaw::ConstrainedMcf { profile })
        }
        LawKind::InverseCurvature => {
            let k = spec
                .k
                .ok_or_else(|| Error::Config("flow: inverse_curvature needs `k`".into()))?;
            let weight = spec.weight.as_ref().map(|w| build_weight(n, k, w)).transpose()?;
            Ok(FlowLaw::InverseCurvature { k, weight })
        }
    }
}

fn build_weight(n: usize, k: usize, spec: &WeightSpec) -> Result<WeightProfile> {
    if k >= n {
        return Err(Error::Config(format!(
            "weight: k = n = {n} unsupported in the k-th mean curvature inequality"
        )));
    }
    let domain = spec.domain.map(|d| (d[0], d[1])).unwrap_or((1.0, tol::RADIUS_CAP.cosh()));
    if let Some(ode) = &spec.ode {
        let sol = crate::profiles::weight_from_ode(
            k,
            n,
            (ode.boundary[0], ode.boundary[1]),
            (ode.s_domain[0], ode.s_domain[1]),
            ode.nodes,
            ode.homogeneous,
        )?;
        return Ok(sol.profile);
    }
    if let Some(g) = &spec.gtilde {
        return WeightProfile::from_gtilde_expr(n, k, domain, g);
    }
    if let Some(f) = &spec.ftilde {
        return WeightProfile::from_ftilde_expr(n, k, domain, f);
    }
    Err(Error::Config("weight: needs one of `gtilde`, `ftilde`, `ode`".into()))
}

// ---------------------------------------------------------------------------
// geometry command

#[derive(Debug, Serialize)]
struct GeometrySummary {
    command: String,
    mode: GridMode,
    n: usize,
    nodes: usize,
    r_min: f64,
    r_max: f64,
    area: f64,
    weighted_volume: f64,
    volume_radius: f64,
    u_min: f64,
    h_min: f64,
    h_max: f64,
    kappa_min: f64,
    kappa_max: f64,
    max_grad_sq: f64,
    weingarten_trace_residual: f64,
    identity_grad_residual: f64,
    identity_hess_residual: f64,
    minkowski_residuals: Vec<f64>,
}

fn run_geometry(cfg: &RunConfig, csv_path: &Path, json_path: &Path) -> Result<()> {
    let grid = build_grid(cfg)?;
    let hyp = GraphHypersurface::new(grid.clone(), cfg.shape.build(&grid))?;
    let geom = hyp.geometry()?;
    let res = geometry_identity_residuals(&hyp, &geom)?;
    let (r_min, r_max) = hyp.r_min_max();
    let mut minkowski = Vec::new();
    for m in 1..=geom.n {
        minkowski.push(curvature_integrals(&geom, m)?.minkowski_residual);
    }
    let mut kappa_min = f64::MAX;
    let mut kappa_max = f64::MIN;
    for i in 0..geom.node_count() {
        for &k in geom.kappa_at(i) {
            kappa_min = kappa_min.min(k);
            kappa_max = kappa_max.max(k);
        }
    }
    let summary = GeometrySummary {
        command: cfg.command.to_string(),
        mode: grid.mode(),
        n: geom.n,
        nodes: geom.node_count(),
        r_min,
        r_max,
        area: geom.area(),
        weighted_volume: functionals::weighted_volume(&geom),
        volume_radius: functionals::h0_inv(geom.n, functionals::weighted_volume(&geom))?,
        u_min: geom.u.iter().cloned().fold(f64::MAX, f64::min),
        h_min: geom.mean_curvature.iter().cloned().fold(f64::MAX, f64::min),
        h_max: geom.mean_curvature.iter().cloned().fold(f64::MIN, f64::max),
        kappa_min,
        kappa_max,
        max_grad_sq: geom.max_grad_phi_sq(),
        weingarten_trace_residual: geom.trace_residual_max,
        identity_grad_residual: res.grad_max,
        identity_hess_residual: res.hess_max,
        minkowski_residuals: minkowski,
    };
    write_csv(csv_path, &[])?;
    write_json(json_path, &summary)
}

// ---------------------------------------------------------------------------
// simulate command

#[derive(Debug, Serialize)]
struct SimulateSummary {
    command: String,
    law: String,
    stop: StopReason,
    steps: usize,
    records: usize,
    t_final: f64,
    r_min_final: f64,
    r_max_final: f64,
    stationary_radius: Option<f64>,
    /// `max |r - r0|` at the final time when the stationary radius is known.
    final_deviation: Option<f64>,
    fitted_decay_rate: Option<f64>,
    barrier_excess: f64,
    grad_bound_excess: f64,
    audit: MonotonicityAudit,
}

fn run_simulate(cfg: &RunConfig, csv_path: &Path, json_path: &Path) -> Result<()> {
    let grid = build_grid(cfg)?;
    let spec = cfg
        .flow
        .as_ref()
        .ok_or_else(|| Error::Config("flow: required for simulate".into()))?;
    let law = build_law(grid.dim(), spec)?;
    let hyp = GraphHypersurface::new(grid.clone(), cfg.shape.build(&grid))?;
    let mut state = FlowState::new(hyp, law)?;
    let opts = RunOptions {
        t_max: spec.t_max,
        grad_tol: spec.grad_tol,
        c_cfl: spec.c_cfl,
        record_every: spec.record_every,
        max_halvings: 40,
    };
    let outcome = run_flow(&mut state, &opts)?;
    let target = match &state.law {
        FlowLaw::ConstrainedMcf { .. } => AuditTarget::ConstrainedMcf,
        FlowLaw::InverseCurvature { weight, .. } => {
            AuditTarget::InverseCurvature { weight: weight.as_ref() }
        }
    };
    let audit = functionals::monotonicity_audit(&outcome.series, target)?;
    let (r_min_final, r_max_final) = state.hyp.r_min_max();
    let final_deviation = outcome
        .stationary_radius
        .map(|r0| (r_min_final - r0).abs().max((r_max_final - r0).abs()));
    let summary = SimulateSummary {
        command: cfg.command.to_string(),
        law: state.law.kind().into(),
        stop: outcome.stop,
        steps: outcome.steps,
        records: outcome.series.rows.len(),
        t_final: state.t,
        r_min_final,
        r_max_final,
        stationary_radius: outcome.stationary_radius,
        final_deviation,
        fitted_decay_rate: outcome.series.fitted_decay_rate(),
        barrier_excess: outcome.barrier_excess,
        grad_bound_excess: outcome.grad_bound_excess,
        audit,
    };
    write_csv(csv_path, &outcome.series.rows)?;
    write_json(json_path, &summary)?;
    if outcome.barrier_excess > tol::BARRIER_SLACK {
        return Err(Error::StepRejected(format!(
            "radial barrier exceeded by {} (allowed {})",
            outcome.barrier_excess,
            tol::BARRIER_SLACK
        )));
    }
    if outcome.grad_bound_excess > 1e-12 {
        return Err(Error::StepRejected(format!(
            "gradient bound exceeded by {}",
            outcome.grad_bound_excess
        )));
    }
    if !summary.audit.primary_monotone {
        return Err(Error::StepRejected(format!(
            "monotonicity of {} violated at record {:?} (relative uptick {})",
            summary.audit.primary_functional,
            summary.audit.worst_violation_step,
            summary.audit.worst_violation_rel
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// verify command

#[derive(Debug, Serialize)]
struct SampleResult {
    index: usize,
    oscillation: f64,
    rel_gap: f64,
    gap: f64,
    error_estimate: Option<f64>,
}

#[derive(Debug, Serialize)]
struct VerifySummary {
    command: String,
    k: usize,
    f_description: String,
    samples: usize,
    base_report: InequalityReport,
    sphere_rel_gap: Option<f64>,
    min_rel_gap: f64,
    max_rel_gap: f64,
    /// Every sampled gap clears `-10 x (estimated discretization error)`.
    positivity_ok: bool,
    /// Sampled `rel_gap < 1e-6` only with radial oscillation `< 1e-4`.
    rigidity_ok: bool,
    violations: usize,
    worst_samples: Vec<SampleResult>,
}

enum VerifyWeight {
    Constant(f64),
    Radial(RadialProfile),
    LambdaPrime(WeightProfile),
}

impl VerifyWeight {
    fn ambient(&self) -> AmbientWeight<'_> {
        match self {
            VerifyWeight::Constant(c) => AmbientWeight::Constant(*c),
            VerifyWeight::Radial(p) => AmbientWeight::Radial(p),
            VerifyWeight::LambdaPrime(w) => AmbientWeight::LambdaPrime(w),
        }
    }
}

fn build_verify_weight(n: usize, k: usize, spec: &FSpec) -> Result<VerifyWeight> {
    match spec {
        FSpec::Constant { value } => Ok(VerifyWeight::Constant(*value)),
        FSpec::Radial { fbar, dfbar, d2fbar, domain } => Ok(VerifyWeight::Radial(
            RadialProfile::from_exprs(
                n,
                (domain[0], domain[1]),
                fbar,
                dfbar.as_deref(),
                d2fbar.as_deref(),
            )?,
        )),
        FSpec::LambdaPrime { ftilde, gtilde, domain } => {
            let d = domain.map(|d| (d[0], d[1])).unwrap_or((1.0, tol::RADIUS_CAP.cosh()));
            if let Some(g) = gtilde {
                Ok(VerifyWeight::LambdaPrime(WeightProfile::from_gtilde_expr(n, k, d, g)?))
            } else if let Some(f) = ftilde {
                Ok(VerifyWeight::LambdaPrime(WeightProfile::from_ftilde_expr(n, k, d, f)?))
            } else {
                Err(Error::Config("verify.f: lambda_prime needs `ftilde` or `gtilde`".into()))
            }
        }
    }
}

fn run_verify(cfg: &RunConfig, csv_path: &Path, json_path: &Path) -> Result<()> {
    let spec = cfg
        .verify
        .as_ref()
        .ok_or_else(|| Error::Config("verify: required for verify".into()))?;
    let grid_spec = cfg
        .grid
        .as_ref()
        .ok_or_else(|| Error::Config("grid: required for verify".into()))?;
    let n = grid_spec.n;
    if spec.k == n && spec.k >= 2 {
        return Err(Error::Config(format!(
            "verify.k: k = n = {n} unsupported in the k-th mean curvature inequality"
        )));
    }
    if spec.k < 1 || spec.k > n {
        return Err(Error::Config(format!("verify.k: k = {} outside 1..={n}", spec.k)));
    }
    let grid = SphereGrid::build(grid_spec.mode, n, grid_spec.resolution.to_resolution())?;
    let fine_grid = if spec.skip_refinement_estimate {
        None
    } else {
        Some(SphereGrid::build(grid_spec.mode, n, grid_spec.resolution.doubled().to_resolution())?)
    };
    let weight = build_verify_weight(n, spec.k, &spec.f)?;
    let adapt = spec.adapt_equality_constant && spec.k >= 2;

    let report_geom = |geom: &GeometryData| -> Result<InequalityReport> {
        if adapt {
            let c = 1.0 / functionals::h0_inv(n, functionals::weighted_volume(geom))?.sinh();
            michael_simon_report(geom, spec.k, AmbientWeight::Constant(c), spec.pk_f_const)
        } else {
            michael_simon_report(geom, spec.k, weight.ambient(), spec.pk_f_const)
        }
    };
    let report_on = |shape: &dyn Fn(f64) -> f64, g: &SphereGrid| -> Result<InequalityReport> {
        let r = ScalarField::from_latitude(g, shape);
        let geom = GraphHypersurface::new(g.clone(), r)?.geometry()?;
        report_geom(&geom)
    };

    // base shape
    let base_shape = cfg.shape.clone();
    let base = report_on(
        &|t| {
            let mut s = 1.0;
            for h in &base_shape.harmonics {
                s += h.amp * (h.j as f64 * t).cos();
            }
            base_shape.radius * s
        },
        &grid,
    )?;

    let sphere_rel_gap = if spec.include_round_sphere {
        let radius = cfg.shape.radius;
        Some(report_on(&|_| radius, &grid)?.rel_gap)
    } else {
        None
    };

    // seeded random perturbations
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows: Vec<SeriesRow> = Vec::new();
    let mut results: Vec<SampleResult> = Vec::new();
    let mut min_rel_gap = f64::MAX;
    let mut max_rel_gap = f64::MIN;
    let mut positivity_ok = true;
    let mut rigidity_ok = true;
    let mut violations = 0usize;
    let radius = cfg.shape.radius;

    for index in 0..spec.samples {
        let (lo, hi) = (spec.amplitude_range[0], spec.amplitude_range[1]);
        let total = lo * (hi / lo).powf(rng.gen::<f64>());
        let mut amps: Vec<f64> = spec.modes.iter().map(|_| rng.gen::<f64>()).collect();
        let sum: f64 = amps.iter().sum();
        for a in &mut amps {
            *a *= total / sum.max(1e-300);
            if rng.gen_bool(0.5) {
                *a = -*a;
            }
        }
        let modes = spec.modes.clone();
        let shape = move |t: f64| {
            let mut s = 1.0;
            for (j, a) in modes.iter().zip(&amps) {
                s += a * (*j as f64 * t).cos();
            }
            radius * s
        };

        let r_field = ScalarField::from_latitude(&grid, &shape);
        let hyp = GraphHypersurface::new(grid.clone(), r_field)?;
        let geom = hyp.geometry()?;
        let rep = report_geom(&geom)?;
        let (r_lo, r_hi) = hyp.r_min_max();
        let oscillation = r_hi - r_lo;

        let error_estimate = match &fine_grid {
            Some(fg) => {
                let rep_f = report_on(&shape, fg)?;
                // second-order Richardson: coarse-fine difference over 3
                Some(((rep.lhs - rep_f.lhs).abs() + (rep.rhs - rep_f.rhs).abs()) / 3.0)
            }
            None => None,
        };
        let gap_floor = error_estimate.map(|e| -10.0 * e).unwrap_or(-1e-9 * rep.rhs.abs());
        if rep.gap < gap_floor {
            positivity_ok = false;
            violations += 1;
        }
        if rep.rel_gap < 1e-6 && oscillation >= 1e-4 {
            rigidity_ok = false;
            violations += 1;
        }
        min_rel_gap = min_rel_gap.min(rep.rel_gap);
        max_rel_gap = max_rel_gap.max(rep.rel_gap);

        results.push(SampleResult {
            index,
            oscillation,
            rel_gap: rep.rel_gap,
            gap: rep.gap,
            error_estimate,
        });
        rows.push(sample_row(index, &geom, &rep, oscillation));
    }

    results.sort_by(|a, b| a.rel_gap.partial_cmp(&b.rel_gap).unwrap());
    results.truncate(8);
    if spec.samples == 0 {
        min_rel_gap = base.rel_gap;
        max_rel_gap = base.rel_gap;
    }
    let summary = VerifySummary {
        command: cfg.command.to_string(),
        k: spec.k,
        f_description: base.f_description.clone(),
        samples: spec.samples,
        base_report: base,
        sphere_rel_gap,
        min_rel_gap,
        max_rel_gap,
        positivity_ok,
        rigidity_ok,
        violations,
        worst_samples: results,
    };
    write_csv(csv_path, &rows)?;
    write_json(json_path, &summary)?;
    if !summary.positivity_ok || !summary.rigidity_ok {
        return Err(Error::StepRejected(format!(
            "inequality verification failed on {violations} sample(s)"
        )));
    }
    Ok(())
}

/// Map a verification sample onto the series schema: `t` carries the sample
/// index and the step-specific columns are zero.
fn sample_row(index: usize, geom: &GeometryData, rep: &InequalityReport, osc: f64) -> SeriesRow {
    let (r_min, r_max) = geom
        .r
        .iter()
        .fold((f64::MAX, f64::MIN), |acc, &r| (acc.0.min(r), acc.1.max(r)));
    let m = rep.k.saturating_sub(1).max(1).min(geom.n);
    let minkowski = curvature_integrals(geom, m).map(|c| c.minkowski_residual).unwrap_or(f64::NAN);
    let _ = osc;
    SeriesRow {
        t: index as f64,
        dt: 0.0,
        area: geom.area(),
        int_f_pow: rep.rhs_integral,
        w0: rep.weighted_volume,
        int_ek1_g: rep.rhs_integral,
        max_grad_sq: geom.max_grad_phi_sq(),
        r_min,
        r_max,
        minkowski_resid: minkowski,
        lhs: rep.lhs,
        rhs: rep.rhs,
        gap: rep.gap,
        reduced_gap: rep.reduced_gap,
        rate_fixed_coord: None,
        rate_material: None,
    }
}

// ---------------------------------------------------------------------------
// audit command

#[derive(Debug, Serialize)]
struct AuditSummary {
    command: String,
    series_csv: String,
    audit: MonotonicityAudit,
}

fn run_audit(cfg: &RunConfig, csv_path: &Path, json_path: &Path) -> Result<()> {
    let spec = cfg
        .audit
        .as_ref()
        .ok_or_else(|| Error::Config("audit: required for audit".into()))?;
    let series = read_csv(Path::new(&spec.series_csv))?;
    let target = match spec.law {
        LawKind::ConstrainedMcf => AuditTarget::ConstrainedMcf,
        LawKind::InverseCurvature => AuditTarget::InverseCurvature { weight: None },
    };
    let audit = functionals::monotonicity_audit(&series, target)?;
    let summary = AuditSummary {
        command: cfg.command.to_string(),
        series_csv: spec.series_csv.clone(),
        audit,
    };
    // the audit command re-reads a series; its own CSV artifact is empty
    write_csv(csv_path, &[])?;
    write_json(json_path, &summary)?;
    if !summary.audit.primary_monotone {
        return Err(Error::StepRejected(format!(
            "monotonicity of {} violated at record {:?} (relative uptick {})",
            summary.audit.primary_functional,
            summary.audit.worst_violation_step,
            summary.audit.worst_violation_rel
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// deterministic emission

pub const CSV_HEADER: &str =
    "t,dt,area,int_f_pow,W0,int_Ek1_g,max_grad_sq,r_min,r_max,minkowski_resid,lhs,rhs,gap";

/// 17 significant digits, enough to round-trip any f64.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv(path: &Path, rows: &[SeriesRow]) -> Result<()> {
    let mut out = String::with_capacity(64 + rows.len() * 256);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let fields = [
            r.t,
            r.dt,
            r.area,
            r.int_f_pow,
            r.w0,
            r.int_ek1_g,
            r.max_grad_sq,
            r.r_min,
            r.r_max,
            r.minkowski_resid,
            r.lhs,
            r.rhs,
            r.gap,
        ];
        let line: Vec<String> = fields.iter().map(|&x| fmt_f64(x)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::Io { path: path.display().to_string(), source: e })
}

pub fn read_csv(path: &Path) -> Result<TimeSeries> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(Error::Config(format!(
                "series {}: unexpected header {other:?}",
                path.display()
            )))
        }
    }
    let mut rows = Vec::new();
    for (ln, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 13 {
            return Err(Error::Config(format!(
                "series {} line {}: expected 13 fields, got {}",
                path.display(),
                ln + 2,
                parts.len()
            )));
        }
        let mut vals = [0.0f64; 13];
        for (i, p) in parts.iter().enumerate() {
            vals[i] = p.parse::<f64>().map_err(|e| {
                Error::Config(format!("series {} line {}: {e}", path.display(), ln + 2))
            })?;
        }
        rows.push(SeriesRow {
            t: vals[0],
            dt: vals[1],
            area: vals[2],
            int_f_pow: vals[3],
            w0: vals[4],
            int_ek1_g: vals[5],
            max_grad_sq: vals[6],
            r_min: vals[7],
            r_max: vals[8],
            minkowski_resid: vals[9],
            lhs: vals[10],
            rhs: vals[11],
            gap: vals[12],
            reduced_gap: None,
            rate_fixed_coord: None,
            rate_material: None,
        });
    }
    Ok(TimeSeries { rows })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("serialization: {e}")))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::Io { path: path.display().to_string(), source: e })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmpdir(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("lcflow-test-{name}-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn config_roundtrip_idempotent() {
        let text = r#"{
            "command": "simulate",
            "seed": 42,
            "grid": { "mode": "axisymmetric", "n": 2, "resolution": 64 },
            "shape": { "radius": 1.2, "harmonics": [ { "j": 2, "amp": 0.0833333 } ] },
            "flow": { "law": "constrained_mcf", "fhat": "r - 1", "domain": [0.2, 3.0], "t_max": 5.0 }
        }"#;
        let cfg = RunConfig::parse(text).unwrap();
        let once = cfg.to_json();
        let twice = RunConfig::parse(&once).unwrap().to_json();
        assert_eq!(once, twice);
    }

    #[test]
    fn config_rejects_unknown_fields() {
        let text = r#"{ "command": "geometry", "grid": { "mode": "radial", "n": 2, "resolution": 1 }, "typo": 1 }"#;
        assert!(RunConfig::parse(text).is_err());
    }

    #[test]
    fn csv_roundtrip_and_header_only() {
        let dir = tmpdir("csv");
        let path = dir.join("empty.csv");
        write_csv(&path, &[]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, format!("{CSV_HEADER}\n"));
        let series = read_csv(&path).unwrap();
        assert!(series.rows.is_empty());

        let row = SeriesRow {
            t: 0.1,
            dt: 1e-3,
            area: 17.355,
            int_f_pow: 12.0,
            w0: 20.0,
            int_ek1_g: 12.0,
            max_grad_sq: 1e-5,
            r_min: 0.999,
            r_max: 1.001,
            minkowski_resid: 1e-8,
            lhs: 14.0,
            rhs: 13.0,
            gap: 1.0,
            reduced_gap: None,
            rate_fixed_coord: Some(0.0),
            rate_material: Some(0.0),
        };
        let path2 = dir.join("one.csv");
        write_csv(&path2, std::slice::from_ref(&row)).unwrap();
        let back = read_csv(&path2).unwrap();
        assert_eq!(back.rows.len(), 1);
        assert_eq!(back.rows[0].area, row.area);
        assert_eq!(back.rows[0].gap, row.gap);
    }

    #[test]
    fn unwritable_path_reports_path() {
        let path = Path::new("/nonexistent-dir-lcflow/out.csv");
        match write_csv(path, &[]) {
            Err(Error::Io { path: p, .. }) => assert!(p.contains("nonexistent-dir-lcflow")),
            other => panic!("expected io error, got {other:?}"),
        }
    }

    #[test]
    fn geometry_command_end_to_end() {
        let dir = tmpdir("geom");
        let cfg = RunConfig::parse(
            r#"{
            "command": "geometry",
            "grid": { "mode": "axisymmetric", "n": 2, "resolution": 64 },
            "shape": { "radius": 1.0 }
        }"#,
        )
        .unwrap();
        let art = run_config(&cfg, &dir, true).unwrap();
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&art.json_path).unwrap()).unwrap();
        assert!((json["area"].as_f64().unwrap() - 17.3554).abs() < 1e-3);
        assert!(json["identity_hess_residual"].as_f64().unwrap() < 1e-11);
        let csv = std::fs::read_to_string(&art.csv_path).unwrap();
        assert_eq!(csv, format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn verify_k_equals_n_rejected() {
        let dir = tmpdir("ken");
        let cfg = RunConfig::parse(
            r#"{
            "command": "verify",
            "grid": { "mode": "axisymmetric", "n": 2, "resolution": 64 },
            "verify": { "k": 2, "f": { "kind": "constant", "value": 1.0 } }
        }"#,
        )
        .unwrap();
        match run_config(&cfg, &dir, true) {
            Err(e @ Error::Config(_)) => {
                assert!(e.to_string().contains("unsupported"));
                assert_eq!(e.exit_status(), 1);
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }
}
