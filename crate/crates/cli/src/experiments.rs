//! The experiment commands: closed-form identity suites, rigidity sweeps,
//! second-variation spectra, snapshots and single solves.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use glsphere::analytic::{
    componentwise_dirichlet, difference_field_g, dilation_map, dilation_point, g_dirichlet_at_identity,
    quartic_barycenter_closed_form, rotation_critical_field,
};
use glsphere::gl::{
    balancing_vector, degree, energy, modulus_diagnostics, phase_gradient_identity, phase_residuals,
    quartic_barycenter, residual_l2, GlModel,
};
use glsphere::mobius::{align_rotation, compose_kappa, dilation_control_for, AlignmentResult};
use glsphere::rotation::{apply, random_rotation, Mat3};
use glsphere::second_variation::{assemble_blocks, block_spectra};
use glsphere::solver::{flow_coeffs, random_perturbation, rotation_coeffs, FlowConfig, SolveTrace, StepRecord};
use glsphere::spherical::{build_grid, laplacian_scalar, synthesize, SphericalGrid};
use glsphere::vsh::{
    component_coeffs, first_mode_closed_forms, first_mode_decompose_coeffs, norm3, vector_laplacian, vsh_analyze,
    vsh_analyze_to, vsh_basis_field, vsh_synthesize, Vec3, VectorField, VshCoeffs, VshKind,
};

use crate::config::{ExperimentConfig, InitialData, SnapshotFamily};
use crate::error::{CliError, Result};
use crate::snapshot::Snapshot;
use crate::table::TableRow;

/// One measured identity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub suite: String,
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl IdentityCheck {
    fn new(suite: &str, name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self { suite: suite.into(), name: name.into(), measured, tolerance, passed: measured <= tolerance }
    }
}

fn sub3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Orthonormality, mean values and the three Laplacian block actions of
/// the vector harmonics of degree `l ≤ lmax`, by quadrature on `grid`.
pub fn vsh_algebra_suite(grid: &Arc<SphericalGrid>, lmax: usize) -> Result<Vec<IdentityCheck>> {
    let lmax = lmax.min(grid.band_limit() - 1);
    let k = (4.0 * PI / 3.0).sqrt();
    let mut ortho = 0.0_f64;
    let mut mean = 0.0_f64;
    let mut lap = [0.0_f64; 3];
    for (slot, kind) in [VshKind::N, VshKind::Psi, VshKind::Phi].into_iter().enumerate() {
        let lmin = if kind == VshKind::N { 0 } else { 1 };
        for l in lmin..=lmax {
            for m in -(l as i64)..=l as i64 {
                let field = vsh_basis_field(kind, l, m, grid)?;
                let unit = VshCoeffs::unit(grid.band_limit(), kind, l, m)?;
                let c = vsh_analyze(&field);
                ortho = ortho.max(max_abs(c.sub(&unit).to_flat()));

                let mut expected = [0.0; 3];
                if l == 1 {
                    let axis = (0..3).find(|&j| glsphere::vsh::degree_one_order(j) == m).expect("order");
                    expected[axis] = match kind {
                        VshKind::N => k,
                        VshKind::Psi => 8.0 * PI / 3.0 / (std::f64::consts::SQRT_2 * k),
                        VshKind::Phi => 0.0,
                    };
                }
                mean = mean.max(norm3(sub3(field.integral(), expected)));

                let comps = component_coeffs(&field);
                let mut componentwise = vec![[0.0; 3]; grid.len()];
                for (j, cj) in comps.iter().enumerate() {
                    // Components of a degree-l harmonic have degree ≤ l+1.
                    let values = synthesize(&laplacian_scalar(&cj.resized(l + 1)), grid)?;
                    for (out, v) in componentwise.iter_mut().zip(values.values()) {
                        out[j] = -v;
                    }
                }
                let componentwise = vsh_analyze(&VectorField::new(grid.clone(), componentwise)?);
                let d = componentwise.sub(&vector_laplacian(&unit)).to_flat();
                lap[slot] = lap[slot].max(max_abs(d));
            }
        }
    }
    let s = "vsh";
    Ok(vec![
        IdentityCheck::new(s, format!("orthonormality l<={lmax}"), ortho, 1e-11),
        IdentityCheck::new(s, format!("mean values l<={lmax}"), mean, 1e-11),
        IdentityCheck::new(s, "laplacian on N blocks", lap[0], 1e-11),
        IdentityCheck::new(s, "laplacian on Psi blocks", lap[1], 1e-11),
        IdentityCheck::new(s, "laplacian on Phi blocks", lap[2], 1e-11),
    ])
}

/// First-mode integrals, including the cross term, on random vectors.
pub fn first_mode_suite(grid: &Arc<SphericalGrid>, rng: &mut impl Rng, trials: usize) -> Result<Vec<IdentityCheck>> {
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let a: Vec3 = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let b: Vec3 = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        worst = worst.max(first_mode_closed_forms(a, b, grid)?.max_abs_error());
    }
    Ok(vec![IdentityCheck::new("first-modes", "closed forms incl. cross term", worst, 1e-10)])
}

/// Quadrature quartic barycenter of `u_λ` against the closed form.
pub fn barycenter_suite(grid: &Arc<SphericalGrid>, lambdas: &[f64]) -> Result<Vec<IdentityCheck>> {
    let mut out = Vec::new();
    for &lambda in lambdas {
        let q = quartic_barycenter(&dilation_map(lambda, grid)?);
        let exact = quartic_barycenter_closed_form(lambda);
        let (name, err, tol) = if exact[2] == 0.0 {
            ("abs error", (q[2] - exact[2]).abs(), 1e-9)
        } else {
            ("rel error", (q[2] - exact[2]).abs() / exact[2].abs(), 1e-6)
        };
        out.push(IdentityCheck::new("barycenter", format!("lambda={lambda} {name}"), err, tol));
        out.push(IdentityCheck::new(
            "barycenter",
            format!("lambda={lambda} transverse components"),
            q[0].abs().max(q[1].abs()),
            1e-9,
        ));
    }
    Ok(out)
}

/// Band limit of [`rotation_suite`] in [`verify_identities`]. Residuals of
/// sampled fields carry analysis round-off amplified by `l(l+1)`, a floor
/// that grows like `1e-16·L³` (about `4e-12` at `L = 32`, `4e-11` at `L = 64`).
pub const ROTATION_SUITE_BAND: usize = 32;

/// Energy, residual, balancing and phase identities at critical rotations.
pub fn rotation_suite(
    grid: &Arc<SphericalGrid>,
    eps_list: &[f64],
    rng: &mut impl Rng,
    count: usize,
) -> Result<Vec<IdentityCheck>> {
    let mut out = Vec::new();
    for &eps in eps_list {
        let mut res = 0.0_f64;
        let mut erel = 0.0_f64;
        let mut bal = 0.0_f64;
        let mut phase = 0.0_f64;
        let exact = 4.0 * PI * (1.0 - eps * eps);
        for _ in 0..count {
            let r = random_rotation(rng);
            let u = rotation_critical_field(&r, eps, grid)?;
            res = res.max(residual_l2(&u, eps)?);
            erel = erel.max((energy(&u, eps)? - exact).abs() / exact);
            bal = bal.max(norm3(balancing_vector(&u, eps)?));
            let p = phase_residuals(&u)?;
            phase = phase.max(p.laplacian_form).max(p.divergence_form).max(p.tangential_divergence);
        }
        let s = "rotation";
        out.push(IdentityCheck::new(s, format!("eps={eps} residual"), res, 1e-11));
        out.push(IdentityCheck::new(s, format!("eps={eps} energy rel error"), erel, 1e-10));
        out.push(IdentityCheck::new(s, format!("eps={eps} balancing vector"), bal, 1e-10));
        out.push(IdentityCheck::new(s, format!("eps={eps} phase residuals"), phase, 1e-10));
    }
    Ok(out)
}

/// Band limit of [`gradient_identity_suite`] in [`verify_identities`]. The
/// phase map `u/|u|` is not band-limited, so the pointwise identity needs
/// enough resolution regardless of the configured band (at `L = 24` the
/// error is already `8e-8`).
pub const GRADIENT_SUITE_BAND: usize = 32;

/// `|∇v|² = (|∇u|² − |∇|u||²)/|u|²` on random smooth non-vanishing fields.
pub fn gradient_identity_suite(band_limit: usize, rng: &mut impl Rng, trials: usize) -> Result<Vec<IdentityCheck>> {
    let grid = build_grid(band_limit)?;
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let c = rotation_coeffs(band_limit, 0.1, &random_rotation(rng), false).add(&random_perturbation(
            rng,
            band_limit,
            4.min(band_limit),
            0.3,
        ));
        let u = vsh_synthesize(&c, &grid)?;
        let (lhs, rhs) = phase_gradient_identity(&u)?;
        let scale = max_abs(lhs.iter().copied()).max(1.0);
        worst = worst.max(max_abs(lhs.iter().zip(&rhs).map(|(a, b)| a - b)) / scale);
    }
    Ok(vec![IdentityCheck::new("phase", "pointwise gradient identity", worst, 1e-8)])
}

/// Dirichlet integrals of the difference field and of dilations.
pub fn integral_suite(grid: &Arc<SphericalGrid>) -> Result<Vec<IdentityCheck>> {
    let g = componentwise_dirichlet(&difference_field_g(1.0, grid)?);
    let exact = g_dirichlet_at_identity();
    let mut out = vec![IdentityCheck::new("integrals", "dirichlet of G at identity", (g - exact).abs() / exact, 1e-10)];
    let d = componentwise_dirichlet(&dilation_map(1.5, grid)?);
    out.push(IdentityCheck::new("integrals", "dirichlet of u_1.5 = 8pi", (d - 8.0 * PI).abs() / (8.0 * PI), 1e-8));
    let deg = degree(&dilation_map(1.5, grid)?)?;
    out.push(IdentityCheck::new("integrals", "degree of u_1.5", (deg.value - 1.0).abs(), 1e-8));
    Ok(out)
}

/// All identity suites at the configured band limit.
pub fn verify_identities(cfg: &ExperimentConfig) -> Result<Vec<IdentityCheck>> {
    cfg.validate()?;
    let grid = build_grid(cfg.band_limit)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = vsh_algebra_suite(&grid, 16)?;
    out.extend(first_mode_suite(&grid, &mut rng, 10)?);
    out.extend(barycenter_suite(&grid, &cfg.lambdas)?);
    let rot_grid = build_grid(cfg.band_limit.min(ROTATION_SUITE_BAND))?;
    out.extend(rotation_suite(&rot_grid, &cfg.epsilon, &mut rng, 5)?);
    out.extend(gradient_identity_suite(GRADIENT_SUITE_BAND, &mut rng, 3)?);
    out.extend(integral_suite(&grid)?);
    Ok(out)
}

/// Outcome of one `(ε, seed)` run of the rigidity sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub seed: u64,
    pub converged: bool,
    pub flow_steps: usize,
    pub newton_iterations: usize,
    pub energy: f64,
    pub residual: f64,
    pub aligned_l2: f64,
    pub aligned_h1: f64,
    pub det_sign: i32,
    pub dilation_defect: f64,
    pub balancing_norm: f64,
    pub grad_modulus_l2: f64,
    pub a0: f64,
    pub a_norm: f64,
    pub b_norm: f64,
    pub w_perp_l2: f64,
    /// Empty unless the row failed.
    pub error: String,
    /// Unix seconds when the row finished; excluded from determinism.
    pub timestamp: u64,
}

fn now_unix() -> u64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// `κ^d Rᵀ u − √(1−2ε²) x` in coefficients: the deviation in the frame of
/// the aligned rotation.
pub fn aligned_deviation(u: &VectorField, a: &AlignmentResult) -> VshCoeffs {
    let data = if a.det_sign < 0 { compose_kappa(u) } else { u.clone() };
    let rt = a.rotation.transpose();
    let amp = a.amplitude;
    vsh_analyze(&data.map(|v, x| {
        let y = apply(&rt, v);
        [y[0] - amp * x[0], y[1] - amp * x[1], y[2] - amp * x[2]]
    }))
}

/// Initial coefficients for a sweep row.
pub fn initial_data(cfg: &ExperimentConfig, eps: f64, rng: &mut ChaCha8Rng) -> Result<VshCoeffs> {
    let band = cfg.band_limit;
    let r = random_rotation(rng);
    let base = match cfg.initial {
        InitialData::Rotation => rotation_coeffs(band, eps, &r, false),
        InitialData::Dilation => {
            let grid = build_grid(band)?;
            let amp = (1.0 - 2.0 * eps * eps).sqrt();
            let lambda = cfg.dilation_lambda;
            let field = VectorField::from_fn(&grid, |x| {
                let y = dilation_point(lambda, x);
                let z = apply(&r, y);
                [amp * z[0], amp * z[1], amp * z[2]]
            });
            vsh_analyze_to(&field, band)?
        }
    };
    Ok(base.add(&random_perturbation(rng, band, cfg.perturb_lmax, cfg.perturb_amp)))
}

/// Flow plus refinement from the row's initial data.
pub fn solve_row(cfg: &ExperimentConfig, eps: f64, seed: u64) -> Result<(VshCoeffs, SolveTrace)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c0 = initial_data(cfg, eps, &mut rng)?;
    let model = GlModel::new(cfg.band_limit, eps)?;
    let flow = FlowConfig {
        dt: cfg.dt_for(eps),
        max_steps: cfg.max_steps,
        tol_residual: cfg.tol,
        ..FlowConfig::new(eps, cfg.band_limit)
    };
    flow.validate()?;
    Ok(flow_coeffs(&model, c0, &flow))
}

fn measure_row(cfg: &ExperimentConfig, eps: f64, seed: u64) -> Result<SweepRow> {
    let (c, trace) = solve_row(cfg, eps, seed)?;
    let grid = build_grid(cfg.band_limit)?;
    let u = vsh_synthesize(&c, &grid)?;
    let last: &StepRecord = trace.records.last().expect("trace has the initial record");
    let align = align_rotation(&u, eps)?;
    let dev = aligned_deviation(&u, &align);
    let fm = first_mode_decompose_coeffs(&dev);
    let diff = vsh_analyze(&u.sub(&align.reference_field(&grid)));
    let (_, control) = dilation_control_for(&u, eps)?;
    Ok(SweepRow {
        epsilon: eps,
        seed,
        converged: trace.converged(),
        flow_steps: trace.flow_steps(),
        newton_iterations: trace.newton_iterations(),
        energy: last.energy,
        residual: last.residual_l2,
        aligned_l2: diff.norm_sq().sqrt(),
        aligned_h1: diff.h1_norm_sq().sqrt(),
        det_sign: align.det_sign,
        dilation_defect: control.dilation_defect,
        balancing_norm: last.balancing_norm,
        grad_modulus_l2: modulus_diagnostics(&u, eps)?.grad_l2,
        a0: fm.a0,
        a_norm: norm3(fm.a),
        b_norm: norm3(fm.b),
        w_perp_l2: fm.w_perp_l2,
        error: String::new(),
        timestamp: now_unix(),
    })
}

fn failed_row(eps: f64, seed: u64, e: &CliError) -> SweepRow {
    SweepRow {
        epsilon: eps,
        seed,
        converged: false,
        flow_steps: 0,
        newton_iterations: 0,
        energy: f64::NAN,
        residual: f64::NAN,
        aligned_l2: f64::NAN,
        aligned_h1: f64::NAN,
        det_sign: 0,
        dilation_defect: f64::NAN,
        balancing_norm: f64::NAN,
        grad_modulus_l2: f64::NAN,
        a0: f64::NAN,
        a_norm: f64::NAN,
        b_norm: f64::NAN,
        w_perp_l2: f64::NAN,
        error: e.to_string(),
        timestamp: now_unix(),
    }
}

/// Aggregate verdict of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepSummary {
    pub rows: usize,
    pub converged: usize,
    /// Converged rows with energy below `8π − γ`.
    pub admissible: usize,
    /// Admissible rows farther than `1e-6` (H¹) from every rotation.
    pub violations: usize,
    pub failed_rows: usize,
    /// Least-squares slope of `log ‖∇|u|‖₂` against `log ε` (NaN with fewer
    /// than two distinct ε).
    pub grad_modulus_slope: f64,
}

impl SweepSummary {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

pub const RIGIDITY_H1_TOL: f64 = 1e-6;

pub fn rigidity_sweep(
    cfg: &ExperimentConfig,
    mut on_row: impl FnMut(&SweepRow),
) -> Result<(Vec<SweepRow>, SweepSummary)> {
    cfg.validate_sweep()?;
    let mut rows = Vec::new();
    for &eps in &cfg.epsilon {
        for seed in cfg.seed..cfg.seed + cfg.seeds {
            let row = measure_row(cfg, eps, seed).unwrap_or_else(|e| failed_row(eps, seed, &e));
            on_row(&row);
            rows.push(row);
        }
    }
    let summary = summarize(&rows, cfg.gamma);
    Ok((rows, summary))
}

pub fn summarize(rows: &[SweepRow], gamma: f64) -> SweepSummary {
    let admissible: Vec<&SweepRow> = rows.iter().filter(|r| r.converged && r.energy < 8.0 * PI - gamma).collect();
    let violations = admissible.iter().filter(|r| !(r.aligned_h1 <= RIGIDITY_H1_TOL)).count();
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        rows.iter().filter(|r| r.converged && r.grad_modulus_l2 > 0.0).map(|r| (r.epsilon, r.grad_modulus_l2)).unzip();
    SweepSummary {
        rows: rows.len(),
        converged: rows.iter().filter(|r| r.converged).count(),
        admissible: admissible.len(),
        violations,
        failed_rows: rows.iter().filter(|r| !r.error.is_empty()).count(),
        grad_modulus_slope: loglog_slope(&xs, &ys),
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> =
        xs.iter().zip(ys).filter(|(x, y)| **x > 0.0 && **y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return f64::NAN;
    }
    pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx
}

/// One line of the second-variation spectrum.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumRow {
    pub epsilon: f64,
    pub l: usize,
    pub n_entry: f64,
    pub cross_entry: f64,
    pub psi_entry: f64,
    pub phi_entry: f64,
    pub eig_min: f64,
    pub eig_max: f64,
    pub h1_min: f64,
    pub coercive: bool,
}

/// Per-ε summary of the spectrum.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumSummary {
    pub epsilon: f64,
    pub monopole: f64,
    pub lambda0: f64,
    pub kernel_dimension: usize,
    pub nullity: usize,
    pub morse_index: usize,
}

pub fn spectrum(cfg: &ExperimentConfig) -> Result<(Vec<SpectrumRow>, Vec<SpectrumSummary>)> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for &eps in &cfg.epsilon {
        let s = block_spectra(&assemble_blocks(eps, cfg.band_limit)?);
        for d in &s.per_degree {
            rows.push(SpectrumRow {
                epsilon: eps,
                l: d.l,
                n_entry: d.ab_block[0][0],
                cross_entry: d.ab_block[0][1],
                psi_entry: d.ab_block[1][1],
                phi_entry: d.c_value,
                eig_min: d.eigenvalues[0],
                eig_max: d.eigenvalues[1],
                h1_min: d.h1_min,
                coercive: d.coercive,
            });
        }
        summaries.push(SpectrumSummary {
            epsilon: eps,
            monopole: s.monopole,
            lambda0: s.lambda0,
            kernel_dimension: s.kernel_dimension,
            nullity: s.nullity,
            morse_index: s.morse_index,
        });
    }
    Ok((rows, summaries))
}

/// The field requested by `snapshot`.
pub fn snapshot_field(cfg: &ExperimentConfig) -> Result<Snapshot> {
    cfg.validate()?;
    let eps = cfg.epsilon[0];
    let grid = build_grid(cfg.band_limit)?;
    let field = match cfg.family {
        SnapshotFamily::Rotation => rotation_critical_field(&Mat3::identity(), eps, &grid)?,
        SnapshotFamily::Dilation => dilation_map(cfg.dilation_lambda, &grid)?,
        SnapshotFamily::Solve => {
            let (c, _) = solve_row(cfg, eps, cfg.seed)?;
            vsh_synthesize(&c, &grid)?
        }
    };
    let epsilon = if cfg.family == SnapshotFamily::Dilation { 0.0 } else { eps };
    Ok(Snapshot { epsilon, field })
}

impl TableRow for SweepRow {
    const HEADER: &'static [&'static str] = &[
        "version",
        "epsilon",
        "seed",
        "converged",
        "flow_steps",
        "newton_iterations",
        "energy",
        "residual",
        "aligned_l2",
        "aligned_h1",
        "det_sign",
        "dilation_defect",
        "balancing_norm",
        "grad_modulus_l2",
        "a0",
        "a_norm",
        "b_norm",
        "w_perp_l2",
        "error",
        "timestamp",
    ];

    fn fields(&self) -> Vec<String> {
        use crate::table::{float, TABLE_VERSION};
        vec![
            TABLE_VERSION.to_string(),
            float(self.epsilon),
            self.seed.to_string(),
            self.converged.to_string(),
            self.flow_steps.to_string(),
            self.newton_iterations.to_string(),
            float(self.energy),
            float(self.residual),
            float(self.aligned_l2),
            float(self.aligned_h1),
            self.det_sign.to_string(),
            float(self.dilation_defect),
            float(self.balancing_norm),
            float(self.grad_modulus_l2),
            float(self.a0),
            float(self.a_norm),
            float(self.b_norm),
            float(self.w_perp_l2),
            self.error.clone(),
            self.timestamp.to_string(),
        ]
    }
}

impl TableRow for SpectrumRow {
    const HEADER: &'static [&'static str] = &[
        "version",
        "epsilon",
        "l",
        "n_entry",
        "cross_entry",
        "psi_entry",
        "phi_entry",
        "eig_min",
        "eig_max",
        "h1_min",
        "coercive",
    ];

    fn fields(&self) -> Vec<String> {
        use crate::table::{float, TABLE_VERSION};
        vec![
            TABLE_VERSION.to_string(),
            float(self.epsilon),
            self.l.to_string(),
            float(self.n_entry),
            float(self.cross_entry),
            float(self.psi_entry),
            float(self.phi_entry),
            float(self.eig_min),
            float(self.eig_max),
            float(self.h1_min),
            self.coercive.to_string(),
        ]
    }
}

impl TableRow for IdentityCheck {
    const HEADER: &'static [&'static str] = &["version", "suite", "name", "measured", "tolerance", "passed"];

    fn fields(&self) -> Vec<String> {
        use crate::table::{float, TABLE_VERSION};
        vec![
            TABLE_VERSION.to_string(),
            self.suite.clone(),
            self.name.clone(),
            float(self.measured),
            float(self.tolerance),
            self.passed.to_string(),
        ]
    }
}

impl TableRow for StepRecordRow {
    const HEADER: &'static [&'static str] =
        &["version", "step", "stage", "energy", "residual_l2", "modulus_defect", "balancing_norm", "dt"];

    fn fields(&self) -> Vec<String> {
        use crate::table::{float, TABLE_VERSION};
        let r = &self.0;
        vec![
            TABLE_VERSION.to_string(),
            r.step.to_string(),
            format!("{:?}", r.stage).to_lowercase(),
            float(r.energy),
            float(r.residual_l2),
            float(r.modulus_defect),
            float(r.balancing_norm),
            float(r.dt),
        ]
    }
}

/// Trace record wrapper for tabular output.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecordRow(pub StepRecord);

impl Serialize for StepRecordRow {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let r = &self.0;
        let mut st = s.serialize_struct("StepRecord", 7)?;
        st.serialize_field("step", &r.step)?;
        st.serialize_field("stage", &format!("{:?}", r.stage).to_lowercase())?;
        st.serialize_field("energy", &r.energy)?;
        st.serialize_field("residual_l2", &r.residual_l2)?;
        st.serialize_field("modulus_defect", &r.modulus_defect)?;
        st.serialize_field("balancing_norm", &r.balancing_norm)?;
        st.serialize_field("dt", &r.dt)?;
        st.end()
    }
}
