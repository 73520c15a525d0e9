//! Critical points of `E_ε`: a semi-implicit gradient flow followed by
//! Newton–Krylov refinement.
//!
//! The flow step solves `(I − dt·Δ)u⁺ = u + dt·P_L[(1−|u|²)u]/ε²`, which is
//! a 2×2 solve per `(N_{lm}, Ψ_{lm})` pair and a scalar solve per `Φ_{lm}`.
//! Rotations are saddle points of the energy (one unstable direction per
//! axis, with eigenvalue close to `−4ε²`), so the flow only has to bring
//! the iterate into the Newton basin; refinement then converges
//! quadratically after deflating the three rotation directions.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::gl::{check_epsilon, GlModel, GlState};
use crate::krylov::gmres;
use crate::mobius::align_rotation;
use crate::rotation::{apply, kappa, Mat3};
use crate::second_variation::ModeBlock;
use crate::spherical::shared_grid_unchecked;
use crate::vsh::{
    analyze_on, cross3, dot3, norm3, scale3, vector_laplacian, vsh_analyze, vsh_synthesize, Vec3, VectorField,
    VshCoeffs, VshKind,
};

/// Parameters of [`flow_to_critical`].
#[derive(Clone, Debug, PartialEq)]
pub struct FlowConfig {
    pub epsilon: f64,
    pub dt: f64,
    pub max_steps: usize,
    /// Final residual target (flow and refinement).
    pub tol_residual: f64,
    pub band_limit: usize,
    /// Reject steps that raise the energy and halve `dt`.
    pub energy_guard: bool,
    /// Residual at which Newton refinement takes over; `None` runs the
    /// flow alone.
    pub newton_handoff: Option<f64>,
}

impl FlowConfig {
    /// Defaults: `dt = ε²/2`, 20 000 steps, tolerance `1e-8`, guard on,
    /// Newton hand-off at residual `1e-3`.
    pub fn new(epsilon: f64, band_limit: usize) -> Self {
        Self {
            epsilon,
            dt: 0.5 * epsilon * epsilon,
            max_steps: 20_000,
            tol_residual: 1e-8,
            band_limit,
            energy_guard: true,
            newton_handoff: Some(1e-3),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_epsilon(self.epsilon)?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.tol_residual > 0.0) {
            return Err(Error::Config(format!("tol_residual must be positive, got {}", self.tol_residual)));
        }
        if let Some(h) = self.newton_handoff {
            if !(h > 0.0) {
                return Err(Error::Config(format!("newton hand-off must be positive, got {h}")));
            }
        }
        crate::spherical::build_grid(self.band_limit).map(|_| ())
    }
}

/// Which stage produced a trace record.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Initial,
    Flow,
    Newton,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub stage: Stage,
    pub energy: f64,
    pub residual_l2: f64,
    /// `sup |1 − |u||` on the de-aliased grid.
    pub modulus_defect: f64,
    pub balancing_norm: f64,
    /// Time step that produced this state (0 for non-flow records).
    pub dt: f64,
}

/// How a solve ended.
#[derive(Clone, Debug, PartialEq)]
pub enum SolveOutcome {
    Converged,
    /// `max_steps` exhausted; the final state is the best iterate.
    MaxSteps,
    /// The energy guard drove `dt` below `1e-6` of its initial value.
    StepCollapse,
    /// Newton refinement failed; the final state is the best iterate.
    RefinementFailed(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveTrace {
    pub records: Vec<StepRecord>,
    pub outcome: SolveOutcome,
}

impl SolveTrace {
    pub fn converged(&self) -> bool {
        self.outcome == SolveOutcome::Converged
    }

    pub fn flow_steps(&self) -> usize {
        self.records.iter().filter(|r| r.stage == Stage::Flow).count()
    }

    pub fn newton_iterations(&self) -> usize {
        self.records.iter().filter(|r| r.stage == Stage::Newton).count()
    }
}

/// Nonlinear term, energy and diagnostics from one fine-grid synthesis.
struct Evaluation {
    nonlinear: VshCoeffs,
    energy: f64,
    modulus_defect: f64,
    balancing_norm: f64,
}

fn evaluate(model: &GlModel, c: &VshCoeffs) -> Evaluation {
    let fine = model.fine_grid();
    let samples = model.fine_samples(c);
    let gaps: Vec<f64> = samples.iter().map(|&u| 1.0 - dot3(u, u)).collect();
    let e2 = model.epsilon() * model.epsilon();
    let pot: Vec<f64> = gaps.iter().map(|g| g * g).collect();
    let energy = 0.5 * c.dirichlet_sq() + fine.integrate(&pot) / (4.0 * e2);
    let bal: Vec<Vec3> = pot.iter().zip(fine.points()).map(|(&p, x)| scale3(p / (e2 * e2), x)).collect();
    let balancing_norm = norm3(fine.integrate_vec(&bal));
    let modulus_defect = samples.iter().fold(0.0_f64, |a, &u| a.max((norm3(u) - 1.0).abs()));
    let values: Vec<Vec3> = samples.iter().zip(&gaps).map(|(&u, &g)| scale3(g, u)).collect();
    let nonlinear = analyze_on(fine, &values, model.band_limit());
    Evaluation { nonlinear, energy, modulus_defect, balancing_norm }
}

fn residual_from(model: &GlModel, c: &VshCoeffs, nonlinear: &VshCoeffs) -> VshCoeffs {
    let inv = 1.0 / (model.epsilon() * model.epsilon());
    vector_laplacian(c).add_scaled(-inv, nonlinear)
}

/// Applies a 2×2 map to each `(a_{lm}, b_{lm})` pair and a scalar map to
/// each `c_{lm}`; `l = 0` only carries `a`.
fn map_blocks(c: &VshCoeffs, ab: impl Fn(usize, f64, f64) -> (f64, f64), phi: impl Fn(usize, f64) -> f64) -> VshCoeffs {
    let lmax = c.band_limit();
    let mut out = VshCoeffs::zeros(lmax);
    out.set(VshKind::N, 0, 0, ab(0, c.a().get(0, 0), 0.0).0);
    for l in 1..=lmax {
        for m in -(l as i64)..=l as i64 {
            let (a, b) = ab(l, c.a().get(l, m), c.b().get(l, m));
            out.set(VshKind::N, l, m, a);
            out.set(VshKind::Psi, l, m, b);
            out.set(VshKind::Phi, l, m, phi(l, c.c().get(l, m)));
        }
    }
    out
}

fn solve2(m: [[f64; 2]; 2], r: (f64, f64)) -> (f64, f64) {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    ((m[1][1] * r.0 - m[0][1] * r.1) / det, (m[0][0] * r.1 - m[1][0] * r.0) / det)
}

/// `(I + dt·(−Δ))⁻¹` in coefficients.
fn implicit_solve(rhs: &VshCoeffs, dt: f64) -> VshCoeffs {
    map_blocks(
        rhs,
        |l, a, b| {
            if l == 0 {
                return (a / (1.0 + 2.0 * dt), 0.0);
            }
            let ll = (l * (l + 1)) as f64;
            let s = ll.sqrt();
            solve2([[1.0 + dt * (ll + 2.0), -2.0 * s * dt], [-2.0 * s * dt, 1.0 + dt * ll]], (a, b))
        },
        |l, c| c / (1.0 + dt * (l * (l + 1)) as f64),
    )
}

fn imex_from(model: &GlModel, c: &VshCoeffs, nonlinear: &VshCoeffs, dt: f64) -> VshCoeffs {
    let inv = 1.0 / (model.epsilon() * model.epsilon());
    implicit_solve(&c.add_scaled(dt * inv, nonlinear), dt)
}

/// One IMEX step in coefficient space.
pub fn imex_step_coeffs(model: &GlModel, c: &VshCoeffs, dt: f64) -> VshCoeffs {
    imex_from(model, c, &model.nonlinear(c), dt)
}

/// One IMEX step of the gradient flow `∂ₜu = Δu + (1−|u|²)u/ε²`.
pub fn imex_step(u: &VectorField, eps: f64, dt: f64) -> Result<VectorField> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("time step must be positive, got {dt}")));
    }
    let model = GlModel::new(u.grid().band_limit(), eps)?;
    let next = imex_step_coeffs(&model, &vsh_analyze(u), dt);
    vsh_synthesize(&next, u.grid())
}

/// Flows `u0` with the energy guard, hands off to [`newton_refine_coeffs`]
/// when configured, and returns the final state with its trace.
/// Non-convergence is reported in the trace, not as an error.
pub fn flow_to_critical(u0: &VectorField, cfg: &FlowConfig) -> Result<(GlState, SolveTrace)> {
    cfg.validate()?;
    let model = GlModel::new(cfg.band_limit, cfg.epsilon)?;
    let c0 = crate::vsh::vsh_analyze_to(u0, cfg.band_limit)?;
    let (c, trace) = flow_coeffs(&model, c0, cfg);
    Ok((GlState::from_coeffs(&model, c)?, trace))
}

/// Coefficient-space version of [`flow_to_critical`].
pub fn flow_coeffs(model: &GlModel, c0: VshCoeffs, cfg: &FlowConfig) -> (VshCoeffs, SolveTrace) {
    flow_coeffs_observed(model, c0, cfg, |_, _| {})
}

/// [`flow_coeffs`] calling `observe` on every accepted flow state
/// (including the initial one) with its trace record.
pub fn flow_coeffs_observed(
    model: &GlModel,
    c0: VshCoeffs,
    cfg: &FlowConfig,
    mut observe: impl FnMut(&VshCoeffs, &StepRecord),
) -> (VshCoeffs, SolveTrace) {
    const PLATEAU_WINDOW: usize = 200;
    let mut c = c0.resized(model.band_limit());
    let mut ev = evaluate(model, &c);
    let mut res = residual_from(model, &c, &ev.nonlinear).norm_sq().sqrt();
    let mut records = vec![StepRecord {
        step: 0,
        stage: Stage::Initial,
        energy: ev.energy,
        residual_l2: res,
        modulus_defect: ev.modulus_defect,
        balancing_norm: ev.balancing_norm,
        dt: 0.0,
    }];
    observe(&c, &records[0]);
    let mut dt = cfg.dt;
    let mut step = 0;
    let outcome = loop {
        if res <= cfg.tol_residual {
            break SolveOutcome::Converged;
        }
        if let Some(handoff) = cfg.newton_handoff {
            let plateau = step >= PLATEAU_WINDOW && res < 1e-2 && {
                let past = records[records.len() - PLATEAU_WINDOW].residual_l2;
                res > 0.99 * past
            };
            if res <= handoff || plateau {
                break refine_into(model, &mut c, cfg.tol_residual, &mut records);
            }
        }
        if step >= cfg.max_steps {
            break SolveOutcome::MaxSteps;
        }
        let next = imex_from(model, &c, &ev.nonlinear, dt);
        let next_ev = evaluate(model, &next);
        if cfg.energy_guard && !(next_ev.energy <= ev.energy + 1e-12) {
            dt *= 0.5;
            if dt < 1e-6 * cfg.dt {
                break SolveOutcome::StepCollapse;
            }
            continue;
        }
        step += 1;
        c = next;
        ev = next_ev;
        res = residual_from(model, &c, &ev.nonlinear).norm_sq().sqrt();
        records.push(StepRecord {
            step,
            stage: Stage::Flow,
            energy: ev.energy,
            residual_l2: res,
            modulus_defect: ev.modulus_defect,
            balancing_norm: ev.balancing_norm,
            dt,
        });
        observe(&c, records.last().expect("just pushed"));
    };
    (c, SolveTrace { records, outcome })
}

fn refine_into(model: &GlModel, c: &mut VshCoeffs, tol: f64, records: &mut Vec<StepRecord>) -> SolveOutcome {
    let step0 = records.last().map_or(0, |r| r.step);
    let cfg = NewtonConfig { tol, ..NewtonConfig::default() };
    let report = newton_refine_coeffs(model, c, &cfg);
    let (iterates, outcome) = match report {
        Ok(r) => (r.iterates, SolveOutcome::Converged),
        Err((r, e)) => (r.iterates, SolveOutcome::RefinementFailed(e.to_string())),
    };
    for (k, it) in iterates.into_iter().enumerate() {
        let ev = evaluate(model, &it);
        records.push(StepRecord {
            step: step0 + k + 1,
            stage: Stage::Newton,
            energy: ev.energy,
            residual_l2: residual_from(model, &it, &ev.nonlinear).norm_sq().sqrt(),
            modulus_defect: ev.modulus_defect,
            balancing_norm: ev.balancing_norm,
            dt: 0.0,
        });
        *c = it;
    }
    outcome
}

/// Parameters of the Newton–Krylov refinement.
#[derive(Clone, Debug, PartialEq)]
pub struct NewtonConfig {
    pub tol: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
    pub krylov_restart: usize,
    pub krylov_max_iter: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self { tol: 1e-10, max_iterations: 30, max_halvings: 30, krylov_restart: 60, krylov_max_iter: 600 }
    }
}

/// Iterates and diagnostics of a refinement run.
#[derive(Clone, Debug, PartialEq)]
pub struct NewtonReport {
    /// Accepted iterates (not including the start).
    pub iterates: Vec<VshCoeffs>,
    /// Residual norms, starting with the initial one.
    pub residuals: Vec<f64>,
    pub krylov_iterations: Vec<usize>,
    pub halvings: Vec<usize>,
}

/// Newton's method on `F(u) = −Δu − P_L[(1−|u|²)u]/ε²` from `c`.
///
/// Each linear solve runs GMRES on the linearization with the three
/// infinitesimal rotations `P_L(e_k × u)` projected out, right-preconditioned
/// by the exact inverse of the linearization at the aligned rotation
/// `√(1−2ε²) R x` (with its rotation kernel replaced by the identity).
/// On failure the partial report is returned with the error.
pub fn newton_refine_coeffs(
    model: &GlModel,
    c: &VshCoeffs,
    cfg: &NewtonConfig,
) -> std::result::Result<NewtonReport, (NewtonReport, Error)> {
    let band = model.band_limit();
    let mut u = c.resized(band);
    let mut f = model.residual(&u);
    let mut r = f.norm_sq().sqrt();
    let mut report =
        NewtonReport { iterates: Vec::new(), residuals: vec![r], krylov_iterations: Vec::new(), halvings: Vec::new() };
    let fail = |report: NewtonReport, e: Error| Err((report, e));
    let frame = match vsh_synthesize(&u, model.grid()).map(|v| align_rotation(&v, model.epsilon())) {
        Ok(Ok(a)) => {
            let k = if a.det_sign < 0 { kappa() } else { Mat3::identity() };
            k * a.rotation.transpose()
        }
        _ => Mat3::identity(),
    };
    let precond = RotationPreconditioner::new(model, frame);

    for _ in 0..cfg.max_iterations {
        if r <= cfg.tol {
            return Ok(report);
        }
        let kernel = rotation_directions(&u);
        let project = |v: &mut [f64]| {
            for z in &kernel {
                let d: f64 = v.iter().zip(z).map(|(p, q)| p * q).sum();
                v.iter_mut().zip(z).for_each(|(p, q)| *p -= d * q);
            }
        };
        let lin = model.linearize(&u);
        let apply_op = |x: &[f64]| {
            let mut xp = x.to_vec();
            project(&mut xp);
            let mut y = lin.apply(&VshCoeffs::from_flat(band, &xp).expect("flat length")).to_flat();
            project(&mut y);
            y
        };
        let apply_pre = |x: &[f64]| {
            let mut y = precond.apply(&VshCoeffs::from_flat(band, x).expect("flat length")).to_flat();
            project(&mut y);
            y
        };
        let mut rhs: Vec<f64> = f.to_flat().iter().map(|v| -v).collect();
        project(&mut rhs);
        let rel_tol = r.clamp(1e-13, 1e-4);
        let out = gmres(apply_op, apply_pre, &rhs, rel_tol, cfg.krylov_restart, cfg.krylov_max_iter);
        report.krylov_iterations.push(out.iterations);
        let rhs_norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !out.converged && out.residual > 0.5 * rhs_norm {
            return fail(
                report,
                Error::Refinement(format!(
                    "Krylov stagnation: {} iterations, linear residual {:.3e} of {:.3e}",
                    out.iterations, out.residual, rhs_norm
                )),
            );
        }
        let mut step = out.solution;
        project(&mut step);
        let step = VshCoeffs::from_flat(band, &step).expect("flat length");

        let mut t = 1.0;
        let mut accepted = None;
        for halving in 0..=cfg.max_halvings {
            let trial = u.add_scaled(t, &step);
            let ft = model.residual(&trial);
            let rt = ft.norm_sq().sqrt();
            if rt < r {
                accepted = Some((trial, ft, rt, halving));
                break;
            }
            t *= 0.5;
        }
        let Some((trial, ft, rt, halvings)) = accepted else {
            return fail(
                report,
                Error::Refinement(format!(
                    "no residual decrease after {} step halvings at residual {r:.3e}",
                    cfg.max_halvings
                )),
            );
        };
        report.halvings.push(halvings);
        u = trial;
        f = ft;
        r = rt;
        report.iterates.push(u.clone());
        report.residuals.push(r);
    }
    if r <= cfg.tol {
        Ok(report)
    } else {
        fail(report, Error::Convergence { iterations: cfg.max_iterations, best: r })
    }
}

/// Refines `u` to residual `≤ tol`; see [`newton_refine_coeffs`].
pub fn newton_refine(u: &VectorField, eps: f64, tol: f64) -> Result<GlState> {
    let model = GlModel::new(u.grid().band_limit(), eps)?;
    let c = vsh_analyze(u);
    let cfg = NewtonConfig { tol, ..NewtonConfig::default() };
    let report = newton_refine_coeffs(&model, &c, &cfg).map_err(|(_, e)| e)?;
    let last = report.iterates.last().cloned().unwrap_or(c);
    GlState::from_coeffs(&model, last)
}

/// Orthonormal coefficient vectors of `P_L(e_k × u)`, `k = 1, 2, 3`.
fn rotation_directions(u: &VshCoeffs) -> Vec<Vec<f64>> {
    let band = u.band_limit();
    let grid = shared_grid_unchecked(band + 2);
    let values = vsh_synthesize(u, &grid).expect("grid covers band");
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for k in 0..3 {
        let mut e = [0.0; 3];
        e[k] = 1.0;
        let rotated: Vec<Vec3> = values.values().iter().map(|&v| cross3(e, v)).collect();
        let mut z = analyze_on(&grid, &rotated, band).to_flat();
        for q in &basis {
            let d: f64 = z.iter().zip(q).map(|(p, q)| p * q).sum();
            z.iter_mut().zip(q).for_each(|(p, q)| *p -= d * q);
        }
        let n = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-12 {
            z.iter_mut().for_each(|v| *v /= n);
            basis.push(z);
        }
    }
    basis
}

/// `Tᵀ J₀⁻¹ T`, where `J₀` is the linearization at `√(1−2ε²) x` and `T`
/// rotates values into that frame.
struct RotationPreconditioner {
    frame: Mat3,
    epsilon: f64,
    band: usize,
}

impl RotationPreconditioner {
    fn new(model: &GlModel, frame: Mat3) -> Self {
        Self { frame, epsilon: model.epsilon(), band: model.band_limit() }
    }

    fn rotate(&self, c: &VshCoeffs, m: &Mat3, out_band: usize) -> VshCoeffs {
        let grid = shared_grid_unchecked(c.band_limit().max(out_band) + 2);
        let values = vsh_synthesize(c, &grid).expect("grid covers band");
        let rotated: Vec<Vec3> = values.values().iter().map(|&v| apply(m, v)).collect();
        analyze_on(&grid, &rotated, out_band)
    }

    fn apply(&self, v: &VshCoeffs) -> VshCoeffs {
        let wide = self.rotate(v, &self.frame, self.band + 2);
        let e2 = self.epsilon * self.epsilon;
        let monopole = 2.0 * (1.0 - 2.0 * e2) / e2;
        let solved = map_blocks(
            &wide,
            |l, a, b| {
                if l == 0 {
                    (a / monopole, 0.0)
                } else {
                    solve2(ModeBlock::new(l, 0, self.epsilon).ab_block, (a, b))
                }
            },
            |l, c| if l == 1 { c } else { c / ((l * (l + 1)) as f64 - 2.0) },
        );
        self.rotate(&solved, &self.frame.transpose(), self.band)
    }
}

/// Seeded Gaussian perturbation on modes `l ≤ lmax`, scaled to the
/// requested H¹ norm.
pub fn random_perturbation<R: Rng + ?Sized>(rng: &mut R, band_limit: usize, lmax: usize, h1_norm: f64) -> VshCoeffs {
    let mut c = VshCoeffs::zeros(band_limit);
    for kind in [VshKind::N, VshKind::Psi, VshKind::Phi] {
        for l in 0..=lmax.min(band_limit) {
            for m in -(l as i64)..=l as i64 {
                c.set(kind, l, m, rng.sample(StandardNormal));
            }
        }
    }
    let n = c.h1_norm_sq().sqrt();
    if n > 0.0 {
        c.scaled(h1_norm / n)
    } else {
        c
    }
}

/// Coefficients of `√(1−2ε²) R x` (optionally composed with κ).
pub fn rotation_coeffs(band_limit: usize, eps: f64, r: &Mat3, conjugate: bool) -> VshCoeffs {
    let amp = (1.0 - 2.0 * eps * eps).sqrt();
    if r == &Mat3::identity() && !conjugate {
        let mut c = VshCoeffs::zeros(band_limit);
        c.set(VshKind::N, 0, 0, amp * 2.0 * PI.sqrt());
        return c;
    }
    let grid = shared_grid_unchecked(band_limit.max(2));
    let m = if conjugate { r * kappa() } else { *r };
    let values: Vec<Vec3> = grid.points().map(|x| scale3(amp, apply(&m, x))).collect();
    analyze_on(&grid, &values, band_limit)
}
