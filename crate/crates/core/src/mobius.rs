//! Alignment to the rotation family and projection onto degree-one
//! harmonic maps.
//!
//! Rotation alignment is orthogonal Procrustes on `M = ∫u xᵀ`. The Möbius
//! fit parametrizes harmonic maps as `x ↦ R B_b κ^i x`, where `B_b` is the
//! conformal boost along `n = b/|b|` with dilation `e^{|b|}`, and runs
//! Levenberg–Marquardt on the Dirichlet defect `∫|D(v − w)|²`.

use std::sync::Arc;

use nalgebra::{SMatrix, SVector};

use crate::analytic::{lambda_from_barycenter, MobiusParams};
use crate::error::{Error, Result};
use crate::gl::{degree, modulus_diagnostics, quartic_barycenter, ModulusDiagnostics};
use crate::rotation::{apply, exp_so3, frame_with_third_axis, kappa, procrustes, Mat3};
use crate::spherical::{analyze_values, ShCoeffs, SphericalGrid};
use crate::vsh::{component_coeffs, dot3, norm3, scale3, vsh_analyze, Vec3, VectorField};

/// Result of aligning a field to `√(1−2ε²) R x`.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignmentResult {
    pub rotation: Mat3,
    /// `−1` when the data had to be composed with κ.
    pub det_sign: i32,
    pub amplitude: f64,
    /// `‖u − amplitude·R κ^{(1−det)/2} x‖_{L²}`.
    pub residual_l2: f64,
    /// Φ₁ content of `Rᵀ u∘κ^{(1−det)/2} − amplitude·x`.
    pub phi1_norm: f64,
    pub singular_values: [f64; 3],
}

impl AlignmentResult {
    /// The aligned reference `amplitude·R κ^{(1−det)/2} x` at a point.
    pub fn reference(&self, x: Vec3) -> Vec3 {
        let y = if self.det_sign < 0 { apply(&kappa(), x) } else { x };
        scale3(self.amplitude, apply(&self.rotation, y))
    }

    pub fn reference_field(&self, grid: &Arc<SphericalGrid>) -> VectorField {
        VectorField::from_fn(grid, |x| self.reference(x))
    }
}

/// `M = ∫ u xᵀ dσ`.
pub fn moment_matrix(u: &VectorField) -> Mat3 {
    let g = u.grid();
    let mut m = Mat3::zeros();
    for (i, row) in u.values().chunks_exact(g.nlon()).enumerate() {
        let w = g.area_weight(i);
        for (j, v) in row.iter().enumerate() {
            let x = g.point(i, j);
            for a in 0..3 {
                for b in 0..3 {
                    m[(a, b)] += w * v[a] * x[b];
                }
            }
        }
    }
    m
}

/// `u∘κ`: on the grid, κ is the exact permutation `φ ↦ −φ`.
pub fn compose_kappa(u: &VectorField) -> VectorField {
    let g = u.grid();
    let nlon = g.nlon();
    let values = (0..g.len())
        .map(|n| {
            let (i, j) = (n / nlon, n % nlon);
            u.values()[i * nlon + (nlon - j) % nlon]
        })
        .collect();
    VectorField::new(g.clone(), values).expect("same grid")
}

/// Best `R ∈ SO(3)` for `min ∫|u − √(1−2ε²) R x|²`, replacing `u` by `u∘κ`
/// when the unconstrained optimum is orientation reversing.
pub fn align_rotation(u: &VectorField, eps: f64) -> Result<AlignmentResult> {
    crate::gl::check_epsilon(eps)?;
    let amplitude = (1.0 - 2.0 * eps * eps).sqrt();
    let m = moment_matrix(u);
    let p = procrustes(&m);
    let scale = p.singular_values[0].max(f64::MIN_POSITIVE);
    if p.singular_values[0] <= 1e-300 || p.singular_values[1] <= 1e-13 * scale {
        return Err(Error::AmbiguousAlignment(p.singular_values));
    }
    let mut result = AlignmentResult {
        rotation: p.rotation,
        det_sign: p.det_sign,
        amplitude,
        residual_l2: 0.0,
        phi1_norm: 0.0,
        singular_values: p.singular_values,
    };
    result.residual_l2 = u.sub(&result.reference_field(u.grid())).norm_l2();

    let data = if result.det_sign < 0 { compose_kappa(u) } else { u.clone() };
    let rt = result.rotation.transpose();
    let w = data.map(|v, x| {
        let y = apply(&rt, v);
        [y[0] - amplitude * x[0], y[1] - amplitude * x[1], y[2] - amplitude * x[2]]
    });
    let c = vsh_analyze(&w);
    result.phi1_norm = (-1..=1).map(|m| c.c().get(1, m).powi(2)).sum::<f64>().sqrt();
    Ok(result)
}

/// Outcome of fitting a degree-±1 harmonic map.
#[derive(Clone, Debug, PartialEq)]
pub struct MobiusFitResult {
    pub params: MobiusParams,
    /// `∫|D(v − w)|²`.
    pub h1_defect: f64,
    /// Norm of the defect gradient in the six local parameters.
    pub gradient_norm: f64,
    pub iterations: usize,
}

/// Boost `B_b`: the Möbius map fixing `±n` that dilates by `λ = e^{|b|}`
/// about `−n` (so `B_b = Q D_λ Qᵀ` for any rotation with `Q e₃ = n`).
pub fn boost_point(b: Vec3, x: Vec3) -> Vec3 {
    let t = norm3(b);
    if t == 0.0 {
        return x;
    }
    let n = scale3(1.0 / t, b);
    let lambda = t.exp();
    let z = dot3(n, x);
    let (p, q) = (1.0 - z, 1.0 + z);
    let d = p + lambda * lambda * q;
    let axial = (lambda * lambda * q - p) / d;
    let radial = 2.0 * lambda / d;
    [
        radial * (x[0] - z * n[0]) + axial * n[0],
        radial * (x[1] - z * n[1]) + axial * n[1],
        radial * (x[2] - z * n[2]) + axial * n[2],
    ]
}

struct FitProblem<'a> {
    grid: &'a Arc<SphericalGrid>,
    target: [ShCoeffs; 3],
    conjugate: bool,
}

impl FitProblem<'_> {
    fn model(&self, r: &Mat3, b: Vec3, x: Vec3) -> Vec3 {
        let y = if self.conjugate { apply(&kappa(), x) } else { x };
        apply(r, boost_point(b, y))
    }

    /// `√(l(l+1))·(ĉ_v − ĉ_w)` for all components.
    fn residual(&self, r: &Mat3, b: Vec3) -> Vec<f64> {
        let g = self.grid;
        let l = g.band_limit();
        let samples: Vec<Vec3> = g.points().map(|x| self.model(r, b, x)).collect();
        let mut out = Vec::with_capacity(3 * self.target[0].data().len());
        for k in 0..3 {
            let comp: Vec<f64> = samples.iter().map(|v| v[k]).collect();
            let c = analyze_values(g, &comp, l);
            for deg in 0..=l {
                let s = ((deg * (deg + 1)) as f64).sqrt();
                let range = deg * deg..(deg + 1) * (deg + 1);
                for (t, m) in self.target[k].data()[range.clone()].iter().zip(&c.data()[range]) {
                    out.push(s * (t - m));
                }
            }
        }
        out
    }
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Local fit of one orientation class by Levenberg–Marquardt over
/// `(ω, δb)`, with `R = exp(ω) R₀` and boost `b₀ + δb`.
fn fit_branch(problem: &FitProblem<'_>, mut r: Mat3, mut b: Vec3, max_iter: usize) -> (Mat3, Vec3, f64, f64, usize) {
    let mut res = problem.residual(&r, b);
    let mut cost = sum_sq(&res);
    let mut mu = 1e-3;
    let mut grad_norm = f64::INFINITY;
    let h = 1e-6;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let n = res.len();
        let mut jac = vec![[0.0; 6]; n];
        for p in 0..6 {
            let mut plus = [0.0; 6];
            plus[p] = h;
            let mut minus = [0.0; 6];
            minus[p] = -h;
            let eval = |d: [f64; 6]| {
                let rr = exp_so3([d[0], d[1], d[2]]) * r;
                problem.residual(&rr, [b[0] + d[3], b[1] + d[4], b[2] + d[5]])
            };
            let (rp, rm) = (eval(plus), eval(minus));
            for i in 0..n {
                jac[i][p] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let mut jtj = SMatrix::<f64, 6, 6>::zeros();
        let mut jtr = SVector::<f64, 6>::zeros();
        for i in 0..n {
            for p in 0..6 {
                jtr[p] += jac[i][p] * res[i];
                for q in 0..6 {
                    jtj[(p, q)] += jac[i][p] * jac[i][q];
                }
            }
        }
        grad_norm = 2.0 * jtr.norm();
        if grad_norm <= 1e-13 || cost <= 1e-28 {
            break;
        }
        let mut accepted = false;
        for _ in 0..40 {
            let mut a = jtj;
            for p in 0..6 {
                a[(p, p)] += mu * jtj[(p, p)].max(1e-12);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-jtr))) else {
                mu *= 10.0;
                continue;
            };
            let rr = exp_so3([step[0], step[1], step[2]]) * r;
            let bb = [b[0] + step[3], b[1] + step[4], b[2] + step[5]];
            let trial = problem.residual(&rr, bb);
            let tc = sum_sq(&trial);
            if tc < cost {
                r = rr;
                b = bb;
                res = trial;
                let improvement = cost - tc;
                cost = tc;
                mu = (mu / 3.0).max(1e-12);
                accepted = true;
                if improvement <= 1e-15 * cost.max(1e-30) && step.norm() < 1e-12 {
                    return (r, b, cost, grad_norm, iterations);
                }
                break;
            }
            mu *= 4.0;
        }
        if !accepted {
            break;
        }
    }
    (r, b, cost, grad_norm, iterations)
}

/// Projection of a unit map of degree ±1 onto `{R₁ D_λ κ^i R₂}` in the
/// Dirichlet seminorm. The returned `λ ≥ 1`: `(R₁, λ, R₂)` and
/// `(R₁Q, 1/λ, QR₂)` with `Q = diag(1,−1,−1)` describe the same map.
pub fn fit_mobius(v: &VectorField) -> Result<MobiusFitResult> {
    fit_mobius_with(v, 200)
}

pub fn fit_mobius_with(v: &VectorField, max_iter: usize) -> Result<MobiusFitResult> {
    let worst = v.values().iter().fold(0.0_f64, |a, &x| a.max((norm3(x) - 1.0).abs()));
    if worst > 1e-6 {
        return Err(Error::Domain(format!("fit requires a unit map: max ||v|−1| = {worst:e}")));
    }
    let deg = degree(v)?;
    if deg.degree.abs() != 1 {
        return Err(Error::Domain(format!("fit requires degree ±1, found {}", deg.degree)));
    }
    let grid = v.grid();
    let target = component_coeffs(v);
    let bary = quartic_barycenter(v);
    let eta = norm3(bary);

    let mut best: Option<(MobiusFitResult, f64)> = None;
    for conjugate in [false, true] {
        let problem = FitProblem { grid, target: target.clone(), conjugate };
        let lambda0 = lambda_from_barycenter(eta);
        let b0 = if eta > 1e-10 {
            let mut n = scale3(-1.0 / eta, bary);
            if conjugate {
                n = apply(&kappa(), n);
            }
            scale3(lambda0.ln(), n)
        } else {
            [0.0; 3]
        };
        // Rotation initialized by Procrustes against the boosted model.
        let mut m = Mat3::zeros();
        for (i, row) in v.values().chunks_exact(grid.nlon()).enumerate() {
            let w = grid.area_weight(i);
            for (j, val) in row.iter().enumerate() {
                let y = problem.model(&Mat3::identity(), b0, grid.point(i, j));
                for a in 0..3 {
                    for c in 0..3 {
                        m[(a, c)] += w * val[a] * y[c];
                    }
                }
            }
        }
        let r0 = procrustes(&m).rotation;
        let (r, b, cost, grad_norm, iterations) = fit_branch(&problem, r0, b0, max_iter);
        let params = to_params(&r, b, conjugate);
        let fit = MobiusFitResult { params, h1_defect: cost, gradient_norm: grad_norm, iterations };
        if best.as_ref().is_none_or(|(_, c)| cost < *c) {
            best = Some((fit, cost));
        }
    }
    let (fit, cost) = best.expect("two branches tried");
    if !cost.is_finite() {
        return Err(Error::Convergence { iterations: fit.iterations, best: cost });
    }
    Ok(fit)
}

/// `R B_b κ^i = R₁ D_λ κ^i R₂` with `R₁ = RQ`, `λ = e^{|b|}`, and
/// `R₂ = Qᵀ` (or `κQᵀκ` with conjugation), where `Q e₃ = b/|b|`.
fn to_params(r: &Mat3, b: Vec3, conjugate: bool) -> MobiusParams {
    let t = norm3(b);
    let q = if t > 0.0 { frame_with_third_axis(b) } else { Mat3::identity() };
    let r2 = if conjugate { kappa() * q.transpose() * kappa() } else { q.transpose() };
    MobiusParams { r1: r * q, lambda: t.exp(), r2, conjugate }
}

/// `(|1−λ|, ‖∇|u|‖₂ + ‖∇²|u|‖₂, ratio)` for a fitted phase map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DilationControl {
    pub dilation_defect: f64,
    pub modulus_norms: f64,
    /// `dilation_defect / modulus_norms`, defined as 0 when both vanish.
    pub ratio: f64,
}

pub fn verify_dilation_control(fit: &MobiusFitResult, modulus: &ModulusDiagnostics) -> DilationControl {
    let lambda = fit.params.lambda;
    let dilation_defect = (lambda.max(1.0 / lambda) - 1.0).abs();
    let modulus_norms = modulus.grad_l2 + modulus.hessian_l2;
    let ratio = if dilation_defect <= 1e-14 && modulus_norms <= 1e-14 { 0.0 } else { dilation_defect / modulus_norms };
    DilationControl { dilation_defect, modulus_norms, ratio }
}

/// Convenience: fit the phase of `u` and pair it with the modulus norms.
pub fn dilation_control_for(u: &VectorField, eps: f64) -> Result<(MobiusFitResult, DilationControl)> {
    let v = crate::gl::phase_map(u)?;
    let fit = fit_mobius(&v)?;
    let md = modulus_diagnostics(u, eps)?;
    let control = verify_dilation_control(&fit, &md);
    Ok((fit, control))
}

/// `∫|u − amplitude·Rx|²` for a candidate rotation.
pub fn procrustes_objective(u: &VectorField, amplitude: f64, r: &Mat3) -> f64 {
    let d = u.sub(&VectorField::from_fn(u.grid(), |x| scale3(amplitude, apply(r, x))));
    d.inner(&d)
}

/// `(λ, 1/λ)`-invariant distance between two dilation factors.
pub fn lambda_distance(a: f64, b: f64) -> f64 {
    (a - b).abs().min((1.0 / a - b).abs())
}
