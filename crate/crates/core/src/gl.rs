//! The Ginzburg–Landau energy
//!
//! ```text
//! E_ε(u) = ½∫|∇u|² + 1/(4ε²) ∫(1 − |u|²)²
//! ```
//!
//! its first variation, the phase map `v = u/|u|` with its equations,
//! barycenters, the topological degree and admissibility diagnostics.
//!
//! Fields on a band-`L` grid are handled through their band-`L` VSH
//! projection. Dirichlet terms are exact in coefficient space; nonlinear
//! terms are evaluated on the de-aliased grid of band `2L+2`, which
//! integrates every quartic expression in a band-`L` field exactly.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::spherical::{
    analyze_values, laplacian_scalar, shared_grid_unchecked, synthesize_values, tangent_analysis, ShCoeffs,
    SphericalGrid,
};
use crate::vsh::{
    analyze_on, axpy3, component_coeffs, components_on, cross3, dot3, gradient_norm_sq, gradients_on, norm3, scale3,
    vector_laplacian, vsh_analyze, vsh_synthesize, vsh_to_components, Vec3, VectorField, VshCoeffs,
};

/// Moduli below this are treated as vortices (no phase is defined there).
pub const MODULUS_FLOOR: f64 = 1e-6;

pub fn check_epsilon(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < std::f64::consts::FRAC_1_SQRT_2 {
        Ok(())
    } else {
        Err(Error::Domain(format!("epsilon {eps} outside (0, 1/√2)")))
    }
}

/// Residual level accepted as "critical": `1e-8·√E`.
pub fn critical_tolerance(energy: f64) -> f64 {
    1e-8 * energy.max(0.0).sqrt()
}

/// Spectral Ginzburg–Landau operator at band limit `L` and parameter `ε`.
#[derive(Clone, Debug)]
pub struct GlModel {
    band_limit: usize,
    epsilon: f64,
    grid: Arc<SphericalGrid>,
    fine: Arc<SphericalGrid>,
}

impl GlModel {
    pub fn new(band_limit: usize, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        let grid = crate::spherical::build_grid(band_limit)?;
        let fine = grid.dealiased();
        Ok(Self { band_limit, epsilon, grid, fine })
    }

    pub fn band_limit(&self) -> usize {
        self.band_limit
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn grid(&self) -> &Arc<SphericalGrid> {
        &self.grid
    }

    pub fn fine_grid(&self) -> &Arc<SphericalGrid> {
        &self.fine
    }

    /// Samples of the expansion on the de-aliased grid.
    pub fn fine_samples(&self, c: &VshCoeffs) -> Vec<Vec3> {
        vsh_synthesize(c, &self.fine).expect("fine grid covers band").values().to_vec()
    }

    fn project(&self, values: &[Vec3]) -> VshCoeffs {
        analyze_on(&self.fine, values, self.band_limit)
    }

    /// `1/(4ε²) ∫(1−|u|²)²`.
    pub fn potential(&self, c: &VshCoeffs) -> f64 {
        let density: Vec<f64> = self.fine_samples(c).iter().map(|&u| (1.0 - dot3(u, u)).powi(2)).collect();
        self.fine.integrate(&density) / (4.0 * self.epsilon * self.epsilon)
    }

    pub fn energy(&self, c: &VshCoeffs) -> f64 {
        0.5 * c.dirichlet_sq() + self.potential(c)
    }

    /// `P_L[(1−|u|²)u]`.
    pub fn nonlinear(&self, c: &VshCoeffs) -> VshCoeffs {
        let values: Vec<Vec3> = self.fine_samples(c).into_iter().map(|u| scale3(1.0 - dot3(u, u), u)).collect();
        self.project(&values)
    }

    /// `F(u) = −Δu − P_L[(1−|u|²)u]/ε²`.
    pub fn residual(&self, c: &VshCoeffs) -> VshCoeffs {
        let inv = 1.0 / (self.epsilon * self.epsilon);
        vector_laplacian(c).add_scaled(-inv, &self.nonlinear(c))
    }

    /// `DE_ε(u)[w] = ∫∇u:∇w − ε⁻²∫(1−|u|²)u·w`.
    pub fn first_variation(&self, c: &VshCoeffs, w: &VshCoeffs) -> f64 {
        let u = self.fine_samples(c);
        let wv = self.fine_samples(w);
        let pot: Vec<f64> = u.iter().zip(&wv).map(|(&u, &w)| (1.0 - dot3(u, u)) * dot3(u, w)).collect();
        c.dirichlet_inner(w) - self.fine.integrate(&pot) / (self.epsilon * self.epsilon)
    }

    /// Linearization of [`residual`](Self::residual) at `c`.
    pub fn linearize(&self, c: &VshCoeffs) -> Linearization<'_> {
        let u = self.fine_samples(c);
        let modulus_gap = u.iter().map(|&u| 1.0 - dot3(u, u)).collect();
        Linearization { model: self, u, modulus_gap }
    }

    /// `∫(1−|u|²)² x / ε⁴`.
    pub fn balancing(&self, c: &VshCoeffs) -> Vec3 {
        let e4 = self.epsilon.powi(4);
        let values: Vec<Vec3> = self
            .fine_samples(c)
            .iter()
            .zip(self.fine.points())
            .map(|(&u, x)| scale3((1.0 - dot3(u, u)).powi(2) / e4, x))
            .collect();
        self.fine.integrate_vec(&values)
    }
}

/// `J[w] = −Δw − P_L[(1−|u|²)w − 2(u·w)u]/ε²` at a frozen `u`.
pub struct Linearization<'a> {
    model: &'a GlModel,
    u: Vec<Vec3>,
    modulus_gap: Vec<f64>,
}

impl Linearization<'_> {
    pub fn apply(&self, w: &VshCoeffs) -> VshCoeffs {
        let wv = self.model.fine_samples(w);
        let values: Vec<Vec3> = wv
            .iter()
            .zip(&self.u)
            .zip(&self.modulus_gap)
            .map(|((&w, &u), &g)| axpy3(-2.0 * dot3(u, w), u, scale3(g, w)))
            .collect();
        let inv = 1.0 / (self.model.epsilon * self.model.epsilon);
        vector_laplacian(w).add_scaled(-inv, &self.model.project(&values))
    }
}

fn model_for(u: &VectorField, eps: f64) -> Result<GlModel> {
    GlModel::new(u.grid().band_limit(), eps)
}

/// `E_ε(u)` of the band-limited projection of `u`.
pub fn energy(u: &VectorField, eps: f64) -> Result<f64> {
    let model = model_for(u, eps)?;
    Ok(model.energy(&vsh_analyze(u)))
}

/// Dirichlet and potential parts of `E_ε(u)`.
pub fn energy_parts(u: &VectorField, eps: f64) -> Result<(f64, f64)> {
    let model = model_for(u, eps)?;
    let c = vsh_analyze(u);
    Ok((0.5 * c.dirichlet_sq(), model.potential(&c)))
}

/// `−Δu − (1−|u|²)u/ε²` sampled on the field's grid.
pub fn gl_residual(u: &VectorField, eps: f64) -> Result<VectorField> {
    let model = model_for(u, eps)?;
    vsh_synthesize(&model.residual(&vsh_analyze(u)), u.grid())
}

/// `‖−Δu − (1−|u|²)u/ε²‖_{L²}`.
pub fn residual_l2(u: &VectorField, eps: f64) -> Result<f64> {
    let model = model_for(u, eps)?;
    Ok(model.residual(&vsh_analyze(u)).norm_sq().sqrt())
}

/// `DE_ε(u)[w]`.
pub fn first_variation_pairing(u: &VectorField, eps: f64, w: &VectorField) -> Result<f64> {
    if u.grid().band_limit() != w.grid().band_limit() {
        return Err(Error::Dimension("fields on different grids".into()));
    }
    let model = model_for(u, eps)?;
    Ok(model.first_variation(&vsh_analyze(u), &vsh_analyze(w)))
}

fn check_modulus(grid: &SphericalGrid, values: &[Vec3]) -> Result<Vec<f64>> {
    let nlon = grid.nlon();
    values
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let m = norm3(v);
            if m < MODULUS_FLOOR || !m.is_finite() {
                Err(Error::Degeneracy { lat: k / nlon, lon: k % nlon, modulus: m })
            } else {
                Ok(m)
            }
        })
        .collect()
}

/// `v = u/|u|` pointwise.
pub fn phase_map(u: &VectorField) -> Result<VectorField> {
    let moduli = check_modulus(u.grid(), u.values())?;
    let values = u.values().iter().zip(moduli).map(|(&v, m)| scale3(1.0 / m, v)).collect();
    VectorField::new(u.grid().clone(), values)
}

/// L² norms of the phase-equation residuals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseResiduals {
    /// `‖−Δv − |∇v|²v − 2∇v·∇ln|u|‖`.
    pub laplacian_form: f64,
    /// `‖div(|u|²∇v) + |u|²|∇v|²v‖`.
    pub divergence_form: f64,
    /// `‖(div(|u|²∇v))^T‖`, the part tangent to the sphere at `v`.
    pub tangential_divergence: f64,
    /// `‖(div form) + |u|²·(laplacian form)‖`: the two must agree pointwise.
    pub identity_defect: f64,
}

/// Phase-equation residuals of `u`, evaluated on the de-aliased grid.
pub fn phase_residuals(u: &VectorField) -> Result<PhaseResiduals> {
    let grid = u.grid();
    check_modulus(grid, u.values())?;
    let fine = grid.dealiased();
    let comps = vsh_to_components(&vsh_analyze(u));
    let uf = components_on(&comps, &fine);
    let du = gradients_on(&comps, &fine);
    let moduli = check_modulus(&fine, &uf)?;

    let vf: Vec<Vec3> = uf.iter().zip(&moduli).map(|(&u, &m)| scale3(1.0 / m, u)).collect();
    let lv = fine.band_limit();
    let vcomps = [0, 1, 2].map(|k| analyze_values(&fine, &vf.iter().map(|v| v[k]).collect::<Vec<_>>(), lv));
    let lap_v = components_on(&vcomps.clone().map(|c| laplacian_scalar(&c)), &fine);
    let dv = gradients_on(&vcomps, &fine);
    let dv_sq = gradient_norm_sq(&dv);

    // ∇ln|u| = Σ_k u_k ∇u_k / |u|²
    let dln: Vec<Vec3> = (0..fine.len())
        .map(|n| {
            let mut g = [0.0; 3];
            for k in 0..3 {
                g = axpy3(uf[n][k], du[n][k], g);
            }
            scale3(1.0 / (moduli[n] * moduli[n]), g)
        })
        .collect();

    let res_i: Vec<Vec3> = (0..fine.len())
        .map(|n| {
            let mut r = [0.0; 3];
            for k in 0..3 {
                r[k] = -lap_v[n][k] - dv_sq[n] * vf[n][k] - 2.0 * dot3(dv[n][k], dln[n]);
            }
            r
        })
        .collect();

    // div(|u|²∇v_k) by spectral divergence of the tangent fields.
    let mut div = vec![[0.0; 3]; fine.len()];
    for k in 0..3 {
        let (mut tt, mut tp) = (Vec::with_capacity(fine.len()), Vec::with_capacity(fine.len()));
        for i in 0..fine.nlat() {
            for j in 0..fine.nlon() {
                let n = i * fine.nlon() + j;
                let [_, et, ep] = fine.frame(i, j);
                let t = scale3(moduli[n] * moduli[n], dv[n][k]);
                tt.push(dot3(t, et));
                tp.push(dot3(t, ep));
            }
        }
        let (g, _) = tangent_analysis(&fine, &tt, &tp, lv);
        let mut neg = g;
        neg.scale_by_degree(|_| -1.0);
        for (n, d) in synthesize_values(&neg, &fine).into_iter().enumerate() {
            div[n][k] = d;
        }
    }
    let res_ii: Vec<Vec3> = (0..fine.len()).map(|n| axpy3(moduli[n] * moduli[n] * dv_sq[n], vf[n], div[n])).collect();
    let res_iii: Vec<Vec3> = (0..fine.len()).map(|n| axpy3(-dot3(div[n], vf[n]), vf[n], div[n])).collect();
    let defect: Vec<Vec3> = (0..fine.len()).map(|n| axpy3(moduli[n] * moduli[n], res_i[n], res_ii[n])).collect();

    let l2 = |f: &[Vec3]| fine.integrate(&f.iter().map(|&v| dot3(v, v)).collect::<Vec<_>>()).max(0.0).sqrt();
    Ok(PhaseResiduals {
        laplacian_form: l2(&res_i),
        divergence_form: l2(&res_ii),
        tangential_divergence: l2(&res_iii),
        identity_defect: l2(&defect),
    })
}

/// Pointwise `(|∇v|², (|∇u|² − |∇|u||²)/|u|²)` on the field's grid, with
/// `v = u/|u|` differentiated spectrally and `u` differentiated directly.
pub fn phase_gradient_identity(u: &VectorField) -> Result<(Vec<f64>, Vec<f64>)> {
    let grid = u.grid();
    let moduli = check_modulus(grid, u.values())?;
    let du = gradients_on(&component_coeffs(u), grid);
    let v = phase_map(u)?;
    let dv = gradients_on(&component_coeffs(&v), grid);
    let lhs = gradient_norm_sq(&dv);
    let rhs = (0..grid.len())
        .map(|n| {
            let mut dm = [0.0; 3];
            for k in 0..3 {
                dm = axpy3(u.values()[n][k] / moduli[n], du[n][k], dm);
            }
            let du_sq: f64 = du[n].iter().map(|&g| dot3(g, g)).sum();
            (du_sq - dot3(dm, dm)) / (moduli[n] * moduli[n])
        })
        .collect();
    Ok((lhs, rhs))
}

fn check_unit(v: &VectorField, tol: f64) -> Result<()> {
    let worst = v.values().iter().fold(0.0_f64, |a, &x| a.max((norm3(x) - 1.0).abs()));
    if worst > tol {
        return Err(Error::Domain(format!("field is not unit-valued: max ||v|−1| = {worst:e}")));
    }
    Ok(())
}

/// `τ(v) = Δv + |∇v|²v` for a unit-valued `v`.
pub fn tension_field(v: &VectorField) -> Result<VectorField> {
    check_unit(v, 1e-8)?;
    let grid = v.grid();
    let comps = component_coeffs(v);
    let lap = components_on(&comps.clone().map(|c| laplacian_scalar(&c)), grid);
    let dsq = gradient_norm_sq(&gradients_on(&comps, grid));
    let values = (0..grid.len()).map(|n| axpy3(dsq[n], v.values()[n], lap[n])).collect();
    VectorField::new(grid.clone(), values)
}

/// `∫|∇v|⁴ x dσ`, with gradients evaluated on the de-aliased grid.
pub fn quartic_barycenter(v: &VectorField) -> Vec3 {
    let fine = v.grid().dealiased();
    let dsq = gradient_norm_sq(&gradients_on(&component_coeffs(v), &fine));
    let values: Vec<Vec3> = dsq.iter().zip(fine.points()).map(|(&d, x)| scale3(d * d, x)).collect();
    fine.integrate_vec(&values)
}

/// `∫(1−|u|²)² x / ε⁴`.
pub fn balancing_vector(u: &VectorField, eps: f64) -> Result<Vec3> {
    let model = model_for(u, eps)?;
    Ok(model.balancing(&vsh_analyze(u)))
}

/// Rounded degree together with the raw Jacobian integral.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Degree {
    pub degree: i64,
    pub value: f64,
}

/// `(1/4π)∫ v·(∂_θv × ∂_φv / sinθ) dσ` for a unit-valued `v`.
pub fn degree(v: &VectorField) -> Result<Degree> {
    check_unit(v, 1e-6)?;
    let fine = v.grid().dealiased();
    let comps = component_coeffs(v);
    let vals = components_on(&comps, &fine);
    let grads = gradients_on(&comps, &fine);
    let mut jac = Vec::with_capacity(fine.len());
    for i in 0..fine.nlat() {
        for j in 0..fine.nlon() {
            let n = i * fine.nlon() + j;
            let [_, et, ep] = fine.frame(i, j);
            let dt = [0, 1, 2].map(|k| dot3(grads[n][k], et));
            let dp = [0, 1, 2].map(|k| dot3(grads[n][k], ep));
            jac.push(dot3(vals[n], cross3(dt, dp)));
        }
    }
    let value = fine.integrate(&jac) / (4.0 * PI);
    let degree = value.round();
    if (value - degree).abs() > 0.1 {
        return Err(Error::IllDefinedDegree { value });
    }
    Ok(Degree { degree: degree as i64, value })
}

/// Outcome of the γ-admissibility test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdmissibilityReport {
    pub gamma: f64,
    pub energy: f64,
    pub residual_l2: f64,
    /// Residual level standing in for exact criticality.
    pub tolerance: f64,
    pub is_critical: bool,
    pub is_constant: bool,
    pub is_admissible: bool,
}

/// Checks criticality (`residual ≤ tolerance`, default `1e-8·√E`),
/// `E < 8π − γ`, and non-constancy.
pub fn admissibility(u: &VectorField, eps: f64, gamma: f64, tolerance: Option<f64>) -> Result<AdmissibilityReport> {
    if gamma.is_nan() || gamma <= 0.0 {
        return Err(Error::Domain(format!("gamma {gamma} must be positive")));
    }
    let model = model_for(u, eps)?;
    let c = vsh_analyze(u);
    let energy = model.energy(&c);
    let residual_l2 = model.residual(&c).norm_sq().sqrt();
    let tolerance = tolerance.unwrap_or_else(|| critical_tolerance(energy).max(1e-14));
    let is_constant = c.dirichlet_sq() <= 1e-20 * c.norm_sq().max(1.0);
    let is_critical = residual_l2 <= tolerance;
    Ok(AdmissibilityReport {
        gamma,
        energy,
        residual_l2,
        tolerance,
        is_critical,
        is_constant,
        is_admissible: is_critical && energy < 8.0 * PI - gamma && !is_constant,
    })
}

/// Size of `|u| − 1` and its derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModulusDiagnostics {
    /// `‖|u| − 1‖_∞` over the de-aliased grid.
    pub sup_defect: f64,
    /// `‖∇|u|‖_{L²}`.
    pub grad_l2: f64,
    /// `‖∇²|u|‖_{L²}` (covariant Hessian).
    pub hessian_l2: f64,
    /// Statistics of `(1−|u|²)/ε²`; the mean is area-weighted.
    pub potential_min: f64,
    pub potential_max: f64,
    pub potential_mean: f64,
}

pub fn modulus_diagnostics(u: &VectorField, eps: f64) -> Result<ModulusDiagnostics> {
    let model = model_for(u, eps)?;
    Ok(modulus_diagnostics_coeffs(&model, &vsh_analyze(u)))
}

pub fn modulus_diagnostics_coeffs(model: &GlModel, c: &VshCoeffs) -> ModulusDiagnostics {
    let fine = model.fine_grid();
    let moduli: Vec<f64> = model.fine_samples(c).iter().map(|&u| norm3(u)).collect();
    let m = analyze_values(fine, &moduli, fine.band_limit());
    let e2 = model.epsilon() * model.epsilon();
    let pot: Vec<f64> = moduli.iter().map(|&r| (1.0 - r * r) / e2).collect();
    let (grad_sq, hess_sq) = modulus_sobolev(&m);
    ModulusDiagnostics {
        sup_defect: moduli.iter().fold(0.0, |a, &r| a.max((r - 1.0).abs())),
        grad_l2: grad_sq.sqrt(),
        hessian_l2: hess_sq.sqrt(),
        potential_min: pot.iter().copied().fold(f64::INFINITY, f64::min),
        potential_max: pot.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        potential_mean: fine.integrate(&pot) / (4.0 * PI),
    }
}

/// `(‖∇f‖², ‖∇²f‖²)`; the Hessian norm uses the Bochner identity
/// `∫|∇²f|² = Σ l(l+1)(l(l+1)−1) c²` on the unit sphere.
fn modulus_sobolev(f: &ShCoeffs) -> (f64, f64) {
    let mut g = 0.0;
    let mut h = 0.0;
    for l in 1..=f.band_limit() {
        let ll = (l * (l + 1)) as f64;
        let s: f64 = f.data()[l * l..(l + 1) * (l + 1)].iter().map(|c| c * c).sum();
        g += ll * s;
        h += ll * (ll - 1.0) * s;
    }
    (g, h)
}

/// Largest energy captured by a geodesic cap of the given angular radius,
/// with its centre. Centres range over the nodes of a coarse grid.
pub fn energy_concentration(u: &VectorField, eps: f64, cap_radius: f64) -> Result<(Vec3, f64)> {
    let model = model_for(u, eps)?;
    let fine = model.fine_grid().clone();
    let comps = vsh_to_components(&vsh_analyze(u));
    let vals = components_on(&comps, &fine);
    let dsq = gradient_norm_sq(&gradients_on(&comps, &fine));
    let weights: Vec<(Vec3, f64)> = (0..fine.nlat())
        .flat_map(|i| (0..fine.nlon()).map(move |j| (i, j)))
        .map(|(i, j)| {
            let n = i * fine.nlon() + j;
            let e = 0.5 * dsq[n] + (1.0 - dot3(vals[n], vals[n])).powi(2) / (4.0 * eps * eps);
            (fine.point(i, j), e * fine.area_weight(i))
        })
        .collect();
    let centres = shared_grid_unchecked(8);
    let cos_r = cap_radius.cos();
    let mut best = ([0.0, 0.0, 1.0], f64::NEG_INFINITY);
    for c in centres.points() {
        let e: f64 = weights.iter().filter(|(x, _)| dot3(*x, c) >= cos_r).map(|(_, w)| w).sum();
        if e > best.1 {
            best = (c, e);
        }
    }
    Ok(best)
}

/// Diagnostics cached with a state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateDiagnostics {
    pub sup_modulus_defect: f64,
    pub balancing: Vec3,
    /// `None` when the phase is undefined or the degree is ill-defined.
    pub degree: Option<i64>,
}

/// A candidate critical point with cached energy, residual and diagnostics.
#[derive(Clone, Debug)]
pub struct GlState {
    u: VectorField,
    coeffs: VshCoeffs,
    epsilon: f64,
    energy: f64,
    residual_l2: f64,
    diagnostics: StateDiagnostics,
}

impl GlState {
    pub fn new(u: VectorField, eps: f64) -> Result<Self> {
        let model = model_for(&u, eps)?;
        let coeffs = vsh_analyze(&u);
        Ok(Self::build(&model, coeffs, u))
    }

    pub fn from_coeffs(model: &GlModel, coeffs: VshCoeffs) -> Result<Self> {
        let u = vsh_synthesize(&coeffs, model.grid())?;
        Ok(Self::build(model, coeffs, u))
    }

    fn build(model: &GlModel, coeffs: VshCoeffs, u: VectorField) -> Self {
        let energy = model.energy(&coeffs);
        let residual_l2 = model.residual(&coeffs).norm_sq().sqrt();
        let fine = model.fine_samples(&coeffs);
        let sup_modulus_defect = fine.iter().fold(0.0_f64, |a, &v| a.max((norm3(v) - 1.0).abs()));
        let degree = phase_map(&u).ok().and_then(|v| degree(&v).ok()).map(|d| d.degree);
        let diagnostics = StateDiagnostics { sup_modulus_defect, balancing: model.balancing(&coeffs), degree };
        Self { u, coeffs, epsilon: model.epsilon(), energy, residual_l2, diagnostics }
    }

    pub fn field(&self) -> &VectorField {
        &self.u
    }

    pub fn coeffs(&self) -> &VshCoeffs {
        &self.coeffs
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn residual_l2(&self) -> f64 {
        self.residual_l2
    }

    pub fn diagnostics(&self) -> &StateDiagnostics {
        &self.diagnostics
    }
}
