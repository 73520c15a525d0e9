//! Vector spherical harmonics for R³-valued fields on S²:
//!
//! ```text
//! N_{lm} = Y_{lm} x,   Ψ_{lm} = ∇Y_{lm}/√(l(l+1)),   Φ_{lm} = x × ∇Y_{lm}/√(l(l+1))
//! ```
//!
//! `N_{00} = Y_{00} x` is the radial monopole. The three families are
//! mutually L²-orthonormal; the vector Laplacian couples `N_{lm}` and
//! `Ψ_{lm}` in 2×2 blocks and acts diagonally on `Φ_{lm}`.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::spherical::{
    analyze_values, shared_grid_unchecked, synthesize_values, tangent_analysis, tangent_synthesis, ShCoeffs,
    SphericalGrid,
};

pub type Vec3 = [f64; 3];

#[inline]
pub fn dot3(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross3(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
pub fn norm3(a: Vec3) -> f64 {
    dot3(a, a).sqrt()
}

#[inline]
pub fn axpy3(alpha: f64, x: Vec3, y: Vec3) -> Vec3 {
    [y[0] + alpha * x[0], y[1] + alpha * x[1], y[2] + alpha * x[2]]
}

#[inline]
pub fn scale3(alpha: f64, x: Vec3) -> Vec3 {
    [alpha * x[0], alpha * x[1], alpha * x[2]]
}

/// Order `m` of the degree-one harmonic proportional to the coordinate `x_j`.
#[inline]
pub fn degree_one_order(axis: usize) -> i64 {
    [1, -1, 0][axis]
}

/// R³-valued samples on a grid, row-major `(lat, lon)`.
#[derive(Clone, Debug)]
pub struct VectorField {
    grid: Arc<SphericalGrid>,
    values: Vec<Vec3>,
}

impl VectorField {
    pub fn new(grid: Arc<SphericalGrid>, values: Vec<Vec3>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!("{} values for a grid of {} nodes", values.len(), grid.len())));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: &Arc<SphericalGrid>) -> Self {
        Self { grid: grid.clone(), values: vec![[0.0; 3]; grid.len()] }
    }

    pub fn from_fn(grid: &Arc<SphericalGrid>, f: impl Fn(Vec3) -> Vec3) -> Self {
        Self { grid: grid.clone(), values: grid.points().map(f).collect() }
    }

    /// Field `u_θ θ̂ + u_φ φ̂` from frame components.
    pub fn from_tangent_components(grid: &Arc<SphericalGrid>, u_theta: &[f64], u_phi: &[f64]) -> Self {
        Self::from_frame_components(grid, None, u_theta, u_phi)
    }

    fn from_frame_components(grid: &Arc<SphericalGrid>, u_r: Option<&[f64]>, u_theta: &[f64], u_phi: &[f64]) -> Self {
        let nlon = grid.nlon();
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.nlat() {
            for j in 0..nlon {
                let k = i * nlon + j;
                let [r, t, p] = grid.frame(i, j);
                let mut v = axpy3(u_phi[k], p, scale3(u_theta[k], t));
                if let Some(ur) = u_r {
                    v = axpy3(ur[k], r, v);
                }
                values.push(v);
            }
        }
        Self { grid: grid.clone(), values }
    }

    /// `(u·r̂, u·θ̂, u·φ̂)` sample arrays.
    pub fn frame_components(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.values.len();
        let (mut ur, mut ut, mut up) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        let nlon = self.grid.nlon();
        for i in 0..self.grid.nlat() {
            for j in 0..nlon {
                let v = self.values[i * nlon + j];
                let [r, t, p] = self.grid.frame(i, j);
                ur.push(dot3(v, r));
                ut.push(dot3(v, t));
                up.push(dot3(v, p));
            }
        }
        (ur, ut, up)
    }

    pub fn grid(&self) -> &Arc<SphericalGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[Vec3] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Vec3] {
        &mut self.values
    }

    pub fn component(&self, k: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[k]).collect()
    }

    pub fn map(&self, f: impl Fn(Vec3, Vec3) -> Vec3) -> Self {
        let values = self.values.iter().zip(self.grid.points()).map(|(&v, p)| f(v, p)).collect();
        Self { grid: self.grid.clone(), values }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(Vec3, Vec3) -> Vec3) -> Self {
        assert!(Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid, "fields on different grids");
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self { grid: self.grid.clone(), values }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| axpy3(1.0, b, a))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| axpy3(-1.0, b, a))
    }

    /// `self + alpha·other`.
    pub fn add_scaled(&self, alpha: f64, other: &Self) -> Self {
        self.zip_with(other, |a, b| axpy3(alpha, b, a))
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|&v| scale3(alpha, v)).collect() }
    }

    /// `∫ u·w dσ`.
    pub fn inner(&self, other: &Self) -> f64 {
        assert_eq!(self.values.len(), other.values.len(), "fields on different grids");
        let dots: Vec<f64> = self.values.iter().zip(&other.values).map(|(&a, &b)| dot3(a, b)).collect();
        self.grid.integrate(&dots)
    }

    pub fn norm_l2(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    /// `∫ u dσ` componentwise.
    pub fn integral(&self) -> Vec3 {
        self.grid.integrate_vec(&self.values)
    }

    /// Pointwise moduli `|u|`.
    pub fn moduli(&self) -> Vec<f64> {
        self.values.iter().map(|&v| norm3(v)).collect()
    }

    /// `max |u|` over the grid.
    pub fn max_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |a, &v| a.max(norm3(v)))
    }
}

/// Which vector-harmonic family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VshKind {
    N,
    Psi,
    Phi,
}

/// Coefficients of a field in the `N`/`Ψ`/`Φ` basis up to band limit `L`.
/// The `l = 0` slots of the `Ψ` and `Φ` families are always zero.
#[derive(Clone, Debug, PartialEq)]
pub struct VshCoeffs {
    a: ShCoeffs,
    b: ShCoeffs,
    c: ShCoeffs,
}

impl VshCoeffs {
    pub fn zeros(band_limit: usize) -> Self {
        Self { a: ShCoeffs::zeros(band_limit), b: ShCoeffs::zeros(band_limit), c: ShCoeffs::zeros(band_limit) }
    }

    pub fn from_channels(a: ShCoeffs, mut b: ShCoeffs, mut c: ShCoeffs) -> Result<Self> {
        if a.band_limit() != b.band_limit() || a.band_limit() != c.band_limit() {
            return Err(Error::Dimension("VSH channels with different band limits".into()));
        }
        b.set(0, 0, 0.0);
        c.set(0, 0, 0.0);
        Ok(Self { a, b, c })
    }

    pub fn unit(band_limit: usize, kind: VshKind, l: usize, m: i64) -> Result<Self> {
        check_mode(kind, l, m, band_limit)?;
        let mut out = Self::zeros(band_limit);
        out.set(kind, l, m, 1.0);
        Ok(out)
    }

    pub fn band_limit(&self) -> usize {
        self.a.band_limit()
    }

    pub fn a(&self) -> &ShCoeffs {
        &self.a
    }

    pub fn b(&self) -> &ShCoeffs {
        &self.b
    }

    pub fn c(&self) -> &ShCoeffs {
        &self.c
    }

    pub fn channel(&self, kind: VshKind) -> &ShCoeffs {
        match kind {
            VshKind::N => &self.a,
            VshKind::Psi => &self.b,
            VshKind::Phi => &self.c,
        }
    }

    pub fn get(&self, kind: VshKind, l: usize, m: i64) -> f64 {
        self.channel(kind).get(l, m)
    }

    /// Sets a coefficient; writes to the `l = 0` slot of `Ψ`/`Φ` are ignored.
    pub fn set(&mut self, kind: VshKind, l: usize, m: i64, v: f64) {
        match kind {
            VshKind::N => self.a.set(l, m, v),
            VshKind::Psi if l > 0 => self.b.set(l, m, v),
            VshKind::Phi if l > 0 => self.c.set(l, m, v),
            _ => {}
        }
    }

    /// Concatenated `(a, b, c)` coefficient vector.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(3 * self.a.data().len());
        v.extend_from_slice(self.a.data());
        v.extend_from_slice(self.b.data());
        v.extend_from_slice(self.c.data());
        v
    }

    pub fn from_flat(band_limit: usize, flat: &[f64]) -> Result<Self> {
        let n = crate::spherical::sh_len(band_limit);
        if flat.len() != 3 * n {
            return Err(Error::Dimension(format!("{} flat coefficients for band limit {band_limit}", flat.len())));
        }
        Self::from_channels(
            ShCoeffs::from_vec(band_limit, flat[..n].to_vec())?,
            ShCoeffs::from_vec(band_limit, flat[n..2 * n].to_vec())?,
            ShCoeffs::from_vec(band_limit, flat[2 * n..].to_vec())?,
        )
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.band_limit(), other.band_limit(), "VSH band limits differ");
        let z = |x: &ShCoeffs, y: &ShCoeffs| {
            let data = x.data().iter().zip(y.data()).map(|(&p, &q)| f(p, q)).collect();
            ShCoeffs::from_vec(x.band_limit(), data).expect("same length")
        };
        Self { a: z(&self.a, &other.a), b: z(&self.b, &other.b), c: z(&self.c, &other.c) }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |p, q| p + q)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |p, q| p - q)
    }

    /// `self + alpha·other`.
    pub fn add_scaled(&self, alpha: f64, other: &Self) -> Self {
        self.zip_with(other, |p, q| p + alpha * q)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        self.zip_with(self, |p, _| alpha * p)
    }

    /// `∫ u·w dσ` (the basis is orthonormal).
    pub fn inner(&self, other: &Self) -> f64 {
        let d = |x: &ShCoeffs, y: &ShCoeffs| x.data().iter().zip(y.data()).map(|(p, q)| p * q).sum::<f64>();
        d(&self.a, &other.a) + d(&self.b, &other.b) + d(&self.c, &other.c)
    }

    /// `‖u‖²_{L²}`.
    pub fn norm_sq(&self) -> f64 {
        self.inner(self)
    }

    /// `∫ ∇u:∇w dσ` with componentwise ambient gradients.
    pub fn dirichlet_inner(&self, other: &Self) -> f64 {
        vector_laplacian(self).inner(other)
    }

    /// `‖∇u‖²_{L²}`.
    pub fn dirichlet_sq(&self) -> f64 {
        self.dirichlet_inner(self)
    }

    /// `‖u‖²_{H¹} = ‖u‖² + ‖∇u‖²`.
    pub fn h1_norm_sq(&self) -> f64 {
        self.norm_sq() + self.dirichlet_sq()
    }

    pub fn resized(&self, band_limit: usize) -> Self {
        Self { a: self.a.resized(band_limit), b: self.b.resized(band_limit), c: self.c.resized(band_limit) }
    }

    /// Copy with every mode of degree `l` scaled by `f(l)`.
    pub fn map_degrees(&self, f: impl Fn(usize) -> f64) -> Self {
        let mut out = self.clone();
        out.a.scale_by_degree(&f);
        out.b.scale_by_degree(&f);
        out.c.scale_by_degree(&f);
        out
    }
}

fn check_mode(kind: VshKind, l: usize, m: i64, band_limit: usize) -> Result<()> {
    if m.unsigned_abs() as usize > l || l > band_limit {
        return Err(Error::Domain(format!("mode (l={l}, m={m}) invalid for band limit {band_limit}")));
    }
    if l == 0 && kind != VshKind::N {
        return Err(Error::Domain(format!("{kind:?} modes start at l = 1")));
    }
    Ok(())
}

/// Unit-L² basis field `N_{lm}`, `Ψ_{lm}` or `Φ_{lm}` sampled on `grid`.
pub fn vsh_basis_field(kind: VshKind, l: usize, m: i64, grid: &Arc<SphericalGrid>) -> Result<VectorField> {
    check_mode(kind, l, m, grid.band_limit())?;
    let c = VshCoeffs::unit(l, kind, l, m)?;
    vsh_synthesize(&c, grid)
}

/// Projections `⟨u, N_{lm}⟩, ⟨u, Ψ_{lm}⟩, ⟨u, Φ_{lm}⟩` up to the grid band limit.
pub fn vsh_analyze(u: &VectorField) -> VshCoeffs {
    analyze_on(u.grid(), u.values(), u.grid().band_limit())
}

/// Projections up to `lmax ≤` grid band limit.
pub fn vsh_analyze_to(u: &VectorField, lmax: usize) -> Result<VshCoeffs> {
    if lmax > u.grid().band_limit() {
        return Err(Error::Dimension(format!(
            "analysis band {lmax} exceeds grid band limit {}",
            u.grid().band_limit()
        )));
    }
    Ok(analyze_on(u.grid(), u.values(), lmax))
}

pub(crate) fn analyze_on(grid: &Arc<SphericalGrid>, values: &[Vec3], lmax: usize) -> VshCoeffs {
    let field = VectorField { grid: grid.clone(), values: values.to_vec() };
    let (ur, ut, up) = field.frame_components();
    let a = analyze_values(grid, &ur, lmax);
    let (mut b, mut c) = tangent_analysis(grid, &ut, &up, lmax);
    let inv = |l: usize| if l == 0 { 0.0 } else { 1.0 / ((l * (l + 1)) as f64).sqrt() };
    b.scale_by_degree(inv);
    c.scale_by_degree(inv);
    VshCoeffs { a, b, c }
}

/// Field `Σ a N + b Ψ + c Φ` sampled on `grid`.
pub fn vsh_synthesize(c: &VshCoeffs, grid: &Arc<SphericalGrid>) -> Result<VectorField> {
    if c.band_limit() > grid.band_limit() {
        return Err(Error::Dimension(format!(
            "coefficient band {} exceeds grid band limit {}",
            c.band_limit(),
            grid.band_limit()
        )));
    }
    let ur = synthesize_values(&c.a, grid);
    let inv = |l: usize| if l == 0 { 0.0 } else { 1.0 / ((l * (l + 1)) as f64).sqrt() };
    let mut bp = c.b.clone();
    let mut cp = c.c.clone();
    bp.scale_by_degree(inv);
    cp.scale_by_degree(inv);
    let (ut, up) = tangent_synthesis(grid, Some(&bp), Some(&cp));
    Ok(VectorField::from_frame_components(grid, Some(&ur), &ut, &up))
}

/// `−Δu` in coefficients:
/// `−ΔN = (l(l+1)+2)N − 2√(l(l+1))Ψ`, `−ΔΨ = l(l+1)Ψ − 2√(l(l+1))N`, `−ΔΦ = l(l+1)Φ`.
pub fn vector_laplacian(c: &VshCoeffs) -> VshCoeffs {
    let lmax = c.band_limit();
    let mut out = VshCoeffs::zeros(lmax);
    out.a.set(0, 0, 2.0 * c.a.get(0, 0));
    for l in 1..=lmax {
        let ll = (l * (l + 1)) as f64;
        let s = ll.sqrt();
        for m in -(l as i64)..=l as i64 {
            let (a, b) = (c.a.get(l, m), c.b.get(l, m));
            out.a.set(l, m, (ll + 2.0) * a - 2.0 * s * b);
            out.b.set(l, m, ll * b - 2.0 * s * a);
            out.c.set(l, m, ll * c.c.get(l, m));
        }
    }
    out
}

/// Decomposition of `w = u − reference` into its first modes.
#[derive(Clone, Debug, PartialEq)]
pub struct FirstModeDecomposition {
    /// Coefficient of `x` (so the monopole part of `w` is `a0·x`).
    pub a0: f64,
    /// Coefficient on the unit-L² monopole `Y_{00}x`; equals `2√π·a0`.
    pub a0_unit: f64,
    /// `N₁(a) = (a·x)x` content.
    pub a: Vec3,
    /// `Ψ₁(b) = b − (b·x)x` content.
    pub b: Vec3,
    /// Rotational content `ω × x` (the `Φ₁` modes).
    pub omega: Vec3,
    /// `‖Φ₁ part‖_{L²}`.
    pub phi1_norm: f64,
    /// Norms of everything of degree `l ≥ 2`.
    pub w_perp_l2: f64,
    pub w_perp_h1: f64,
}

/// Splits `u − reference` into `a0·x + N₁(a) + Ψ₁(b) + ω×x + w_⊥`.
pub fn first_mode_decompose(u: &VectorField, reference: &VectorField) -> Result<FirstModeDecomposition> {
    if u.values.len() != reference.values.len() || u.grid.band_limit() != reference.grid.band_limit() {
        return Err(Error::Dimension("fields on different grids".into()));
    }
    Ok(first_mode_decompose_coeffs(&vsh_analyze(&u.sub(reference))))
}

/// [`first_mode_decompose`] on the coefficients of `w` directly.
pub fn first_mode_decompose_coeffs(w: &VshCoeffs) -> FirstModeDecomposition {
    let k = (4.0 * PI / 3.0).sqrt();
    let mut a = [0.0; 3];
    let mut b = [0.0; 3];
    let mut omega = [0.0; 3];
    for axis in 0..3 {
        let m = degree_one_order(axis);
        a[axis] = w.a.get(1, m) / k;
        b[axis] = w.b.get(1, m) / (SQRT_2 * k);
        // ω × x = −x × ∇(ω·x) = −√2·k Σ ω_j Φ_{1,m(j)}
        omega[axis] = -w.c.get(1, m) / (SQRT_2 * k);
    }
    let phi1_norm = (-1..=1).map(|m| w.c.get(1, m).powi(2)).sum::<f64>().sqrt();
    let mut perp = w.clone();
    for l in 0..=w.band_limit().min(1) {
        for m in -(l as i64)..=l as i64 {
            perp.set(VshKind::N, l, m, 0.0);
            perp.set(VshKind::Psi, l, m, 0.0);
            perp.set(VshKind::Phi, l, m, 0.0);
        }
    }
    let a0_unit = w.a.get(0, 0);
    FirstModeDecomposition {
        a0: a0_unit / (4.0 * PI).sqrt(),
        a0_unit,
        a,
        b,
        omega,
        phi1_norm,
        w_perp_l2: perp.norm_sq().sqrt(),
        w_perp_h1: perp.h1_norm_sq().sqrt(),
    }
}

/// `N₁(a) = (a·x)x`.
pub fn n1_field(a: Vec3, grid: &Arc<SphericalGrid>) -> VectorField {
    VectorField::from_fn(grid, |x| scale3(dot3(a, x), x))
}

/// `Ψ₁(b) = b − (b·x)x`.
pub fn psi1_field(b: Vec3, grid: &Arc<SphericalGrid>) -> VectorField {
    VectorField::from_fn(grid, |x| axpy3(-dot3(b, x), x, b))
}

/// A closed-form value and its quadrature counterpart.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Checked<T> {
    pub closed_form: T,
    pub quadrature: T,
}

impl Checked<f64> {
    pub fn abs_error(&self) -> f64 {
        (self.closed_form - self.quadrature).abs()
    }
}

impl Checked<Vec3> {
    pub fn abs_error(&self) -> f64 {
        norm3(axpy3(-1.0, self.quadrature, self.closed_form))
    }
}

/// The first-mode integrals of `N₁(a)` and `Ψ₁(b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FirstModeClosedForms {
    pub mean_n1: Checked<Vec3>,
    pub norm_sq_n1: Checked<f64>,
    pub mean_psi1: Checked<Vec3>,
    pub norm_sq_psi1: Checked<f64>,
    pub cross_dirichlet: Checked<f64>,
}

impl FirstModeClosedForms {
    pub fn max_abs_error(&self) -> f64 {
        [
            self.mean_n1.abs_error(),
            self.norm_sq_n1.abs_error(),
            self.mean_psi1.abs_error(),
            self.norm_sq_psi1.abs_error(),
            self.cross_dirichlet.abs_error(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Closed forms `∫N₁(a) = 4πa/3`, `∫|N₁(a)|² = 4π|a|²/3`, `∫Ψ₁(b) = 8πb/3`,
/// `∫|Ψ₁(b)|² = 8π|b|²/3`, `∫∇N₁(a)·∇Ψ₁(b) = −16π a·b/3`, each paired
/// with its value by quadrature on `grid`.
pub fn first_mode_closed_forms(a: Vec3, b: Vec3, grid: &Arc<SphericalGrid>) -> Result<FirstModeClosedForms> {
    if grid.band_limit() < 2 {
        return Err(Error::Dimension("first-mode quadrature needs band limit ≥ 2".into()));
    }
    let n1 = n1_field(a, grid);
    let psi1 = psi1_field(b, grid);
    let ga = component_gradients(&n1)?;
    let gb = component_gradients(&psi1)?;
    let cross: Vec<f64> = (0..grid.len()).map(|k| (0..3).map(|c| dot3(ga[k][c], gb[k][c])).sum()).collect();
    let c3 = 4.0 * PI / 3.0;
    Ok(FirstModeClosedForms {
        mean_n1: Checked { closed_form: scale3(c3, a), quadrature: n1.integral() },
        norm_sq_n1: Checked { closed_form: c3 * dot3(a, a), quadrature: n1.inner(&n1) },
        mean_psi1: Checked { closed_form: scale3(2.0 * c3, b), quadrature: psi1.integral() },
        norm_sq_psi1: Checked { closed_form: 2.0 * c3 * dot3(b, b), quadrature: psi1.inner(&psi1) },
        cross_dirichlet: Checked { closed_form: -4.0 * c3 * dot3(a, b), quadrature: grid.integrate(&cross) },
    })
}

/// Spherical-harmonic coefficients of the three ambient components, up to
/// the grid band limit.
pub fn component_coeffs(u: &VectorField) -> [ShCoeffs; 3] {
    let g = u.grid();
    let l = g.band_limit();
    [0, 1, 2].map(|k| analyze_values(g, &u.component(k), l))
}

/// Exact ambient-component coefficients of a band-`L` VSH expansion; the
/// components have degree `≤ L+1`.
pub fn vsh_to_components(c: &VshCoeffs) -> [ShCoeffs; 3] {
    let l = c.band_limit() + 1;
    let grid = shared_grid_unchecked(l);
    let u = vsh_synthesize(c, &grid).expect("grid band covers coefficients");
    [0, 1, 2].map(|k| analyze_values(&grid, &u.component(k), l))
}

/// Ambient gradient tensor: `out[node][k] = ∇_{S²} u_k` (tangent, ambient
/// coordinates). Components are analysed at the grid band limit.
pub fn component_gradients(u: &VectorField) -> Result<Vec<[Vec3; 3]>> {
    Ok(gradients_on(&component_coeffs(u), u.grid()))
}

/// Gradients of component expansions sampled on `grid`.
pub fn gradients_on(comps: &[ShCoeffs; 3], grid: &Arc<SphericalGrid>) -> Vec<[Vec3; 3]> {
    let fields: Vec<VectorField> =
        comps.iter().map(|c| crate::spherical::surface_gradient(c, grid).expect("band within grid")).collect();
    (0..grid.len()).map(|k| [fields[0].values[k], fields[1].values[k], fields[2].values[k]]).collect()
}

/// `Σ_k |∇u_k|²` at each node.
pub fn gradient_norm_sq(grads: &[[Vec3; 3]]) -> Vec<f64> {
    grads.iter().map(|g| g.iter().map(|&v| dot3(v, v)).sum()).collect()
}

/// Samples of component expansions on `grid`.
pub fn components_on(comps: &[ShCoeffs; 3], grid: &Arc<SphericalGrid>) -> Vec<Vec3> {
    let s: Vec<Vec<f64>> = comps.iter().map(|c| synthesize_values(c, grid)).collect();
    (0..grid.len()).map(|k| [s[0][k], s[1][k], s[2][k]]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spherical::{build_grid, laplacian_scalar};
    use approx::assert_abs_diff_eq;

    #[test]
    fn basis_combinations_reproduce_first_modes() {
        let g = build_grid(6).unwrap();
        let k = (4.0 * PI / 3.0).sqrt();
        let a = [0.3, -1.1, 0.7];
        let mut n = VectorField::zeros(&g);
        let mut p = VectorField::zeros(&g);
        for axis in 0..3 {
            let m = degree_one_order(axis);
            n = n.add_scaled(k * a[axis], &vsh_basis_field(VshKind::N, 1, m, &g).unwrap());
            p = p.add_scaled(SQRT_2 * k * a[axis], &vsh_basis_field(VshKind::Psi, 1, m, &g).unwrap());
        }
        let n_exact = n1_field(a, &g);
        let p_exact = psi1_field(a, &g);
        for k in 0..g.len() {
            for c in 0..3 {
                assert_abs_diff_eq!(n.values()[k][c], n_exact.values()[k][c], epsilon = 1e-13);
                assert_abs_diff_eq!(p.values()[k][c], p_exact.values()[k][c], epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn n_and_phi_are_orthogonal() {
        let g = build_grid(8).unwrap();
        let n = vsh_basis_field(VshKind::N, 2, 1, &g).unwrap();
        let f = vsh_basis_field(VshKind::Phi, 2, 1, &g).unwrap();
        assert_abs_diff_eq!(n.inner(&f), 0.0, epsilon = 1e-12);
        assert!(matches!(vsh_basis_field(VshKind::Psi, 0, 0, &g), Err(Error::Domain(_))));
        assert!(matches!(vsh_basis_field(VshKind::N, 9, 0, &g), Err(Error::Domain(_))));
    }

    #[test]
    fn analysis_examples() {
        let g = build_grid(10).unwrap();
        let x = VectorField::from_fn(&g, |p| p);
        let c = vsh_analyze(&x);
        assert_abs_diff_eq!(c.a().get(0, 0), (4.0 * PI).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(c.norm_sq(), 4.0 * PI, epsilon = 1e-11);

        let c = vsh_analyze(&psi1_field([0.0, 0.0, 1.0], &g));
        let b1: f64 = (-1..=1).map(|m| c.b().get(1, m).powi(2)).sum();
        assert_abs_diff_eq!(b1, 8.0 * PI / 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(c.norm_sq(), b1, epsilon = 1e-10);

        let c = vsh_analyze(&n1_field([1.0, 0.0, 0.0], &g));
        let a1: f64 = (-1..=1).map(|m| c.a().get(1, m).powi(2)).sum();
        assert_abs_diff_eq!(a1, 4.0 * PI / 3.0, epsilon = 1e-10);
    }

    #[test]
    fn phi_fields_are_tangent() {
        let g = build_grid(12).unwrap();
        let f = vsh_basis_field(VshKind::Phi, 3, 2, &g).unwrap();
        for (v, p) in f.values().iter().zip(g.points()) {
            assert!(dot3(*v, p).abs() <= 1e-12);
        }
        let z = vsh_synthesize(&VshCoeffs::zeros(12), &g).unwrap();
        assert_eq!(z.max_norm(), 0.0);
    }

    #[test]
    fn laplacian_block_examples() {
        let out = vector_laplacian(&VshCoeffs::unit(6, VshKind::Phi, 5, 0).unwrap());
        assert_eq!(out.get(VshKind::Phi, 5, 0), 30.0);
        let out = vector_laplacian(&VshCoeffs::unit(6, VshKind::N, 1, 0).unwrap());
        assert_eq!(out.get(VshKind::N, 1, 0), 4.0);
        assert_abs_diff_eq!(out.get(VshKind::Psi, 1, 0), -2.0 * SQRT_2, epsilon = 1e-15);
        let g = build_grid(6).unwrap();
        let c = vsh_analyze(&VectorField::from_fn(&g, |p| p));
        let lap = vector_laplacian(&c);
        for (p, q) in lap.to_flat().iter().zip(c.to_flat()) {
            assert_abs_diff_eq!(*p, 2.0 * q, epsilon = 1e-12);
        }
    }

    #[test]
    fn vector_laplacian_matches_componentwise() {
        let lmax = 6;
        let mut c = VshCoeffs::zeros(lmax);
        let mut s = 0.37_f64;
        for kind in [VshKind::N, VshKind::Psi, VshKind::Phi] {
            for l in 0..=lmax {
                for m in -(l as i64)..=l as i64 {
                    s = (s * 9301.0 + 49297.0) % 233280.0;
                    c.set(kind, l, m, s / 233280.0 - 0.5);
                }
            }
        }
        let comps = vsh_to_components(&c);
        let lap_comps = comps.clone().map(|x| laplacian_scalar(&x));
        let g = shared_grid_unchecked(lmax + 1);
        let direct = components_on(&lap_comps, &g);
        let spectral = vsh_synthesize(&vector_laplacian(&c).resized(lmax + 1), &g).unwrap();
        for (d, s) in direct.iter().zip(spectral.values()) {
            for k in 0..3 {
                assert_abs_diff_eq!(-d[k], s[k], epsilon = 1e-10);
            }
        }
        // Dirichlet energy from blocks equals Σ_k ∫|∇u_k|².
        let comp_dirichlet: f64 = comps.iter().map(|x| x.dirichlet_sq()).sum();
        assert_abs_diff_eq!(comp_dirichlet, c.dirichlet_sq(), epsilon = 1e-10 * comp_dirichlet);
    }

    #[test]
    fn first_mode_examples() {
        let g = build_grid(8).unwrap();
        let r = VectorField::from_fn(&g, |p| scale3(0.9, p));
        let d = first_mode_decompose(&r, &r).unwrap();
        assert_eq!(d.a, [0.0; 3]);
        assert_eq!(d.w_perp_l2, 0.0);

        let u = r.add(&psi1_field([0.0, 1.0, 0.0], &g));
        let d = first_mode_decompose(&u, &r).unwrap();
        for k in 0..3 {
            assert_abs_diff_eq!(d.b[k], [0.0, 1.0, 0.0][k], epsilon = 1e-10);
            assert_abs_diff_eq!(d.a[k], 0.0, epsilon = 1e-10);
        }
        assert!(d.w_perp_l2 < 1e-10);

        let u = r.add(&n1_field([1.0, 0.0, 0.0], &g)).add(&vsh_basis_field(VshKind::Phi, 2, 0, &g).unwrap());
        let d = first_mode_decompose(&u, &r).unwrap();
        assert_abs_diff_eq!(d.a[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(d.w_perp_l2, 1.0, epsilon = 1e-10);

        let u = r.add(&VectorField::from_fn(&g, |p| p));
        let d = first_mode_decompose(&u, &r).unwrap();
        assert_abs_diff_eq!(d.a0, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.a0_unit, 2.0 * PI.sqrt(), epsilon = 1e-12);

        let omega = [0.2, -0.4, 0.1];
        let u = r.add(&VectorField::from_fn(&g, |p| cross3(omega, p)));
        let d = first_mode_decompose(&u, &r).unwrap();
        for k in 0..3 {
            assert_abs_diff_eq!(d.omega[k], omega[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn closed_form_examples() {
        let g = build_grid(4).unwrap();
        let f = first_mode_closed_forms([0.0, 0.0, 1.0], [0.0; 3], &g).unwrap();
        assert_abs_diff_eq!(f.norm_sq_n1.quadrature, 4.0 * PI / 3.0, epsilon = 1e-12);
        let f = first_mode_closed_forms([1.0, 0.0, 0.0], [1.0, 0.0, 0.0], &g).unwrap();
        assert_abs_diff_eq!(f.cross_dirichlet.quadrature, -16.0 * PI / 3.0, epsilon = 1e-11);
        let f = first_mode_closed_forms([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], &g).unwrap();
        assert_abs_diff_eq!(f.cross_dirichlet.quadrature, 0.0, epsilon = 1e-12);
        assert!(f.max_abs_error() < 1e-11);
    }
}
