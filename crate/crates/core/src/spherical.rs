//! Gauss–Legendre × equispaced-longitude grids on S² and real orthonormal
//! spherical-harmonic transforms.
//!
//! Real harmonics use the convention (no Condon–Shortley phase)
//!
//! ```text
//! Y_{l,0}  = P̄_l^0(cos θ)
//! Y_{l,m}  = √2 P̄_l^m(cos θ) cos(mφ)     m > 0
//! Y_{l,-m} = √2 P̄_l^m(cos θ) sin(mφ)     m > 0
//! ```
//!
//! with `2π ∫ P̄_l^m(x)² dx = 1`, so `Y_{1,1}, Y_{1,-1}, Y_{1,0}` are
//! `√(3/4π)` times `x, y, z`.
//!
//! Longitudinal sums go through an FFT per latitude ring; the Legendre sums
//! are direct. A grid of band limit `L` has `L+1` Gauss nodes in colatitude
//! and `2L+2` longitudes, and integrates every polynomial of degree
//! `≤ 2L+1` exactly.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock, RwLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::vsh::VectorField;

pub const MIN_BAND_LIMIT: usize = 2;
pub const MAX_BAND_LIMIT: usize = 512;

/// Position of `(l, m)` in l-major coefficient storage.
#[inline]
pub fn sh_index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

#[inline]
pub fn sh_len(lmax: usize) -> usize {
    (lmax + 1) * (lmax + 1)
}

#[inline]
fn packed_offset(lmax: usize, m: usize) -> usize {
    m * (2 * lmax + 3 - m) / 2
}

#[inline]
fn packed_len(lmax: usize) -> usize {
    (lmax + 1) * (lmax + 2) / 2
}

/// Normalized associated Legendre values `P̄_l^m(cos θ)` and their
/// colatitude derivatives, packed m-major (`l = m..=lmax` contiguous).
pub fn legendre_row(lmax: usize, cos_t: f64, sin_t: f64, p: &mut [f64], dp: &mut [f64]) {
    debug_assert!(p.len() >= packed_len(lmax) && dp.len() >= packed_len(lmax));
    let mut pmm = 0.5 / PI.sqrt();
    for m in 0..=lmax {
        if m > 0 {
            let mf = m as f64;
            pmm *= ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * sin_t;
        }
        let base = packed_offset(lmax, m);
        p[base] = pmm;
        if m < lmax {
            p[base + 1] = (2.0 * m as f64 + 3.0).sqrt() * cos_t * pmm;
        }
        let mf2 = (m * m) as f64;
        for l in m + 2..=lmax {
            let lf = l as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf2)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf2) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            p[base + l - m] = a * (cos_t * p[base + l - 1 - m] - b * p[base + l - 2 - m]);
        }
        // dP̄_l^m/dθ = (l cosθ P̄_l^m − √((2l+1)/(2l−1)(l²−m²)) P̄_{l−1}^m) / sinθ
        for l in m..=lmax {
            let lf = l as f64;
            let mut num = lf * cos_t * p[base + l - m];
            if l > m {
                let e = ((2.0 * lf + 1.0) / (2.0 * lf - 1.0) * (lf * lf - mf2)).sqrt();
                num -= e * p[base + l - 1 - m];
            }
            dp[base + l - m] = num / sin_t;
        }
    }
}

/// Legendre values (and θ-derivatives) at every colatitude node of a grid.
pub struct LegendreTable {
    lmax: usize,
    stride: usize,
    p: Vec<f64>,
    dp: Vec<f64>,
}

impl LegendreTable {
    fn new(cos_t: &[f64], sin_t: &[f64], lmax: usize) -> Self {
        let stride = packed_len(lmax);
        let mut p = vec![0.0; stride * cos_t.len()];
        let mut dp = vec![0.0; stride * cos_t.len()];
        for (i, (&c, &s)) in cos_t.iter().zip(sin_t).enumerate() {
            legendre_row(lmax, c, s, &mut p[i * stride..(i + 1) * stride], &mut dp[i * stride..(i + 1) * stride]);
        }
        Self { lmax, stride, p, dp }
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    /// `(P̄_l^m, dP̄_l^m/dθ)` for `l = m..=lmax` at node `i`.
    #[inline]
    pub fn row(&self, i: usize, m: usize) -> (&[f64], &[f64]) {
        let start = i * self.stride + packed_offset(self.lmax, m);
        let len = self.lmax - m + 1;
        (&self.p[start..start + len], &self.dp[start..start + len])
    }
}

/// Gauss–Legendre nodes in `x = cos θ` (decreasing, so θ increases) and weights.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::with_capacity(n);
    let mut ws = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dpn = 0.0;
        for _ in 0..100 {
            let (pn, d) = legendre_p_and_derivative(n, x);
            dpn = d;
            let dx = pn / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                dpn = legendre_p_and_derivative(n, x).1;
                break;
            }
        }
        xs.push(x);
        ws.push(2.0 / ((1.0 - x) * (1.0 + x) * dpn * dpn));
    }
    (xs, ws)
}

fn legendre_p_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / ((x - 1.0) * (x + 1.0));
    (p1, d)
}

/// Quadrature grid on S² with cached Legendre tables.
pub struct SphericalGrid {
    band_limit: usize,
    theta: Vec<f64>,
    cos_theta: Vec<f64>,
    sin_theta: Vec<f64>,
    weights: Vec<f64>,
    nlon: usize,
    cos_phi: Vec<f64>,
    sin_phi: Vec<f64>,
    fft_forward: Arc<dyn Fft<f64>>,
    fft_inverse: Arc<dyn Fft<f64>>,
    tables: RwLock<Vec<Arc<LegendreTable>>>,
    dealiased: OnceLock<Arc<SphericalGrid>>,
}

impl fmt::Debug for SphericalGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SphericalGrid")
            .field("band_limit", &self.band_limit)
            .field("nlat", &self.nlat())
            .field("nlon", &self.nlon)
            .finish()
    }
}

impl PartialEq for SphericalGrid {
    fn eq(&self, other: &Self) -> bool {
        self.band_limit == other.band_limit && self.nlon == other.nlon
    }
}

static GRID_CACHE: OnceLock<Mutex<HashMap<usize, Arc<SphericalGrid>>>> = OnceLock::new();

/// Grid with `L+1` Gauss nodes and `2L+2` longitudes. Grids are shared
/// process-wide, so repeated calls with the same `L` are cheap.
pub fn build_grid(band_limit: usize) -> Result<Arc<SphericalGrid>> {
    if !(MIN_BAND_LIMIT..=MAX_BAND_LIMIT).contains(&band_limit) {
        return Err(Error::Config(format!("band limit {band_limit} outside [{MIN_BAND_LIMIT}, {MAX_BAND_LIMIT}]")));
    }
    Ok(shared_grid_unchecked(band_limit))
}

pub(crate) fn shared_grid_unchecked(band_limit: usize) -> Arc<SphericalGrid> {
    let cache = GRID_CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("grid cache poisoned");
    map.entry(band_limit).or_insert_with(|| Arc::new(SphericalGrid::new(band_limit))).clone()
}

impl SphericalGrid {
    fn new(band_limit: usize) -> Self {
        let nlat = band_limit + 1;
        let nlon = 2 * band_limit + 2;
        let (cos_theta, weights) = gauss_legendre(nlat);
        let sin_theta: Vec<f64> = cos_theta.iter().map(|&x| ((1.0 - x) * (1.0 + x)).sqrt()).collect();
        let theta = cos_theta.iter().zip(&sin_theta).map(|(&c, &s)| s.atan2(c)).collect();
        let dphi = 2.0 * PI / nlon as f64;
        let cos_phi = (0..nlon).map(|j| (j as f64 * dphi).cos()).collect();
        let sin_phi = (0..nlon).map(|j| (j as f64 * dphi).sin()).collect();
        let mut planner = FftPlanner::new();
        let fft_forward = planner.plan_fft_forward(nlon);
        let fft_inverse = planner.plan_fft_inverse(nlon);
        Self {
            band_limit,
            theta,
            cos_theta,
            sin_theta,
            weights,
            nlon,
            cos_phi,
            sin_phi,
            fft_forward,
            fft_inverse,
            tables: RwLock::new(Vec::new()),
            dealiased: OnceLock::new(),
        }
    }

    pub fn band_limit(&self) -> usize {
        self.band_limit
    }

    pub fn nlat(&self) -> usize {
        self.theta.len()
    }

    pub fn nlon(&self) -> usize {
        self.nlon
    }

    /// Number of grid nodes.
    pub fn len(&self) -> usize {
        self.nlat() * self.nlon
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn cos_theta(&self) -> &[f64] {
        &self.cos_theta
    }

    pub fn sin_theta(&self) -> &[f64] {
        &self.sin_theta
    }

    /// Gauss weights in `cos θ` (they sum to 2).
    pub fn colatitude_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn longitude_spacing(&self) -> f64 {
        2.0 * PI / self.nlon as f64
    }

    pub fn phi(&self, j: usize) -> f64 {
        j as f64 * self.longitude_spacing()
    }

    /// Area weight of the node `(i, ·)`.
    #[inline]
    pub fn area_weight(&self, i: usize) -> f64 {
        self.weights[i] * self.longitude_spacing()
    }

    /// Unit position vector of node `(i, j)`.
    #[inline]
    pub fn point(&self, i: usize, j: usize) -> [f64; 3] {
        let s = self.sin_theta[i];
        [s * self.cos_phi[j], s * self.sin_phi[j], self.cos_theta[i]]
    }

    /// Local frame `(r̂, θ̂, φ̂)` at node `(i, j)`.
    #[inline]
    pub fn frame(&self, i: usize, j: usize) -> [[f64; 3]; 3] {
        let (ct, st) = (self.cos_theta[i], self.sin_theta[i]);
        let (cp, sp) = (self.cos_phi[j], self.sin_phi[j]);
        [[st * cp, st * sp, ct], [ct * cp, ct * sp, -st], [-sp, cp, 0.0]]
    }

    pub fn points(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        (0..self.nlat()).flat_map(move |i| (0..self.nlon).map(move |j| self.point(i, j)))
    }

    /// `∫_{S²} f dσ` by the grid quadrature; `values` is row-major (lat, lon).
    pub fn integrate(&self, values: &[f64]) -> f64 {
        assert_eq!(values.len(), self.len(), "value array does not match grid");
        values.chunks_exact(self.nlon).enumerate().map(|(i, row)| self.area_weight(i) * row.iter().sum::<f64>()).sum()
    }

    /// Componentwise integral of a vector-valued sample array.
    pub fn integrate_vec(&self, values: &[[f64; 3]]) -> [f64; 3] {
        assert_eq!(values.len(), self.len(), "value array does not match grid");
        let mut out = [0.0; 3];
        for (i, row) in values.chunks_exact(self.nlon).enumerate() {
            let w = self.area_weight(i);
            for v in row {
                for k in 0..3 {
                    out[k] += w * v[k];
                }
            }
        }
        out
    }

    /// Legendre table for coefficients up to `lmax` on this grid's nodes.
    pub fn legendre(&self, lmax: usize) -> Arc<LegendreTable> {
        if let Some(t) = self.tables.read().expect("legendre cache poisoned").iter().find(|t| t.lmax == lmax) {
            return t.clone();
        }
        let mut tables = self.tables.write().expect("legendre cache poisoned");
        if let Some(t) = tables.iter().find(|t| t.lmax == lmax) {
            return t.clone();
        }
        let table = Arc::new(LegendreTable::new(&self.cos_theta, &self.sin_theta, lmax));
        tables.push(table.clone());
        table
    }

    /// Grid of band limit `2L+2`: integrates quartic expressions in band-`L`
    /// fields (and their first derivatives) exactly.
    pub fn dealiased(&self) -> Arc<SphericalGrid> {
        self.dealiased.get_or_init(|| shared_grid_unchecked(2 * self.band_limit + 2)).clone()
    }

    /// Per-ring DFT `F_m = Σ_j f_j e^{-imφ_j}` for `m = 0..=mmax`.
    pub(crate) fn forward_rows(&self, values: &[f64], mmax: usize) -> Vec<Complex64> {
        assert_eq!(values.len(), self.len());
        debug_assert!(2 * mmax < self.nlon);
        let mut out = Vec::with_capacity(self.nlat() * (mmax + 1));
        let mut buf = vec![Complex64::new(0.0, 0.0); self.nlon];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft_forward.get_inplace_scratch_len()];
        for row in values.chunks_exact(self.nlon) {
            for (b, &v) in buf.iter_mut().zip(row) {
                *b = Complex64::new(v, 0.0);
            }
            self.fft_forward.process_with_scratch(&mut buf, &mut scratch);
            out.extend_from_slice(&buf[..=mmax]);
        }
        out
    }

    /// Inverse of [`forward_rows`]: `f_j = Re Σ_{m≤mmax} X_m e^{imφ_j}`.
    pub(crate) fn inverse_rows(&self, spectra: &[Complex64], mmax: usize) -> Vec<f64> {
        debug_assert_eq!(spectra.len(), self.nlat() * (mmax + 1));
        let mut out = Vec::with_capacity(self.len());
        let mut buf = vec![Complex64::new(0.0, 0.0); self.nlon];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fft_inverse.get_inplace_scratch_len()];
        for spec in spectra.chunks_exact(mmax + 1) {
            buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
            buf[..=mmax].copy_from_slice(spec);
            self.fft_inverse.process_with_scratch(&mut buf, &mut scratch);
            out.extend(buf.iter().map(|c| c.re));
        }
        out
    }
}

/// Real spherical-harmonic coefficients `c_{lm}`, `0 ≤ l ≤ L`, `|m| ≤ l`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShCoeffs {
    band_limit: usize,
    data: Vec<f64>,
}

impl ShCoeffs {
    pub fn zeros(band_limit: usize) -> Self {
        Self { band_limit, data: vec![0.0; sh_len(band_limit)] }
    }

    pub fn from_vec(band_limit: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != sh_len(band_limit) {
            return Err(Error::Dimension(format!("{} coefficients for band limit {band_limit}", data.len())));
        }
        Ok(Self { band_limit, data })
    }

    /// Unit coefficient at `(l, m)`.
    pub fn unit(band_limit: usize, l: usize, m: i64) -> Self {
        let mut c = Self::zeros(band_limit);
        c.set(l, m, 1.0);
        c
    }

    pub fn band_limit(&self) -> usize {
        self.band_limit
    }

    pub fn get(&self, l: usize, m: i64) -> f64 {
        self.data[sh_index(l, m)]
    }

    pub fn set(&mut self, l: usize, m: i64, v: f64) {
        self.data[sh_index(l, m)] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `Σ c_{lm}²`.
    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|c| c * c).sum()
    }

    /// `Σ l(l+1) c_{lm}² = ∫|∇f|²`.
    pub fn dirichlet_sq(&self) -> f64 {
        let mut s = 0.0;
        for l in 1..=self.band_limit {
            let ll = (l * (l + 1)) as f64;
            s += ll * self.data[l * l..(l + 1) * (l + 1)].iter().map(|c| c * c).sum::<f64>();
        }
        s
    }

    /// Copy truncated or zero-padded to another band limit.
    pub fn resized(&self, band_limit: usize) -> Self {
        let mut out = Self::zeros(band_limit);
        let n = sh_len(band_limit.min(self.band_limit));
        out.data[..n].copy_from_slice(&self.data[..n]);
        out
    }

    /// Value of the expansion at a unit vector.
    pub fn evaluate(&self, point: [f64; 3]) -> f64 {
        let lmax = self.band_limit;
        let n = packed_len(lmax);
        let mut p = vec![0.0; n];
        let mut dp = vec![0.0; n];
        let (ct, st, phi) = spherical_coords(point);
        legendre_row(lmax, ct, st.max(1e-300), &mut p, &mut dp);
        let mut f = 0.0;
        for m in 0..=lmax {
            let off = packed_offset(lmax, m);
            let (cm, sm) = ((m as f64 * phi).cos(), (m as f64 * phi).sin());
            for l in m..=lmax {
                let pv = p[off + l - m];
                if m == 0 {
                    f += self.get(l, 0) * pv;
                } else {
                    f += std::f64::consts::SQRT_2 * pv * (self.get(l, m as i64) * cm + self.get(l, -(m as i64)) * sm);
                }
            }
        }
        f
    }

    fn to_packed(&self) -> (Vec<f64>, Vec<f64>) {
        let lmax = self.band_limit;
        let mut pc = vec![0.0; packed_len(lmax)];
        let mut ps = vec![0.0; packed_len(lmax)];
        for m in 0..=lmax {
            let off = packed_offset(lmax, m);
            for l in m..=lmax {
                pc[off + l - m] = self.get(l, m as i64);
                if m > 0 {
                    ps[off + l - m] = self.get(l, -(m as i64));
                }
            }
        }
        (pc, ps)
    }

    fn from_packed(lmax: usize, pc: &[f64], ps: &[f64]) -> Self {
        let mut out = Self::zeros(lmax);
        for m in 0..=lmax {
            let off = packed_offset(lmax, m);
            for l in m..=lmax {
                out.set(l, m as i64, pc[off + l - m]);
                if m > 0 {
                    out.set(l, -(m as i64), ps[off + l - m]);
                }
            }
        }
        out
    }

    pub(crate) fn scale_by_degree(&mut self, f: impl Fn(usize) -> f64) {
        for l in 0..=self.band_limit {
            let s = f(l);
            self.data[l * l..(l + 1) * (l + 1)].iter_mut().for_each(|c| *c *= s);
        }
    }
}

/// `(cos θ, sin θ, φ)` of a (not necessarily exactly unit) vector.
pub fn spherical_coords(p: [f64; 3]) -> (f64, f64, f64) {
    let rho = (p[0] * p[0] + p[1] * p[1]).sqrt();
    let r = (rho * rho + p[2] * p[2]).sqrt();
    (p[2] / r, rho / r, p[1].atan2(p[0]))
}

/// Real scalar samples on a grid, row-major `(lat, lon)`.
#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: Arc<SphericalGrid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<SphericalGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!("{} values for a grid of {} nodes", values.len(), grid.len())));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: &Arc<SphericalGrid>, f: impl Fn([f64; 3]) -> f64) -> Self {
        let values = grid.points().map(f).collect();
        Self { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &Arc<SphericalGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn integral(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// `c_{lm} = ∫ f Y_{lm} dσ` up to the grid's band limit.
pub fn analyze(f: &ScalarField) -> ShCoeffs {
    analyze_values(&f.grid, &f.values, f.grid.band_limit)
}

/// Projection onto harmonics of degree `≤ lmax` (`lmax ≤` grid band limit).
pub fn analyze_to(f: &ScalarField, lmax: usize) -> Result<ShCoeffs> {
    if lmax > f.grid.band_limit {
        return Err(Error::Dimension(format!("analysis band {lmax} exceeds grid band limit {}", f.grid.band_limit)));
    }
    Ok(analyze_values(&f.grid, &f.values, lmax))
}

pub(crate) fn analyze_values(grid: &SphericalGrid, values: &[f64], lmax: usize) -> ShCoeffs {
    let spectra = grid.forward_rows(values, lmax);
    let table = grid.legendre(lmax);
    let n = packed_len(lmax);
    let mut pc = vec![0.0; n];
    let mut ps = vec![0.0; n];
    let dphi = grid.longitude_spacing();
    for (i, spec) in spectra.chunks_exact(lmax + 1).enumerate() {
        let w = grid.weights[i] * dphi;
        for m in 0..=lmax {
            let wf = if m == 0 { w } else { w * std::f64::consts::SQRT_2 };
            let c = wf * spec[m].re;
            let s = -wf * spec[m].im;
            let (p, _) = table.row(i, m);
            let off = packed_offset(lmax, m);
            for (k, &pv) in p.iter().enumerate() {
                pc[off + k] += c * pv;
                ps[off + k] += s * pv;
            }
        }
    }
    ShCoeffs::from_packed(lmax, &pc, &ps)
}

/// Pointwise values of `Σ c_{lm} Y_{lm}` on `grid`.
pub fn synthesize(c: &ShCoeffs, grid: &Arc<SphericalGrid>) -> Result<ScalarField> {
    check_band(c.band_limit, grid)?;
    Ok(ScalarField { grid: grid.clone(), values: synthesize_values(c, grid) })
}

fn check_band(lmax: usize, grid: &SphericalGrid) -> Result<()> {
    if lmax > grid.band_limit {
        return Err(Error::Dimension(format!("coefficient band {lmax} exceeds grid band limit {}", grid.band_limit)));
    }
    Ok(())
}

pub(crate) fn synthesize_values(c: &ShCoeffs, grid: &SphericalGrid) -> Vec<f64> {
    let lmax = c.band_limit;
    let (pc, ps) = c.to_packed();
    let table = grid.legendre(lmax);
    let mut spectra = vec![Complex64::new(0.0, 0.0); grid.nlat() * (lmax + 1)];
    for (i, spec) in spectra.chunks_exact_mut(lmax + 1).enumerate() {
        for m in 0..=lmax {
            let (p, _) = table.row(i, m);
            let off = packed_offset(lmax, m);
            let (mut a, mut b) = (0.0, 0.0);
            for (k, &pv) in p.iter().enumerate() {
                a += pc[off + k] * pv;
                b += ps[off + k] * pv;
            }
            let f = if m == 0 { 1.0 } else { std::f64::consts::SQRT_2 };
            spec[m] = Complex64::new(f * a, -f * b);
        }
    }
    grid.inverse_rows(&spectra, lmax)
}

/// `Δ` in coefficient space: `(l,m) ↦ −l(l+1) c_{lm}`.
pub fn laplacian_scalar(c: &ShCoeffs) -> ShCoeffs {
    let mut out = c.clone();
    out.scale_by_degree(|l| -((l * (l + 1)) as f64));
    out
}

/// Tangential gradient `∇_{S²} f` in ambient coordinates.
pub fn surface_gradient(c: &ShCoeffs, grid: &Arc<SphericalGrid>) -> Result<VectorField> {
    check_band(c.band_limit, grid)?;
    let (gt, gp) = tangent_synthesis(grid, Some(c), None);
    Ok(VectorField::from_tangent_components(grid, &gt, &gp))
}

/// Samples of `u_θ, u_φ` for `u = ∇B + x × ∇C` given potentials `B`, `C`
/// (band limit of each ≤ grid band limit).
pub(crate) fn tangent_synthesis(
    grid: &SphericalGrid,
    grad_potential: Option<&ShCoeffs>,
    curl_potential: Option<&ShCoeffs>,
) -> (Vec<f64>, Vec<f64>) {
    let lmax =
        grad_potential.map(|c| c.band_limit).into_iter().chain(curl_potential.map(|c| c.band_limit)).max().unwrap_or(0);
    let zero = ShCoeffs::zeros(lmax);
    let (bc, bs) = grad_potential.map(|c| c.resized(lmax)).unwrap_or_else(|| zero.clone()).to_packed();
    let (cc, cs) = curl_potential.map(|c| c.resized(lmax)).unwrap_or(zero).to_packed();
    let table = grid.legendre(lmax);
    let mut st = vec![Complex64::new(0.0, 0.0); grid.nlat() * (lmax + 1)];
    let mut sp = vec![Complex64::new(0.0, 0.0); grid.nlat() * (lmax + 1)];
    for i in 0..grid.nlat() {
        let inv_s = 1.0 / grid.sin_theta[i];
        for m in 0..=lmax {
            let (p, dp) = table.row(i, m);
            let off = packed_offset(lmax, m);
            let (mut bdc, mut bds, mut bpc, mut bps) = (0.0, 0.0, 0.0, 0.0);
            let (mut cdc, mut cds, mut cpc, mut cps) = (0.0, 0.0, 0.0, 0.0);
            for k in 0..p.len() {
                let (pv, dv) = (p[k], dp[k]);
                let (b1, b2, c1, c2) = (bc[off + k], bs[off + k], cc[off + k], cs[off + k]);
                bdc += b1 * dv;
                bds += b2 * dv;
                bpc += b1 * pv;
                bps += b2 * pv;
                cdc += c1 * dv;
                cds += c2 * dv;
                cpc += c1 * pv;
                cps += c2 * pv;
            }
            let f = if m == 0 { 1.0 } else { std::f64::consts::SQRT_2 };
            let ms = m as f64 * inv_s;
            let t_cos = bdc - ms * cps;
            let t_sin = bds + ms * cpc;
            let p_cos = ms * bps + cdc;
            let p_sin = -ms * bpc + cds;
            st[i * (lmax + 1) + m] = Complex64::new(f * t_cos, -f * t_sin);
            sp[i * (lmax + 1) + m] = Complex64::new(f * p_cos, -f * p_sin);
        }
    }
    (grid.inverse_rows(&st, lmax), grid.inverse_rows(&sp, lmax))
}

/// Adjoint of [`tangent_synthesis`]: returns `(∫ u·∇Y_{lm}, ∫ u·(x×∇Y_{lm}))`.
pub(crate) fn tangent_analysis(
    grid: &SphericalGrid,
    u_theta: &[f64],
    u_phi: &[f64],
    lmax: usize,
) -> (ShCoeffs, ShCoeffs) {
    let ft = grid.forward_rows(u_theta, lmax);
    let fp = grid.forward_rows(u_phi, lmax);
    let table = grid.legendre(lmax);
    let n = packed_len(lmax);
    let (mut gc, mut gs, mut hc, mut hs) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let dphi = grid.longitude_spacing();
    for i in 0..grid.nlat() {
        let w = grid.weights[i] * dphi;
        let inv_s = 1.0 / grid.sin_theta[i];
        for m in 0..=lmax {
            let wf = if m == 0 { w } else { w * std::f64::consts::SQRT_2 };
            let zt = ft[i * (lmax + 1) + m];
            let zp = fp[i * (lmax + 1) + m];
            let (ct, stt) = (wf * zt.re, -wf * zt.im);
            let (cp, spp) = (wf * zp.re, -wf * zp.im);
            let ms = m as f64 * inv_s;
            let (p, dp) = table.row(i, m);
            let off = packed_offset(lmax, m);
            for k in 0..p.len() {
                let (pv, dv) = (p[k], dp[k]);
                let mp = ms * pv;
                gc[off + k] += dv * ct - mp * spp;
                gs[off + k] += dv * stt + mp * cp;
                hc[off + k] += dv * cp + mp * stt;
                hs[off + k] += dv * spp - mp * ct;
            }
        }
    }
    (ShCoeffs::from_packed(lmax, &gc, &gs), ShCoeffs::from_packed(lmax, &hc, &hs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn y(l: usize, m: i64, grid: &Arc<SphericalGrid>) -> ScalarField {
        synthesize(&ShCoeffs::unit(l.max(grid.band_limit().min(l)), l, m), grid).unwrap()
    }

    #[test]
    fn area_of_sphere() {
        let g = build_grid(2).unwrap();
        let total: f64 = (0..g.nlat()).map(|i| g.area_weight(i) * g.nlon() as f64).sum();
        assert_abs_diff_eq!(total, 4.0 * PI, epsilon = 1e-13);
    }

    #[test]
    fn nodes_increase_in_colatitude() {
        let g = build_grid(40).unwrap();
        assert!(g.theta().windows(2).all(|w| w[0] < w[1]));
        assert!(g.theta()[0] > 0.0 && *g.theta().last().unwrap() < PI);
        for &x in g.cos_theta() {
            let (p, dp) = legendre_p_and_derivative(41, x);
            assert!((p / dp).abs() <= 1e-14);
        }
    }

    #[test]
    fn orthonormality_at_l16() {
        let g = build_grid(16).unwrap();
        let a = y(3, 2, &g);
        let b = y(5, -1, &g);
        let aa: Vec<f64> = a.values().iter().map(|v| v * v).collect();
        let ab: Vec<f64> = a.values().iter().zip(b.values()).map(|(u, v)| u * v).collect();
        assert_abs_diff_eq!(g.integrate(&aa), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.integrate(&ab), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn analysis_examples() {
        let g = build_grid(12).unwrap();
        let f = y(2, 1, &g);
        let c = analyze(&f);
        for (k, v) in c.data().iter().enumerate() {
            let expect = if k == sh_index(2, 1) { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(*v, expect, epsilon = 1e-12);
        }
        let one = ScalarField::from_fn(&g, |_| 1.0);
        let c = analyze(&one);
        assert_abs_diff_eq!(c.get(0, 0), (4.0 * PI).sqrt(), epsilon = 1e-12);
        assert!(c.data()[1..].iter().all(|v| v.abs() < 1e-12));
        let z = ScalarField::from_fn(&g, |p| p[2]);
        let c = analyze(&z);
        assert_abs_diff_eq!(c.get(1, 0), (4.0 * PI / 3.0).sqrt(), epsilon = 1e-12);
        let rest: f64 = c.data().iter().enumerate().filter(|(k, _)| *k != sh_index(1, 0)).map(|(_, v)| v.abs()).sum();
        assert!(rest < 1e-12);
    }

    #[test]
    fn degree_one_harmonics_are_coordinates() {
        let g = build_grid(4).unwrap();
        let k = (3.0 / (4.0 * PI)).sqrt();
        for (m, axis) in [(1i64, 0usize), (-1, 1), (0, 2)] {
            let f = synthesize(&ShCoeffs::unit(1, 1, m), &g).unwrap();
            for (v, p) in f.values().iter().zip(g.points()) {
                assert_abs_diff_eq!(*v, k * p[axis], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn synthesis_matches_pointwise_evaluation() {
        let g = build_grid(8).unwrap();
        let c = ShCoeffs::unit(4, 4, 0);
        let f = synthesize(&c, &g).unwrap();
        // Y_40 = (3/16)√(1/π)(35z⁴ − 30z² + 3)
        for (v, p) in f.values().iter().zip(g.points()) {
            let z = p[2];
            let exact = 3.0 / 16.0 / PI.sqrt() * (35.0 * z.powi(4) - 30.0 * z * z + 3.0);
            assert_abs_diff_eq!(*v, exact, epsilon = 1e-12);
            assert_abs_diff_eq!(c.evaluate(p), exact, epsilon = 1e-12);
        }
        let zero = synthesize(&ShCoeffs::zeros(8), &g).unwrap();
        assert!(zero.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn laplacian_eigenvalues() {
        let c = laplacian_scalar(&ShCoeffs::unit(6, 1, 0));
        assert_eq!(c.get(1, 0), -2.0);
        let c = laplacian_scalar(&ShCoeffs::unit(6, 5, 3));
        assert_eq!(c.get(5, 3), -30.0);
        let c = laplacian_scalar(&ShCoeffs::unit(6, 0, 0));
        assert!(c.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gradient_of_coordinate() {
        let g = build_grid(10).unwrap();
        let z = analyze(&ScalarField::from_fn(&g, |p| p[2]));
        let grad = surface_gradient(&z, &g).unwrap();
        for (v, p) in grad.values().iter().zip(g.points()) {
            let expect = [-p[2] * p[0], -p[2] * p[1], 1.0 - p[2] * p[2]];
            for k in 0..3 {
                assert_abs_diff_eq!(v[k], expect[k], epsilon = 1e-12);
            }
        }
        let zero = surface_gradient(&ShCoeffs::unit(3, 0, 0), &g).unwrap();
        assert!(zero.values().iter().all(|v| v.iter().all(|c| c.abs() < 1e-14)));
    }

    #[test]
    fn dirichlet_of_y20() {
        let g = build_grid(10).unwrap();
        let grad = surface_gradient(&ShCoeffs::unit(2, 2, 0), &g).unwrap();
        let sq: Vec<f64> = grad.values().iter().map(|v| v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).collect();
        assert_abs_diff_eq!(g.integrate(&sq), 6.0, epsilon = 1e-10);
    }

    #[test]
    fn band_limit_errors() {
        assert!(matches!(build_grid(1), Err(Error::Config(_))));
        assert!(matches!(build_grid(513), Err(Error::Config(_))));
        let g = build_grid(4).unwrap();
        assert!(matches!(synthesize(&ShCoeffs::zeros(5), &g), Err(Error::Dimension(_))));
        let f = ScalarField::from_fn(&g, |p| p[0]);
        assert!(matches!(analyze_to(&f, 5), Err(Error::Dimension(_))));
    }

    #[test]
    fn odd_and_quadratic_moments() {
        let g = build_grid(6).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let f = ScalarField::from_fn(&g, |p| p[i] * p[j]);
                let expect = if i == j { 4.0 * PI / 3.0 } else { 0.0 };
                assert_abs_diff_eq!(f.integral(), expect, epsilon = 1e-12);
                assert_abs_diff_eq!(ScalarField::from_fn(&g, |p| p[i]).integral(), 0.0, epsilon = 1e-12);
                assert_abs_diff_eq!(ScalarField::from_fn(&g, |p| p[i] * p[j] * p[j]).integral(), 0.0, epsilon = 1e-12);
                for k in 0..3 {
                    let f = ScalarField::from_fn(&g, |p| p[i] * p[i] * p[j] * p[j] * p[k]);
                    assert_abs_diff_eq!(f.integral(), 0.0, epsilon = 1e-12);
                }
            }
        }
    }
}
