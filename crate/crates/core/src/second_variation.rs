//! The second variation of `E_ε` at `u₀ = √(1−2ε²) x`:
//!
//! ```text
//! D²E_ε(u₀)[w, w] = ∫|∇w|² − 2|w|² + (2/ε²)(u₀·w)²
//! ```
//!
//! In the VSH basis it splits into a scalar monopole entry, one coupled
//! 2×2 `(N_{lm}, Ψ_{lm})` block per mode and a diagonal `Φ_{lm}` entry:
//!
//! ```text
//! (l(l+1) + 2(1−2ε²)/ε²) a² + (l(l+1) − 2)(b² + c²) − 4√(l(l+1)) a b
//! ```
//!
//! The cross term follows from `∫∇N_{lm}·∇Ψ_{lm} = −2√(l(l+1))`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::gl::{check_epsilon, GlModel};
use crate::spherical::shared_grid_unchecked;
use crate::vsh::{
    dot3, gradient_norm_sq, gradients_on, vsh_analyze, vsh_to_components, VectorField, VshCoeffs, VshKind,
};

/// Coupled `(a_{lm}, b_{lm})` block and `Φ` entry for one degree `l ≥ 1`
/// (the form is independent of `m`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeBlock {
    pub l: usize,
    pub m: i64,
    pub ab_block: [[f64; 2]; 2],
    pub c_value: f64,
    pub epsilon: f64,
}

impl ModeBlock {
    pub fn new(l: usize, m: i64, epsilon: f64) -> Self {
        let ll = (l * (l + 1)) as f64;
        let s = ll.sqrt();
        let e2 = epsilon * epsilon;
        let radial = ll + 2.0 * (1.0 - 2.0 * e2) / e2;
        Self { l, m, ab_block: [[radial, -2.0 * s], [-2.0 * s, ll - 2.0]], c_value: ll - 2.0, epsilon }
    }

    /// Eigenvalues of the 2×2 block, ascending.
    pub fn eigenvalues(&self) -> [f64; 2] {
        sym2_eigenvalues(self.ab_block)
    }

    /// `Q(a, b) = [a b]·block·[a b]ᵀ`.
    pub fn form(&self, a: f64, b: f64) -> f64 {
        let [[p, q], [_, r]] = self.ab_block;
        p * a * a + 2.0 * q * a * b + r * b * b
    }
}

/// `‖·‖²_{H¹}` Gram block for `(N_{lm}, Ψ_{lm})`: identity plus the
/// Dirichlet block `[[l(l+1)+2, −2√(l(l+1))], [−2√(l(l+1)), l(l+1)]]`.
pub fn h1_block(l: usize) -> [[f64; 2]; 2] {
    let ll = (l * (l + 1)) as f64;
    let s = ll.sqrt();
    [[1.0 + ll + 2.0, -2.0 * s], [-2.0 * s, 1.0 + ll]]
}

fn sym2_eigenvalues(m: [[f64; 2]; 2]) -> [f64; 2] {
    let [[a, b], [_, d]] = m;
    let mean = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    // Smaller root via the product to avoid cancellation.
    let hi = mean + rad;
    let det = a * d - b * b;
    let lo = if hi != 0.0 { det / hi } else { mean - rad };
    [lo.min(hi), lo.max(hi)]
}

/// Smallest `μ` with `det(A − μH) = 0` for symmetric `A` and positive `H`.
fn generalized_min(a: [[f64; 2]; 2], h: [[f64; 2]; 2]) -> f64 {
    // det(A − μH) = αμ² + βμ + γ
    let alpha = h[0][0] * h[1][1] - h[0][1] * h[0][1];
    let beta = -(a[0][0] * h[1][1] + a[1][1] * h[0][0] - 2.0 * a[0][1] * h[0][1]);
    let gamma = a[0][0] * a[1][1] - a[0][1] * a[0][1];
    let disc = (beta * beta - 4.0 * alpha * gamma).max(0.0).sqrt();
    let q = -0.5 * (beta + beta.signum() * disc);
    let (r1, r2) = (q / alpha, if q != 0.0 { gamma / q } else { 0.0 });
    r1.min(r2)
}

/// The degree-one part of the form, in the ambient vector variables
/// `N₁(a) = (a·x)x`, `Ψ₁(b) = b − (b·x)x`:
/// `(2 + 2(1−2ε²)/ε²)(4π/3)|a|² − (32π/3) a·b + 0·|b|²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct L1Block {
    pub n_coeff: f64,
    pub cross: f64,
    pub psi1_value: f64,
    /// Coefficient of `a₀²` for the monopole `a₀ x`.
    pub a0_value: f64,
    /// The same block in the unit `(N_{1m}, Ψ_{1m})` basis.
    pub unit_block: [[f64; 2]; 2],
    pub epsilon: f64,
}

impl L1Block {
    pub fn new(epsilon: f64) -> Self {
        let e2 = epsilon * epsilon;
        let k = 2.0 * (1.0 - 2.0 * e2) / e2;
        let unit = ModeBlock::new(1, 0, epsilon).ab_block;
        Self {
            n_coeff: (2.0 + k) * 4.0 * PI / 3.0,
            cross: -32.0 * PI / 3.0,
            psi1_value: unit[1][1],
            a0_value: k * 4.0 * PI,
            unit_block: unit,
            epsilon,
        }
    }

    /// Form value at `a₀x + N₁(a) + Ψ₁(b)`.
    pub fn form(&self, a0: f64, a: [f64; 3], b: [f64; 3]) -> f64 {
        self.a0_value * a0 * a0 + self.n_coeff * dot3(a, a) + self.cross * dot3(a, b)
    }
}

/// Closed-form assembly of the second variation at `u₀` up to degree `L`.
#[derive(Clone, Debug, PartialEq)]
pub struct SecondVariation {
    pub epsilon: f64,
    pub band_limit: usize,
    /// Entry for the unit monopole `Y₀₀x`.
    pub monopole: f64,
    pub l1: L1Block,
    /// Blocks for `l ≥ 2`, one per `(l, m)`.
    pub blocks: Vec<ModeBlock>,
}

pub fn assemble_blocks(eps: f64, band_limit: usize) -> Result<SecondVariation> {
    check_epsilon(eps)?;
    if band_limit < 2 {
        return Err(Error::Config(format!("band limit {band_limit} < 2")));
    }
    let e2 = eps * eps;
    let mut blocks = Vec::new();
    for l in 2..=band_limit {
        for m in -(l as i64)..=l as i64 {
            blocks.push(ModeBlock::new(l, m, eps));
        }
    }
    Ok(SecondVariation {
        epsilon: eps,
        band_limit,
        monopole: 2.0 * (1.0 - 2.0 * e2) / e2,
        l1: L1Block::new(eps),
        blocks,
    })
}

impl SecondVariation {
    /// Form value of a coefficient vector (band limit ≤ assembly band).
    pub fn form(&self, c: &VshCoeffs) -> f64 {
        let mut q = self.monopole * c.a().get(0, 0).powi(2);
        for l in 1..=c.band_limit().min(self.band_limit) {
            let blk = ModeBlock::new(l, 0, self.epsilon);
            for m in -(l as i64)..=l as i64 {
                q += blk.form(c.a().get(l, m), c.b().get(l, m)) + blk.c_value * c.c().get(l, m).powi(2);
            }
        }
        q
    }
}

/// Spectrum of one degree.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DegreeSpectrum {
    pub l: usize,
    pub ab_block: [[f64; 2]; 2],
    pub eigenvalues: [f64; 2],
    pub c_value: f64,
    /// Smallest Rayleigh quotient `Q/‖·‖²_{H¹}` over the degree.
    pub h1_min: f64,
    /// `min eigenvalue ≥ l(l+1)/(8(1+l(l+1)))`.
    pub coercive: bool,
}

/// Spectral summary of the assembled form.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockSpectra {
    pub epsilon: f64,
    pub per_degree: Vec<DegreeSpectrum>,
    /// Degree-one spectrum in the unit basis.
    pub l1_eigenvalues: [f64; 2],
    pub monopole: f64,
    /// `λ₀ = min_{l ≥ 2} h1_min`: coercivity constant on `w_⊥`.
    pub lambda0: f64,
    /// Number of `l ≤ 1` basis directions on which the form vanishes
    /// (`Φ₁` rotations and `Ψ₁` conformal directions).
    pub kernel_dimension: usize,
    /// Dimension of the null space of the full form.
    pub nullity: usize,
    /// Number of negative eigenvalues of the full form.
    pub morse_index: usize,
}

const ZERO_TOL: f64 = 1e-12;

pub fn block_spectra(sv: &SecondVariation) -> BlockSpectra {
    let eps = sv.epsilon;
    let mut per_degree = Vec::new();
    for l in 1..=sv.band_limit {
        let blk = ModeBlock::new(l, 0, eps);
        let ll = (l * (l + 1)) as f64;
        let eigenvalues = blk.eigenvalues();
        let h1_min = generalized_min(blk.ab_block, h1_block(l)).min(blk.c_value / (1.0 + ll));
        per_degree.push(DegreeSpectrum {
            l,
            ab_block: blk.ab_block,
            eigenvalues,
            c_value: blk.c_value,
            h1_min,
            coercive: eigenvalues[0].min(blk.c_value) >= ll / (8.0 * (1.0 + ll)),
        });
    }
    let lambda0 = per_degree.iter().filter(|d| d.l >= 2).map(|d| d.h1_min).fold(f64::INFINITY, f64::min);
    let l1 = sv.l1.unit_block;
    let mut kernel_dimension = 0;
    if l1[1][1].abs() <= ZERO_TOL {
        kernel_dimension += 3;
    }
    if per_degree[0].c_value.abs() <= ZERO_TOL {
        kernel_dimension += 3;
    }
    let mut nullity = 0;
    let mut morse_index = 0;
    let mut count = |v: f64, mult: usize| {
        if v.abs() <= ZERO_TOL * (1.0 + v.abs()) {
            nullity += mult;
        } else if v < 0.0 {
            morse_index += mult;
        }
    };
    count(sv.monopole, 1);
    for d in &per_degree {
        let mult = 2 * d.l + 1;
        count(d.eigenvalues[0], mult);
        count(d.eigenvalues[1], mult);
        count(d.c_value, mult);
    }
    BlockSpectra {
        epsilon: eps,
        l1_eigenvalues: sym2_eigenvalues(l1),
        monopole: sv.monopole,
        per_degree,
        lambda0,
        kernel_dimension,
        nullity,
        morse_index,
    }
}

/// `∫|∇w|² − 2|w|² + (2/ε²)(u₀·w)²` by pointwise quadrature of the
/// band-limited projection of `w` on the de-aliased grid.
pub fn quadratic_form(w: &VectorField, eps: f64) -> Result<f64> {
    check_epsilon(eps)?;
    Ok(quadratic_form_coeffs(&vsh_analyze(w), eps))
}

pub fn quadratic_form_coeffs(c: &VshCoeffs, eps: f64) -> f64 {
    let amp = (1.0 - 2.0 * eps * eps).sqrt();
    let fine = shared_grid_unchecked(2 * c.band_limit() + 2);
    let comps = vsh_to_components(c);
    let vals = crate::vsh::components_on(&comps, &fine);
    let grad_sq = gradient_norm_sq(&gradients_on(&comps, &fine));
    let density: Vec<f64> = vals
        .iter()
        .zip(fine.points())
        .zip(grad_sq)
        .map(|((&w, x), g)| g - 2.0 * dot3(w, w) + 2.0 / (eps * eps) * (amp * dot3(x, w)).powi(2))
        .collect();
    fine.integrate(&density)
}

/// Gaussian random coefficients on modes `l ≤ lmax`.
pub fn random_coeffs<R: Rng + ?Sized>(rng: &mut R, band_limit: usize, lmax: usize) -> VshCoeffs {
    let mut c = VshCoeffs::zeros(band_limit);
    for kind in [VshKind::N, VshKind::Psi, VshKind::Phi] {
        for l in 0..=lmax.min(band_limit) {
            for m in -(l as i64)..=l as i64 {
                c.set(kind, l, m, rng.sample(StandardNormal));
            }
        }
    }
    c
}

/// One finite-difference comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdComparison {
    pub quadratic_form: f64,
    pub finite_difference: f64,
}

impl FdComparison {
    pub fn relative_error(&self) -> f64 {
        (self.quadratic_form - self.finite_difference).abs() / self.quadratic_form.abs().max(1e-300)
    }
}

/// `(E(u₀+hw) − 2E(u₀) + E(u₀−hw))/h²` next to the quadrature form.
pub fn fd_second_difference(model: &GlModel, w: &VshCoeffs, h: f64) -> FdComparison {
    let eps = model.epsilon();
    let mut u0 = VshCoeffs::zeros(model.band_limit());
    u0.set(VshKind::N, 0, 0, (1.0 - 2.0 * eps * eps).sqrt() * (4.0 * PI).sqrt());
    let w = w.resized(model.band_limit());
    let e0 = model.energy(&u0);
    let ep = model.energy(&u0.add_scaled(h, &w));
    let em = model.energy(&u0.add_scaled(-h, &w));
    FdComparison { quadratic_form: quadratic_form_coeffs(&w, eps), finite_difference: (ep - 2.0 * e0 + em) / (h * h) }
}

/// Largest relative error of the central second difference (`h = 1e-4`)
/// against the quadrature form over random unit-norm fields.
pub fn fd_hessian_check<R: Rng + ?Sized>(eps: f64, trials: usize, band_limit: usize, rng: &mut R) -> Result<f64> {
    let model = GlModel::new(band_limit, eps)?;
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let w = random_coeffs(rng, band_limit, band_limit.min(6));
        let w = w.scaled(1.0 / w.norm_sq().sqrt());
        worst = worst.max(fd_second_difference(&model, &w, 1e-4).relative_error());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spherical::build_grid;
    use crate::vsh::vsh_basis_field;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn block_examples() {
        let b = ModeBlock::new(2, 0, 0.1);
        assert_abs_diff_eq!(b.ab_block[0][0], 202.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.ab_block[1][1], 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.ab_block[0][1].abs(), 2.0 * 6f64.sqrt(), epsilon = 1e-15);
        assert_eq!(ModeBlock::new(3, 1, 0.1).c_value, 10.0);
        assert_abs_diff_eq!(L1Block::new(0.1).cross, -32.0 * PI / 3.0, epsilon = 1e-14);
        // Closed-form 2×2 eigenvalue: (206 − √(198² + 96))/2.
        let exact = (206.0 - (198.0f64 * 198.0 + 96.0).sqrt()) / 2.0;
        assert_abs_diff_eq!(b.eigenvalues()[0], exact, epsilon = 1e-12);
        assert_abs_diff_eq!(exact, 3.8788, epsilon = 1e-4);
    }

    #[test]
    fn small_epsilon_limit() {
        let lo = ModeBlock::new(2, 0, 1e-4).eigenvalues()[0];
        assert_abs_diff_eq!(lo, 4.0, epsilon = 1e-6);
        let l = 3usize;
        let ll = (l * (l + 1)) as f64;
        assert!(ll - 2.0 - 2.0 * ll.sqrt() >= ll / 4.0);
    }

    #[test]
    fn spectra_counts() {
        let s = block_spectra(&assemble_blocks(0.1, 32).unwrap());
        assert_eq!(s.kernel_dimension, 6);
        assert_eq!(s.nullity, 3);
        assert_eq!(s.morse_index, 3);
        assert!(s.l1_eigenvalues[0] < 0.0);
        assert!(s.lambda0 > 0.0);
        assert!(s.per_degree.iter().filter(|d| d.l >= 2).all(|d| d.coercive));
    }

    #[test]
    fn form_examples_by_quadrature() {
        let g = build_grid(8).unwrap();
        let eps = 0.1;
        let phi10 = vsh_basis_field(VshKind::Phi, 1, 0, &g).unwrap();
        assert!(quadratic_form(&phi10, eps).unwrap().abs() < 1e-10);
        let psi = crate::vsh::psi1_field([0.0, 0.0, 1.0], &g);
        assert!(quadratic_form(&psi, eps).unwrap().abs() < 1e-9);
        let phi20 = vsh_basis_field(VshKind::Phi, 2, 0, &g).unwrap();
        assert_abs_diff_eq!(quadratic_form(&phi20, eps).unwrap(), 4.0, epsilon = 1e-9);
    }

    #[test]
    fn blocks_match_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sv = assemble_blocks(0.1, 10).unwrap();
        for _ in 0..5 {
            let c = random_coeffs(&mut rng, 10, 10);
            let q = quadratic_form_coeffs(&c, 0.1);
            assert_abs_diff_eq!(q, sv.form(&c), epsilon = 1e-9 * q.abs());
        }
        let a = [0.3, -0.2, 0.5];
        let b = [1.0, 0.4, -0.7];
        let g = build_grid(6).unwrap();
        let w = crate::vsh::n1_field(a, &g).add(&crate::vsh::psi1_field(b, &g));
        let q = quadratic_form(&w, 0.1).unwrap();
        assert_abs_diff_eq!(q, sv.l1.form(0.0, a, b), epsilon = 1e-9 * q.abs());
    }

    #[test]
    fn finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(fd_hessian_check(0.1, 4, 8, &mut rng).unwrap() < 1e-5);
        let model = GlModel::new(8, 0.1).unwrap();
        let n42 = VshCoeffs::unit(8, VshKind::N, 4, 2).unwrap();
        assert!(fd_second_difference(&model, &n42, 1e-4).relative_error() < 1e-6);
    }
}
