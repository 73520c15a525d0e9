//! Closed-form map families: scaled rotations `√(1−2ε²)Rx`, stereographic
//! dilations `u_λ`, general degree-one harmonic maps `R₁∘D_λ∘κ^i∘R₂`, and
//! the normalized difference field `G = (u_λ − id)/(λ − 1)`.
//!
//! The stereographic chart is `(X, Y) = (x, y)/(1 − z)`, so the chart origin
//! is the south pole and `r² = X² + Y² = (1+z)/(1−z)`. `D_λ` is the chart
//! dilation `ζ ↦ λζ`. All ambient formulas below are written with the
//! denominator `D = (1 − z) + λ²(1 + z)`, which never vanishes on S².

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rotation::{apply, kappa, orthogonality_defect, Mat3};
use crate::spherical::SphericalGrid;
use crate::vsh::{component_coeffs, dot3, scale3, Vec3, VectorField};

/// Largest dilation accepted by the public API.
pub const MAX_LAMBDA: f64 = 50.0;

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda <= MAX_LAMBDA) {
        return Err(Error::Domain(format!("dilation {lambda} outside (0, {MAX_LAMBDA}]")));
    }
    Ok(())
}

fn check_rotation(r: &Mat3, name: &str) -> Result<()> {
    let (defect, det) = orthogonality_defect(r);
    if defect > 1e-12 || (det - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!("{name} is not a rotation (|RᵀR−I| = {defect:e}, det = {det})")));
    }
    Ok(())
}

/// The rotation critical point `√(1−2ε²) R x`.
#[derive(Clone, Debug, PartialEq)]
pub struct RotationCritical {
    pub rotation: Mat3,
    pub epsilon: f64,
    pub amplitude: f64,
}

impl RotationCritical {
    pub fn new(rotation: Mat3, epsilon: f64) -> Result<Self> {
        crate::gl::check_epsilon(epsilon)?;
        check_rotation(&rotation, "R")?;
        Ok(Self { rotation, epsilon, amplitude: (1.0 - 2.0 * epsilon * epsilon).sqrt() })
    }

    pub fn eval(&self, x: Vec3) -> Vec3 {
        scale3(self.amplitude, apply(&self.rotation, x))
    }
}

/// Samples of `√(1−2ε²) R x`.
pub fn rotation_critical_field(r: &Mat3, eps: f64, grid: &Arc<SphericalGrid>) -> Result<VectorField> {
    let rc = RotationCritical::new(*r, eps)?;
    Ok(VectorField::from_fn(grid, |x| rc.eval(x)))
}

/// `u_λ(x) = (2λx, 2λy, λ²(1+z) − (1−z)) / ((1−z) + λ²(1+z))`.
#[inline]
pub fn dilation_point(lambda: f64, x: Vec3) -> Vec3 {
    let (p, q) = (1.0 - x[2], 1.0 + x[2]);
    let l2 = lambda * lambda;
    let d = p + l2 * q;
    [2.0 * lambda * x[0] / d, 2.0 * lambda * x[1] / d, (l2 * q - p) / d]
}

/// `u_λ` written in the chart: `(2λX, 2λY, λ²r² − 1)/(1 + λ²r²)`.
pub fn dilation_chart(lambda: f64, big_x: f64, big_y: f64) -> Vec3 {
    let lr2 = lambda * lambda * (big_x * big_x + big_y * big_y);
    [2.0 * lambda * big_x / (1.0 + lr2), 2.0 * lambda * big_y / (1.0 + lr2), (lr2 - 1.0) / (1.0 + lr2)]
}

/// Chart coordinates `(X, Y)` of a point off the north pole.
pub fn chart(x: Vec3) -> (f64, f64) {
    (x[0] / (1.0 - x[2]), x[1] / (1.0 - x[2]))
}

/// Inverse chart.
pub fn chart_inverse(big_x: f64, big_y: f64) -> Vec3 {
    let r2 = big_x * big_x + big_y * big_y;
    [2.0 * big_x / (1.0 + r2), 2.0 * big_y / (1.0 + r2), (r2 - 1.0) / (1.0 + r2)]
}

/// Samples of `u_λ`.
pub fn dilation_map(lambda: f64, grid: &Arc<SphericalGrid>) -> Result<VectorField> {
    check_lambda(lambda)?;
    Ok(VectorField::from_fn(grid, |x| dilation_point(lambda, x)))
}

/// `|∇u_λ|² = 8λ²/((1−z) + λ²(1+z))²`, equal to `2λ²(1+r²)²/(1+λ²r²)²`
/// in the chart and finite at both poles.
pub fn dilation_gradnorm_sq(lambda: f64, x: Vec3) -> f64 {
    let d = (1.0 - x[2]) + lambda * lambda * (1.0 + x[2]);
    8.0 * lambda * lambda / (d * d)
}

/// Chart form `2λ²(1+r²)²/(1+λ²r²)²` of [`dilation_gradnorm_sq`].
pub fn dilation_gradnorm_sq_chart(lambda: f64, r: f64) -> f64 {
    let q = (1.0 + r * r) / (1.0 + lambda * lambda * r * r);
    2.0 * lambda * lambda * q * q
}

/// Parameters of the degree-±1 harmonic map `x ↦ R₁ D_λ κ^i R₂ x`.
#[derive(Clone, Debug, PartialEq)]
pub struct MobiusParams {
    pub r1: Mat3,
    pub lambda: f64,
    pub r2: Mat3,
    /// `true` when the orientation-reversing `κ` is applied (`i = 1`).
    pub conjugate: bool,
}

impl MobiusParams {
    pub fn new(r1: Mat3, lambda: f64, r2: Mat3, conjugate: bool) -> Result<Self> {
        check_rotation(&r1, "R₁")?;
        check_rotation(&r2, "R₂")?;
        check_lambda(lambda)?;
        Ok(Self { r1, lambda, r2, conjugate })
    }

    pub fn identity() -> Self {
        Self { r1: Mat3::identity(), lambda: 1.0, r2: Mat3::identity(), conjugate: false }
    }

    /// The exponent `i`: 1 with conjugation, 2 (`κ² = id`) without.
    pub fn conj_index(&self) -> u8 {
        if self.conjugate {
            1
        } else {
            2
        }
    }

    pub fn eval(&self, x: Vec3) -> Vec3 {
        let mut y = apply(&self.r2, x);
        if self.conjugate {
            y = apply(&kappa(), y);
        }
        apply(&self.r1, dilation_point(self.lambda, y))
    }
}

/// Samples of `R₁ D_λ κ^i R₂ x`.
pub fn general_harmonic_map(p: &MobiusParams, grid: &Arc<SphericalGrid>) -> Result<VectorField> {
    check_rotation(&p.r1, "R₁")?;
    check_rotation(&p.r2, "R₂")?;
    check_lambda(p.lambda)?;
    Ok(VectorField::from_fn(grid, |x| p.eval(x)))
}

/// `G(x) = (u_λ(x) − x)/(λ − 1)` in closed form:
/// `G_{xy} = (x, y)((1−z) − λ(1+z))/D`, `G_z = (λ+1)(1−z²)/D`.
/// At `λ = 1` this is the conformal field `e₃ − z x`.
#[inline]
pub fn difference_point(lambda: f64, x: Vec3) -> Vec3 {
    let (p, q) = (1.0 - x[2], 1.0 + x[2]);
    let d = p + lambda * lambda * q;
    let s = (p - lambda * q) / d;
    [x[0] * s, x[1] * s, (lambda + 1.0) * p * q / d]
}

/// Chart form `2X(1−λr²)/((1+λ²r²)(1+r²))`, …, of [`difference_point`].
pub fn difference_chart(lambda: f64, big_x: f64, big_y: f64) -> Vec3 {
    let r2 = big_x * big_x + big_y * big_y;
    let d = (1.0 + lambda * lambda * r2) * (1.0 + r2);
    let s = 2.0 * (1.0 - lambda * r2) / d;
    [big_x * s, big_y * s, 2.0 * (lambda + 1.0) * r2 / d]
}

/// Samples of `G` for parameter `λ` (the analytic limit at `λ = 1`).
pub fn difference_field_g(lambda: f64, grid: &Arc<SphericalGrid>) -> Result<VectorField> {
    check_lambda(lambda)?;
    Ok(VectorField::from_fn(grid, |x| difference_point(lambda, x)))
}

/// `Σ_k ∫|∇f_k|²` of a field's ambient components.
pub fn componentwise_dirichlet(u: &VectorField) -> f64 {
    component_coeffs(u).iter().map(|c| c.dirichlet_sq()).sum()
}

/// `∫|D(u_λ − id)|²` by quadrature.
pub fn h1_distance_to_identity(lambda: f64, grid: &Arc<SphericalGrid>) -> Result<f64> {
    check_lambda(lambda)?;
    let w = VectorField::from_fn(grid, |x| {
        let u = dilation_point(lambda, x);
        [u[0] - x[0], u[1] - x[1], u[2] - x[2]]
    });
    Ok(componentwise_dirichlet(&w))
}

/// `∫|∇G|²` at `λ = 1`, i.e. `∫|∇(e₃ − z x)|² = 16π/3`.
pub fn g_dirichlet_at_identity() -> f64 {
    16.0 * PI / 3.0
}

/// `(0, 0, 16π/(3λ²)(1 − λ⁴))`, the quartic barycenter `∫|∇u_λ|⁴ x`.
pub fn quartic_barycenter_closed_form(lambda: f64) -> Vec3 {
    [0.0, 0.0, 16.0 * PI / (3.0 * lambda * lambda) * (1.0 - lambda.powi(4))]
}

/// `|∫|∇u_λ|⁴ x| = (16π/3)|λ⁻² − λ²|`.
pub fn barycenter_magnitude(lambda: f64) -> f64 {
    16.0 * PI / 3.0 * (1.0 / (lambda * lambda) - lambda * lambda).abs()
}

/// The bound `3η/(32π)` on `|λ − 1|` for a map with quartic barycenter of size `η`.
pub fn dilation_from_barycenter(eta: f64) -> Result<f64> {
    if eta.is_nan() || eta < 0.0 {
        return Err(Error::Domain(format!("barycenter size {eta} must be ≥ 0")));
    }
    Ok(3.0 * eta / (32.0 * PI))
}

/// Both sides of `|λ − 1| ≤ 3η(λ)/(32π)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DilationBound {
    pub deviation: f64,
    pub bound: f64,
    pub holds: bool,
}

pub fn check_dilation_bound(lambda: f64) -> Result<DilationBound> {
    check_lambda(lambda)?;
    let deviation = (lambda - 1.0).abs();
    let bound = dilation_from_barycenter(barycenter_magnitude(lambda))?;
    Ok(DilationBound { deviation, bound, holds: deviation <= bound })
}

/// Inverts `η = (16π/3)(λ² − λ⁻²)` for `λ ≥ 1`.
pub fn lambda_from_barycenter(eta: f64) -> f64 {
    let q = 3.0 * eta.abs() / (16.0 * PI);
    ((q + (q * q + 4.0).sqrt()) / 2.0).sqrt()
}

/// Unit-sphere inner product helper for tests and experiments.
pub fn max_pointwise_distance(a: &VectorField, b: &VectorField) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(&p, &q)| {
            let d = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
            dot3(d, d).sqrt()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gl::{degree, energy_parts, tension_field};
    use crate::rotation::random_rotation;
    use crate::spherical::build_grid;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dilation_examples() {
        let g = build_grid(16).unwrap();
        let id = dilation_map(1.0, &g).unwrap();
        assert!(max_pointwise_distance(&id, &VectorField::from_fn(&g, |x| x)) < 1e-15);
        let n = dilation_point(2.0, [0.0, 0.0, 1.0]);
        assert_eq!(n, [0.0, 0.0, 1.0]);
        let near = dilation_point(2.0, [1e-9, 0.0, (1.0f64 - 1e-18).sqrt()]);
        assert!((near[2] - 1.0).abs() < 1e-12);
        assert!(matches!(dilation_map(0.0, &g), Err(Error::Domain(_))));
        assert!(matches!(dilation_map(51.0, &g), Err(Error::Domain(_))));
    }

    #[test]
    fn dilation_agrees_with_chart_composition() {
        let g = build_grid(12).unwrap();
        for lambda in [0.5, 2.0, 7.0] {
            for x in g.points() {
                let (bx, by) = chart(x);
                let a = dilation_point(lambda, x);
                let b = dilation_chart(lambda, bx, by);
                for k in 0..3 {
                    assert_abs_diff_eq!(a[k], b[k], epsilon = 1e-12);
                }
                let r = (bx * bx + by * by).sqrt();
                assert_abs_diff_eq!(
                    dilation_gradnorm_sq(lambda, x),
                    dilation_gradnorm_sq_chart(lambda, r),
                    epsilon = 1e-10 * dilation_gradnorm_sq(lambda, x)
                );
            }
        }
    }

    #[test]
    fn gradnorm_examples() {
        assert_abs_diff_eq!(dilation_gradnorm_sq(1.0, [0.6, 0.0, 0.8]), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(dilation_gradnorm_sq_chart(2.0, 0.0), 8.0, epsilon = 1e-15);
        assert_abs_diff_eq!(dilation_gradnorm_sq(2.0, [0.0, 0.0, -1.0]), 8.0, epsilon = 1e-15);
        assert_abs_diff_eq!(dilation_gradnorm_sq(2.0, [0.0, 0.0, 1.0]), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(dilation_gradnorm_sq_chart(2.0, 1e8), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn dilation_energy_and_degree() {
        let g = build_grid(48).unwrap();
        let u = dilation_map(2.0, &g).unwrap();
        let (d, p) = energy_parts(&u, 0.1).unwrap();
        assert_abs_diff_eq!(d, 4.0 * PI, epsilon = 1e-8);
        assert!(p.abs() < 1e-12);
        assert_eq!(degree(&u).unwrap().degree, 1);
        assert!(tension_field(&u).unwrap().norm_l2() < 1e-8);
    }

    #[test]
    fn general_map_examples() {
        let g = build_grid(32).unwrap();
        let p = MobiusParams::identity();
        assert_eq!(p.conj_index(), 2);
        let w = general_harmonic_map(&p, &g).unwrap();
        assert!(max_pointwise_distance(&w, &VectorField::from_fn(&g, |x| x)) < 1e-15);
        let p = MobiusParams { lambda: 1.7, ..MobiusParams::identity() };
        let w = general_harmonic_map(&p, &g).unwrap();
        assert!(max_pointwise_distance(&w, &dilation_map(1.7, &g).unwrap()) < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for conjugate in [false, true] {
            let p = MobiusParams::new(random_rotation(&mut rng), 1.4, random_rotation(&mut rng), conjugate).unwrap();
            let w = general_harmonic_map(&p, &g).unwrap();
            let expect = if conjugate { -1 } else { 1 };
            assert_eq!(degree(&w).unwrap().degree, expect);
            assert!(tension_field(&w).unwrap().norm_l2() < 1e-8);
        }
        assert!(MobiusParams::new(kappa(), 1.0, Mat3::identity(), false).is_err());
    }

    #[test]
    fn difference_field_identity() {
        let g = build_grid(16).unwrap();
        let lambda = 1.5;
        for x in g.points() {
            let u = dilation_point(lambda, x);
            let gx = difference_point(lambda, x);
            for k in 0..3 {
                assert_abs_diff_eq!(u[k] - x[k], (lambda - 1.0) * gx[k], epsilon = 1e-12);
            }
            let (bx, by) = chart(x);
            let gc = difference_chart(lambda, bx, by);
            for k in 0..3 {
                assert_abs_diff_eq!(gx[k], gc[k], epsilon = 1e-11);
            }
        }
        assert_eq!(difference_point(2.0, [0.0, 0.0, -1.0]), [0.0, 0.0, 0.0]);
        let g1 = difference_point(1.0, [0.6, 0.0, 0.8]);
        let conformal = [-0.8 * 0.6, 0.0, 1.0 - 0.64];
        for k in 0..3 {
            assert_abs_diff_eq!(g1[k], conformal[k], epsilon = 1e-15);
        }
    }

    #[test]
    fn h1_distance_scaling() {
        let g = build_grid(48).unwrap();
        assert!(h1_distance_to_identity(1.0, &g).unwrap() < 1e-24);
        let d1 = h1_distance_to_identity(1.1, &g).unwrap();
        let d2 = h1_distance_to_identity(1.05, &g).unwrap();
        assert!((d1 / d2 - 4.0).abs() < 0.15 * 4.0);
        let g1 = componentwise_dirichlet(&difference_field_g(1.0, &g).unwrap());
        assert_abs_diff_eq!(g1, g_dirichlet_at_identity(), epsilon = 1e-10);
        let r = h1_distance_to_identity(1.01, &g).unwrap() / 1e-4;
        assert!((r / g1 - 1.0).abs() < 0.05);
    }

    #[test]
    fn barycenter_bound_examples() {
        assert_eq!(dilation_from_barycenter(0.0).unwrap(), 0.0);
        let b = check_dilation_bound(1.01).unwrap();
        assert!(b.holds);
        assert_abs_diff_eq!(b.bound, 0.0202, epsilon = 1e-3);
        assert!(check_dilation_bound(1.2).unwrap().holds);
        assert!(check_dilation_bound(0.3).unwrap().holds);
        assert_abs_diff_eq!(lambda_from_barycenter(barycenter_magnitude(1.7)), 1.7, epsilon = 1e-13);
        assert_abs_diff_eq!(quartic_barycenter_closed_form(2.0)[2], -20.0 * PI, epsilon = 1e-12);
    }
}
