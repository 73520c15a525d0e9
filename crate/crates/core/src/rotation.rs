//! Rotation utilities: random SO(3) sampling, the conjugation reflection κ,
//! and orthogonal Procrustes on 3×3 moment matrices.

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::vsh::Vec3;

pub type Mat3 = Matrix3<f64>;

/// The reflection `κ: (x, y, z) ↦ (x, −y, z)`.
pub fn kappa() -> Mat3 {
    Mat3::from_diagonal(&Vector3::new(1.0, -1.0, 1.0))
}

#[inline]
pub fn apply(r: &Mat3, x: Vec3) -> Vec3 {
    let v = r * Vector3::from(x);
    [v[0], v[1], v[2]]
}

/// Haar-uniform rotation from a normalized Gaussian quaternion.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Mat3 {
    let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let q = nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]);
    nalgebra::UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner()
}

/// Rotation by `angle` about `axis` (any nonzero vector).
pub fn axis_angle(axis: Vec3, angle: f64) -> Mat3 {
    let axis = Unit::new_normalize(Vector3::from(axis));
    Rotation3::from_axis_angle(&axis, angle).into_inner()
}

/// `exp([ω]_×)`, the rotation with rotation vector `ω`.
pub fn exp_so3(omega: Vec3) -> Mat3 {
    Rotation3::new(Vector3::from(omega)).into_inner()
}

/// Any rotation `Q` with `Q e₃ = n` for a unit vector `n`.
pub fn frame_with_third_axis(n: Vec3) -> Mat3 {
    let n = Vector3::from(n).normalize();
    let helper = if n[0].abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let e1 = (helper - n * n.dot(&helper)).normalize();
    let e2 = n.cross(&e1);
    Mat3::from_columns(&[e1, e2, n])
}

/// `max |RᵀR − I|` and `det R`.
pub fn orthogonality_defect(r: &Mat3) -> (f64, f64) {
    ((r.transpose() * r - Mat3::identity()).amax(), r.determinant())
}

/// Solution of `max_{R ∈ SO(3)} tr(Rᵀ M)`, with orientation handling.
#[derive(Clone, Debug, PartialEq)]
pub struct Procrustes {
    /// Optimal special-orthogonal matrix for `M` (or for `Mκ` when `det_sign = −1`).
    pub rotation: Mat3,
    /// `−1` when the unconstrained optimum was orientation reversing.
    pub det_sign: i32,
    /// Singular values of `M`, descending.
    pub singular_values: [f64; 3],
}

/// Orthogonal Procrustes by SVD. If the best orthogonal matrix for `M` has
/// determinant −1, the problem is re-posed for `Mκ` (data composed with κ),
/// whose optimum is then a proper rotation.
pub fn procrustes(m: &Mat3) -> Procrustes {
    let svd = m.svd(true, true);
    let mut sv = [svd.singular_values[0], svd.singular_values[1], svd.singular_values[2]];
    sv.sort_by(|a, b| b.total_cmp(a));
    let polar = |svd: &nalgebra::SVD<f64, nalgebra::U3, nalgebra::U3>| {
        svd.u.expect("u requested") * svd.v_t.expect("v_t requested")
    };
    let r = polar(&svd);
    if r.determinant() >= 0.0 {
        return Procrustes { rotation: r, det_sign: 1, singular_values: sv };
    }
    let mk = m * kappa();
    let svd = mk.svd(true, true);
    let mut r = polar(&svd);
    if r.determinant() < 0.0 {
        // Rank-deficient M: flip the weakest singular direction.
        let (i, _) =
            svd.singular_values.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("three singular values");
        let mut u = svd.u.expect("u requested");
        u.column_mut(i).neg_mut();
        r = u * svd.v_t.expect("v_t requested");
    }
    Procrustes { rotation: r, det_sign: -1, singular_values: sv }
}
