use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use glsphere::analytic::{
    barycenter_magnitude, componentwise_dirichlet, general_harmonic_map, rotation_critical_field, MobiusParams,
};
use glsphere::gl::{energy, first_variation_pairing, gl_residual, quartic_barycenter, tension_field, GlModel};
use glsphere::mobius::{align_rotation, fit_mobius, procrustes_objective};
use glsphere::rotation::{apply, exp_so3, random_rotation};
use glsphere::second_variation::{assemble_blocks, block_spectra, quadratic_form_coeffs, random_coeffs, ModeBlock};
use glsphere::solver::{flow_coeffs, imex_step_coeffs, random_perturbation, rotation_coeffs, FlowConfig, Stage};
use glsphere::spherical::{analyze, build_grid, laplacian_scalar, synthesize, ShCoeffs};
use glsphere::vsh::{
    norm3, psi1_field, vector_laplacian, vsh_analyze, vsh_synthesize, vsh_to_components, Vec3, VectorField, VshCoeffs,
};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_sh(rng: &mut impl Rng, band: usize) -> ShCoeffs {
    let mut c = ShCoeffs::zeros(band);
    for v in c.data_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    c
}

fn random_vec3(rng: &mut impl Rng) -> Vec3 {
    std::array::from_fn(|_| rng.gen_range(-1.0..1.0))
}

/// `u∘R`, sampled on the grid of `u`'s coefficients.
fn compose_rotation(c: &VshCoeffs, r: &glsphere::rotation::Mat3, band: usize) -> VshCoeffs {
    let grid = build_grid(band).unwrap();
    let comps = vsh_to_components(c);
    let rotated = VectorField::from_fn(&grid, |x| {
        let y = apply(r, x);
        [comps[0].evaluate(y), comps[1].evaluate(y), comps[2].evaluate(y)]
    });
    vsh_analyze(&rotated)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn parseval_and_round_trip(seed in any::<u64>(), band in 2usize..=32) {
        let mut rng = rng(seed);
        let grid = build_grid(band).unwrap();
        let c = random_sh(&mut rng, band);
        let f = synthesize(&c, &grid).unwrap();
        let sq: Vec<f64> = f.values().iter().map(|v| v * v).collect();
        let quad = grid.integrate(&sq);
        prop_assert!((quad - c.norm_sq()).abs() <= 1e-10 * c.norm_sq());
        let back = analyze(&f);
        let err = back.data().iter().zip(c.data()).fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()));
        prop_assert!(err <= 1e-11, "round trip error {err}");
    }

    #[test]
    fn vsh_round_trip(seed in any::<u64>(), band in 2usize..=32) {
        let mut rng = rng(seed);
        let grid = build_grid(band).unwrap();
        let c = random_coeffs(&mut rng, band, band);
        let back = vsh_analyze(&vsh_synthesize(&c, &grid).unwrap());
        let err = back.sub(&c).norm_sq().sqrt();
        prop_assert!(err <= 1e-11 * c.norm_sq().sqrt().max(1.0), "round trip error {err}");
    }

    #[test]
    fn vector_laplacian_is_componentwise(seed in any::<u64>(), band in 2usize..=24) {
        let mut rng = rng(seed);
        let c = random_coeffs(&mut rng, band, band - 1);
        let via_blocks = vsh_to_components(&vector_laplacian(&c));
        let comps = vsh_to_components(&c);
        for k in 0..3 {
            let direct = laplacian_scalar(&comps[k]).resized(via_blocks[k].band_limit());
            let err = via_blocks[k].data().iter().zip(direct.data()).fold(0.0_f64, |a, (x, y)| a.max((x + y).abs()));
            // `vector_laplacian` returns −Δ.
            prop_assert!(err <= 1e-9, "component {k}: {err}");
        }
    }

    #[test]
    fn psi1_moments_vanish(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let grid = build_grid(16).unwrap();
        let b = random_vec3(&mut rng);
        let field = psi1_field(b, &grid);
        let sq: Vec<Vec3> = field.values().iter().zip(grid.points()).map(|(v, x)| {
            let s = norm3(*v).powi(2);
            [s * x[0], s * x[1], s * x[2]]
        }).collect();
        let quartic: Vec<Vec3> = field.values().iter().zip(grid.points()).map(|(v, x)| {
            let s = norm3(*v).powi(4);
            [s * x[0], s * x[1], s * x[2]]
        }).collect();
        prop_assert!(norm3(grid.integrate_vec(&sq)) <= 1e-11);
        prop_assert!(norm3(grid.integrate_vec(&quartic)) <= 1e-11);
    }

    #[test]
    fn completing_the_square(l in 3usize..=64, a in -1.0f64..1.0, b in -1.0f64..1.0, eps in 0.01f64..=0.1) {
        prop_assume!(a * a + b * b > 1e-6);
        let block = ModeBlock::new(l, 0, eps);
        let ll = (l * (l + 1)) as f64;
        prop_assert!(block.form(a, b) >= 0.25 * ll * (a * a + b * b));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn energy_gradient_consistency(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let band = 12;
        let eps = rng.gen_range(0.1..0.3);
        let grid = build_grid(band).unwrap();
        let u = vsh_synthesize(&random_coeffs(&mut rng, band, 6), &grid).unwrap();
        let w = vsh_synthesize(&random_coeffs(&mut rng, band, 6), &grid).unwrap();
        let h = 1e-5;
        let fd = (energy(&u.add_scaled(h, &w), eps).unwrap() - energy(&u.add_scaled(-h, &w), eps).unwrap()) / (2.0 * h);
        let pairing = first_variation_pairing(&u, eps, &w).unwrap();
        prop_assert!((fd - pairing).abs() <= 1e-7 * pairing.abs().max(1.0), "fd {fd} vs pairing {pairing}");
    }

    #[test]
    fn rotation_equivariance(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let band = 16;
        let eps: f64 = 0.2;
        let grid = build_grid(band).unwrap();
        // Ambient components of degree ≤ 4: u∘R is represented exactly (the
        // band-L vector harmonics are not rotation-closed) and the cubic
        // term stays below the band, so the projection in the residual does
        // not truncate.
        let comps: Vec<ShCoeffs> = (0..3).map(|_| {
            let mut c = random_sh(&mut rng, 4);
            for v in c.data_mut() {
                *v *= 0.1;
            }
            c
        }).collect();
        let (r0, r) = (random_rotation(&mut rng), random_rotation(&mut rng));
        let amp = (1.0 - 2.0 * eps * eps).sqrt();
        let field = |pre: &dyn Fn(Vec3) -> Vec3| VectorField::from_fn(&grid, |x| {
            let y = pre(x);
            let base = apply(&r0, y);
            std::array::from_fn(|k| amp * base[k] + comps[k].evaluate(y))
        });
        let (u, ur) = (field(&|x| x), field(&|x| apply(&r, x)));
        let (e, er) = (energy(&u, eps).unwrap(), energy(&ur, eps).unwrap());
        prop_assert!((e - er).abs() <= 1e-11 * e, "energy {e} vs {er}");
        let (r, rr) = (gl_residual(&u, eps).unwrap().norm_l2(), gl_residual(&ur, eps).unwrap().norm_l2());
        prop_assert!((r - rr).abs() <= 1e-11 * r, "residual {r} vs {rr}");
    }

    #[test]
    fn imex_flow_commutes_with_rotations(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let band = 16;
        let eps = 0.2;
        let model = GlModel::new(band, eps).unwrap();
        let r = random_rotation(&mut rng);
        let mut c = rotation_coeffs(band, eps, &random_rotation(&mut rng), false)
            .add(&random_perturbation(&mut rng, band, 4, 0.3));
        let mut rc = compose_rotation(&c, &r, band);
        for _ in 0..10 {
            c = imex_step_coeffs(&model, &c, 0.01);
            rc = imex_step_coeffs(&model, &rc, 0.01);
        }
        let err = compose_rotation(&c, &r, band).sub(&rc).norm_sq().sqrt();
        prop_assert!(err <= 1e-9, "equivariance defect {err}");
    }

    #[test]
    fn imex_step_is_first_order_consistent(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let band = 12;
        let eps = 0.2;
        let model = GlModel::new(band, eps).unwrap();
        let c = rotation_coeffs(band, eps, &random_rotation(&mut rng), false)
            .add(&random_perturbation(&mut rng, band, 4, 0.2));
        let residual = model.residual(&c);
        // Explicit Euler: c − dt·F(c); the IMEX step differs by O(dt²).
        let defect = |dt: f64| imex_step_coeffs(&model, &c, dt).sub(&c.add_scaled(-dt, &residual)).norm_sq().sqrt();
        let (d1, d2) = (defect(1e-3), defect(5e-4));
        let ratio = d1 / d2;
        prop_assert!((3.5..=4.5).contains(&ratio), "defects {d1:e} {d2:e}, ratio {ratio}");
    }

    #[test]
    fn coercivity_on_high_modes(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let band = 12;
        let eps = 0.05;
        let spectra = block_spectra(&assemble_blocks(eps, band).unwrap());
        prop_assert!(spectra.lambda0 >= 1.0 / 16.0);
        let mut w = random_coeffs(&mut rng, band, band);
        for l in 0..=1usize {
            for m in -(l as i64)..=l as i64 {
                for kind in [glsphere::vsh::VshKind::N, glsphere::vsh::VshKind::Psi, glsphere::vsh::VshKind::Phi] {
                    if l == 0 && kind != glsphere::vsh::VshKind::N {
                        continue;
                    }
                    w.set(kind, l, m, 0.0);
                }
            }
        }
        let q = quadratic_form_coeffs(&w, eps);
        prop_assert!(q >= spectra.lambda0 * w.h1_norm_sq() * (1.0 - 1e-9), "{q} vs {}", spectra.lambda0 * w.h1_norm_sq());
    }

    #[test]
    fn procrustes_is_locally_optimal(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let band = 16;
        let eps = 0.1;
        let grid = build_grid(band).unwrap();
        let c = rotation_coeffs(band, eps, &random_rotation(&mut rng), false)
            .add(&random_perturbation(&mut rng, band, 4, 0.3));
        let u = vsh_synthesize(&c, &grid).unwrap();
        let a = align_rotation(&u, eps).unwrap();
        prop_assume!(a.det_sign == 1);
        let best = procrustes_objective(&u, a.amplitude, &a.rotation);
        for _ in 0..100 {
            let q = exp_so3(std::array::from_fn(|_| rng.gen_range(-1e-3..1e-3)));
            prop_assert!(best <= procrustes_objective(&u, a.amplitude, &(a.rotation * q)) + 1e-13);
        }
        prop_assert!(a.phi1_norm <= 1e-8);
    }

    #[test]
    fn barycenter_magnitude_is_invariant(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let grid = build_grid(64).unwrap();
        let lambda = rng.gen_range(0.5..2.0);
        let p = MobiusParams::new(random_rotation(&mut rng), lambda, random_rotation(&mut rng), rng.gen_bool(0.5)).unwrap();
        let q = norm3(quartic_barycenter(&general_harmonic_map(&p, &grid).unwrap()));
        let exact = barycenter_magnitude(lambda);
        prop_assert!((q - exact).abs() <= 1e-6 * exact.max(1e-3), "{q} vs {exact}");
    }

    #[test]
    fn mobius_fit_is_rotation_equivariant(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let grid = build_grid(24).unwrap();
        let p = MobiusParams::new(random_rotation(&mut rng), rng.gen_range(0.5..2.0), random_rotation(&mut rng), false).unwrap();
        let q = random_rotation(&mut rng);
        // A non-member: a degree-one harmonic map pushed slightly off the family.
        let bump = |x: Vec3| 0.02 * x[0] * x[1];
        let make = |pre: &dyn Fn(Vec3) -> Vec3| VectorField::from_fn(&grid, |x| {
            let y = p.eval(pre(x));
            let z = [y[0] + bump(pre(x)), y[1], y[2]];
            let n = norm3(z);
            [z[0] / n, z[1] / n, z[2] / n]
        });
        let v = make(&|x| x);
        let vq = make(&|x| apply(&q, x));
        let (f, fq) = (fit_mobius(&v).unwrap(), fit_mobius(&vq).unwrap());
        prop_assert!((f.h1_defect - fq.h1_defect).abs() <= 1e-9, "{} vs {}", f.h1_defect, fq.h1_defect);
    }

    #[test]
    fn energy_gap_is_controlled_by_tension(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let grid = build_grid(32).unwrap();
        let p = MobiusParams::new(random_rotation(&mut rng), rng.gen_range(0.7..1.5), random_rotation(&mut rng), false).unwrap();
        let w = vsh_synthesize(&random_perturbation(&mut rng, 32, 3, 0.05), &grid).unwrap();
        let v = VectorField::from_fn(&grid, |x| p.eval(x)).add(&w).map(|y, _| {
            let n = norm3(y);
            [y[0] / n, y[1] / n, y[2] / n]
        });
        let gap = 0.5 * componentwise_dirichlet(&v) - 4.0 * PI;
        prop_assume!(gap < 0.5);
        let tau = tension_field(&v).unwrap().norm_l2();
        prop_assert!(gap <= 1e3 * tau * tau, "gap {gap} vs ‖τ‖² {}", tau * tau);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn guarded_flow_never_raises_energy(seed in any::<u64>(), eps in 0.1f64..0.3) {
        let mut rng = rng(seed);
        let band = 12;
        let model = GlModel::new(band, eps).unwrap();
        let c0 = rotation_coeffs(band, eps, &random_rotation(&mut rng), false)
            .add(&random_perturbation(&mut rng, band, 4, 0.3));
        let cfg = FlowConfig { max_steps: 300, newton_handoff: None, dt: eps * eps, ..FlowConfig::new(eps, band) };
        let (_, trace) = flow_coeffs(&model, c0, &cfg);
        let flow: Vec<_> = trace.records.iter().filter(|r| r.stage != Stage::Newton).collect();
        for pair in flow.windows(2) {
            prop_assert!(pair[1].energy <= pair[0].energy + 1e-12, "step {}: {} > {}", pair[1].step, pair[1].energy, pair[0].energy);
        }
    }
}

#[test]
fn rotations_are_critical_for_every_rotation() {
    let grid = build_grid(16).unwrap();
    let mut rng = rng(1);
    for _ in 0..5 {
        let r = random_rotation(&mut rng);
        let u = rotation_critical_field(&r, 0.1, &grid).unwrap();
        assert!(gl_residual(&u, 0.1).unwrap().norm_l2() < 1e-11);
    }
}
