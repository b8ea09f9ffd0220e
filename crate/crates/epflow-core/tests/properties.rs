//! Property tests for the exact-algebra invariants: these hold for arbitrary
//! inputs in the stated domains, not just the worked examples.

use epflow_core::algebra::{AlgebraVector, GeometrySpec, Invariance};
use epflow_core::so3;
use epflow_core::torus::{ad_star_h1, ad_star_l2, inner_h1, inner_l2, ModeSet, VelocityField};
use nalgebra::{DMatrix, Matrix3, Vector3};
use proptest::prelude::*;

fn finite_triple() -> impl Strategy<Value = [f64; 3]> {
    [-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64]
}

fn inertia_triple() -> impl Strategy<Value = [f64; 3]> {
    [0.5..3.0f64, 0.5..3.0f64, 0.5..3.0f64]
}

/// Random symmetric positive-definite Gram matrix via L L^T with a bounded
/// lower-triangular factor.
fn spd_gram() -> impl Strategy<Value = DMatrix<f64>> {
    (
        [0.5..1.5f64, 0.5..1.5f64, 0.5..1.5f64],
        [-0.5..0.5f64, -0.5..0.5f64, -0.5..0.5f64],
    )
        .prop_map(|(diag, off)| {
            let l = Matrix3::new(
                diag[0], 0.0, 0.0, //
                off[0], diag[1], 0.0, //
                off[1], off[2], diag[2],
            );
            let g = l * l.transpose();
            DMatrix::from_fn(3, 3, |r, c| g[(r, c)])
        })
}

proptest! {
    #[test]
    fn hat_vee_round_trip(v in finite_triple()) {
        let vec = Vector3::new(v[0], v[1], v[2]);
        prop_assert_eq!(so3::vee(&so3::hat(&vec)), vec);
    }

    #[test]
    fn bracket_is_antisymmetric_and_jacobi(
        a in finite_triple(),
        b in finite_triple(),
        c in finite_triple(),
        inertia in inertia_triple(),
    ) {
        let geo = so3::levi_civita_geometry(inertia, Invariance::Left).unwrap();
        let av = AlgebraVector::from_slice(&a).unwrap();
        let bv = AlgebraVector::from_slice(&b).unwrap();
        let cv = AlgebraVector::from_slice(&c).unwrap();
        let ab = geo.bracket(&av, &bv).unwrap();
        let ba = geo.bracket(&bv, &av).unwrap();
        prop_assert!(ab.add(&ba).norm_inf() < 1e-12);
        let jac = geo.bracket(&av, &geo.bracket(&bv, &cv).unwrap()).unwrap()
            .add(&geo.bracket(&bv, &geo.bracket(&cv, &av).unwrap()).unwrap())
            .add(&geo.bracket(&cv, &geo.bracket(&av, &bv).unwrap()).unwrap());
        prop_assert!(jac.norm_inf() < 1e-9 * (1.0 + av.norm() * bv.norm() * cv.norm()));
    }

    #[test]
    fn adjoint_identity_any_spd_gram(
        gram in spd_gram(),
        u in finite_triple(),
        v in finite_triple(),
        w in finite_triple(),
    ) {
        let geo = GeometrySpec::levi_civita(gram, so3::structure_constants(1.0), Invariance::Left)
            .unwrap();
        let uv = AlgebraVector::from_slice(&u).unwrap();
        let vv = AlgebraVector::from_slice(&v).unwrap();
        let wv = AlgebraVector::from_slice(&w).unwrap();
        let lhs = geo.inner(&geo.ad_star(&uv, &vv).unwrap(), &wv);
        let rhs = geo.inner(&vv, &geo.ad(&uv, &wv).unwrap());
        let scale = 1.0 + uv.norm() * vv.norm() * wv.norm();
        prop_assert!((lhs - rhs).abs() < 1e-10 * scale, "{lhs} vs {rhs}");
    }

    #[test]
    fn koszul_reproduces_closed_form(inertia in inertia_triple()) {
        let geo = so3::levi_civita_geometry(inertia, Invariance::Left).unwrap();
        let closed = so3::connection_closed_form(inertia);
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    prop_assert!(
                        (geo.christoffel().get(a, b, c) - closed.get(a, b, c)).abs() < 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn k_operator_linear_in_state(
        inertia in inertia_triple(),
        u in finite_triple(),
        w in finite_triple(),
        alpha in -2.0..2.0f64,
        beta in -2.0..2.0f64,
    ) {
        let geo = so3::levi_civita_geometry(inertia, Invariance::Left).unwrap();
        let noise = so3::orthonormal_noise(inertia, 1.0).unwrap();
        let uv = AlgebraVector::from_slice(&u).unwrap();
        let wv = AlgebraVector::from_slice(&w).unwrap();
        let combo = uv.scale(alpha).add(&wv.scale(beta));
        let lhs = geo.k_operator(&combo, &noise).unwrap();
        let rhs = geo.k_operator(&uv, &noise).unwrap().scale(alpha)
            .add(&geo.k_operator(&wv, &noise).unwrap().scale(beta));
        prop_assert!(lhs.sub(&rhs).norm_inf() < 1e-12 * (1.0 + combo.norm()));
    }

    #[test]
    fn curvature_identity_for_k_right_side(inertia in inertia_triple(), u in finite_triple()) {
        let geo = so3::levi_civita_geometry(inertia, Invariance::Right).unwrap();
        let noise = so3::orthonormal_noise(inertia, 1.0).unwrap();
        let uv = AlgebraVector::from_slice(&u).unwrap();
        let k = geo.k_operator(&uv, &noise).unwrap();
        let form = geo.k_operator_curvature_form(&uv, &noise).unwrap();
        let hodge = geo.k_operator_hodge_form(&uv).unwrap();
        let scale = 1.0 + uv.norm();
        prop_assert!(k.sub(&form).norm_inf() < 1e-12 * scale);
        prop_assert!(k.sub(&hodge).norm_inf() < 1e-12 * scale);
    }
}

fn random_field(modes: &ModeSet, seed: u64) -> VelocityField {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let entries: Vec<((i32, i32), f64, f64)> = modes
        .reps()
        .iter()
        .map(|&k| (k, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    VelocityField::from_modes(modes, &entries).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn torus_fields_divergence_free(seed in 0u64..1000, m in 1u32..5) {
        let modes = ModeSet::power_law(m, 3.0).unwrap();
        let u = random_field(&modes, seed);
        let n = 4 * m as usize + 5;
        let step = 2.0 * std::f64::consts::PI / n as f64;
        for i in 0..n {
            for j in 0..n {
                let d = u.divergence(&modes, (i as f64 * step, j as f64 * step));
                prop_assert!(d.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn torus_advection_energy_neutral(seed in 0u64..1000, m in 2u32..5) {
        let modes = ModeSet::power_law(m, 3.0).unwrap();
        let u = random_field(&modes, seed);
        let l2 = inner_l2(&ad_star_l2(&u, &modes).unwrap(), &u, &modes);
        prop_assert!(l2.abs() < 1e-10);
        let h1 = inner_h1(&ad_star_h1(&u, &modes).unwrap(), &u, &modes);
        prop_assert!(h1.abs() < 1e-9);
    }

    #[test]
    fn laplacian_identity_over_valid_mode_sets(
        m in 1u32..7,
        lam in proptest::collection::vec(0.0..2.0f64, 6),
        q1 in -6i32..7,
        q2 in -6i32..7,
    ) {
        let lambda: Vec<f64> = lam.into_iter().take(m as usize).collect();
        prop_assume!(lambda.len() == m as usize);
        prop_assume!(q1 != 0 || q2 != 0);
        let modes = ModeSet::new(m, lambda).unwrap();
        let check = epflow_core::laplacian_identity_check(&modes, (q1, q2));
        prop_assert!(check.error < 1e-12 * (1.0 + check.rhs.abs()));
    }
}
