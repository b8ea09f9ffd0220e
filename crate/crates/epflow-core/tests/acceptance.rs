//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! with the measured value against its pinned tolerance. Run with
//! `cargo test -p epflow-core --test acceptance -- --nocapture` to see the
//! lines; the artifact reproducibility criterion lives in the CLI crate's
//! suite, next to the code that writes the artifacts.

use std::time::Instant;

use epflow_core::algebra::{AlgebraVector, Invariance, NoiseBasis};
use epflow_core::reduced::{ep_rhs, integrate, rigid_body_rhs, uniform_grid, ReducedTrajectory};
use epflow_core::sde::{
    simulate, simulate_with_options, variation_dictionary, weak_generator_check, SimOptions,
    TestFunction,
};
use epflow_core::torus::{
    ad_star_h1, ad_star_h1_quadrature, energy_h1, energy_l2, integrate_fluid, k_operator_pairing,
    k_operator_spectral, laplacian_identity_check, FluidMetric, ModeSet, VelocityField,
};
use epflow_core::variational::{ep_pairing, gateaux_derivative, verify_over_dictionary};
use epflow_core::{so3, GeometrySpec};
use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_inertia(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [
        rng.random_range(0.5..3.0),
        rng.random_range(0.5..3.0),
        rng.random_range(0.5..3.0),
    ]
}

fn random_state(rng: &mut ChaCha8Rng) -> AlgebraVector {
    AlgebraVector::from_slice(&[
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    ])
    .unwrap()
}

fn report(name: &str, pass: bool, value: f64, tolerance: f64) {
    println!(
        "acceptance {name}: {} (measured {value:.3e}, tolerance {tolerance:.1e})",
        if pass { "pass" } else { "FAIL" }
    );
    assert!(pass, "{name}: measured {value:.3e} exceeds {tolerance:.1e}");
}

#[test]
fn criterion_01_connection_table() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let inertia = random_inertia(&mut rng);
        let geo = so3::levi_civita_geometry(inertia, Invariance::Left).unwrap();
        let closed = so3::connection_closed_form(inertia);
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    worst = worst.max((geo.christoffel().get(a, b, c) - closed.get(a, b, c)).abs());
                }
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(
        "01 connection table",
        worst < 1e-12 && elapsed < 1.0,
        worst,
        1e-12,
    );
    println!("  runtime {elapsed:.3}s (bound 1s)");
}

#[test]
fn criterion_02_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let inertia = random_inertia(&mut rng);
        let geo = so3::levi_civita_geometry(inertia, Invariance::Left).unwrap();
        let noise = so3::orthonormal_noise(inertia, 1.0).unwrap();
        let u = random_state(&mut rng);
        let generic = ep_rhs(&u, &noise, &geo).unwrap();
        let closed = rigid_body_rhs(&u, inertia).unwrap();
        worst = worst.max(generic.sub(&closed).norm_inf());
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(
        "02 oracle equivalence",
        worst < 1e-10 && elapsed < 1.0,
        worst,
        1e-10,
    );
    println!("  runtime {elapsed:.3}s (bound 1s)");
}

#[test]
fn criterion_03_k_curvature_identity() {
    // Hypotheses: right-invariant Levi-Civita pair, orthonormal noise with
    // vanishing self-connection; the isotropic case pinned by the criterion.
    let geo = so3::levi_civita_geometry([1.0, 1.0, 1.0], Invariance::Right).unwrap();
    let noise = NoiseBasis::new(vec![
        AlgebraVector::basis(3, 0),
        AlgebraVector::basis(3, 1),
        AlgebraVector::basis(3, 2),
    ])
    .unwrap();
    for h in noise.vectors() {
        assert!(geo.covariant(h, h).norm_inf() == 0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let u = random_state(&mut rng);
        let k = geo.k_operator(&u, &noise).unwrap();
        let curvature_form = geo.k_operator_curvature_form(&u, &noise).unwrap();
        let hodge_form = geo.k_operator_hodge_form(&u).unwrap();
        worst = worst.max(k.sub(&curvature_form).norm_inf());
        worst = worst.max(k.sub(&hodge_form).norm_inf());
    }
    report("03 K curvature identity", worst < 1e-12, worst, 1e-12);
}

#[test]
fn criterion_04_isotropic_connection_kills_k() {
    let geo = so3::mixed_geometry([1.0, 2.0, 3.0], [1.0, 1.0, 1.0], Invariance::Left).unwrap();
    let noise = so3::orthonormal_noise([1.0, 2.0, 3.0], 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let u = random_state(&mut rng);
        worst = worst.max(geo.k_operator(&u, &noise).unwrap().norm_inf());
    }
    report("04 isotropic connection K = 0", worst < 1e-14, worst, 1e-14);
}

#[test]
fn criterion_05_criticality() {
    let start = Instant::now();
    let inertia = [1.0, 2.0, 3.0];
    let geo = so3::levi_civita_geometry(inertia, Invariance::Left).unwrap();
    let noise = so3::orthonormal_noise(inertia, 1.0).unwrap();
    let u0 = AlgebraVector::from_slice(&[1.0, 1.0, 1.0]).unwrap();
    let grid = uniform_grid(1.0, 1e-3).unwrap();

    let critical = integrate(|u| ep_rhs(u, &noise, &geo), u0.clone(), grid.clone()).unwrap();
    let dict = variation_dictionary(critical.times()).unwrap();
    let reports = verify_over_dictionary(&critical, &noise, &geo, &dict, 1e-4, "critical").unwrap();
    let max_dj = reports
        .iter()
        .map(|r| r.dj_fd.abs())
        .fold(0.0_f64, f64::max);
    let max_gap = reports.iter().map(|r| r.diff).fold(0.0_f64, f64::max);

    // Negative control: drop the dissipative operator from the dynamics.
    let contraction = geo.contraction(&noise);
    let non_critical = integrate(
        |u| {
            let u_tilde = u.sub(&contraction.scale(0.5));
            geo.ad_star(&u_tilde, u)
        },
        u0,
        grid,
    )
    .unwrap();
    let worst_control = dict
        .iter()
        .map(|v| {
            gateaux_derivative(&non_critical, &noise, &geo, v, 1e-4)
                .unwrap()
                .abs()
        })
        .fold(0.0_f64, f64::max);

    let elapsed = start.elapsed().as_secs_f64();
    report("05a critical drift dJ", max_dj < 1e-6, max_dj, 1e-6);
    report("05b fd vs pairing", max_gap < 1e-6, max_gap, 1e-6);
    report(
        "05c non-critical control detected",
        worst_control > 1e-3,
        worst_control,
        1e-3,
    );
    assert!(
        elapsed < 10.0,
        "criterion 5 runtime {elapsed:.1}s exceeds 10s"
    );
    println!("  runtime {elapsed:.3}s (bound 10s)");
}

#[test]
fn criterion_06_generator_check() {
    let start = Instant::now();
    let inertia = [1.0, 2.0, 3.0];
    let geo = so3::levi_civita_geometry(inertia, Invariance::Left).unwrap();
    // A noise direction with nonzero self-connection, so the compensator matters.
    let noise =
        NoiseBasis::new(vec![AlgebraVector::from_slice(&[1.0, 1.0, 0.0]).unwrap()]).unwrap();
    let grid = uniform_grid(0.1, 1e-3).unwrap();
    let u = ReducedTrajectory::constant(AlgebraVector::from_slice(&[0.2, 0.1, 0.3]).unwrap(), grid)
        .unwrap();
    let fs = [
        TestFunction::trace(),
        TestFunction::linear(
            "asym",
            Matrix3::new(0.0, 1.0, 0.2, -1.0, 0.0, 0.4, 0.1, -0.3, 0.0),
        ),
    ];

    let good = simulate(&u, &noise, &geo, 20_000, 601, 1e-3).unwrap();
    let mut worst_z = 0.0_f64;
    for f in &fs {
        let r = weak_generator_check(&good, f, &u, &noise, &geo, 100).unwrap();
        assert!(r.sufficient);
        worst_z = worst_z.max(r.z.abs());
    }

    let bad = simulate_with_options(
        &u,
        &noise,
        &geo,
        20_000,
        601,
        1e-3,
        SimOptions {
            omit_contraction: true,
        },
    )
    .unwrap();
    let control = weak_generator_check(&bad, &fs[1], &u, &noise, &geo, 100).unwrap();

    let elapsed = start.elapsed().as_secs_f64();
    report(
        "06a generator matches within 3 se",
        worst_z < 3.0,
        worst_z,
        3.0,
    );
    report(
        "06b missing compensator detected above 5 se",
        control.z.abs() > 5.0,
        control.z.abs(),
        5.0,
    );
    assert!(
        elapsed < 60.0,
        "criterion 6 runtime {elapsed:.1}s exceeds 60s"
    );
    println!("  runtime {elapsed:.3}s (bound 60s)");
}

#[test]
fn criterion_07_laplacian_identity() {
    let mut worst = 0.0_f64;
    for m in [1u32, 2, 4, 6] {
        let modes = ModeSet::power_law(m, 3.0).unwrap();
        let mi = m as i32;
        for q1 in -mi..=mi {
            for q2 in -mi..=mi {
                if q1 == 0 && q2 == 0 {
                    continue;
                }
                worst = worst.max(laplacian_identity_check(&modes, (q1, q2)).error);
            }
        }
    }
    report(
        "07a identity exact over m in {1,2,4,6}",
        worst < 1e-12,
        worst,
        1e-12,
    );

    let anisotropic = ModeSet::from_reps_unchecked(1, vec![(1, 0)], vec![1.0]);
    let control = laplacian_identity_check(&anisotropic, (1, 0)).error;
    report(
        "07b anisotropic control fails",
        control > 1e-3,
        control,
        1e-3,
    );
}

#[test]
fn criterion_08_torus_k_routes() {
    let modes = ModeSet::power_law(4, 3.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let mut worst_coeff = 0.0_f64;
    let mut worst_pairing = 0.0_f64;
    for _ in 0..3 {
        let entries: Vec<((i32, i32), f64, f64)> = modes
            .reps()
            .iter()
            .map(|&k| (k, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let u = VelocityField::from_modes(&modes, &entries).unwrap();
        let v_entries: Vec<((i32, i32), f64, f64)> = modes
            .reps()
            .iter()
            .map(|&k| (k, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let v = VelocityField::from_modes(&modes, &v_entries).unwrap();
        let spectral = k_operator_spectral(&u, &modes).unwrap();
        let pairing = k_operator_pairing(&u, &modes).unwrap();
        worst_coeff = worst_coeff.max(spectral.sub(&pairing).norm_inf());
        worst_pairing = worst_pairing.max(
            (epflow_core::torus::inner_l2(&spectral, &v, &modes)
                - epflow_core::torus::inner_l2(&pairing, &v, &modes))
            .abs(),
        );
        worst_pairing = worst_pairing.max(
            (epflow_core::torus::inner_h1(&spectral, &v, &modes)
                - epflow_core::torus::inner_h1(&pairing, &v, &modes))
            .abs(),
        );
    }
    report(
        "08 torus K dual route",
        worst_coeff < 1e-10 && worst_pairing < 1e-10,
        worst_coeff.max(worst_pairing),
        1e-10,
    );
}

#[test]
fn criterion_09_navier_stokes_reduction() {
    let modes = ModeSet::new(1, vec![1.0]).unwrap();
    assert!((modes.nu_effective() - 1.0).abs() < 1e-15);
    let u0 = VelocityField::from_modes(&modes, &[((1, 0), 1.0, 0.0)]).unwrap();
    let traj = integrate_fluid(&u0, &modes, FluidMetric::L2, 1.0, 1e-3).unwrap();
    let idx = modes.rep_index((1, 0)).unwrap();
    let final_amp = traj.states.last().unwrap().coeffs()[idx].0;
    let expected = (-0.5_f64).exp();
    let rel_err = ((final_amp - expected) / expected).abs();
    report("09a shear decay rate", rel_err < 1e-6, rel_err, 1e-6);

    let inviscid = ModeSet::inviscid(3).unwrap();
    let u0 = VelocityField::from_modes(
        &inviscid,
        &[((1, 0), 1.0, 0.0), ((0, 1), 0.0, 0.7), ((1, 1), 0.4, -0.2)],
    )
    .unwrap();
    let traj = integrate_fluid(&u0, &inviscid, FluidMetric::L2, 1.0, 1e-3).unwrap();
    let e0 = energy_l2(&u0, &inviscid);
    let drift = traj
        .states
        .iter()
        .map(|s| (energy_l2(s, &inviscid) - e0).abs())
        .fold(0.0_f64, f64::max);
    report(
        "09b inviscid L2 energy conserved",
        drift < 1e-8,
        drift,
        1e-8,
    );
}

#[test]
fn criterion_10_camassa_holm_reduction() {
    let start = Instant::now();
    let inviscid = ModeSet::inviscid(3).unwrap();
    let u0 = VelocityField::from_modes(
        &inviscid,
        &[((1, 0), 1.0, 0.0), ((0, 1), 0.0, 0.7), ((1, 1), 0.4, -0.2)],
    )
    .unwrap();
    let traj = integrate_fluid(&u0, &inviscid, FluidMetric::H1, 1.0, 1e-3).unwrap();
    let h0 = energy_h1(&u0, &inviscid);
    let drift = traj
        .states
        .iter()
        .map(|s| (energy_h1(s, &inviscid) - h0).abs())
        .fold(0.0_f64, f64::max);
    report(
        "10a inviscid H1 energy conserved",
        drift < 1e-8,
        drift,
        1e-8,
    );

    let viscous = ModeSet::power_law(3, 3.0).unwrap();
    let u0v = VelocityField::from_modes(
        &viscous,
        &[((1, 0), 1.0, 0.0), ((0, 1), 0.0, 0.7), ((1, 1), 0.4, -0.2)],
    )
    .unwrap();
    let vtraj = integrate_fluid(&u0v, &viscous, FluidMetric::H1, 1.0, 1e-3).unwrap();
    let energies: Vec<f64> = vtraj
        .states
        .iter()
        .map(|s| energy_h1(s, &viscous))
        .collect();
    let strictly_decreasing = energies.windows(2).all(|w| w[1] < w[0]);
    report(
        "10b viscous H1 energy strictly decreasing",
        strictly_decreasing,
        energies.last().copied().unwrap() - energies[0],
        0.0,
    );

    let modes4 = ModeSet::power_law(4, 3.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(110);
    let entries: Vec<((i32, i32), f64, f64)> = modes4
        .reps()
        .iter()
        .map(|&k| (k, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let u = VelocityField::from_modes(&modes4, &entries).unwrap();
    let gap = ad_star_h1(&u, &modes4)
        .unwrap()
        .sub(&ad_star_h1_quadrature(&u, &modes4).unwrap())
        .norm_inf();
    report("10c H1 adjoint vs quadrature oracle", gap < 1e-9, gap, 1e-9);

    let elapsed = start.elapsed().as_secs_f64();
    assert!(
        elapsed < 30.0,
        "criterion 10 runtime {elapsed:.1}s exceeds 30s"
    );
    println!("  runtime {elapsed:.3}s (bound 30s)");
}

/// Supporting check: the same experiment with the right-invariant conventions
/// behaves identically at the level of criticality and dissipation.
#[test]
fn criterion_support_right_invariant_mirror() {
    let inertia = [1.0, 2.0, 3.0];
    let geo = so3::levi_civita_geometry(inertia, Invariance::Right).unwrap();
    let noise = so3::orthonormal_noise(inertia, 1.0).unwrap();
    let grid = uniform_grid(1.0, 1e-3).unwrap();
    let u = integrate(
        |u| ep_rhs(u, &noise, &geo),
        AlgebraVector::from_slice(&[1.0, 1.0, 1.0]).unwrap(),
        grid,
    )
    .unwrap();
    let dict = variation_dictionary(u.times()).unwrap();
    let mut worst = 0.0_f64;
    for v in &dict {
        worst = worst.max(ep_pairing(&u, &noise, &geo, v).unwrap().abs());
    }
    let energies: Vec<f64> = u
        .states()
        .iter()
        .map(|s| epflow_core::kinetic_energy(s, &geo))
        .collect();
    let monotone = energies.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    report(
        "support right-invariant criticality",
        worst < 1e-6 && monotone,
        worst,
        1e-6,
    );
}

/// Supporting check used by the geometry constructors everywhere above: a
/// GeometrySpec built by the Koszul constructor validates its own flags.
#[test]
fn criterion_support_levi_civita_flags() {
    let geo: GeometrySpec = so3::levi_civita_geometry([1.3, 0.8, 2.2], Invariance::Left).unwrap();
    assert!(geo.is_levi_civita());
    let mixed = so3::mixed_geometry([1.0, 2.0, 3.0], [1.0, 1.0, 1.0], Invariance::Left).unwrap();
    assert!(!mixed.is_levi_civita());
    println!("acceptance support geometry flags: pass");
}
