//! The full invariant battery, runnable as one deterministic report: every
//! module's exact identities, dual-route agreements and conservation laws,
//! each reduced to a single measured number against its tolerance.

use epflow_core::algebra::{AlgebraVector, Invariance, NoiseBasis};
use epflow_core::reduced::ReducedTrajectory;
use epflow_core::reduced::{ep_rhs, integrate, kinetic_energy, rigid_body_rhs, uniform_grid};
use epflow_core::sde::{simulate, variation_dictionary, weak_generator_check, TestFunction};
use epflow_core::so3;
use epflow_core::torus::{
    ad_star_h1, ad_star_h1_quadrature, ad_star_l2, energy_h1, energy_l2, inner_h1, inner_l2,
    integrate_fluid, k_operator_pairing, k_operator_spectral, laplacian_identity_check,
    FluidMetric, ModeSet, VelocityField,
};
use epflow_core::variational::{ep_pairing, gateaux_derivative};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::AuditParams;
use crate::experiments::Check;
use crate::CliError;

fn rand_inertia(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [
        rng.random_range(0.5..3.0),
        rng.random_range(0.5..3.0),
        rng.random_range(0.5..3.0),
    ]
}

fn rand_state(rng: &mut ChaCha8Rng) -> AlgebraVector {
    AlgebraVector::from_slice(&[
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    ])
    .unwrap()
}

fn rand_field(modes: &ModeSet, rng: &mut ChaCha8Rng) -> VelocityField {
    let entries: Vec<((i32, i32), f64, f64)> = modes
        .reps()
        .iter()
        .map(|&k| (k, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    VelocityField::from_modes(modes, &entries).unwrap()
}

/// Run every invariant; deterministic for a fixed seed.
pub fn run_audit(params: &AuditParams, seed: u64) -> Result<Vec<Check>, CliError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = params.n_random;
    let mut checks = Vec::new();

    // Algebra layer.
    {
        let mut worst_antisym = 0.0_f64;
        let mut worst_jacobi = 0.0_f64;
        let mut worst_adjoint = 0.0_f64;
        let mut worst_koszul = 0.0_f64;
        let mut worst_linear = 0.0_f64;
        let mut worst_prop = 0.0_f64;
        let mut worst_mixed_k = 0.0_f64;
        for _ in 0..n {
            let inertia = rand_inertia(&mut rng);
            let geo = so3::levi_civita_geometry(inertia, Invariance::Left)?;
            let (a, b, c) = (
                rand_state(&mut rng),
                rand_state(&mut rng),
                rand_state(&mut rng),
            );
            worst_antisym =
                worst_antisym.max(geo.bracket(&a, &b)?.add(&geo.bracket(&b, &a)?).norm_inf());
            let jac = geo
                .bracket(&a, &geo.bracket(&b, &c)?)?
                .add(&geo.bracket(&b, &geo.bracket(&c, &a)?)?)
                .add(&geo.bracket(&c, &geo.bracket(&a, &b)?)?);
            worst_jacobi = worst_jacobi.max(jac.norm_inf());
            let lhs = geo.inner(&geo.ad_star(&a, &b)?, &c);
            let rhs = geo.inner(&b, &geo.ad(&a, &c)?);
            worst_adjoint = worst_adjoint.max((lhs - rhs).abs());
            let closed = so3::connection_closed_form(inertia);
            for x in 0..3 {
                for y in 0..3 {
                    for z in 0..3 {
                        worst_koszul = worst_koszul
                            .max((geo.christoffel().get(x, y, z) - closed.get(x, y, z)).abs());
                    }
                }
            }
            let noise = so3::orthonormal_noise(inertia, 1.0)?;
            let combo = a.scale(0.7).add(&b.scale(-1.3));
            let klin = geo.k_operator(&combo, &noise)?.sub(
                &geo.k_operator(&a, &noise)?
                    .scale(0.7)
                    .add(&geo.k_operator(&b, &noise)?.scale(-1.3)),
            );
            worst_linear = worst_linear.max(klin.norm_inf());

            let geo_r = so3::levi_civita_geometry(inertia, Invariance::Right)?;
            let noise_r = so3::orthonormal_noise(inertia, 1.0)?;
            let k = geo_r.k_operator(&a, &noise_r)?;
            worst_prop = worst_prop
                .max(
                    k.sub(&geo_r.k_operator_curvature_form(&a, &noise_r)?)
                        .norm_inf(),
                )
                .max(k.sub(&geo_r.k_operator_hodge_form(&a)?).norm_inf());

            let mixed = so3::mixed_geometry(inertia, [1.0, 1.0, 1.0], Invariance::Left)?;
            worst_mixed_k = worst_mixed_k.max(mixed.k_operator(&a, &noise)?.norm_inf());
        }
        checks.push(Check::below("bracket_antisymmetry", worst_antisym, 1e-12));
        checks.push(Check::below("bracket_jacobi", worst_jacobi, 1e-12));
        checks.push(Check::below("adjoint_identity", worst_adjoint, 1e-12));
        checks.push(Check::below("koszul_closed_form", worst_koszul, 1e-12));
        checks.push(Check::below("k_linearity", worst_linear, 1e-12));
        checks.push(Check::below("k_curvature_identity", worst_prop, 1e-12));
        checks.push(Check::below(
            "k_isotropic_connection_zero",
            worst_mixed_k,
            1e-14,
        ));
    }

    // Reduced dynamics.
    {
        let mut worst_oracle = 0.0_f64;
        for _ in 0..(10 * n) {
            let inertia = rand_inertia(&mut rng);
            let geo = so3::levi_civita_geometry(inertia, Invariance::Left)?;
            let noise = so3::orthonormal_noise(inertia, 1.0)?;
            let u = rand_state(&mut rng);
            worst_oracle = worst_oracle.max(
                ep_rhs(&u, &noise, &geo)?
                    .sub(&rigid_body_rhs(&u, inertia)?)
                    .norm_inf(),
            );
        }
        checks.push(Check::below(
            "ep_rhs_oracle_equivalence",
            worst_oracle,
            1e-10,
        ));

        let inertia = [1.0, 2.0, 3.0];
        let geo = so3::levi_civita_geometry(inertia, Invariance::Left)?;
        let noise = so3::orthonormal_noise(inertia, 1.0)?;
        let u0 = AlgebraVector::from_slice(&[1.0, 1.0, 1.0])?;
        let grid = uniform_grid(1.0, 1e-3)?;
        let traj = integrate(|u| ep_rhs(u, &noise, &geo), u0.clone(), grid.clone())?;
        let energies: Vec<f64> = traj
            .states()
            .iter()
            .map(|u| kinetic_energy(u, &geo))
            .collect();
        let worst_increase = energies
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::MIN, f64::max);
        checks.push(Check::below(
            "energy_monotone_dissipative",
            worst_increase,
            1e-12,
        ));

        let euler = integrate(
            |u| ep_rhs(u, &NoiseBasis::empty(), &geo),
            u0.clone(),
            grid.clone(),
        )?;
        let e0 = kinetic_energy(euler.state(0), &geo);
        let drift = euler
            .states()
            .iter()
            .map(|u| (kinetic_energy(u, &geo) - e0).abs())
            .fold(0.0_f64, f64::max);
        checks.push(Check::below("energy_conserved_euler_top", drift, 1e-8));

        let reference = integrate(
            |u| ep_rhs(u, &noise, &geo),
            u0.clone(),
            uniform_grid(1.0, 1e-5)?,
        )?;
        let endpoint = reference.states().last().unwrap().clone();
        let err_at = |dt: f64| -> Result<f64, CliError> {
            let t = integrate(
                |u| ep_rhs(u, &noise, &geo),
                u0.clone(),
                uniform_grid(1.0, dt)?,
            )?;
            Ok(t.states().last().unwrap().sub(&endpoint).norm())
        };
        let ratio = err_at(4e-3)? / err_at(2e-3)?;
        checks.push(Check {
            name: "rk4_refinement_ratio".into(),
            pass: (10.0..26.0).contains(&ratio),
            value: ratio,
            tolerance: 16.0,
        });
    }

    // Variational layer.
    {
        let inertia = [1.0, 2.0, 3.0];
        let geo = so3::levi_civita_geometry(inertia, Invariance::Left)?;
        let noise = so3::orthonormal_noise(inertia, 1.0)?;
        let grid = uniform_grid(1.0, 1e-3)?;
        let critical = integrate(
            |u| ep_rhs(u, &noise, &geo),
            AlgebraVector::from_slice(&[1.0, 1.0, 1.0])?,
            grid.clone(),
        )?;
        let dict = variation_dictionary(critical.times())?;
        let mut max_dj = 0.0_f64;
        let mut max_gap = 0.0_f64;
        for v in &dict {
            let fd = gateaux_derivative(&critical, &noise, &geo, v, 1e-4)?;
            let pairing = ep_pairing(&critical, &noise, &geo, v)?;
            max_dj = max_dj.max(fd.abs());
            max_gap = max_gap.max((fd - pairing).abs());
        }
        checks.push(Check::below("criticality_dj_zero", max_dj, 1e-6));
        checks.push(Check::below("gateaux_vs_pairing", max_gap, 1e-6));

        let constant =
            ReducedTrajectory::constant(AlgebraVector::from_slice(&[1.0, 1.0, 1.0])?, grid)?;
        let control = dict
            .iter()
            .map(|v| gateaux_derivative(&constant, &noise, &geo, v, 1e-4).map(f64::abs))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .fold(0.0_f64, f64::max);
        checks.push(Check::above("non_critical_detected", control, 1e-3));
    }

    // Group sampling.
    {
        let geo = so3::levi_civita_geometry([1.0, 2.0, 3.0], Invariance::Left)?;
        let noise = NoiseBasis::new(vec![AlgebraVector::from_slice(&[1.0, 1.0, 0.0])?])?;
        let grid = uniform_grid(0.1, 1e-3)?;
        let u = ReducedTrajectory::constant(AlgebraVector::from_slice(&[0.2, 0.1, 0.3])?, grid)?;
        let ens = simulate(&u, &noise, &geo, params.n_paths, seed ^ 0x5eed, 1e-3)?;
        let worst_defect = ens
            .paths
            .iter()
            .flat_map(|p| p.iter())
            .map(|g| g.orthogonality_defect())
            .fold(0.0_f64, f64::max);
        checks.push(Check::below("path_orthogonality", worst_defect, 1e-9));
        checks.push(Check::flag(
            "no_polar_projections",
            ens.projection_count == 0,
        ));
        let r = weak_generator_check(&ens, &TestFunction::trace(), &u, &noise, &geo, 100)?;
        checks.push(Check::below("generator_consistency_z", r.z.abs(), 3.5));
    }

    // Torus layer.
    {
        let mut worst_identity = 0.0_f64;
        for m in [1u32, 2, 4, 6] {
            let modes = ModeSet::power_law(m, 3.0)?;
            let mi = m as i32;
            for q1 in -mi..=mi {
                for q2 in -mi..=mi {
                    if q1 != 0 || q2 != 0 {
                        worst_identity =
                            worst_identity.max(laplacian_identity_check(&modes, (q1, q2)).error);
                    }
                }
            }
        }
        checks.push(Check::below("laplacian_identity", worst_identity, 1e-12));
        let anisotropic = ModeSet::from_reps_unchecked(1, vec![(1, 0)], vec![1.0]);
        checks.push(Check::above(
            "anisotropic_control_fails",
            laplacian_identity_check(&anisotropic, (1, 0)).error,
            1e-3,
        ));

        let modes = ModeSet::power_law(4, 3.0)?;
        let u = rand_field(&modes, &mut rng);
        let k_gap = k_operator_spectral(&u, &modes)?
            .sub(&k_operator_pairing(&u, &modes)?)
            .norm_inf();
        checks.push(Check::below("torus_k_dual_route", k_gap, 1e-10));
        checks.push(Check::below(
            "advection_l2_neutral",
            inner_l2(&ad_star_l2(&u, &modes)?, &u, &modes).abs(),
            1e-10,
        ));
        checks.push(Check::below(
            "advection_h1_neutral",
            inner_h1(&ad_star_h1(&u, &modes)?, &u, &modes).abs(),
            1e-9,
        ));
        checks.push(Check::below(
            "h1_adjoint_vs_quadrature",
            ad_star_h1(&u, &modes)?
                .sub(&ad_star_h1_quadrature(&u, &modes)?)
                .norm_inf(),
            1e-9,
        ));

        let mut worst_div = 0.0_f64;
        let grid_n = 21;
        let step = 2.0 * std::f64::consts::PI / grid_n as f64;
        for i in 0..grid_n {
            for j in 0..grid_n {
                worst_div = worst_div.max(
                    u.divergence(&modes, (i as f64 * step, j as f64 * step))
                        .abs(),
                );
            }
        }
        checks.push(Check::below("divergence_free", worst_div, 1e-10));

        let shear_modes = ModeSet::new(1, vec![1.0])?;
        let u0 = VelocityField::from_modes(&shear_modes, &[((1, 0), 1.0, 0.0)])?;
        let traj = integrate_fluid(&u0, &shear_modes, FluidMetric::L2, 1.0, 1e-3)?;
        let idx = shear_modes.rep_index((1, 0)).unwrap();
        let amp = traj.states.last().unwrap().coeffs()[idx].0;
        let rel = ((amp - (-0.5_f64).exp()) / (-0.5_f64).exp()).abs();
        checks.push(Check::below("shear_decay_rate", rel, 1e-6));

        let inviscid = ModeSet::inviscid(3)?;
        let u0 = VelocityField::from_modes(
            &inviscid,
            &[((1, 0), 1.0, 0.0), ((0, 1), 0.0, 0.7), ((1, 1), 0.4, -0.2)],
        )?;
        let ns = integrate_fluid(&u0, &inviscid, FluidMetric::L2, 1.0, 1e-3)?;
        let e0 = energy_l2(&u0, &inviscid);
        let l2_drift = ns
            .states
            .iter()
            .map(|s| (energy_l2(s, &inviscid) - e0).abs())
            .fold(0.0_f64, f64::max);
        checks.push(Check::below("inviscid_l2_conserved", l2_drift, 1e-8));
        let ch = integrate_fluid(&u0, &inviscid, FluidMetric::H1, 1.0, 1e-3)?;
        let h0 = energy_h1(&u0, &inviscid);
        let h1_drift = ch
            .states
            .iter()
            .map(|s| (energy_h1(s, &inviscid) - h0).abs())
            .fold(0.0_f64, f64::max);
        checks.push(Check::below("inviscid_h1_conserved", h1_drift, 1e-8));
    }

    Ok(checks)
}

/// Fixed-width table of the audit results; byte-identical across runs for a
/// fixed seed and parameter set.
pub fn format_table(checks: &[Check]) -> String {
    let name_width = checks
        .iter()
        .map(|c| c.name.len())
        .max()
        .unwrap_or(10)
        .max("invariant".len());
    let mut out = String::new();
    out.push_str(&format!(
        "{:<name_width$}  {:<6}  {:>13}  {:>10}\n",
        "invariant", "status", "measured", "tolerance"
    ));
    out.push_str(&format!("{}\n", "-".repeat(name_width + 35)));
    for c in checks {
        out.push_str(&format!(
            "{:<name_width$}  {:<6}  {:>13.3e}  {:>10.1e}\n",
            c.name,
            if c.pass { "pass" } else { "FAIL" },
            c.value,
            c.tolerance
        ));
    }
    out
}
