//! Numerical verification of the criticality characterization: the action of
//! a perturbed drift, its Gateaux derivative in the perturbation size, and the
//! equivalent pairing against the reduced equation residual.
//!
//! The perturbed reduced velocity is non-random, so the action is evaluated
//! deterministically node by node; the stochastic side is validated
//! independently by the generator check in [`crate::sde`].

use serde::Serialize;

use crate::algebra::{AlgebraVector, GeometrySpec, Invariance, NoiseBasis};
use crate::error::{CoreError, Result};
use crate::reduced::{ep_rhs, ReducedTrajectory};
use crate::sde::{perturbation_flow, VariationCurve};

/// Default perturbation size for the central finite difference.
pub const DEFAULT_EPS: f64 = 1e-4;

/// Reduced velocity of the perturbed path at one perturbation size.
#[derive(Clone, Debug)]
pub struct PerturbedVelocity {
    pub eps: f64,
    pub times: Vec<f64>,
    pub curve: Vec<AlgebraVector>,
}

/// Quadrature rule for the action integral.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quadrature {
    Simpson,
    Trapezoid,
}

/// The perturbed reduced velocity
///
/// w_eps(t) = 1/2 sum_i nabla_{H_i^eps} H_i^eps
///            + Ad(-1/2 sum_i nabla_{H_i} H_i + u(t)) + eps vdot(t),
///
/// with H_i^eps and the Ad factor transported by the perturbation flow
/// (inverse conjugation on the left side, direct on the right side). At
/// eps = 0 this returns u(t) exactly.
pub fn perturbed_velocity(
    u: &ReducedTrajectory,
    noise: &NoiseBasis,
    geo: &GeometrySpec,
    v: &VariationCurve,
    eps: f64,
) -> Result<PerturbedVelocity> {
    if u.times() != v.grid() {
        return Err(CoreError::DimensionMismatch(
            "drift and variation curve must share one grid".into(),
        ));
    }
    if geo.dim() != 3 {
        return Err(CoreError::DimensionMismatch(
            "perturbed velocity requires the three-dimensional group layer".into(),
        ));
    }
    let side = geo.side();
    let flow = perturbation_flow(v, eps, side)?;
    let contraction = geo.contraction(noise);
    let half_contraction = contraction.scale(0.5);
    let mut curve = Vec::with_capacity(u.len());
    for (n, element) in flow.iter().enumerate() {
        let r = element.matrix();
        // Ad in coordinates: hat(R x) = R hat(x) R^T.
        let transport = |x: &AlgebraVector| -> Result<AlgebraVector> {
            let v3 = x.to_vector3()?;
            let moved = match side {
                Invariance::Left => r.transpose() * v3,
                Invariance::Right => r * v3,
            };
            Ok(AlgebraVector::from_vector3(&moved))
        };
        let mut perturbed_contraction = AlgebraVector::zeros(3);
        for h in noise.vectors() {
            let h_eps = transport(h)?;
            perturbed_contraction = perturbed_contraction.add(&geo.covariant(&h_eps, &h_eps));
        }
        let w = perturbed_contraction
            .scale(0.5)
            .add(&transport(&u.state(n).sub(&half_contraction))?)
            .add(&v.deriv_at_node(n).scale(eps));
        curve.push(w);
    }
    Ok(PerturbedVelocity {
        eps,
        times: u.times().to_vec(),
        curve,
    })
}

/// Action 1/2 int_0^1 <w, w> dt by composite quadrature on the grid.
pub fn action(w: &PerturbedVelocity, geo: &GeometrySpec, rule: Quadrature) -> f64 {
    let integrand: Vec<f64> = w.curve.iter().map(|x| geo.inner(x, x)).collect();
    0.5 * integrate_grid(&w.times, &integrand, rule)
}

fn integrate_grid(times: &[f64], values: &[f64], rule: Quadrature) -> f64 {
    match rule {
        Quadrature::Trapezoid => {
            let mut acc = 0.0;
            for i in 0..times.len() - 1 {
                acc += 0.5 * (times[i + 1] - times[i]) * (values[i] + values[i + 1]);
            }
            acc
        }
        Quadrature::Simpson => {
            let n = times.len() - 1;
            let h = times[1] - times[0];
            let mut acc = 0.0;
            let pairs = n / 2;
            for p in 0..pairs {
                let i = 2 * p;
                acc += h / 3.0 * (values[i] + 4.0 * values[i + 1] + values[i + 2]);
            }
            if n % 2 == 1 {
                // Odd interval count: close with one trapezoid panel.
                acc += 0.5 * h * (values[n - 1] + values[n]);
            }
            acc
        }
    }
}

fn action_at(
    u: &ReducedTrajectory,
    noise: &NoiseBasis,
    geo: &GeometrySpec,
    v: &VariationCurve,
    eps: f64,
) -> Result<f64> {
    Ok(action(
        &perturbed_velocity(u, noise, geo, v, eps)?,
        geo,
        Quadrature::Simpson,
    ))
}

/// Central finite difference of the action in the perturbation size at 0,
/// Richardson-extrapolated from eps and eps/2.
pub fn gateaux_derivative(
    u: &ReducedTrajectory,
    noise: &NoiseBasis,
    geo: &GeometrySpec,
    v: &VariationCurve,
    eps: f64,
) -> Result<f64> {
    let central = |e: f64| -> Result<f64> {
        let plus = action_at(u, noise, geo, v, e)?;
        let minus = action_at(u, noise, geo, v, -e)?;
        Ok((plus - minus) / (2.0 * e))
    };
    let d_full = central(eps)?;
    let d_half = central(0.5 * eps)?;
    Ok((4.0 * d_half - d_full) / 3.0)
}

/// The pairing
///
/// int_0^1 < rhs(u(t)) - du/dt, v(t) > dt
///
/// with `rhs` the side-signed reduced right side; the analytic value of the
/// Gateaux derivative. The time derivative comes from centered differences of
/// the stored trajectory (fourth order in the interior), an independent route
/// from the integrator that produced u.
pub fn ep_pairing(
    u: &ReducedTrajectory,
    noise: &NoiseBasis,
    geo: &GeometrySpec,
    v: &VariationCurve,
) -> Result<f64> {
    if u.times() != v.grid() {
        return Err(CoreError::DimensionMismatch(
            "drift and variation curve must share one grid".into(),
        ));
    }
    let udot = trajectory_derivative(u);
    let mut integrand = Vec::with_capacity(u.len());
    for (n, du) in udot.iter().enumerate() {
        let residual = ep_rhs(u.state(n), noise, geo)?.sub(du);
        integrand.push(geo.inner(&residual, v.value_at_node(n)));
    }
    Ok(integrate_grid(u.times(), &integrand, Quadrature::Simpson))
}

/// Centered finite differences of the trajectory states: fourth order in the
/// interior, second order one-sided at the ends.
pub fn trajectory_derivative(u: &ReducedTrajectory) -> Vec<AlgebraVector> {
    let n = u.len();
    let h = u.times()[1] - u.times()[0];
    let s = u.states();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let d = if i >= 2 && i + 2 < n {
            // (-u[i+2] + 8 u[i+1] - 8 u[i-1] + u[i-2]) / (12 h)
            s[i + 2]
                .scale(-1.0)
                .add(&s[i + 1].scale(8.0))
                .add(&s[i - 1].scale(-8.0))
                .add(&s[i - 2])
                .scale(1.0 / (12.0 * h))
        } else if i == 0 {
            s[0].scale(-3.0)
                .add(&s[1].scale(4.0))
                .add(&s[2].scale(-1.0))
                .scale(1.0 / (2.0 * h))
        } else if i + 1 == n {
            s[n - 1]
                .scale(3.0)
                .add(&s[n - 2].scale(-4.0))
                .add(&s[n - 3])
                .scale(1.0 / (2.0 * h))
        } else {
            s[i + 1].sub(&s[i - 1]).scale(1.0 / (2.0 * h))
        };
        out.push(d);
    }
    out
}

/// One row of the verification report.
#[derive(Clone, Debug, Serialize)]
pub struct VariationalReport {
    pub u_source: String,
    pub v_id: usize,
    #[serde(rename = "dJ_fd")]
    pub dj_fd: f64,
    #[serde(rename = "dJ_pairing")]
    pub dj_pairing: f64,
    pub diff: f64,
}

/// Run the finite-difference/pairing comparison over a dictionary of curves.
pub fn verify_over_dictionary(
    u: &ReducedTrajectory,
    noise: &NoiseBasis,
    geo: &GeometrySpec,
    dictionary: &[VariationCurve],
    eps: f64,
    u_source: &str,
) -> Result<Vec<VariationalReport>> {
    dictionary
        .iter()
        .enumerate()
        .map(|(v_id, v)| {
            let dj_fd = gateaux_derivative(u, noise, geo, v, eps)?;
            let dj_pairing = ep_pairing(u, noise, geo, v)?;
            Ok(VariationalReport {
                u_source: u_source.to_string(),
                v_id,
                dj_fd,
                dj_pairing,
                diff: (dj_fd - dj_pairing).abs(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduced::{integrate, uniform_grid};
    use crate::sde::variation_dictionary;
    use crate::so3;

    fn setup(inertia: [f64; 3]) -> (GeometrySpec, NoiseBasis) {
        (
            so3::levi_civita_geometry(inertia, Invariance::Left).unwrap(),
            so3::orthonormal_noise(inertia, 1.0).unwrap(),
        )
    }

    fn critical_u(
        geo: &GeometrySpec,
        noise: &NoiseBasis,
        u0: [f64; 3],
        dt: f64,
    ) -> ReducedTrajectory {
        integrate(
            |u| ep_rhs(u, noise, geo),
            AlgebraVector::from_slice(&u0).unwrap(),
            uniform_grid(1.0, dt).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn zero_eps_returns_u_exactly() {
        let (geo, noise) = setup([1.0, 2.0, 3.0]);
        let grid = uniform_grid(1.0, 1e-2).unwrap();
        let u = ReducedTrajectory::constant(
            AlgebraVector::from_slice(&[0.4, -0.2, 0.9]).unwrap(),
            grid.clone(),
        )
        .unwrap();
        let v = variation_dictionary(&grid).unwrap().remove(3);
        let w = perturbed_velocity(&u, &noise, &geo, &v, 0.0).unwrap();
        for (wn, un) in w.curve.iter().zip(u.states()) {
            assert_eq!(wn, un);
        }
    }

    #[test]
    fn empty_noise_reduces_to_transported_drift() {
        let geo = so3::levi_civita_geometry([1.0, 2.0, 3.0], Invariance::Left).unwrap();
        let grid = uniform_grid(1.0, 1e-2).unwrap();
        let u = ReducedTrajectory::constant(
            AlgebraVector::from_slice(&[0.5, 0.1, -0.3]).unwrap(),
            grid.clone(),
        )
        .unwrap();
        let v = variation_dictionary(&grid).unwrap().remove(0);
        let eps = 1e-2;
        let w = perturbed_velocity(&u, &NoiseBasis::empty(), &geo, &v, eps).unwrap();
        let flow = perturbation_flow(&v, eps, Invariance::Left).unwrap();
        for (n, element) in flow.iter().enumerate() {
            let expected = AlgebraVector::from_vector3(
                &(element.matrix().transpose() * u.state(n).to_vector3().unwrap()),
            )
            .add(&v.deriv_at_node(n).scale(eps));
            assert!(w.curve[n].sub(&expected).norm_inf() < 1e-14);
        }
    }

    #[test]
    fn eps_derivative_of_velocity_matches_analytic_integrand() {
        // d/deps w_eps|_0 = vdot + ad_{u_tilde} v - 1/2 sum_i (nabla_{ad_v H_i} H_i
        //                    + nabla_{H_i}(ad_v H_i)), checked by central difference.
        let (geo, noise) = setup([1.0, 2.0, 3.0]);
        let grid = uniform_grid(1.0, 1e-2).unwrap();
        let u = ReducedTrajectory::constant(
            AlgebraVector::from_slice(&[0.7, -0.4, 0.2]).unwrap(),
            grid.clone(),
        )
        .unwrap();
        let v = variation_dictionary(&grid).unwrap().remove(6);
        let eps = 1e-4;
        let wp = perturbed_velocity(&u, &noise, &geo, &v, eps).unwrap();
        let wm = perturbed_velocity(&u, &noise, &geo, &v, -eps).unwrap();
        let contraction = geo.contraction(&noise);
        for n in 0..u.len() {
            let fd = wp.curve[n].sub(&wm.curve[n]).scale(1.0 / (2.0 * eps));
            let u_tilde = u.state(n).sub(&contraction.scale(0.5));
            let vn = v.value_at_node(n);
            let mut noise_term = AlgebraVector::zeros(3);
            for h in noise.vectors() {
                let adv_h = geo.ad(vn, h).unwrap();
                noise_term = noise_term
                    .add(&geo.covariant(&adv_h, h))
                    .add(&geo.covariant(h, &adv_h));
            }
            let analytic = v
                .deriv_at_node(n)
                .add(&geo.ad(&u_tilde, vn).unwrap())
                .sub(&noise_term.scale(0.5));
            assert!(
                fd.sub(&analytic).norm_inf() < 1e-7,
                "node {n}: {:?} vs {:?}",
                fd,
                analytic
            );
        }
    }

    #[test]
    fn action_frozen_values() {
        let (geo_iso, _) = setup([1.0, 1.0, 1.0]);
        let grid = uniform_grid(1.0, 1e-2).unwrap();
        let w = PerturbedVelocity {
            eps: 0.0,
            times: grid.clone(),
            curve: vec![AlgebraVector::basis(3, 0); grid.len()],
        };
        assert!((action(&w, &geo_iso, Quadrature::Simpson) - 0.5).abs() < 1e-13);
        let zero = PerturbedVelocity {
            eps: 0.0,
            times: grid.clone(),
            curve: vec![AlgebraVector::zeros(3); grid.len()],
        };
        assert_eq!(action(&zero, &geo_iso, Quadrature::Simpson), 0.0);
    }

    #[test]
    fn simpson_and_trapezoid_differ_at_second_order() {
        let (geo, noise) = setup([1.0, 2.0, 3.0]);
        let diff_at = |dt: f64| {
            let grid = uniform_grid(1.0, dt).unwrap();
            let u = critical_u(&geo, &noise, [1.0, 1.0, 1.0], dt);
            let v = variation_dictionary(&grid).unwrap().remove(1);
            let w = perturbed_velocity(&u, &noise, &geo, &v, 5e-2).unwrap();
            (action(&w, &geo, Quadrature::Simpson) - action(&w, &geo, Quadrature::Trapezoid)).abs()
        };
        let coarse = diff_at(1e-2);
        let fine = diff_at(5e-3);
        let ratio = coarse / fine;
        assert!(
            (2.5..6.0).contains(&ratio),
            "O(dt^2) gap expected, ratio {ratio}"
        );
    }

    #[test]
    fn zero_variation_gives_exactly_zero_derivative() {
        let (geo, noise) = setup([1.0, 2.0, 3.0]);
        let grid = uniform_grid(1.0, 1e-2).unwrap();
        let u = critical_u(&geo, &noise, [1.0, 1.0, 1.0], 1e-2);
        let v = VariationCurve::zero(&grid, 3).unwrap();
        assert_eq!(gateaux_derivative(&u, &noise, &geo, &v, 1e-4).unwrap(), 0.0);
    }

    #[test]
    fn critical_drift_annihilates_the_derivative() {
        let (geo, noise) = setup([1.0, 2.0, 3.0]);
        let u = critical_u(&geo, &noise, [1.0, 1.0, 1.0], 1e-3);
        let dict = variation_dictionary(u.times()).unwrap();
        let reports =
            verify_over_dictionary(&u, &noise, &geo, &dict, DEFAULT_EPS, "critical").unwrap();
        for r in &reports {
            assert!(r.dj_fd.abs() < 1e-6, "v{} dJ = {}", r.v_id, r.dj_fd);
            assert!(r.diff < 1e-6, "v{} fd/pairing gap = {}", r.v_id, r.diff);
        }
    }

    #[test]
    fn non_critical_drift_is_detected() {
        let (geo, noise) = setup([1.0, 2.0, 3.0]);
        let grid = uniform_grid(1.0, 1e-3).unwrap();
        // Constant drift with K(u) != 0 is not a solution of the reduced equation.
        let u = ReducedTrajectory::constant(
            AlgebraVector::from_slice(&[1.0, 1.0, 1.0]).unwrap(),
            grid.clone(),
        )
        .unwrap();
        let dict = variation_dictionary(&grid).unwrap();
        let max_dj = dict
            .iter()
            .map(|v| {
                gateaux_derivative(&u, &noise, &geo, v, DEFAULT_EPS)
                    .unwrap()
                    .abs()
            })
            .fold(0.0_f64, f64::max);
        assert!(max_dj > 1e-3, "max |dJ| = {max_dj}");
    }

    #[test]
    fn pairing_matches_finite_difference_for_generic_drift() {
        let (geo, noise) = setup([1.0, 2.0, 3.0]);
        // Smooth non-critical drift: integrate a modified right side.
        let u = integrate(
            |u| Ok(ep_rhs(u, &noise, &geo)?.scale(0.6)),
            AlgebraVector::from_slice(&[0.9, -0.5, 1.2]).unwrap(),
            uniform_grid(1.0, 1e-3).unwrap(),
        )
        .unwrap();
        let dict = variation_dictionary(u.times()).unwrap();
        for (i, v) in dict.iter().enumerate() {
            let fd = gateaux_derivative(&u, &noise, &geo, v, DEFAULT_EPS).unwrap();
            let pairing = ep_pairing(&u, &noise, &geo, v).unwrap();
            assert!(
                (fd - pairing).abs() < 1e-6,
                "v{i}: fd {fd} vs pairing {pairing}"
            );
        }
    }

    #[test]
    fn pairing_linear_in_v_and_zero_for_critical() {
        let (geo, noise) = setup([1.0, 2.0, 3.0]);
        let u = critical_u(&geo, &noise, [1.0, 1.0, 1.0], 1e-3);
        let grid = u.times().to_vec();
        let dict = variation_dictionary(&grid).unwrap();
        for v in &dict {
            assert!(ep_pairing(&u, &noise, &geo, v).unwrap().abs() < 1e-8);
        }
        // Linearity: doubling v doubles the pairing for a non-critical drift.
        let u_const = ReducedTrajectory::constant(
            AlgebraVector::from_slice(&[1.0, 0.5, -0.4]).unwrap(),
            grid.clone(),
        )
        .unwrap();
        use std::f64::consts::PI;
        let v1 = VariationCurve::from_fns(
            &grid,
            |t| AlgebraVector::from_slice(&[(PI * t).sin(), 0.0, 0.0]).unwrap(),
            |t| AlgebraVector::from_slice(&[PI * (PI * t).cos(), 0.0, 0.0]).unwrap(),
        )
        .unwrap();
        let v2 = VariationCurve::from_fns(
            &grid,
            |t| AlgebraVector::from_slice(&[2.0 * (PI * t).sin(), 0.0, 0.0]).unwrap(),
            |t| AlgebraVector::from_slice(&[2.0 * PI * (PI * t).cos(), 0.0, 0.0]).unwrap(),
        )
        .unwrap();
        let p1 = ep_pairing(&u_const, &noise, &geo, &v1).unwrap();
        let p2 = ep_pairing(&u_const, &noise, &geo, &v2).unwrap();
        assert!((p2 - 2.0 * p1).abs() < 1e-12 * p1.abs().max(1.0));
    }

    #[test]
    fn agreement_error_shrinks_when_halving_eps_and_dt() {
        let (geo, noise) = setup([1.0, 2.0, 3.0]);
        // Plain central difference (no Richardson) exposes the O(eps^2) term.
        let plain_central = |u: &ReducedTrajectory, v: &VariationCurve, eps: f64| -> f64 {
            let plus = action(
                &perturbed_velocity(u, &noise, &geo, v, eps).unwrap(),
                &geo,
                Quadrature::Simpson,
            );
            let minus = action(
                &perturbed_velocity(u, &noise, &geo, v, -eps).unwrap(),
                &geo,
                Quadrature::Simpson,
            );
            (plus - minus) / (2.0 * eps)
        };
        let gap_for = |dt: f64, eps: f64| -> f64 {
            let u = integrate(
                |u| Ok(ep_rhs(u, &noise, &geo)?.scale(0.6)),
                AlgebraVector::from_slice(&[0.9, -0.5, 1.2]).unwrap(),
                uniform_grid(1.0, dt).unwrap(),
            )
            .unwrap();
            let v = variation_dictionary(u.times()).unwrap().remove(6);
            (plain_central(&u, &v, eps) - ep_pairing(&u, &noise, &geo, &v).unwrap()).abs()
        };
        // Halving eps at fixed dt: second-order truncation, ~4x reduction.
        let e_coarse = gap_for(1e-3, 4e-2);
        let e_fine = gap_for(1e-3, 2e-2);
        let eps_ratio = e_coarse / e_fine;
        assert!(
            (3.0..6.0).contains(&eps_ratio),
            "eps halving ratio {eps_ratio} ({e_coarse} -> {e_fine})"
        );
        // Halving dt at small fixed eps: the grid error drops at least at
        // second order (faster here, the derivative stencil is fourth order).
        let d_coarse = gap_for(8e-3, 1e-4);
        let d_fine = gap_for(4e-3, 1e-4);
        assert!(
            d_fine < d_coarse / 3.0,
            "dt halving did not shrink the gap: {d_coarse} -> {d_fine}"
        );
    }

    #[test]
    fn right_invariant_criticality_mirrors_left() {
        let geo = so3::levi_civita_geometry([1.0, 2.0, 3.0], Invariance::Right).unwrap();
        let noise = so3::orthonormal_noise([1.0, 2.0, 3.0], 1.0).unwrap();
        let u = integrate(
            |u| ep_rhs(u, &noise, &geo),
            AlgebraVector::from_slice(&[1.0, 1.0, 1.0]).unwrap(),
            uniform_grid(1.0, 1e-3).unwrap(),
        )
        .unwrap();
        let dict = variation_dictionary(u.times()).unwrap();
        for (i, v) in dict.iter().enumerate() {
            let fd = gateaux_derivative(&u, &noise, &geo, v, DEFAULT_EPS).unwrap();
            let pairing = ep_pairing(&u, &noise, &geo, v).unwrap();
            assert!(fd.abs() < 1e-6, "v{i}: dJ = {fd}");
            assert!((fd - pairing).abs() < 1e-6, "v{i}: {fd} vs {pairing}");
        }
        // Deliberately perturbed drift fails the criticality battery.
        let grid = u.times().to_vec();
        let bad = ReducedTrajectory::new(
            grid,
            u.states()
                .iter()
                .map(|s| s.add(&AlgebraVector::from_slice(&[0.05, 0.0, 0.0]).unwrap()))
                .collect(),
        )
        .unwrap();
        let max_dj = dict
            .iter()
            .map(|v| ep_pairing(&bad, &noise, &geo, v).unwrap().abs())
            .fold(0.0_f64, f64::max);
        assert!(max_dj > 1e-4, "perturbed drift slipped through: {max_dj}");
    }
}
