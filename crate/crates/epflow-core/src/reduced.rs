//! Reduced critical-point dynamics on the algebra: the drift equation
//!
//! du/dt = +- (ad*_{u - 1/2 sum_i nabla_{H_i} H_i} u + K(u))
//!
//! (positive sign for left invariance, negative for right), the closed-form
//! dissipative rigid-body system used as its oracle, and a fixed-step RK4
//! integrator over the unit time horizon.

use crate::algebra::{AlgebraVector, GeometrySpec, NoiseBasis};
use crate::error::{CoreError, Result};

/// Time grid plus algebra-valued states, one per node.
#[derive(Clone, Debug)]
pub struct ReducedTrajectory {
    times: Vec<f64>,
    states: Vec<AlgebraVector>,
}

impl ReducedTrajectory {
    pub fn new(times: Vec<f64>, states: Vec<AlgebraVector>) -> Result<Self> {
        if times.len() != states.len() {
            return Err(CoreError::DimensionMismatch(
                "trajectory times and states differ in length".into(),
            ));
        }
        if times.is_empty() {
            return Err(CoreError::InvalidParameter("empty trajectory".into()));
        }
        if !times.windows(2).all(|w| w[1] > w[0]) {
            return Err(CoreError::InvalidParameter(
                "trajectory grid must be strictly increasing".into(),
            ));
        }
        if let Some((step, _)) = states.iter().enumerate().find(|(_, s)| !s.is_finite()) {
            return Err(CoreError::NonFinite {
                step,
                context: "trajectory state".into(),
            });
        }
        Ok(Self { times, states })
    }

    /// Constant curve u(t) = u0 on the given grid.
    pub fn constant(u0: AlgebraVector, times: Vec<f64>) -> Result<Self> {
        let states = vec![u0; times.len()];
        Self::new(times, states)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[AlgebraVector] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, node: usize) -> &AlgebraVector {
        &self.states[node]
    }

    /// Linear interpolation between nodes; exact at nodes, clamped outside.
    pub fn sample(&self, t: f64) -> AlgebraVector {
        let times = &self.times;
        if t <= times[0] {
            return self.states[0].clone();
        }
        if t >= *times.last().unwrap() {
            return self.states.last().unwrap().clone();
        }
        let idx = match times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => return self.states[i].clone(),
            Err(i) => i - 1,
        };
        let (t0, t1) = (times[idx], times[idx + 1]);
        let w = (t - t0) / (t1 - t0);
        self.states[idx]
            .scale(1.0 - w)
            .add(&self.states[idx + 1].scale(w))
    }
}

/// Uniform grid 0, dt, 2 dt, ..., covering [0, t_end].
pub fn uniform_grid(t_end: f64, dt: f64) -> Result<Vec<f64>> {
    if !t_end.is_finite() || t_end <= 0.0 || !dt.is_finite() || dt <= 0.0 {
        return Err(CoreError::InvalidParameter(
            "grid requires positive finite t_end and dt".into(),
        ));
    }
    let n = (t_end / dt).round() as usize;
    if n == 0 || ((n as f64) * dt - t_end).abs() > 1e-9 * t_end.max(1.0) {
        return Err(CoreError::InvalidParameter(format!(
            "dt = {dt} does not divide t_end = {t_end}"
        )));
    }
    Ok((0..=n).map(|i| i as f64 * dt).collect())
}

/// Right side of the reduced equation with the invariance-side sign applied.
pub fn ep_rhs(u: &AlgebraVector, noise: &NoiseBasis, geo: &GeometrySpec) -> Result<AlgebraVector> {
    let u_tilde = u.sub(&geo.contraction(noise).scale(0.5));
    let advection = geo.ad_star(&u_tilde, u)?;
    let dissipation = geo.k_operator(u, noise)?;
    Ok(advection.add(&dissipation).scale(geo.side().sign()))
}

/// Closed-form dissipative rigid-body right side,
///
/// I1 du1/dt = (I2 - I3) u2 u3 - (I2 - I3)^2 / (2 I2 I3) u1,
///
/// and cyclic permutations, divided componentwise by the inertia. Independent
/// of the generic geometry machinery; serves as its oracle.
pub fn rigid_body_rhs(u: &AlgebraVector, inertia: [f64; 3]) -> Result<AlgebraVector> {
    if inertia.iter().any(|x| !x.is_finite() || *x <= 0.0) {
        return Err(CoreError::InvalidParameter(
            "inertia entries must be positive".into(),
        ));
    }
    if u.dim() != 3 {
        return Err(CoreError::DimensionMismatch(
            "rigid body state must have dimension 3".into(),
        ));
    }
    let [i1, i2, i3] = inertia;
    let s = u.as_slice();
    let (u1, u2, u3) = (s[0], s[1], s[2]);
    AlgebraVector::from_slice(&[
        ((i2 - i3) * u2 * u3 - (i2 - i3).powi(2) / (2.0 * i2 * i3) * u1) / i1,
        ((i3 - i1) * u3 * u1 - (i3 - i1).powi(2) / (2.0 * i1 * i3) * u2) / i2,
        ((i1 - i2) * u1 * u2 - (i1 - i2).powi(2) / (2.0 * i1 * i2) * u3) / i3,
    ])
}

/// Classical fixed-step RK4 over the supplied grid.
pub fn integrate(
    rhs: impl Fn(&AlgebraVector) -> Result<AlgebraVector>,
    u0: AlgebraVector,
    times: Vec<f64>,
) -> Result<ReducedTrajectory> {
    if times.len() < 2 {
        return Err(CoreError::InvalidParameter(
            "integration grid needs at least two nodes".into(),
        ));
    }
    let mut states = Vec::with_capacity(times.len());
    let mut u = u0;
    states.push(u.clone());
    for step in 0..times.len() - 1 {
        let h = times[step + 1] - times[step];
        let k1 = rhs(&u)?;
        let k2 = rhs(&u.add(&k1.scale(0.5 * h)))?;
        let k3 = rhs(&u.add(&k2.scale(0.5 * h)))?;
        let k4 = rhs(&u.add(&k3.scale(h)))?;
        let incr = k1
            .add(&k2.scale(2.0))
            .add(&k3.scale(2.0))
            .add(&k4)
            .scale(h / 6.0);
        u = u.add(&incr);
        if !u.is_finite() {
            return Err(CoreError::NonFinite {
                step,
                context: "reduced integration".into(),
            });
        }
        states.push(u.clone());
    }
    ReducedTrajectory::new(times, states)
}

/// Kinetic energy 1/2 <u, u> in the geometry's metric.
pub fn kinetic_energy(u: &AlgebraVector, geo: &GeometrySpec) -> f64 {
    0.5 * geo.inner(u, u)
}
