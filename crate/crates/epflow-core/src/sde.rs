//! Group-valued sampling: the rotation-matrix semimartingale driven by a
//! finite noise family, the weak generator consistency check, and the
//! perturbation flows used by the variational module.
//!
//! Stepping is geometric: each step multiplies by the Rodrigues exponential of
//! an algebra increment, so iterates stay orthogonal up to roundoff. The
//! Stratonovich limit is realized by a two-stage Heun update on the algebra
//! increment; because the noise directions are constant in the group variable
//! the predictor only averages the time dependence of the drift.
//!
//! Sampling is reproducible: sample j draws from its own ChaCha substream
//! keyed by (seed, j), increments ordered sample-major, then time, then noise
//! index, and aggregation is a pairwise reduction in sample order, so results
//! are bit-identical for a fixed seed regardless of thread count.

use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::algebra::{AlgebraVector, GeometrySpec, Invariance, NoiseBasis};
use crate::error::{CoreError, Result};
use crate::reduced::ReducedTrajectory;
use crate::so3::{hat, rotation_exp};

/// Orthogonality defect above which a path element is polar-projected back
/// onto the rotation group.
pub const ORTHOGONALITY_TOL: f64 = 1e-9;

/// A rotation matrix with its group invariants checked on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement {
    matrix: Matrix3<f64>,
}

impl GroupElement {
    pub fn identity() -> Self {
        Self {
            matrix: Matrix3::identity(),
        }
    }

    pub fn new(matrix: Matrix3<f64>) -> Result<Self> {
        let defect = orthogonality_defect(&matrix);
        if !defect.is_finite() || defect > ORTHOGONALITY_TOL {
            return Err(CoreError::InvalidParameter(format!(
                "matrix is not a rotation: orthogonality defect {defect:.3e}"
            )));
        }
        if matrix.determinant() <= 0.0 {
            return Err(CoreError::InvalidParameter(
                "matrix has non-positive determinant".into(),
            ));
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.matrix
    }

    pub fn orthogonality_defect(&self) -> f64 {
        orthogonality_defect(&self.matrix)
    }
}

pub fn orthogonality_defect(m: &Matrix3<f64>) -> f64 {
    (m.transpose() * m - Matrix3::identity()).abs().max()
}

/// Closest rotation in the polar sense, via SVD.
fn polar_project(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd with u");
    let vt = svd.v_t.expect("svd with v_t");
    let mut r = u * vt;
    if r.determinant() < 0.0 {
        let mut u_fixed = u;
        u_fixed.column_mut(2).neg_mut();
        r = u_fixed * vt;
    }
    r
}

/// Seeded collection of group-valued sample paths on a common grid.
#[derive(Clone, Debug)]
pub struct PathEnsemble {
    pub seed: u64,
    pub step: f64,
    pub times: Vec<f64>,
    /// paths[sample][node]
    pub paths: Vec<Vec<GroupElement>>,
    /// Number of polar re-projections performed across all samples. Nonzero
    /// values point at integrator trouble; the exponential scheme should stay
    /// orthogonal on its own.
    pub projection_count: u64,
}

impl PathEnsemble {
    pub fn n_samples(&self) -> usize {
        self.paths.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.times.len()
    }
}

/// Simulation switches. `omit_contraction` drops the Stratonovich compensator
/// from the drift, deliberately mis-specifying the dynamics; the generator
/// check must detect this (negative control).
#[derive(Clone, Copy, Debug, Default)]
pub struct SimOptions {
    pub omit_contraction: bool,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Independent substream seed for one sample of one ensemble.
fn substream_seed(seed: u64, sample: u64) -> u64 {
    splitmix64(seed ^ splitmix64(sample.wrapping_add(0x517c_c1b7_2722_0a95)))
}

struct StepPlan {
    times: Vec<f64>,
    drift: Vec<Vector3<f64>>, // Heun-averaged drift per step
    noise: Vec<Vector3<f64>>,
}

fn plan_steps(
    u: &ReducedTrajectory,
    noise: &NoiseBasis,
    geo: &GeometrySpec,
    h: f64,
    opts: SimOptions,
) -> Result<StepPlan> {
    if geo.dim() != 3 {
        return Err(CoreError::DimensionMismatch(
            "group simulation requires a three-dimensional algebra".into(),
        ));
    }
    let grid = u.times();
    if grid.len() < 2 {
        return Err(CoreError::InvalidParameter(
            "drift trajectory needs at least two nodes".into(),
        ));
    }
    let spacing = grid[1] - grid[0];
    if !grid
        .windows(2)
        .all(|w| ((w[1] - w[0]) - spacing).abs() < 1e-12)
    {
        return Err(CoreError::InvalidParameter(
            "drift trajectory grid must be uniform".into(),
        ));
    }
    if !h.is_finite() || h <= 0.0 {
        return Err(CoreError::InvalidParameter("step must be positive".into()));
    }
    let per = (spacing / h).round() as usize;
    if per == 0 || (per as f64 * h - spacing).abs() > 1e-9 * spacing {
        return Err(CoreError::InvalidParameter(format!(
            "step h = {h} does not divide the grid spacing {spacing}"
        )));
    }
    let n_steps = per * (grid.len() - 1);
    let t0 = grid[0];
    let times: Vec<f64> = (0..=n_steps).map(|i| t0 + i as f64 * h).collect();
    let contraction = geo.contraction(noise);
    let body_drift = |t: f64| -> Result<Vector3<f64>> {
        let mut b = u.sample(t);
        if !opts.omit_contraction {
            b = b.sub(&contraction.scale(0.5));
        }
        b.to_vector3()
    };
    let mut drift = Vec::with_capacity(n_steps);
    for i in 0..n_steps {
        let bl = body_drift(times[i])?;
        let br = body_drift(times[i + 1])?;
        drift.push(0.5 * (bl + br));
    }
    let noise_vecs = noise
        .vectors()
        .iter()
        .map(|v| v.to_vector3())
        .collect::<Result<Vec<_>>>()?;
    Ok(StepPlan {
        times,
        drift,
        noise: noise_vecs,
    })
}

/// Sample `n_samples` group paths of the semimartingale with drift curve `u`
/// and noise family `noise`, stepping geometrically with step `h`.
pub fn simulate(
    u: &ReducedTrajectory,
    noise: &NoiseBasis,
    geo: &GeometrySpec,
    n_samples: usize,
    seed: u64,
    h: f64,
) -> Result<PathEnsemble> {
    simulate_with_options(u, noise, geo, n_samples, seed, h, SimOptions::default())
}

pub fn simulate_with_options(
    u: &ReducedTrajectory,
    noise: &NoiseBasis,
    geo: &GeometrySpec,
    n_samples: usize,
    seed: u64,
    h: f64,
    opts: SimOptions,
) -> Result<PathEnsemble> {
    let plan = plan_steps(u, noise, geo, h, opts)?;
    let side = geo.side();
    let sqrt_h = h.sqrt();
    let results: Vec<Result<(Vec<GroupElement>, u64)>> = (0..n_samples)
        .into_par_iter()
        .map(|sample| {
            let mut rng = ChaCha8Rng::seed_from_u64(substream_seed(seed, sample as u64));
            let mut path = Vec::with_capacity(plan.times.len());
            let mut projections = 0u64;
            let mut g = Matrix3::<f64>::identity();
            path.push(GroupElement { matrix: g });
            for (step, b) in plan.drift.iter().enumerate() {
                let mut xi = *b * h;
                for hvec in &plan.noise {
                    let dw: f64 = StandardNormal.sample(&mut rng);
                    xi += hvec * (dw * sqrt_h);
                }
                if !xi.iter().all(|x| x.is_finite()) {
                    return Err(CoreError::NonFinite {
                        step,
                        context: "sde increment".into(),
                    });
                }
                let e = rotation_exp(&xi);
                g = match side {
                    Invariance::Left => g * e,
                    Invariance::Right => e * g,
                };
                if orthogonality_defect(&g) > ORTHOGONALITY_TOL {
                    g = polar_project(&g);
                    projections += 1;
                }
                if !g.iter().all(|x| x.is_finite()) {
                    return Err(CoreError::NonFinite {
                        step,
                        context: "sde path".into(),
                    });
                }
                path.push(GroupElement { matrix: g });
            }
            Ok((path, projections))
        })
        .collect();
    let mut paths = Vec::with_capacity(n_samples);
    let mut projection_count = 0u64;
    for r in results {
        let (path, projections) = r?;
        paths.push(path);
        projection_count += projections;
    }
    Ok(PathEnsemble {
        seed,
        step: h,
        times: plan.times,
        paths,
        projection_count,
    })
}

/// Linear matrix functional f_M(g) = trace(M g). Closed under the left-invariant
/// derivatives, which keeps the generator check analytic.
#[derive(Clone, Debug)]
pub struct TestFunction {
    pub name: String,
    pub m: Matrix3<f64>,
}

impl TestFunction {
    pub fn trace() -> Self {
        Self {
            name: "trace".into(),
            m: Matrix3::identity(),
        }
    }

    pub fn linear(name: impl Into<String>, m: Matrix3<f64>) -> Self {
        Self {
            name: name.into(),
            m,
        }
    }

    pub fn eval(&self, g: &Matrix3<f64>) -> f64 {
        (self.m * g).trace()
    }
}

/// Outcome of the weak generator comparison.
#[derive(Clone, Debug, Serialize)]
pub struct GeneratorReport {
    pub f: String,
    pub h: f64,
    pub n: usize,
    pub steps: usize,
    /// Ensemble mean of [f(g_{t+h}) - f(g_t)] / h.
    pub estimate: f64,
    /// Ensemble mean of the analytic generator at g_t.
    pub analytic: f64,
    /// Standard error of the estimate - analytic gap, from the spread of the
    /// per-sample path means (samples are the i.i.d. units).
    pub stderr: f64,
    pub z: f64,
    /// False when the ensemble is too small for the requested confidence;
    /// callers must not treat the z-score as meaningful then.
    pub sufficient: bool,
}

/// Compare the empirical forward difference of f along the ensemble with the
/// analytic generator
///
/// L f(g) = 1/2 sum_i (H_i^L H_i^L f)(g) + (b(t)^L f)(g),   b = u - 1/2 sum_i nabla_{H_i} H_i,
///
/// where X^L f(g) = d/ds f(g exp(s hat X))|_0 on the left side and the mirror
/// on the right side. Reports the coupled z-score.
pub fn weak_generator_check(
    ens: &PathEnsemble,
    f: &TestFunction,
    u: &ReducedTrajectory,
    noise: &NoiseBasis,
    geo: &GeometrySpec,
    min_samples: usize,
) -> Result<GeneratorReport> {
    if ens.paths.is_empty() || ens.times.len() < 2 {
        return Err(CoreError::InvalidParameter(
            "ensemble has no increments to check".into(),
        ));
    }
    let side = geo.side();
    let h = ens.step;
    let hats: Vec<Matrix3<f64>> = noise
        .vectors()
        .iter()
        .map(|v| Ok(hat(&v.to_vector3()?)))
        .collect::<Result<Vec<_>>>()?;
    let hess_sum: Matrix3<f64> = hats
        .iter()
        .map(|hk| hk * hk)
        .fold(Matrix3::zeros(), |acc, m| acc + m);
    let contraction = geo.contraction(noise);
    let n_steps = ens.times.len() - 1;
    let drift_hats: Vec<Matrix3<f64>> = (0..n_steps)
        .map(|n| {
            let b = u.sample(ens.times[n]).sub(&contraction.scale(0.5));
            Ok(hat(&b.to_vector3()?))
        })
        .collect::<Result<Vec<_>>>()?;

    // Per-sample path means; samples are the i.i.d. units of the estimator,
    // reduced pairwise in sample order below.
    let per_sample: Vec<(f64, f64, f64)> = ens
        .paths
        .par_iter()
        .map(|path| {
            let mut s_est = 0.0;
            let mut s_gen = 0.0;
            for n in 0..n_steps {
                let g = path[n].matrix();
                let fdiff = (f.eval(path[n + 1].matrix()) - f.eval(g)) / h;
                let gen = match side {
                    // X^L f = tr(M g hat X); X^R f = tr(M hat X g).
                    Invariance::Left => {
                        0.5 * (f.m * g * hess_sum).trace() + (f.m * g * drift_hats[n]).trace()
                    }
                    Invariance::Right => {
                        0.5 * (f.m * hess_sum * g).trace() + (f.m * drift_hats[n] * g).trace()
                    }
                };
                s_est += fdiff;
                s_gen += gen;
            }
            let k = n_steps as f64;
            (s_est / k, s_gen / k, (s_est - s_gen) / k)
        })
        .collect();

    let n_samples = ens.paths.len() as f64;
    let est = pairwise_sum(&per_sample.iter().map(|t| t.0).collect::<Vec<_>>()) / n_samples;
    let gen = pairwise_sum(&per_sample.iter().map(|t| t.1).collect::<Vec<_>>()) / n_samples;
    let mean_d = pairwise_sum(&per_sample.iter().map(|t| t.2).collect::<Vec<_>>()) / n_samples;
    let var = if ens.paths.len() > 1 {
        let ss = pairwise_sum(
            &per_sample
                .iter()
                .map(|t| (t.2 - mean_d) * (t.2 - mean_d))
                .collect::<Vec<_>>(),
        );
        (ss / (n_samples - 1.0)).max(0.0)
    } else {
        0.0
    };
    let stderr = (var / n_samples).sqrt();
    let z = if stderr > 0.0 { mean_d / stderr } else { 0.0 };
    Ok(GeneratorReport {
        f: f.name.clone(),
        h,
        n: ens.paths.len(),
        steps: n_steps,
        estimate: est,
        analytic: gen,
        stderr,
        z,
        sufficient: ens.paths.len() >= min_samples,
    })
}

/// Deterministic pairwise summation over a slice.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// A C^1 curve v on [0,1] with v(0) = v(1) = 0, sampled together with its
/// derivative at grid nodes and interval midpoints so the RK4 stages of the
/// perturbation flow need no interpolation.
#[derive(Clone, Debug)]
pub struct VariationCurve {
    node_times: Vec<f64>,
    /// 2N+1 samples: node, midpoint, node, ...
    values: Vec<AlgebraVector>,
    derivs: Vec<AlgebraVector>,
}

impl VariationCurve {
    pub fn from_fns(
        grid: &[f64],
        value: impl Fn(f64) -> AlgebraVector,
        deriv: impl Fn(f64) -> AlgebraVector,
    ) -> Result<Self> {
        if grid.len() < 2 || !grid.windows(2).all(|w| w[1] > w[0]) {
            return Err(CoreError::InvalidParameter(
                "variation curve needs a strictly increasing grid".into(),
            ));
        }
        let mut values = Vec::with_capacity(2 * grid.len() - 1);
        let mut derivs = Vec::with_capacity(2 * grid.len() - 1);
        for (i, &t) in grid.iter().enumerate() {
            values.push(value(t));
            derivs.push(deriv(t));
            if i + 1 < grid.len() {
                let tm = 0.5 * (t + grid[i + 1]);
                values.push(value(tm));
                derivs.push(deriv(tm));
            }
        }
        let dim = values[0].dim();
        // Endpoint values must vanish; snap exact zeros after checking the
        // supplied curve is genuinely zero there up to roundoff.
        for idx in [0, values.len() - 1] {
            if values[idx].norm_inf() > 1e-12 {
                return Err(CoreError::InvalidParameter(
                    "variation curve must vanish at both endpoints".into(),
                ));
            }
            values[idx] = AlgebraVector::zeros(dim);
        }
        Ok(Self {
            node_times: grid.to_vec(),
            values,
            derivs,
        })
    }

    pub fn zero(grid: &[f64], dim: usize) -> Result<Self> {
        Self::from_fns(
            grid,
            |_| AlgebraVector::zeros(dim),
            |_| AlgebraVector::zeros(dim),
        )
    }

    pub fn grid(&self) -> &[f64] {
        &self.node_times
    }

    pub fn n_nodes(&self) -> usize {
        self.node_times.len()
    }

    pub fn value_at_node(&self, n: usize) -> &AlgebraVector {
        &self.values[2 * n]
    }

    pub fn deriv_at_node(&self, n: usize) -> &AlgebraVector {
        &self.derivs[2 * n]
    }

    pub fn deriv_at_mid(&self, n: usize) -> &AlgebraVector {
        &self.derivs[2 * n + 1]
    }
}

/// The fixed ten-curve falsification dictionary: sinusoids sin(pi n t) along
/// single axes and diagonal directions, n = 1..5, vanishing at both endpoints.
pub fn variation_dictionary(grid: &[f64]) -> Result<Vec<VariationCurve>> {
    use std::f64::consts::PI;
    let sqrt2 = std::f64::consts::SQRT_2;
    let sqrt3 = 3.0_f64.sqrt();
    let entries: [(f64, [f64; 3]); 10] = [
        (1.0, [1.0, 0.0, 0.0]),
        (1.0, [0.0, 1.0, 0.0]),
        (1.0, [0.0, 0.0, 1.0]),
        (2.0, [1.0, 0.0, 0.0]),
        (2.0, [0.0, 1.0, 0.0]),
        (2.0, [0.0, 0.0, 1.0]),
        (3.0, [1.0 / sqrt2, 1.0 / sqrt2, 0.0]),
        (3.0, [0.0, 1.0 / sqrt2, 1.0 / sqrt2]),
        (4.0, [1.0 / sqrt2, 0.0, 1.0 / sqrt2]),
        (5.0, [1.0 / sqrt3, 1.0 / sqrt3, 1.0 / sqrt3]),
    ];
    entries
        .iter()
        .map(|(n, dir)| {
            let dir = *dir;
            let n = *n;
            VariationCurve::from_fns(
                grid,
                move |t| {
                    let s = (PI * n * t).sin();
                    AlgebraVector::from_slice(&[dir[0] * s, dir[1] * s, dir[2] * s]).unwrap()
                },
                move |t| {
                    let c = PI * n * (PI * n * t).cos();
                    AlgebraVector::from_slice(&[dir[0] * c, dir[1] * c, dir[2] * c]).unwrap()
                },
            )
        })
        .collect()
}

/// Flow e(t) generated by eps * v: solves de/dt = eps e hat(vdot) (left side)
/// or de/dt = eps hat(vdot) e (right side) with e(0) = Id, by RK4 on the grid.
pub fn perturbation_flow(
    v: &VariationCurve,
    eps: f64,
    side: Invariance,
) -> Result<Vec<GroupElement>> {
    if !eps.is_finite() || eps.abs() > 0.1 {
        return Err(CoreError::InvalidParameter(format!(
            "|eps| must be at most 0.1, got {eps}"
        )));
    }
    let grid = v.grid();
    let mut out = Vec::with_capacity(grid.len());
    let mut e = Matrix3::<f64>::identity();
    out.push(GroupElement { matrix: e });
    let apply = |m: &Matrix3<f64>, w: &AlgebraVector| -> Result<Matrix3<f64>> {
        let hw = hat(&w.to_vector3()?);
        Ok(match side {
            Invariance::Left => m * hw * eps,
            Invariance::Right => hw * m * eps,
        })
    };
    for n in 0..grid.len() - 1 {
        let h = grid[n + 1] - grid[n];
        let w0 = v.deriv_at_node(n);
        let wm = v.deriv_at_mid(n);
        let w1 = v.deriv_at_node(n + 1);
        let k1 = apply(&e, w0)?;
        let k2 = apply(&(e + k1 * (0.5 * h)), wm)?;
        let k3 = apply(&(e + k2 * (0.5 * h)), wm)?;
        let k4 = apply(&(e + k3 * h), w1)?;
        e += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        let defect = orthogonality_defect(&e);
        if !defect.is_finite() || defect > ORTHOGONALITY_TOL {
            return Err(CoreError::NonFinite {
                step: n,
                context: format!("perturbation flow lost orthogonality ({defect:.3e})"),
            });
        }
        out.push(GroupElement { matrix: e });
    }
    Ok(out)
}
