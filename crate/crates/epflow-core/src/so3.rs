//! so(3) specifics: the hat/vee maps, the basis structure constants, the
//! diagonal inertia metrics and their Levi-Civita connections, and the
//! Rodrigues matrix exponential used by the group-level integrators.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::algebra::{AlgebraVector, GeometrySpec, Invariance, NoiseBasis, Tensor3};
use crate::error::{CoreError, Result};

/// Hat map: coordinates (v1, v2, v3) to the skew matrix with v eta = v x eta.
pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(
        0.0, -v.z, v.y, //
        v.z, 0.0, -v.x, //
        -v.y, v.x, 0.0,
    )
}

/// Vee map: reads the coordinates back out of a skew matrix. Exact inverse of [`hat`].
pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// Structure constants of the basis relations [E1,E2]=E3, [E2,E3]=E1, [E3,E1]=E2,
/// scaled by `sign`. Left-invariant geometries store `sign = +1`; right-invariant
/// ones store `sign = -1` because right-invariant extensions bracket to the
/// negative of the matrix commutator.
pub fn structure_constants(sign: f64) -> Tensor3 {
    let mut c = Tensor3::zeros(3);
    for (a, b, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
        c.set(a, b, k, sign);
        c.set(b, a, k, -sign);
    }
    c
}

fn inertia_gram(inertia: [f64; 3]) -> Result<DMatrix<f64>> {
    if inertia.iter().any(|x| !x.is_finite() || *x <= 0.0) {
        return Err(CoreError::InvalidParameter(
            "inertia entries must be positive and finite".into(),
        ));
    }
    Ok(DMatrix::from_diagonal(&DVector::from_column_slice(
        &inertia,
    )))
}

fn side_structure(side: Invariance) -> Tensor3 {
    structure_constants(side.sign())
}

/// Diagonal inertia metric with its own Levi-Civita connection.
pub fn levi_civita_geometry(inertia: [f64; 3], side: Invariance) -> Result<GeometrySpec> {
    GeometrySpec::levi_civita(inertia_gram(inertia)?, side_structure(side), side)
}

/// Metric from `inertia_metric` paired with the Levi-Civita connection of
/// `inertia_connection`. The two may differ; the pair is then not metric-compatible.
pub fn mixed_geometry(
    inertia_metric: [f64; 3],
    inertia_connection: [f64; 3],
    side: Invariance,
) -> Result<GeometrySpec> {
    let conn = GeometrySpec::levi_civita(
        inertia_gram(inertia_connection)?,
        side_structure(side),
        side,
    )?;
    GeometrySpec::new(
        inertia_gram(inertia_metric)?,
        conn.christoffel().clone(),
        side_structure(side),
        side,
    )
}

/// Noise directions H_i = scale * E_i / sqrt(I_i): orthonormal in the inertia
/// metric when `scale = 1`, empty when `scale = 0`.
pub fn orthonormal_noise(inertia: [f64; 3], scale: f64) -> Result<NoiseBasis> {
    if scale == 0.0 {
        return NoiseBasis::new(Vec::new());
    }
    let mut vectors = Vec::with_capacity(3);
    for (i, ii) in inertia.iter().enumerate() {
        if !ii.is_finite() || *ii <= 0.0 {
            return Err(CoreError::InvalidParameter(
                "inertia entries must be positive".into(),
            ));
        }
        vectors.push(AlgebraVector::basis(3, i).scale(scale / ii.sqrt()));
    }
    NoiseBasis::new(vectors)
}

/// Closed-form Levi-Civita table for the diagonal inertia metric, used as an
/// oracle against the Koszul construction:
///
/// nabla_{E1} E2 = 1/2 (1 + (I2 - I1)/I3) E3,  nabla_{E2} E1 = 1/2 (-1 + (I2 - I1)/I3) E3,
///
/// and cyclic permutations; diagonal entries vanish.
pub fn connection_closed_form(inertia: [f64; 3]) -> Tensor3 {
    let [i1, i2, i3] = inertia;
    let mut t = Tensor3::zeros(3);
    t.set(0, 1, 2, 0.5 * (1.0 + (i2 - i1) / i3));
    t.set(1, 0, 2, 0.5 * (-1.0 + (i2 - i1) / i3));
    t.set(1, 2, 0, 0.5 * (1.0 + (i3 - i2) / i1));
    t.set(2, 1, 0, 0.5 * (-1.0 + (i3 - i2) / i1));
    t.set(2, 0, 1, 0.5 * (1.0 + (i1 - i3) / i2));
    t.set(0, 2, 1, 0.5 * (-1.0 + (i1 - i3) / i2));
    t
}

/// Rodrigues exponential exp(hat(w)): orthogonal to machine precision, with a
/// series branch for small angles.
pub fn rotation_exp(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = w.norm_squared();
    let k = hat(w);
    let k2 = k * k;
    let (a, b) = if theta2 < 1e-8 {
        // sin(t)/t and (1-cos(t))/t^2 by series; accurate to ~1e-16 here.
        (
            1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0,
            0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0,
        )
    } else {
        let theta = theta2.sqrt();
        ((theta.sin()) / theta, (1.0 - theta.cos()) / theta2)
    };
    Matrix3::identity() + k * a + k2 * b
}
