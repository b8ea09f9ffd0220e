//! Basis-level machinery for an invariant metric/connection pair on a Lie algebra.
//!
//! Everything here is expressed against a fixed basis {E_a}: elements are
//! coordinate vectors, the metric is a Gram matrix, the connection is a dense
//! Christoffel table and the bracket a structure-constant table. With that
//! representation the adjoint `ad*`, the noise contraction and the dissipative
//! operator `K` are all finite linear solves against the Gram matrix, exact up
//! to roundoff.
//!
//! Invariance side conventions: the stored structure constants are the bracket
//! of the corresponding invariant vector fields, which is what the Koszul
//! formula, the torsion identity and the curvature tensor consume. For a
//! right-invariant structure that vector-field bracket is the negative of the
//! matrix commutator, so `ad` (the bracket entering the reduced equation and
//! the `K` pairing) is `+structure` on the left side and `-structure` on the
//! right side. Constructors in [`crate::so3`] store the appropriate table for
//! each side; both sides are validated against their closed forms in tests.

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Tolerance for exact-algebra identities in dimension three.
pub const EXACT_TOL: f64 = 1e-12;

/// Coordinates of a Lie algebra element in the fixed basis {E_a}.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraVector {
    coords: DVector<f64>,
}

impl AlgebraVector {
    pub fn new(coords: DVector<f64>) -> Result<Self> {
        if !coords.iter().all(|x| x.is_finite()) {
            return Err(CoreError::InvalidParameter(
                "algebra vector has non-finite entries".into(),
            ));
        }
        Ok(Self { coords })
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            coords: DVector::zeros(dim),
        }
    }

    /// The basis element E_a as a coordinate vector.
    pub fn basis(dim: usize, a: usize) -> Self {
        let mut coords = DVector::zeros(dim);
        coords[a] = 1.0;
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn as_slice(&self) -> &[f64] {
        self.coords.as_slice()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            coords: &self.coords * s,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim(), other.dim());
        Self {
            coords: &self.coords + &other.coords,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.dim(), other.dim());
        Self {
            coords: &self.coords - &other.coords,
        }
    }

    pub fn norm(&self) -> f64 {
        self.coords.norm()
    }

    pub fn norm_inf(&self) -> f64 {
        self.coords.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|x| x.is_finite())
    }

    /// View a three-dimensional element as a fixed-size vector.
    pub fn to_vector3(&self) -> Result<Vector3<f64>> {
        if self.dim() != 3 {
            return Err(CoreError::DimensionMismatch(format!(
                "expected dimension 3, got {}",
                self.dim()
            )));
        }
        Ok(Vector3::new(self.coords[0], self.coords[1], self.coords[2]))
    }

    pub fn from_vector3(v: &Vector3<f64>) -> Self {
        Self {
            coords: DVector::from_column_slice(v.as_slice()),
        }
    }
}

/// The finite family {H_i} of noise directions. May be empty (deterministic case).
#[derive(Clone, Debug, Default)]
pub struct NoiseBasis {
    vectors: Vec<AlgebraVector>,
}

impl NoiseBasis {
    pub fn new(vectors: Vec<AlgebraVector>) -> Result<Self> {
        if let Some(first) = vectors.first() {
            let dim = first.dim();
            if vectors.iter().any(|v| v.dim() != dim) {
                return Err(CoreError::DimensionMismatch(
                    "noise vectors have mixed dimensions".into(),
                ));
            }
        }
        Ok(Self { vectors })
    }

    pub fn empty() -> Self {
        Self {
            vectors: Vec::new(),
        }
    }

    pub fn vectors(&self) -> &[AlgebraVector] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Dense rank-3 table indexed as `[a][b][c]`.
///
/// Christoffel use: nabla_{E_a} E_b = sum_c table[a][b][c] E_c.
/// Structure use: [E_a, E_b] = sum_c table[a][b][c] E_c.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    dim: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(dim);
        for a in 0..dim {
            for b in 0..dim {
                for c in 0..dim {
                    t.set(a, b, c, f(a, b, c));
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[(a * self.dim + b) * self.dim + c]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, c: usize, value: f64) {
        self.data[(a * self.dim + b) * self.dim + c] = value;
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    /// Bilinear contraction sum_{a,b} table[a][b][.] x_a y_b.
    pub fn contract(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        for a in 0..self.dim {
            let xa = x[a];
            if xa == 0.0 {
                continue;
            }
            for b in 0..self.dim {
                let xy = xa * y[b];
                if xy == 0.0 {
                    continue;
                }
                for c in 0..self.dim {
                    out[c] += self.get(a, b, c) * xy;
                }
            }
        }
        out
    }
}

/// Which group translation transports the metric and connection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Invariance {
    Left,
    Right,
}

impl Invariance {
    /// Sign relating `ad` to the stored structure bracket, and the overall
    /// sign of the reduced equation right side.
    pub fn sign(self) -> f64 {
        match self {
            Invariance::Left => 1.0,
            Invariance::Right => -1.0,
        }
    }
}

/// Metric Gram matrix, Christoffel table and structure constants on the
/// algebra basis. The metric/connection pair of the reduced variational
/// problem, with the invariance side selecting the sign conventions.
#[derive(Clone, Debug)]
pub struct GeometrySpec {
    gram: DMatrix<f64>,
    christoffel: Tensor3,
    structure: Tensor3,
    side: Invariance,
    levi_civita: bool,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl GeometrySpec {
    /// Assemble a geometry from explicit tables. The Christoffel table need
    /// not be the Levi-Civita one for `gram`.
    pub fn new(
        gram: DMatrix<f64>,
        christoffel: Tensor3,
        structure: Tensor3,
        side: Invariance,
    ) -> Result<Self> {
        let dim = gram.nrows();
        if gram.ncols() != dim || christoffel.dim() != dim || structure.dim() != dim {
            return Err(CoreError::DimensionMismatch(
                "gram, christoffel and structure tables must share one dimension".into(),
            ));
        }
        for a in 0..dim {
            for b in 0..dim {
                if (gram[(a, b)] - gram[(b, a)]).abs() > EXACT_TOL {
                    return Err(CoreError::InvalidParameter(
                        "gram matrix not symmetric".into(),
                    ));
                }
                for c in 0..dim {
                    if (structure.get(a, b, c) + structure.get(b, a, c)).abs() > EXACT_TOL {
                        return Err(CoreError::InvalidParameter(
                            "structure constants not antisymmetric".into(),
                        ));
                    }
                }
            }
        }
        let chol = nalgebra::Cholesky::new(gram.clone()).ok_or(CoreError::NotPositiveDefinite)?;
        Ok(Self {
            gram,
            christoffel,
            structure,
            side,
            levi_civita: false,
            chol,
        })
    }

    /// Levi-Civita connection of `gram` from the invariant Koszul formula
    ///
    /// 2 <nabla_X Y, Z> = <[X,Y],Z> - <[Y,Z],X> + <[Z,X],Y>
    ///
    /// evaluated on basis triples with the stored bracket.
    pub fn levi_civita(gram: DMatrix<f64>, structure: Tensor3, side: Invariance) -> Result<Self> {
        let dim = gram.nrows();
        let mut probe = Self::new(gram, Tensor3::zeros(dim), structure, side)?;
        let mut christoffel = Tensor3::zeros(dim);
        for a in 0..dim {
            let ea = AlgebraVector::basis(dim, a);
            for b in 0..dim {
                let eb = AlgebraVector::basis(dim, b);
                let mut rhs = DVector::zeros(dim);
                for c in 0..dim {
                    let ec = AlgebraVector::basis(dim, c);
                    let ab = probe.bracket(&ea, &eb)?;
                    let bc = probe.bracket(&eb, &ec)?;
                    let ca = probe.bracket(&ec, &ea)?;
                    rhs[c] = 0.5
                        * (probe.inner(&ab, &ec) - probe.inner(&bc, &ea) + probe.inner(&ca, &eb));
                }
                // gram * coeffs = rhs with rhs[c] = <nabla_{E_a} E_b, E_c>
                let coeffs = probe.chol.solve(&rhs);
                for c in 0..dim {
                    christoffel.set(a, b, c, coeffs[c]);
                }
            }
        }
        probe.christoffel = christoffel;
        probe.levi_civita = true;
        probe.validate_levi_civita()?;
        Ok(probe)
    }

    fn validate_levi_civita(&self) -> Result<()> {
        let dim = self.dim();
        for a in 0..dim {
            let ea = AlgebraVector::basis(dim, a);
            for b in 0..dim {
                let eb = AlgebraVector::basis(dim, b);
                // Torsion: nabla_X Y - nabla_Y X = [X, Y].
                let torsion = self
                    .covariant(&ea, &eb)
                    .sub(&self.covariant(&eb, &ea))
                    .sub(&self.bracket(&ea, &eb)?);
                if torsion.norm_inf() > EXACT_TOL {
                    return Err(CoreError::InvalidParameter(
                        "Koszul output violates the torsion identity".into(),
                    ));
                }
                // Metric compatibility on invariant fields: <nabla_X Y, Z> + <Y, nabla_X Z> = 0.
                for c in 0..dim {
                    let ec = AlgebraVector::basis(dim, c);
                    let compat = self.inner(&self.covariant(&ea, &eb), &ec)
                        + self.inner(&eb, &self.covariant(&ea, &ec));
                    if compat.abs() > EXACT_TOL {
                        return Err(CoreError::InvalidParameter(
                            "Koszul output violates metric compatibility".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn christoffel(&self) -> &Tensor3 {
        &self.christoffel
    }

    pub fn structure(&self) -> &Tensor3 {
        &self.structure
    }

    pub fn side(&self) -> Invariance {
        self.side
    }

    pub fn is_levi_civita(&self) -> bool {
        self.levi_civita
    }

    fn check_dim(&self, v: &AlgebraVector) -> Result<()> {
        if v.dim() != self.dim() {
            return Err(CoreError::DimensionMismatch(format!(
                "vector dimension {} does not match geometry dimension {}",
                v.dim(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Metric pairing <a, b> through the Gram matrix.
    pub fn inner(&self, a: &AlgebraVector, b: &AlgebraVector) -> f64 {
        (a.coords().transpose() * &self.gram * b.coords())[(0, 0)]
    }

    /// Structure bracket [a, b] from the stored constants.
    pub fn bracket(&self, a: &AlgebraVector, b: &AlgebraVector) -> Result<AlgebraVector> {
        self.check_dim(a)?;
        self.check_dim(b)?;
        Ok(AlgebraVector {
            coords: self.structure.contract(a.coords(), b.coords()),
        })
    }

    /// Adjoint action ad_a b entering the reduced equation: the stored bracket
    /// on the left-invariant side, its negative on the right-invariant side.
    pub fn ad(&self, a: &AlgebraVector, b: &AlgebraVector) -> Result<AlgebraVector> {
        Ok(self.bracket(a, b)?.scale(self.side.sign()))
    }

    /// Metric adjoint of `ad`: the unique w with <w, z> = <b, ad_a z> for all z.
    pub fn ad_star(&self, a: &AlgebraVector, b: &AlgebraVector) -> Result<AlgebraVector> {
        self.check_dim(a)?;
        self.check_dim(b)?;
        let dim = self.dim();
        // rhs[c] = <b, ad_a E_c>
        let mut rhs = DVector::zeros(dim);
        for c in 0..dim {
            let ec = AlgebraVector::basis(dim, c);
            rhs[c] = self.inner(b, &self.ad(a, &ec)?);
        }
        Ok(AlgebraVector {
            coords: self.chol.solve(&rhs),
        })
    }

    /// Covariant derivative nabla_a b through the Christoffel table.
    pub fn covariant(&self, a: &AlgebraVector, b: &AlgebraVector) -> AlgebraVector {
        AlgebraVector {
            coords: self.christoffel.contract(a.coords(), b.coords()),
        }
    }

    /// Noise contraction sum_i nabla_{H_i} H_i.
    pub fn contraction(&self, noise: &NoiseBasis) -> AlgebraVector {
        let mut acc = AlgebraVector::zeros(self.dim());
        for h in noise.vectors() {
            acc = acc.add(&self.covariant(h, h));
        }
        acc
    }

    /// Dissipative operator K defined by the pairing
    ///
    /// <K(u), v> = -<u, 1/2 sum_i (nabla_{ad_v H_i} H_i + nabla_{H_i} (ad_v H_i))>,
    ///
    /// solved for K(u) against the Gram matrix with v over the basis.
    pub fn k_operator(&self, u: &AlgebraVector, noise: &NoiseBasis) -> Result<AlgebraVector> {
        self.check_dim(u)?;
        let dim = self.dim();
        let mut rhs = DVector::zeros(dim);
        for a in 0..dim {
            let v = AlgebraVector::basis(dim, a);
            let mut sum = AlgebraVector::zeros(dim);
            for h in noise.vectors() {
                let adv_h = self.ad(&v, h)?;
                sum = sum
                    .add(&self.covariant(&adv_h, h))
                    .add(&self.covariant(h, &adv_h));
            }
            rhs[a] = -0.5 * self.inner(u, &sum);
        }
        Ok(AlgebraVector {
            coords: self.chol.solve(&rhs),
        })
    }

    /// Curvature tensor R(x, y)z = nabla_x nabla_y z - nabla_y nabla_x z - nabla_{[x,y]} z
    /// on invariant (constant-coordinate) fields.
    pub fn curvature(
        &self,
        x: &AlgebraVector,
        y: &AlgebraVector,
        z: &AlgebraVector,
    ) -> Result<AlgebraVector> {
        self.check_dim(x)?;
        self.check_dim(y)?;
        self.check_dim(z)?;
        let xyz = self.covariant(x, &self.covariant(y, z));
        let yxz = self.covariant(y, &self.covariant(x, z));
        let bxy = self.bracket(x, y)?;
        Ok(xyz.sub(&yxz).sub(&self.covariant(&bxy, z)))
    }

    /// Ricci action Ric(u) = sum_i R(u, b_i) b_i over a metric-orthonormal basis.
    pub fn ricci(&self, u: &AlgebraVector) -> Result<AlgebraVector> {
        let basis = self.orthonormal_basis();
        let mut acc = AlgebraVector::zeros(self.dim());
        for b in &basis {
            acc = acc.add(&self.curvature(u, b, b)?);
        }
        Ok(acc)
    }

    /// Rough Laplacian sum_i (nabla_{b_i} nabla_{b_i} u - nabla_{nabla_{b_i} b_i} u)
    /// over a metric-orthonormal basis.
    pub fn rough_laplacian(&self, u: &AlgebraVector) -> Result<AlgebraVector> {
        self.check_dim(u)?;
        let basis = self.orthonormal_basis();
        let mut acc = AlgebraVector::zeros(self.dim());
        for b in &basis {
            let second = self.covariant(b, &self.covariant(b, u));
            let correction = self.covariant(&self.covariant(b, b), u);
            acc = acc.add(&second.sub(&correction));
        }
        Ok(acc)
    }

    /// K through the curvature identity -1/2 sum_i (nabla_{H_i} nabla_{H_i} u + R(u, H_i) H_i).
    ///
    /// Valid when the connection is Levi-Civita, right-invariant and
    /// nabla_{H_i} H_i = 0 for each i; tests enforce those hypotheses.
    pub fn k_operator_curvature_form(
        &self,
        u: &AlgebraVector,
        noise: &NoiseBasis,
    ) -> Result<AlgebraVector> {
        self.check_dim(u)?;
        let mut acc = AlgebraVector::zeros(self.dim());
        for h in noise.vectors() {
            let second = self.covariant(h, &self.covariant(h, u));
            acc = acc.add(&second).add(&self.curvature(u, h, h)?);
        }
        Ok(acc.scale(-0.5))
    }

    /// K through the Hodge form -1/2 (Delta u + Ric(u)) with the rough
    /// Laplacian over an orthonormal basis. Same hypotheses as the curvature
    /// form plus orthonormality of {H_i}.
    pub fn k_operator_hodge_form(&self, u: &AlgebraVector) -> Result<AlgebraVector> {
        let lap = self.rough_laplacian(u)?;
        let ric = self.ricci(u)?;
        Ok(lap.add(&ric).scale(-0.5))
    }

    /// Basis orthonormal for the Gram matrix, as coordinate vectors
    /// (columns of the inverse transposed Cholesky factor).
    pub fn orthonormal_basis(&self) -> Vec<AlgebraVector> {
        let dim = self.dim();
        let l = self.chol.l();
        // Solve L^T B = I so that B^T G B = I.
        let lt = l.transpose();
        let b = lt
            .solve_upper_triangular(&DMatrix::identity(dim, dim))
            .expect("cholesky factor is invertible");
        (0..dim)
            .map(|i| AlgebraVector {
                coords: b.column(i).into_owned(),
            })
            .collect()
    }
}
