//! Finite-mode divergence-free Fourier fields on the 2-torus: the paired
//! cosine/sine basis, the effective viscosity identity, the spectral
//! dissipative operator, the L2 and H1 adjoint advection operators, and
//! reduced integration of the resulting incompressible models.
//!
//! Nonlinear terms are exact spectral convolutions over the truncated mode
//! set; no FFT, no aliasing. Pressure never appears: projecting every
//! wavevector coefficient onto its perpendicular direction removes gradient
//! parts, which realizes it implicitly.

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

type C = Complex<f64>;

/// Truncated mode family: one representative per {k, -k} class with
/// |k1| + |k2| <= m, amplitudes lambda depending only on that l1 norm.
///
/// The representative rule {k1 >= 1} together with {k1 = 0, k2 >= 1} is closed
/// under coordinate swap and sign flip modulo the class equivalence, which is
/// what makes the summed double-derivative isotropic.
#[derive(Clone, Debug)]
pub struct ModeSet {
    m: u32,
    reps: Vec<(i32, i32)>,
    lambda: Vec<f64>,
}

fn canonical(k: (i32, i32)) -> (i32, i32) {
    if k.0 > 0 || (k.0 == 0 && k.1 > 0) {
        k
    } else {
        (-k.0, -k.1)
    }
}

fn l1(k: (i32, i32)) -> u32 {
    k.0.unsigned_abs() + k.1.unsigned_abs()
}

fn l2sq(k: (i32, i32)) -> f64 {
    (k.0 * k.0 + k.1 * k.1) as f64
}

impl ModeSet {
    /// All representatives with l1 norm at most `m`; `lambda[n-1]` is the
    /// amplitude at l1 norm n.
    pub fn new(m: u32, lambda: Vec<f64>) -> Result<Self> {
        if m == 0 {
            return Err(CoreError::InvalidParameter(
                "truncation radius must be positive".into(),
            ));
        }
        if lambda.len() != m as usize {
            return Err(CoreError::InvalidParameter(format!(
                "lambda table must have {} entries, got {}",
                m,
                lambda.len()
            )));
        }
        if lambda.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(CoreError::InvalidParameter(
                "lambda entries must be finite and non-negative".into(),
            ));
        }
        let mi = m as i32;
        let mut reps = Vec::new();
        for k1 in 0..=mi {
            for k2 in -mi..=mi {
                let k = (k1, k2);
                if l1(k) == 0 || l1(k) > m {
                    continue;
                }
                if k1 > 0 || (k1 == 0 && k2 > 0) {
                    reps.push(k);
                }
            }
        }
        reps.sort_by_key(|k| (l1(*k), k.0, k.1));
        let set = Self { m, reps, lambda };
        set.validate_closure()?;
        Ok(set)
    }

    /// Power-law schedule lambda(n) = n^{-gamma}.
    pub fn power_law(m: u32, gamma: f64) -> Result<Self> {
        let lambda = (1..=m).map(|n| (n as f64).powf(-gamma)).collect();
        Self::new(m, lambda)
    }

    /// All amplitudes zero: no noise directions, zero effective viscosity.
    pub fn inviscid(m: u32) -> Result<Self> {
        Self::new(m, vec![0.0; m as usize])
    }

    /// Bypass the closure validation; for negative controls only.
    pub fn from_reps_unchecked(m: u32, reps: Vec<(i32, i32)>, lambda: Vec<f64>) -> Self {
        Self { m, reps, lambda }
    }

    /// Swap and sign-flip closure of the representative set modulo {k, -k}.
    pub fn validate_closure(&self) -> Result<()> {
        let has = |k: (i32, i32)| self.reps.contains(&canonical(k));
        for &k in &self.reps {
            if !has((k.1, k.0)) || !has((-k.0, k.1)) {
                return Err(CoreError::InvalidParameter(format!(
                    "representative set not closed under swap/sign at ({}, {})",
                    k.0, k.1
                )));
            }
        }
        Ok(())
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn reps(&self) -> &[(i32, i32)] {
        &self.reps
    }

    pub fn lambda_of(&self, k: (i32, i32)) -> f64 {
        let n = l1(k);
        if n == 0 || n > self.m {
            0.0
        } else {
            self.lambda[(n - 1) as usize]
        }
    }

    pub fn rep_index(&self, k: (i32, i32)) -> Option<usize> {
        self.reps.iter().position(|r| *r == k)
    }

    /// Effective viscosity: the constant for which the summed double
    /// directional derivative over the representative set equals nu * Laplace.
    pub fn nu_effective(&self) -> f64 {
        self.reps
            .iter()
            .map(|&k| {
                let l = self.lambda_of(k);
                l * l * (k.0 as f64) * (k.0 as f64)
            })
            .sum()
    }
}

/// Both sides of the summed-derivative identity evaluated on the Fourier mode
/// `q`, as coefficients of -f. Exact integer-in-float arithmetic.
#[derive(Clone, Debug, Serialize)]
pub struct IdentityCheck {
    pub q: (i32, i32),
    pub lhs: f64,
    pub rhs: f64,
    pub error: f64,
}

/// On f = exp(i q . theta) each basis pair contributes
/// lambda^2 (k2 q1 - k1 q2)^2 (-f), so the identity reduces to comparing
/// sum lambda^2 (k2 q1 - k1 q2)^2 against nu_eff |q|^2.
pub fn laplacian_identity_check(modes: &ModeSet, q: (i32, i32)) -> IdentityCheck {
    let lhs: f64 = modes
        .reps()
        .iter()
        .map(|&k| {
            let l = modes.lambda_of(k);
            let d = (k.1 * q.0 - k.0 * q.1) as f64;
            l * l * d * d
        })
        .sum();
    let rhs = modes.nu_effective() * l2sq(q);
    IdentityCheck {
        q,
        lhs,
        rhs,
        error: (lhs - rhs).abs(),
    }
}

/// Divergence-free velocity field as coefficients (a_k, b_k) of the unit
/// cosine/sine basis fields over the representative set.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityField {
    coeffs: Vec<(f64, f64)>,
}

impl VelocityField {
    pub fn zeros(modes: &ModeSet) -> Self {
        Self {
            coeffs: vec![(0.0, 0.0); modes.reps().len()],
        }
    }

    /// Build from explicit (k, a, b) entries; k must be a representative
    /// within the truncation.
    pub fn from_modes(modes: &ModeSet, entries: &[((i32, i32), f64, f64)]) -> Result<Self> {
        let mut field = Self::zeros(modes);
        for &(k, a, b) in entries {
            if l1(k) > modes.m() {
                return Err(CoreError::ModeOutsideTruncation(k.0, k.1, modes.m()));
            }
            let idx = modes.rep_index(k).ok_or_else(|| {
                CoreError::InvalidParameter(format!(
                    "({}, {}) is not a representative; use the {{k1 >= 1}} or {{k1 = 0, k2 >= 1}} form",
                    k.0, k.1
                ))
            })?;
            if !a.is_finite() || !b.is_finite() {
                return Err(CoreError::InvalidParameter("non-finite coefficient".into()));
            }
            field.coeffs[idx].0 += a;
            field.coeffs[idx].1 += b;
        }
        Ok(field)
    }

    pub fn coeffs(&self) -> &[(f64, f64)] {
        &self.coeffs
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs
            .iter()
            .all(|(a, b)| a.is_finite() && b.is_finite())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|(a, b)| (a * s, b * s)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.coeffs.len(), other.coeffs.len());
        Self {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|((a, b), (c, d))| (a + c, b + d))
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn norm_inf(&self) -> f64 {
        self.coeffs
            .iter()
            .fold(0.0_f64, |m, (a, b)| m.max(a.abs()).max(b.abs()))
    }

    /// Coefficient-wise multiplication by a function of the wavevector.
    fn map_modes(&self, modes: &ModeSet, f: impl Fn((i32, i32)) -> f64) -> Self {
        Self {
            coeffs: self
                .coeffs
                .iter()
                .zip(modes.reps())
                .map(|((a, b), &k)| {
                    let s = f(k);
                    (a * s, b * s)
                })
                .collect(),
        }
    }

    /// Pointwise evaluation u(theta).
    pub fn eval(&self, modes: &ModeSet, theta: (f64, f64)) -> (f64, f64) {
        let mut out = (0.0, 0.0);
        for (&k, &(a, b)) in modes.reps().iter().zip(&self.coeffs) {
            let phase = k.0 as f64 * theta.0 + k.1 as f64 * theta.1;
            let amp = a * phase.cos() + b * phase.sin();
            out.0 += amp * k.1 as f64;
            out.1 -= amp * k.0 as f64;
        }
        out
    }

    /// Pointwise divergence from the analytic derivatives of each mode. The
    /// two partial sums are accumulated separately so their cancellation is a
    /// genuine floating-point check rather than a symbolic identity.
    pub fn divergence(&self, modes: &ModeSet, theta: (f64, f64)) -> f64 {
        let mut d1u1 = 0.0;
        let mut d2u2 = 0.0;
        for (&k, &(a, b)) in modes.reps().iter().zip(&self.coeffs) {
            let (k1, k2) = (k.0 as f64, k.1 as f64);
            let phase = k1 * theta.0 + k2 * theta.1;
            let damp = -a * phase.sin() + b * phase.cos();
            d1u1 += damp * k1 * k2;
            d2u2 -= damp * k2 * k1;
        }
        d1u1 + d2u2
    }
}

/// L2 pairing int <x, y> over the torus.
pub fn inner_l2(x: &VelocityField, y: &VelocityField, modes: &ModeSet) -> f64 {
    let two_pi_sq = 2.0 * std::f64::consts::PI * std::f64::consts::PI;
    x.coeffs()
        .iter()
        .zip(y.coeffs())
        .zip(modes.reps())
        .map(|(((ax, bx), (ay, by)), &k)| (ax * ay + bx * by) * two_pi_sq * l2sq(k))
        .sum()
}

/// H1 pairing: L2 plus the gradient term, coefficient weight (1 + |k|^2).
pub fn inner_h1(x: &VelocityField, y: &VelocityField, modes: &ModeSet) -> f64 {
    let two_pi_sq = 2.0 * std::f64::consts::PI * std::f64::consts::PI;
    x.coeffs()
        .iter()
        .zip(y.coeffs())
        .zip(modes.reps())
        .map(|(((ax, bx), (ay, by)), &k)| {
            (ax * ay + bx * by) * two_pi_sq * l2sq(k) * (1.0 + l2sq(k))
        })
        .sum()
}

pub fn energy_l2(u: &VelocityField, modes: &ModeSet) -> f64 {
    0.5 * inner_l2(u, u, modes)
}

pub fn energy_h1(u: &VelocityField, modes: &ModeSet) -> f64 {
    0.5 * inner_h1(u, u, modes)
}

// -------------------------------------------------------------------------
// Exact spectral convolution engine.

/// Sparse complex-exponential support of a real vector field.
type Support = Vec<((i32, i32), [C; 2])>;

/// Dense coefficient grid over [-kmax, kmax]^2.
struct SpectralGrid {
    kmax: i32,
    data: Vec<[C; 2]>,
}

impl SpectralGrid {
    fn zeros(kmax: i32) -> Self {
        let n = (2 * kmax + 1) as usize;
        Self {
            kmax,
            data: vec![[C::new(0.0, 0.0); 2]; n * n],
        }
    }

    #[inline]
    fn idx(&self, k: (i32, i32)) -> usize {
        let n = (2 * self.kmax + 1) as usize;
        ((k.0 + self.kmax) as usize) * n + (k.1 + self.kmax) as usize
    }

    #[inline]
    fn contains(&self, k: (i32, i32)) -> bool {
        k.0.abs() <= self.kmax && k.1.abs() <= self.kmax
    }

    #[inline]
    fn add(&mut self, k: (i32, i32), c: [C; 2]) {
        let i = self.idx(k);
        self.data[i][0] += c[0];
        self.data[i][1] += c[1];
    }

    fn get(&self, k: (i32, i32)) -> [C; 2] {
        self.data[self.idx(k)]
    }

    /// Remove the gradient part of every coefficient and the mean mode.
    fn leray(&mut self) {
        let kmax = self.kmax;
        for k1 in -kmax..=kmax {
            for k2 in -kmax..=kmax {
                let i = self.idx((k1, k2));
                if k1 == 0 && k2 == 0 {
                    self.data[i] = [C::new(0.0, 0.0); 2];
                    continue;
                }
                let c = self.data[i];
                let ksq = (k1 * k1 + k2 * k2) as f64;
                let dot = c[0] * (k1 as f64) + c[1] * (k2 as f64);
                self.data[i] = [
                    c[0] - dot * (k1 as f64) / ksq,
                    c[1] - dot * (k2 as f64) / ksq,
                ];
            }
        }
    }

    fn support(&self) -> Support {
        let kmax = self.kmax;
        let mut out = Vec::new();
        for k1 in -kmax..=kmax {
            for k2 in -kmax..=kmax {
                let c = self.get((k1, k2));
                if c[0].norm_sqr() > 0.0 || c[1].norm_sqr() > 0.0 {
                    out.push(((k1, k2), c));
                }
            }
        }
        out
    }
}

/// Complex-exponential support of `u`: coefficient (a - i b)/2 k_perp at each
/// representative and the conjugate at its negative.
fn support_of(u: &VelocityField, modes: &ModeSet) -> Support {
    let mut out = Vec::with_capacity(2 * modes.reps().len());
    for (&k, &(a, b)) in modes.reps().iter().zip(u.coeffs()) {
        if a == 0.0 && b == 0.0 {
            continue;
        }
        let s = C::new(0.5 * a, -0.5 * b);
        let perp = [C::new(k.1 as f64, 0.0) * s, C::new(-k.0 as f64, 0.0) * s];
        out.push((k, perp));
        out.push(((-k.0, -k.1), [perp[0].conj(), perp[1].conj()]));
    }
    out
}

/// Convective derivative (x . nabla) y as a dense grid.
fn advect(x: &Support, y: &Support, kmax: i32) -> SpectralGrid {
    let mut out = SpectralGrid::zeros(kmax);
    for &(k, cx) in x {
        for &(kp, cy) in y {
            let q = (k.0 + kp.0, k.1 + kp.1);
            if !out.contains(q) {
                continue;
            }
            let dot = cx[0] * C::new(0.0, kp.0 as f64) + cx[1] * C::new(0.0, kp.1 as f64);
            out.add(q, [dot * cy[0], dot * cy[1]]);
        }
    }
    out
}

/// The coupling sum_j x_j nabla y_j as a dense grid.
fn gradient_coupling(x: &Support, y: &Support, kmax: i32) -> SpectralGrid {
    let mut out = SpectralGrid::zeros(kmax);
    for &(k, cx) in x {
        for &(kp, cy) in y {
            let q = (k.0 + kp.0, k.1 + kp.1);
            if !out.contains(q) {
                continue;
            }
            let s = cx[0] * cy[0] + cx[1] * cy[1];
            out.add(
                q,
                [s * C::new(0.0, kp.0 as f64), s * C::new(0.0, kp.1 as f64)],
            );
        }
    }
    out
}

/// Read the representative coefficients back out of a grid, re-truncating to
/// the mode set; `weight` multiplies each coefficient (used for the inverse
/// Helmholtz factor).
fn grid_to_field(
    grid: &SpectralGrid,
    modes: &ModeSet,
    weight: impl Fn((i32, i32)) -> f64,
) -> VelocityField {
    let mut coeffs = Vec::with_capacity(modes.reps().len());
    for &k in modes.reps() {
        let c = grid.get(k);
        // Project onto the divergence-free direction k_perp.
        let (k1, k2) = (k.0 as f64, k.1 as f64);
        let s = (c[0] * k2 - c[1] * k1) / l2sq(k);
        let w = weight(k);
        coeffs.push((2.0 * s.re * w, -2.0 * s.im * w));
    }
    VelocityField { coeffs }
}

fn check_field(u: &VelocityField, modes: &ModeSet) -> Result<()> {
    if u.coeffs().len() != modes.reps().len() {
        return Err(CoreError::DimensionMismatch(format!(
            "field carries {} coefficients for {} representatives",
            u.coeffs().len(),
            modes.reps().len()
        )));
    }
    Ok(())
}

// -------------------------------------------------------------------------
// Operators.

/// L2 adjoint of the advection: the divergence-free part of (u . nabla) u,
/// re-truncated to the mode set.
pub fn ad_star_l2(u: &VelocityField, modes: &ModeSet) -> Result<VelocityField> {
    check_field(u, modes)?;
    let sup = support_of(u, modes);
    let mut grid = advect(&sup, &sup, 2 * modes.m() as i32);
    grid.leray();
    Ok(grid_to_field(&grid, modes, |_| 1.0))
}

/// H1 adjoint of the advection: with v = u - Laplace u,
///
/// (1 - Laplace)^{-1} P( u . nabla v + sum_j v_j nabla u_j ),
///
/// with P the projection onto divergence-free fields, all products by exact
/// convolution, re-truncated to the mode set.
pub fn ad_star_h1(u: &VelocityField, modes: &ModeSet) -> Result<VelocityField> {
    check_field(u, modes)?;
    let v = u.map_modes(modes, |k| 1.0 + l2sq(k));
    let sup_u = support_of(u, modes);
    let sup_v = support_of(&v, modes);
    let kmax = 2 * modes.m() as i32;
    let mut grid = advect(&sup_u, &sup_v, kmax);
    let coupling = gradient_coupling(&sup_v, &sup_u, kmax);
    for (dst, src) in grid.data.iter_mut().zip(&coupling.data) {
        dst[0] += src[0];
        dst[1] += src[1];
    }
    grid.leray();
    Ok(grid_to_field(&grid, modes, |k| 1.0 / (1.0 + l2sq(k))))
}

/// Dissipative operator in closed form: coefficient-wise -(nu_eff/2) |k|^2.
pub fn k_operator_spectral(u: &VelocityField, modes: &ModeSet) -> Result<VelocityField> {
    check_field(u, modes)?;
    let nu = modes.nu_effective();
    Ok(u.map_modes(modes, |k| -0.5 * nu * l2sq(k)))
}

/// Dissipative operator assembled from its defining pairing: for each unit
/// basis field v the noise family contributes
///
/// <K(u), v> = -1/2 sum_k lambda^2 <u, nabla_{[v,A_k]} A_k + nabla_{A_k} [v,A_k]
///                                     + (same with B_k)>,
///
/// with the vector-field bracket and flat covariant derivatives computed by
/// exact convolution. Independent of the closed form; the two must agree.
pub fn k_operator_pairing(u: &VelocityField, modes: &ModeSet) -> Result<VelocityField> {
    check_field(u, modes)?;
    let kmax = 2 * modes.m() as i32;
    let sup_u = support_of(u, modes);
    let two_pi_sq = 2.0 * std::f64::consts::PI * std::f64::consts::PI;
    let four_pi_sq = 4.0 * std::f64::consts::PI * std::f64::consts::PI;

    // <x, grid> in L2 through the exponential coefficients.
    let pair_with = |sup: &Support, grid: &SpectralGrid| -> f64 {
        let mut acc = 0.0;
        for &(k, c) in sup.iter() {
            if !grid.contains(k) {
                continue;
            }
            let g = grid.get(k);
            acc += (c[0] * g[0].conj() + c[1] * g[1].conj()).re;
        }
        four_pi_sq * acc
    };

    let mut coeffs = Vec::with_capacity(modes.reps().len());
    for &q in modes.reps() {
        let mut vals = [0.0_f64; 2];
        for (slot, test) in [(0usize, true), (1usize, false)] {
            // Unit basis field: cosine for slot 0, sine for slot 1.
            let test_field = VelocityField::from_modes(
                modes,
                &[(
                    q,
                    if test { 1.0 } else { 0.0 },
                    if test { 0.0 } else { 1.0 },
                )],
            )?;
            let sup_v = support_of(&test_field, modes);
            let mut total = SpectralGrid::zeros(kmax);
            for &k in modes.reps() {
                let lam = modes.lambda_of(k);
                if lam == 0.0 {
                    continue;
                }
                for cosine in [true, false] {
                    let basis = VelocityField::from_modes(
                        modes,
                        &[(
                            k,
                            if cosine { 1.0 } else { 0.0 },
                            if cosine { 0.0 } else { 1.0 },
                        )],
                    )?;
                    let sup_a = support_of(&basis, modes);
                    // [v, A] = (v . nabla) A - (A . nabla) v.
                    let va = advect(&sup_v, &sup_a, kmax);
                    let av = advect(&sup_a, &sup_v, kmax);
                    let mut bracket = va;
                    for (dst, src) in bracket.data.iter_mut().zip(&av.data) {
                        dst[0] -= src[0];
                        dst[1] -= src[1];
                    }
                    let sup_bracket = bracket.support();
                    // nabla_{[v,A]} A + nabla_A [v,A].
                    let t1 = advect(&sup_bracket, &sup_a, kmax);
                    let t2 = advect(&sup_a, &sup_bracket, kmax);
                    let w = lam * lam;
                    for ((dst, a), b) in total.data.iter_mut().zip(&t1.data).zip(&t2.data) {
                        dst[0] += (a[0] + b[0]) * w;
                        dst[1] += (a[1] + b[1]) * w;
                    }
                }
            }
            vals[slot] = -0.5 * pair_with(&sup_u, &total);
        }
        // Solve the diagonal Gram system: ||unit basis field||_0^2 = 2 pi^2 |q|^2.
        let gram = two_pi_sq * l2sq(q);
        coeffs.push((vals[0] / gram, vals[1] / gram));
    }
    Ok(VelocityField { coeffs })
}

/// Physical-grid oracle for the H1 adjoint: evaluates the nonlinear terms
/// pointwise from the analytic mode expansions and projects back onto the
/// basis by exact trigonometric quadrature. Shares no code with the
/// convolution route.
pub fn ad_star_h1_quadrature(u: &VelocityField, modes: &ModeSet) -> Result<VelocityField> {
    check_field(u, modes)?;
    let n = (4 * modes.m() + 4) as usize;
    let two_pi = 2.0 * std::f64::consts::PI;
    let step = two_pi / n as f64;

    // Pointwise evaluation of u, v = u - Laplace u and their gradients.
    let eval_terms = |theta: (f64, f64)| -> [f64; 2] {
        let mut uu = [0.0_f64; 2];
        let mut vv = [0.0_f64; 2];
        let mut grad_u = [[0.0_f64; 2]; 2]; // grad_u[j][i] = d_i u_j
        let mut grad_v = [[0.0_f64; 2]; 2];
        for (&k, &(a, b)) in modes.reps().iter().zip(u.coeffs()) {
            let (k1, k2) = (k.0 as f64, k.1 as f64);
            let helm = 1.0 + k1 * k1 + k2 * k2;
            let phase = k1 * theta.0 + k2 * theta.1;
            let (s, c) = phase.sin_cos();
            let amp = a * c + b * s;
            let damp = -a * s + b * c;
            let dir = [k2, -k1];
            for j in 0..2 {
                uu[j] += amp * dir[j];
                vv[j] += helm * amp * dir[j];
                grad_u[j][0] += damp * k1 * dir[j];
                grad_u[j][1] += damp * k2 * dir[j];
                grad_v[j][0] += helm * damp * k1 * dir[j];
                grad_v[j][1] += helm * damp * k2 * dir[j];
            }
        }
        // (u . nabla) v + sum_j v_j nabla u_j
        [
            uu[0] * grad_v[0][0]
                + uu[1] * grad_v[0][1]
                + vv[0] * grad_u[0][0]
                + vv[1] * grad_u[1][0],
            uu[0] * grad_v[1][0]
                + uu[1] * grad_v[1][1]
                + vv[0] * grad_u[0][1]
                + vv[1] * grad_u[1][1],
        ]
    };

    let mut samples = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let theta = (i as f64 * step, j as f64 * step);
            samples.push((theta, eval_terms(theta)));
        }
    }

    let cell = step * step;
    let two_pi_sq = 2.0 * std::f64::consts::PI * std::f64::consts::PI;
    let mut coeffs = Vec::with_capacity(modes.reps().len());
    for &q in modes.reps() {
        let (q1, q2) = (q.0 as f64, q.1 as f64);
        let mut pa = 0.0;
        let mut pb = 0.0;
        for (theta, f) in &samples {
            let phase = q1 * theta.0 + q2 * theta.1;
            let (s, c) = phase.sin_cos();
            let dot = f[0] * q2 - f[1] * q1;
            pa += dot * c;
            pb += dot * s;
        }
        pa *= cell;
        pb *= cell;
        // Pairing against the divergence-free basis performs the projection;
        // normalize by the Gram weight and apply the inverse Helmholtz factor.
        let norm = two_pi_sq * l2sq(q) * (1.0 + l2sq(q));
        coeffs.push((pa / norm, pb / norm));
    }
    Ok(VelocityField { coeffs })
}

/// Which invariant pairing drives the reduced dynamics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FluidMetric {
    L2,
    H1,
}

/// Reduced fluid trajectory on the truncated mode set.
#[derive(Clone, Debug)]
pub struct FluidTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<VelocityField>,
}

impl FluidTrajectory {
    pub fn energies(&self, modes: &ModeSet) -> Vec<(f64, f64)> {
        self.states
            .iter()
            .map(|u| (energy_l2(u, modes), energy_h1(u, modes)))
            .collect()
    }
}

/// RK4 on du/dt = -ad*_u u + K(u): the L2 pairing yields the incompressible
/// Navier-Stokes reduction, the H1 pairing the viscous Camassa-Holm one.
pub fn integrate_fluid(
    u0: &VelocityField,
    modes: &ModeSet,
    metric: FluidMetric,
    t_end: f64,
    dt: f64,
) -> Result<FluidTrajectory> {
    check_field(u0, modes)?;
    if !t_end.is_finite() || t_end <= 0.0 || !dt.is_finite() || dt <= 0.0 {
        return Err(CoreError::InvalidParameter(
            "integration requires positive t_end and dt".into(),
        ));
    }
    let n = (t_end / dt).round() as usize;
    if n == 0 || ((n as f64) * dt - t_end).abs() > 1e-9 * t_end.max(1.0) {
        return Err(CoreError::InvalidParameter(format!(
            "dt = {dt} does not divide t_end = {t_end}"
        )));
    }
    let rhs = |u: &VelocityField| -> Result<VelocityField> {
        let adv = match metric {
            FluidMetric::L2 => ad_star_l2(u, modes)?,
            FluidMetric::H1 => ad_star_h1(u, modes)?,
        };
        Ok(k_operator_spectral(u, modes)?.sub(&adv))
    };
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    times.push(0.0);
    states.push(u0.clone());
    let mut u = u0.clone();
    for step in 0..n {
        let k1 = rhs(&u)?;
        let k2 = rhs(&u.add(&k1.scale(0.5 * dt)))?;
        let k3 = rhs(&u.add(&k2.scale(0.5 * dt)))?;
        let k4 = rhs(&u.add(&k3.scale(dt)))?;
        u = u.add(
            &k1.add(&k2.scale(2.0))
                .add(&k3.scale(2.0))
                .add(&k4)
                .scale(dt / 6.0),
        );
        if !u.is_finite() {
            return Err(CoreError::NonFinite {
                step,
                context: "fluid integration".into(),
            });
        }
        times.push((step + 1) as f64 * dt);
        states.push(u.clone());
    }
    Ok(FluidTrajectory { times, states })
}
