//! Transform-side linear algebra.
//!
//! A plane-wave tensor at a fixed momentum is read as transform values
//! `ψ^{στ}_{ij} = −στ·A`. Off-diagonal quadrants have one value; diagonal
//! quadrants have a hat value (sector `x > y`) and a check value (`x < y`).
//! The vertex conditions become `ξ̂ = −χ̂ S` and `ξ̌ = −S τ χ̌`, and the
//! solution space of the vertex conditions is described by the kernels of
//! the operators `P±` on pairs of real `n × n` matrices.

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::{partner, AmplitudeKey, AmplitudeTensor, Assignment, MomentumPair, Sector, Sign};
use crate::error::{Error, Result};
use crate::linalg::{least_squares, orthonormalize, projection_defect, svd_split};
use crate::one_particle::vertex_matrices;

/// Relative singular-value threshold for ranks and null spaces.
pub const RANK_TOL: f64 = 1e-10;
/// Half-width of the excluded neighbourhood of `k = 1/√2` when `c ≠ 0`.
pub const SINGULARITY_HALF_WIDTH: f64 = 1e-6;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn transform_sign(sigma: Sign, tau: Sign) -> f64 {
    -sigma.value() * tau.value()
}

/// `ξ_ij = (ψ^{++}, ψ^{−−})`, `χ_ij = (ψ^{+−}, ψ^{−+})` for one side of the
/// diagonal, row-major `n × n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformVectors2 {
    pub n: usize,
    pub xi: Vec<[Complex64; 2]>,
    pub chi: Vec<[Complex64; 2]>,
}

impl TransformVectors2 {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            xi: vec![[ZERO; 2]; n * n],
            chi: vec![[ZERO; 2]; n * n],
        }
    }
}

/// Which side of the diagonal supplies the diagonal entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Hat,
    Check,
}

impl Side {
    fn sector(self, i: usize, j: usize) -> Sector {
        match (i == j, self) {
            (false, _) => Sector::OffDiagonal,
            (true, Side::Hat) => Sector::Above,
            (true, Side::Check) => Sector::Below,
        }
    }
}

fn key(i: usize, j: usize, sector: Sector, sigma: Sign, tau: Sign, assignment: Assignment) -> AmplitudeKey {
    AmplitudeKey {
        i,
        j,
        sector,
        sigma,
        tau,
        assignment,
    }
}

fn psi(t: &AmplitudeTensor, i: usize, j: usize, sector: Sector, sigma: Sign, tau: Sign, a: Assignment) -> Complex64 {
    t.get(&key(i, j, sector, sigma, tau, a)) * transform_sign(sigma, tau)
}

/// Reads the transforms of the waves carrying `assignment`.
pub fn extract_transforms2(t: &AmplitudeTensor, assignment: Assignment, side: Side) -> TransformVectors2 {
    let n = t.n();
    let mut out = TransformVectors2::zeros(n);
    for i in 1..=n {
        for j in 1..=n {
            let s = side.sector(i, j);
            let idx = (i - 1) * n + j - 1;
            out.xi[idx] = [
                psi(t, i, j, s, Sign::Plus, Sign::Plus, assignment),
                psi(t, i, j, s, Sign::Minus, Sign::Minus, assignment),
            ];
            out.chi[idx] = [
                psi(t, i, j, s, Sign::Plus, Sign::Minus, assignment),
                psi(t, i, j, s, Sign::Minus, Sign::Plus, assignment),
            ];
        }
    }
    out
}

/// Defects of the vertex conditions in transform form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KirchhoffResidual {
    /// `max |ξ̂ + χ̂ S|`.
    pub hat_form: f64,
    /// `max |ξ̌ + S τ χ̌|`.
    pub check_form: f64,
    /// `max |hat − check|` over off-diagonal entries.
    pub off_diagonal_mismatch: f64,
}

impl KirchhoffResidual {
    pub fn max(&self) -> f64 {
        self.hat_form.max(self.check_form).max(self.off_diagonal_mismatch)
    }
}

fn kirchhoff_generic<const W: usize>(
    n: usize,
    hat_xi: &[[Complex64; W]],
    hat_chi: &[[Complex64; W]],
    check_xi: &[[Complex64; W]],
    check_chi: &[[Complex64; W]],
    tau: [usize; W],
) -> KirchhoffResidual {
    let s = vertex_matrices(n).s;
    let (mut hat_form, mut check_form, mut mismatch) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..n {
        for j in 0..n {
            let idx = i * n + j;
            for c in 0..W {
                let mut h = hat_xi[idx][c];
                let mut v = check_xi[idx][c];
                for k in 0..n {
                    h += hat_chi[i * n + k][c] * s[(k, j)];
                    v += check_chi[k * n + j][tau[c]] * s[(i, k)];
                }
                hat_form = hat_form.max(h.norm());
                check_form = check_form.max(v.norm());
                if i != j {
                    mismatch = mismatch
                        .max((hat_xi[idx][c] - check_xi[idx][c]).norm())
                        .max((hat_chi[idx][c] - check_chi[idx][c]).norm());
                }
            }
        }
    }
    KirchhoffResidual {
        hat_form,
        check_form,
        off_diagonal_mismatch: mismatch,
    }
}

/// Vertex conditions on a hat/check pair of transform vectors.
pub fn check_kirchhoff_transforms(hat: &TransformVectors2, check: &TransformVectors2) -> Result<KirchhoffResidual> {
    let n = hat.n;
    let size = n * n;
    if check.n != n
        || [&hat.xi, &hat.chi, &check.xi, &check.chi]
            .iter()
            .any(|v| v.len() != size)
    {
        return Err(Error::InvalidAmplitude(
            "transform vectors have inconsistent shapes".into(),
        ));
    }
    Ok(kirchhoff_generic(n, &hat.xi, &hat.chi, &check.xi, &check.chi, [1, 0]))
}

/// Swaps the two components of every entry.
pub fn tau2(v: &[[Complex64; 2]]) -> Vec<[Complex64; 2]> {
    v.iter().map(|e| [e[1], e[0]]).collect()
}

/// The permutation `(13)(24)` on every entry.
pub fn tau4(v: &[[Complex64; 4]]) -> Vec<[Complex64; 4]> {
    v.iter().map(|e| [e[2], e[3], e[0], e[1]]).collect()
}

/// Extended transform vectors at momentum `k ≤ 1/√2` and `k̃ = √(1 − k²)`.
///
/// Slots of `ξ`: `(ψ^{++}(k)k̃, ψ^{++}(k̃)k, ψ^{−−}(k)k̃, ψ^{−−}(k̃)k)`; of
/// `χ`: the same with `+−` and `−+`. For a plane-wave tensor the transform
/// at `k̃` is a point mass whose weight, after folding onto `[0, 1/√2]`,
/// carries the factor `k̃/k`; every slot therefore reads `k̃·ψ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformVectors4 {
    pub n: usize,
    pub k: f64,
    /// Assignment whose first-particle momentum is `k`.
    pub at: Assignment,
    pub hat_xi: Vec<[Complex64; 4]>,
    pub hat_chi: Vec<[Complex64; 4]>,
    pub check_xi: Vec<[Complex64; 4]>,
    pub check_chi: Vec<[Complex64; 4]>,
}

const XI_SLOTS: [(Sign, Sign, bool); 4] = [
    (Sign::Plus, Sign::Plus, false),
    (Sign::Plus, Sign::Plus, true),
    (Sign::Minus, Sign::Minus, false),
    (Sign::Minus, Sign::Minus, true),
];
const CHI_SLOTS: [(Sign, Sign, bool); 4] = [
    (Sign::Plus, Sign::Minus, false),
    (Sign::Plus, Sign::Minus, true),
    (Sign::Minus, Sign::Plus, false),
    (Sign::Minus, Sign::Plus, true),
];

/// Picks the assignment carrying first-particle momentum `k`.
fn locate(m: &MomentumPair, k: f64) -> Result<Assignment> {
    if !(0.0..=std::f64::consts::FRAC_1_SQRT_2).contains(&k) {
        return Err(Error::MomentumOutOfRange(k));
    }
    let (k1, k2) = m
        .real_parts()
        .ok_or_else(|| Error::MomentumMismatch("transforms need real momenta".into()))?;
    let kt = partner(k);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    if close(k1, k) && close(k2, kt) {
        Ok(Assignment::Forward)
    } else if close(k2, k) && close(k1, kt) {
        Ok(Assignment::Swapped)
    } else {
        Err(Error::MomentumMismatch(format!(
            "pair ({k1}, {k2}) is not (k, sqrt(1 - k^2)) for k = {k}"
        )))
    }
}

/// Reads a tensor into extended transform slots.
pub fn extract_transforms(t: &AmplitudeTensor, m: &MomentumPair, k: f64) -> Result<TransformVectors4> {
    let at = locate(m, k)?;
    let n = t.n();
    let kt = partner(k);
    let read = |i: usize, j: usize, side: Side, slots: &[(Sign, Sign, bool); 4]| {
        let sector = side.sector(i, j);
        let mut out = [ZERO; 4];
        for (c, &(sigma, tau, other)) in slots.iter().enumerate() {
            let a = if other { at.flipped() } else { at };
            out[c] = psi(t, i, j, sector, sigma, tau, a) * kt;
        }
        out
    };
    let mut tv = TransformVectors4 {
        n,
        k,
        at,
        hat_xi: Vec::with_capacity(n * n),
        hat_chi: Vec::with_capacity(n * n),
        check_xi: Vec::with_capacity(n * n),
        check_chi: Vec::with_capacity(n * n),
    };
    for i in 1..=n {
        for j in 1..=n {
            tv.hat_xi.push(read(i, j, Side::Hat, &XI_SLOTS));
            tv.hat_chi.push(read(i, j, Side::Hat, &CHI_SLOTS));
            tv.check_xi.push(read(i, j, Side::Check, &XI_SLOTS));
            tv.check_chi.push(read(i, j, Side::Check, &CHI_SLOTS));
        }
    }
    Ok(tv)
}

impl TransformVectors4 {
    /// Rebuilds the plane-wave tensor the slots were read from. Off-diagonal
    /// entries come from the hat side.
    pub fn resynthesize(&self) -> AmplitudeTensor {
        let n = self.n;
        let kt = partner(self.k);
        let mut t = AmplitudeTensor::new(n);
        for i in 1..=n {
            for j in 1..=n {
                let idx = (i - 1) * n + j - 1;
                for &sector in Sector::slots(i, j) {
                    let (xi, chi) = if sector == Sector::Below {
                        (&self.check_xi[idx], &self.check_chi[idx])
                    } else {
                        (&self.hat_xi[idx], &self.hat_chi[idx])
                    };
                    for (vals, slots) in [(xi, &XI_SLOTS), (chi, &CHI_SLOTS)] {
                        for (c, &(sigma, tau, other)) in slots.iter().enumerate() {
                            let a = if other { self.at.flipped() } else { self.at };
                            let amp = vals[c] / kt * transform_sign(sigma, tau);
                            if amp != ZERO {
                                t.accumulate(key(i, j, sector, sigma, tau, a), amp);
                            }
                        }
                    }
                }
            }
        }
        t
    }

    /// Vertex conditions with `τ` acting as `(13)(24)`.
    pub fn kirchhoff_residual(&self) -> KirchhoffResidual {
        kirchhoff_generic(
            self.n,
            &self.hat_xi,
            &self.hat_chi,
            &self.check_xi,
            &self.check_chi,
            [2, 3, 0, 1],
        )
    }
}

/// `c± = −ic / (k ± √(1 − k²))`.
pub fn pole_scalars(k: f64, c: f64) -> Result<(Complex64, Complex64)> {
    if !(0.0..=1.0).contains(&k) {
        return Err(Error::MomentumOutOfRange(k));
    }
    if !c.is_finite() {
        return Err(Error::NonFiniteCoupling(c));
    }
    if c == 0.0 {
        return Ok((ZERO, ZERO));
    }
    if (k - std::f64::consts::FRAC_1_SQRT_2).abs() < SINGULARITY_HALF_WIDTH {
        return Err(Error::Singularity {
            k,
            half_width: SINGULARITY_HALF_WIDTH,
        });
    }
    let kt = partner(k);
    let ic = Complex64::new(0.0, c);
    Ok((-ic / (k + kt), -ic / (k - kt)))
}

/// The diagonal-condition matrices `M` (acting on `ξ`) and `N` (on `χ`).
pub fn build_m_n(k: f64, c: f64) -> Result<(Matrix4<Complex64>, Matrix4<Complex64>)> {
    if k > std::f64::consts::FRAC_1_SQRT_2 {
        return Err(Error::MomentumOutOfRange(k));
    }
    let (cp, cm) = pole_scalars(k, c)?;
    let one = Complex64::new(1.0, 0.0);
    #[rustfmt::skip]
    let m = Matrix4::new(
        one + cm, cm, ZERO, ZERO,
        -cm, one - cm, ZERO, ZERO,
        ZERO, ZERO, one - cm, -cm,
        ZERO, ZERO, cm, one + cm,
    );
    #[rustfmt::skip]
    let nn = Matrix4::new(
        one + cp, ZERO, ZERO, cp,
        ZERO, one + cp, cp, ZERO,
        ZERO, -cp, one - cp, ZERO,
        -cp, ZERO, ZERO, one - cp,
    );
    Ok((m, nn))
}

/// Continuity and jump equations on the diagonal written as
/// `A_hat · hat + A_check · check = 0`, rows ordered as two continuity
/// equations followed by two jump equations.
fn raw_system(cp: Complex64, cm: Complex64) -> [(Matrix4<Complex64>, Matrix4<Complex64>); 2] {
    let (o, z) = (Complex64::new(1.0, 0.0), ZERO);
    let two = Complex64::new(2.0, 0.0);
    #[rustfmt::skip]
    let xi_h = Matrix4::new(
        o, o, z, z,
        z, z, o, o,
        -o + two * cm, o + two * cm, z, z,
        z, z, o + two * cm, -o + two * cm,
    );
    #[rustfmt::skip]
    let xi_c = Matrix4::new(
        -o, -o, z, z,
        z, z, -o, -o,
        o, -o, z, z,
        z, z, -o, o,
    );
    #[rustfmt::skip]
    let chi_h = Matrix4::new(
        o, z, z, o,
        z, o, o, z,
        z, o - two * cp, -o - two * cp, z,
        o - two * cp, z, z, -o - two * cp,
    );
    #[rustfmt::skip]
    let chi_c = Matrix4::new(
        -o, z, z, -o,
        z, -o, -o, z,
        z, -o, o, z,
        -o, z, z, o,
    );
    [(xi_h, xi_c), (chi_h, chi_c)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalConditionReport {
    /// `max(|ξ̂ − Mξ̌|, |χ̂ − Nχ̌|)` per diagonal quadrant.
    pub per_quadrant: Vec<f64>,
    pub eigs_residual: f64,
    /// Largest defect of the raw continuity and jump equations.
    pub raw_residual: f64,
    /// Largest difference between `M ξ̌`, `N χ̌` and the hat values solved
    /// from the raw equations.
    pub path_discrepancy: f64,
}

impl DiagonalConditionReport {
    pub fn max(&self) -> f64 {
        self.eigs_residual.max(self.raw_residual)
    }
}

fn cmax<R: nalgebra::Dim, C: nalgebra::Dim, St: nalgebra::RawStorage<Complex64, R, C>>(
    m: &nalgebra::Matrix<Complex64, R, C, St>,
) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn v4(a: &[Complex64; 4]) -> Vector4<Complex64> {
    Vector4::new(a[0], a[1], a[2], a[3])
}

/// Diagonal conditions on extended transforms, checked both in matrix form
/// and through the raw equations.
pub fn check_diagonal_conditions(t4: &TransformVectors4, c: f64) -> Result<DiagonalConditionReport> {
    let (m, nn) = build_m_n(t4.k, c)?;
    let (cp, cm) = pole_scalars(t4.k, c)?;
    let raw = raw_system(cp, cm);
    let solved: Vec<Matrix4<Complex64>> = raw
        .iter()
        .map(|(h, ch)| {
            let inv = h.try_inverse().expect("continuity rows keep the hat block invertible");
            -(inv * ch)
        })
        .collect();
    let n = t4.n;
    let mut per_quadrant = Vec::with_capacity(n);
    let (mut raw_residual, mut discrepancy) = (0.0f64, 0.0f64);
    for i in 0..n {
        let idx = i * n + i;
        let (hx, cx) = (v4(&t4.hat_xi[idx]), v4(&t4.check_xi[idx]));
        let (hc, cc) = (v4(&t4.hat_chi[idx]), v4(&t4.check_chi[idx]));
        let r = cmax(&(hx - m * cx)).max(cmax(&(hc - nn * cc)));
        per_quadrant.push(r);
        raw_residual = raw_residual
            .max(cmax(&(raw[0].0 * hx + raw[0].1 * cx)))
            .max(cmax(&(raw[1].0 * hc + raw[1].1 * cc)));
        discrepancy = discrepancy
            .max(cmax(&(m * cx - solved[0] * cx)))
            .max(cmax(&(nn * cc - solved[1] * cc)));
    }
    Ok(DiagonalConditionReport {
        eigs_residual: per_quadrant.iter().copied().fold(0.0, f64::max),
        per_quadrant,
        raw_residual,
        path_discrepancy: discrepancy,
    })
}

/// Coordinates for pairs of `n × n` matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixBasis {
    /// Standard basis `{e_i}`; `P` has every entry `1/n`.
    E,
    /// Helmert basis `{f_i}` with `f_1 ∝ (1, …, 1)`; `S = diag(1, −1, …, −1)`.
    F,
}

/// Columns `f_1, …, f_n` in `e`-coordinates.
pub fn helmert(n: usize) -> DMatrix<f64> {
    let mut f = DMatrix::zeros(n, n);
    for r in 0..n {
        f[(r, 0)] = 1.0 / (n as f64).sqrt();
    }
    for j in 2..=n {
        let norm = (((j - 1) * j) as f64).sqrt();
        for r in 0..j - 1 {
            f[(r, j - 1)] = 1.0 / norm;
        }
        f[(j - 1, j - 1)] = -((j - 1) as f64) / norm;
    }
    f
}

/// Orthogonal map from `f`-coordinates to `e`-coordinates on `M_n ⊕ M_n`
/// (row-major vectorization).
pub fn change_of_basis(n: usize) -> DMatrix<f64> {
    let f = helmert(n);
    let ff = f.kronecker(&f);
    let mut t = DMatrix::zeros(2 * n * n, 2 * n * n);
    t.view_mut((0, 0), (n * n, n * n)).copy_from(&ff);
    t.view_mut((n * n, n * n), (n * n, n * n)).copy_from(&ff);
    t
}

fn s_matrix(n: usize, basis: MatrixBasis) -> DMatrix<f64> {
    match basis {
        MatrixBasis::E => vertex_matrices(n).s,
        MatrixBasis::F => DMatrix::from_fn(n, n, |r, c| match (r == c, r) {
            (false, _) => 0.0,
            (true, 0) => 1.0,
            (true, _) => -1.0,
        }),
    }
}

fn split(v: &DVector<f64>, n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let nn = n * n;
    (
        DMatrix::from_row_slice(n, n, &v.as_slice()[..nn]),
        DMatrix::from_row_slice(n, n, &v.as_slice()[nn..]),
    )
}

fn join(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DVector<f64> {
    let n = a.nrows();
    let mut out = DVector::zeros(2 * n * n);
    for r in 0..n {
        for c in 0..n {
            out[r * n + c] = a[(r, c)];
            out[n * n + r * n + c] = b[(r, c)];
        }
    }
    out
}

fn operator_matrix<F: Fn(&DMatrix<f64>, &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>)>(
    n: usize,
    op: F,
) -> DMatrix<f64> {
    let dim = 2 * n * n;
    let mut out = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        let mut e = DVector::zeros(dim);
        e[col] = 1.0;
        let (a, b) = split(&e, n);
        let (ra, rb) = op(&a, &b);
        out.set_column(col, &join(&ra, &rb));
    }
    out
}

/// `Q±(X̂, X̌) = (X̂S ± SX̌, X̂ − X̌)` as a `2n² × 2n²` matrix.
pub fn build_q(n: usize, sign: Sign, basis: MatrixBasis) -> DMatrix<f64> {
    let s = s_matrix(n, basis);
    let sg = sign.value();
    operator_matrix(n, |a, b| (a * &s + (&s * b) * sg, a - b))
}

/// `Π⊥`: removes the diagonal (in the `e` basis) of both components.
pub fn build_pi_perp(n: usize, basis: MatrixBasis) -> DMatrix<f64> {
    let pe = operator_matrix(n, |a, b| {
        let strip = |m: &DMatrix<f64>| DMatrix::from_fn(n, n, |r, c| if r == c { 0.0 } else { m[(r, c)] });
        (strip(a), strip(b))
    });
    match basis {
        MatrixBasis::E => pe,
        MatrixBasis::F => {
            let t = change_of_basis(n);
            t.transpose() * pe * t
        }
    }
}

/// `P± = Π⊥ Q±`.
pub fn build_p(n: usize, sign: Sign, basis: MatrixBasis) -> DMatrix<f64> {
    build_pi_perp(n, basis) * build_q(n, sign, basis)
}

/// Orthonormal bases of the four pieces of `ker P±` for one sign.
#[derive(Debug, Clone)]
pub struct KernelSpaces {
    pub n: usize,
    pub sign: Sign,
    pub basis: MatrixBasis,
    pub ker_q: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub ker_p: DMatrix<f64>,
    /// `K±` recomputed as `ker⊥(Q) ∩ ker(Π⊥ Q)`.
    pub k_alt: DMatrix<f64>,
    /// Largest `‖Q x − w‖` over the intersection vectors `w` and their
    /// least-squares preimages `x`.
    pub range_membership: f64,
}

fn diag_unit_pairs(n: usize, basis: MatrixBasis) -> DMatrix<f64> {
    let dim = 2 * n * n;
    let mut z = DMatrix::zeros(dim, 2 * n);
    for i in 0..n {
        z[(i * n + i, i)] = 1.0;
        z[(n * n + i * n + i, n + i)] = 1.0;
    }
    match basis {
        MatrixBasis::E => z,
        MatrixBasis::F => change_of_basis(n).transpose() * z,
    }
}

pub fn kernel_spaces(n: usize, sign: Sign, basis: MatrixBasis) -> Result<KernelSpaces> {
    if n < 3 {
        return Err(Error::EdgeCountTooSmall(n));
    }
    let q = build_q(n, sign, basis);
    let pi = build_pi_perp(n, basis);
    let qs = svd_split(&q, RANK_TOL, 1e-12);

    // ker(Π⊥) ∩ ran(Q): combinations of diagonal pairs with no component
    // outside ran(Q).
    let z = diag_unit_pairs(n, basis);
    let outside = &z - &qs.range * (qs.range.transpose() * &z);
    let coeffs = svd_split(&outside, RANK_TOL, 1e-10).null;
    let w = orthonormalize(&(&z * coeffs), RANK_TOL);

    let mut pre = DMatrix::zeros(2 * n * n, w.ncols());
    let mut membership = 0.0f64;
    for c in 0..w.ncols() {
        let wc = w.column(c).into_owned();
        let x = least_squares(&q, &wc, RANK_TOL);
        membership = membership.max((&q * &x - &wc).norm());
        pre.set_column(c, &x);
    }
    let k = orthonormalize(&pre, RANK_TOL);

    let restricted = &pi * &q * &qs.row;
    let k_alt = orthonormalize(&(&qs.row * svd_split(&restricted, RANK_TOL, 1e-12).null), RANK_TOL);
    let ker_p = svd_split(&(&pi * &q), RANK_TOL, 1e-12).null;

    Ok(KernelSpaces {
        n,
        sign,
        basis,
        ker_q: qs.null,
        k,
        ker_p,
        k_alt,
        range_membership: membership,
    })
}

fn max_column_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols()).map(|c| m.column(c).norm()).fold(0.0, f64::max)
}

fn max_defect(space: &DMatrix<f64>, vectors: &DMatrix<f64>) -> f64 {
    (0..vectors.ncols())
        .map(|c| {
            let v = vectors.column(c).into_owned();
            projection_defect(space, &(&v / v.norm()))
        })
        .fold(0.0, f64::max)
}

fn subspace_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.ncols() != b.ncols() {
        return f64::INFINITY;
    }
    max_defect(a, b).max(max_defect(b, a))
}

/// Closed-form spanning sets, as columns in the requested basis.
pub mod closed_forms {
    use super::*;

    fn pairs(n: usize, mats: Vec<(DMatrix<f64>, DMatrix<f64>)>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(2 * n * n, mats.len());
        for (c, (a, b)) in mats.iter().enumerate() {
            out.set_column(c, &join(a, b));
        }
        out
    }

    fn unit(n: usize, r: usize, c: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, n);
        m[(r, c)] = 1.0;
        m
    }

    /// `(X, X)` with `X = [[0, β], [b, 0]]` in the `f` basis.
    pub fn ker_q_plus(n: usize) -> DMatrix<f64> {
        let mut mats = Vec::new();
        for k in 1..n {
            mats.push((unit(n, 0, k), unit(n, 0, k)));
            mats.push((unit(n, k, 0), unit(n, k, 0)));
        }
        pairs(n, mats)
    }

    /// `(X, X)` with `X = [[a, 0], [0, A]]` in the `f` basis.
    pub fn ker_q_minus(n: usize) -> DMatrix<f64> {
        let mut mats = vec![(unit(n, 0, 0), unit(n, 0, 0))];
        for r in 1..n {
            for c in 1..n {
                mats.push((unit(n, r, c), unit(n, r, c)));
            }
        }
        pairs(n, mats)
    }

    /// `(diag(a + a′, −(a − a′)I), diag(a − a′, −(a + a′)I))` in the `f`
    /// basis, for `(a, a′) = (1, 0), (0, 1)`.
    pub fn k_plus(n: usize) -> DMatrix<f64> {
        let block = |top: f64, rest: f64| {
            DMatrix::from_fn(n, n, |r, c| match (r == c, r) {
                (false, _) => 0.0,
                (true, 0) => top,
                (true, _) => rest,
            })
        };
        let mats = [(1.0, 0.0), (0.0, 1.0)]
            .iter()
            .map(|&(a, ap)| (block(a + ap, -(a - ap)), block(a - ap, -(a + ap))))
            .collect();
        pairs(n, mats)
    }

    fn k_minus_e(n: usize, border: f64) -> DMatrix<f64> {
        let ones = DVector::from_element(n, 1.0);
        let nf = n as f64;
        let mats = (0..n - 1)
            .map(|k| {
                let mut cv = DVector::zeros(n);
                cv[k] = 1.0;
                cv[n - 1] = -1.0;
                let diag = DMatrix::from_diagonal(&cv);
                let b = (&ones * cv.transpose()) / nf + (&cv * ones.transpose()) * (border / nf);
                (&diag + &b, -&diag + &b)
            })
            .collect();
        pairs(n, mats)
    }

    /// `(C + (1/n)1cᵀ − (1/n)c1ᵀ, −C + (1/n)1cᵀ − (1/n)c1ᵀ)` with
    /// `C = diag(c)`, `Σc = 0`, in the `e` basis.
    pub fn k_minus(n: usize) -> DMatrix<f64> {
        k_minus_e(n, -1.0)
    }

    /// The same family with both border terms added, `+ (1/n)c1ᵀ`.
    pub fn k_minus_symmetric_border(n: usize) -> DMatrix<f64> {
        k_minus_e(n, 1.0)
    }

    pub fn to_basis(n: usize, cols: DMatrix<f64>, from: MatrixBasis, to: MatrixBasis) -> DMatrix<f64> {
        match (from, to) {
            (MatrixBasis::E, MatrixBasis::F) => change_of_basis(n).transpose() * cols,
            (MatrixBasis::F, MatrixBasis::E) => change_of_basis(n) * cols,
            _ => cols,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KernelDims {
    pub ker_q_minus: usize,
    pub ker_q_plus: usize,
    pub k_minus: usize,
    pub k_plus: usize,
}

impl KernelDims {
    pub fn predicted(n: usize) -> Self {
        Self {
            ker_q_minus: (n - 1) * (n - 1) + 1,
            ker_q_plus: 2 * (n - 1),
            k_minus: n - 1,
            k_plus: 2,
        }
    }

    pub fn total(&self) -> usize {
        self.ker_q_minus + self.ker_q_plus + self.k_minus + self.k_plus
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelResiduals {
    /// `max ‖Q± x‖` over the computed `ker Q±` bases.
    pub ker_q: f64,
    /// `max ‖P± x‖` over the computed `K±` bases.
    pub k_in_ker_p: f64,
    /// `max ‖Π⊥ Q± x‖` over `K±`, i.e. `Q± x` is diagonal.
    pub k_image_diagonal: f64,
    /// `max |⟨u, v⟩|` for `u ∈ ker Q±`, `v ∈ K±`.
    pub orthogonality: f64,
    /// Distance between `ker Q± ⊕ K±` and the directly computed `ker P±`.
    pub ker_p_span: f64,
    /// Distance between `K±` and the alternative computation.
    pub k_cross_check: f64,
    /// Least-squares residual for the preimages under `Q±`.
    pub range_membership: f64,
    /// Distance between the subspaces computed in the `e` and `f` bases.
    pub basis_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormDefects {
    pub ker_q_plus: f64,
    pub ker_q_minus: f64,
    pub k_plus: f64,
    pub k_minus: f64,
    /// Rank of each closed-form spanning set, in the order above.
    pub ranks: [usize; 4],
    /// Defect of the `K−` family with both border terms added; reported,
    /// not part of the pass criterion.
    pub k_minus_symmetric_border: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelBases {
    /// Columns of each orthonormal basis, `2n²` entries each, row-major
    /// `(X̂, X̌)` in the report's basis.
    pub ker_q_minus: Vec<Vec<f64>>,
    pub ker_q_plus: Vec<Vec<f64>>,
    pub k_minus: Vec<Vec<f64>>,
    pub k_plus: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelReport {
    pub schema: u32,
    pub n: usize,
    pub basis: MatrixBasis,
    pub dims: KernelDims,
    pub predicted: KernelDims,
    pub ker_p_minus: usize,
    pub ker_p_plus: usize,
    pub total: usize,
    pub residuals_minus: KernelResiduals,
    pub residuals_plus: KernelResiduals,
    pub closed_form: ClosedFormDefects,
    pub tolerance: f64,
    pub pass: bool,
    pub failures: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bases: Option<KernelBases>,
}

impl KernelReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("kernel reports always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: KernelReport = serde_json::from_str(text)?;
        if r.schema != 1 {
            return Err(Error::Parse(format!("unsupported schema {}", r.schema)));
        }
        if r.n < 3 {
            return Err(Error::EdgeCountTooSmall(r.n));
        }
        Ok(r)
    }
}

/// Tolerance on every residual of a kernel report.
pub const KERNEL_TOL: f64 = 1e-10;

fn residuals(sp: &KernelSpaces, other: &KernelSpaces) -> KernelResiduals {
    let n = sp.n;
    let q = build_q(n, sp.sign, sp.basis);
    let pi = build_pi_perp(n, sp.basis);
    let p = &pi * &q;
    let mut union = DMatrix::zeros(2 * n * n, sp.ker_q.ncols() + sp.k.ncols());
    union
        .view_mut((0, 0), (2 * n * n, sp.ker_q.ncols()))
        .copy_from(&sp.ker_q);
    union
        .view_mut((0, sp.ker_q.ncols()), (2 * n * n, sp.k.ncols()))
        .copy_from(&sp.k);
    let to_same = |m: &DMatrix<f64>| closed_forms::to_basis(n, m.clone(), other.basis, sp.basis);
    KernelResiduals {
        ker_q: max_column_norm(&(&q * &sp.ker_q)),
        k_in_ker_p: max_column_norm(&(&p * &sp.k)),
        k_image_diagonal: max_column_norm(&(&pi * &q * &sp.k)),
        orthogonality: (sp.ker_q.transpose() * &sp.k).amax(),
        ker_p_span: subspace_distance(&sp.ker_p, &union),
        k_cross_check: subspace_distance(&sp.k, &sp.k_alt),
        range_membership: sp.range_membership,
        basis_change: subspace_distance(&sp.ker_q, &to_same(&other.ker_q))
            .max(subspace_distance(&sp.k, &to_same(&other.k))),
    }
}

fn columns(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.ncols()).map(|c| m.column(c).iter().copied().collect()).collect()
}

fn pattern_rank(m: &DMatrix<f64>) -> usize {
    crate::linalg::rank_real(m, RANK_TOL).rank
}

/// Full kernel decomposition in the `f` basis, cross-checked in the `e`
/// basis and against the closed forms.
pub fn compute_kernel_decomposition(n: usize) -> Result<KernelReport> {
    compute_kernel_decomposition_with(n, MatrixBasis::F, false)
}

pub fn compute_kernel_decomposition_with(n: usize, basis: MatrixBasis, include_bases: bool) -> Result<KernelReport> {
    if n < 3 {
        return Err(Error::EdgeCountTooSmall(n));
    }
    let other_basis = match basis {
        MatrixBasis::E => MatrixBasis::F,
        MatrixBasis::F => MatrixBasis::E,
    };
    let minus = kernel_spaces(n, Sign::Minus, basis)?;
    let plus = kernel_spaces(n, Sign::Plus, basis)?;
    let minus_other = kernel_spaces(n, Sign::Minus, other_basis)?;
    let plus_other = kernel_spaces(n, Sign::Plus, other_basis)?;

    let dims = KernelDims {
        ker_q_minus: minus.ker_q.ncols(),
        ker_q_plus: plus.ker_q.ncols(),
        k_minus: minus.k.ncols(),
        k_plus: plus.k.ncols(),
    };
    let predicted = KernelDims::predicted(n);
    let residuals_minus = residuals(&minus, &minus_other);
    let residuals_plus = residuals(&plus, &plus_other);

    use closed_forms as cf;
    let f = MatrixBasis::F;
    let kqp = cf::to_basis(n, cf::ker_q_plus(n), f, basis);
    let kqm = cf::to_basis(n, cf::ker_q_minus(n), f, basis);
    let kp = cf::to_basis(n, cf::k_plus(n), f, basis);
    let km = cf::to_basis(n, cf::k_minus(n), MatrixBasis::E, basis);
    let km_sym = cf::to_basis(n, cf::k_minus_symmetric_border(n), MatrixBasis::E, basis);
    let closed_form = ClosedFormDefects {
        ker_q_plus: max_defect(&plus.ker_q, &kqp),
        ker_q_minus: max_defect(&minus.ker_q, &kqm),
        k_plus: max_defect(&plus.k, &kp),
        k_minus: max_defect(&minus.k, &km),
        ranks: [
            pattern_rank(&kqp),
            pattern_rank(&kqm),
            pattern_rank(&kp),
            pattern_rank(&km),
        ],
        k_minus_symmetric_border: max_defect(&minus.k, &km_sym),
    };

    let mut failures = Vec::new();
    let checks = [
        ("ker Q-", dims.ker_q_minus, predicted.ker_q_minus),
        ("ker Q+", dims.ker_q_plus, predicted.ker_q_plus),
        ("K-", dims.k_minus, predicted.k_minus),
        ("K+", dims.k_plus, predicted.k_plus),
        ("ker P-", minus.ker_p.ncols(), predicted.ker_q_minus + predicted.k_minus),
        ("ker P+", plus.ker_p.ncols(), predicted.ker_q_plus + predicted.k_plus),
        ("K- (alternative)", minus.k_alt.ncols(), predicted.k_minus),
        ("K+ (alternative)", plus.k_alt.ncols(), predicted.k_plus),
    ];
    for (name, got, want) in checks {
        if got != want {
            failures.push(format!("{name}: dimension {got}, expected {want}"));
        }
    }
    for (label, r) in [("-", &residuals_minus), ("+", &residuals_plus)] {
        let named = [
            ("ker Q residual", r.ker_q),
            ("K in ker P residual", r.k_in_ker_p),
            ("K image diagonal residual", r.k_image_diagonal),
            ("orthogonality", r.orthogonality),
            ("ker P span", r.ker_p_span),
            ("K cross-check", r.k_cross_check),
            ("range membership", r.range_membership),
            ("basis change", r.basis_change),
        ];
        for (name, v) in named {
            if v.is_nan() || v >= KERNEL_TOL {
                failures.push(format!("sign {label}: {name} {v:.3e}"));
            }
        }
    }
    let cf_checks = [
        (
            "closed form ker Q+",
            closed_form.ker_q_plus,
            closed_form.ranks[0],
            predicted.ker_q_plus,
        ),
        (
            "closed form ker Q-",
            closed_form.ker_q_minus,
            closed_form.ranks[1],
            predicted.ker_q_minus,
        ),
        (
            "closed form K+",
            closed_form.k_plus,
            closed_form.ranks[2],
            predicted.k_plus,
        ),
        (
            "closed form K-",
            closed_form.k_minus,
            closed_form.ranks[3],
            predicted.k_minus,
        ),
    ];
    for (name, defect, rank, want) in cf_checks {
        if defect.is_nan() || defect >= KERNEL_TOL || rank != want {
            failures.push(format!("{name}: defect {defect:.3e}, rank {rank} (expected {want})"));
        }
    }

    let bases = include_bases.then(|| KernelBases {
        ker_q_minus: columns(&minus.ker_q),
        ker_q_plus: columns(&plus.ker_q),
        k_minus: columns(&minus.k),
        k_plus: columns(&plus.k),
    });
    Ok(KernelReport {
        schema: 1,
        n,
        basis,
        dims,
        predicted,
        ker_p_minus: minus.ker_p.ncols(),
        ker_p_plus: plus.ker_p.ncols(),
        total: dims.total(),
        residuals_minus,
        residuals_plus,
        closed_form,
        tolerance: KERNEL_TOL,
        pass: failures.is_empty(),
        failures,
        bases,
    })
}

/// Which of the four subspaces a kernel element comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subspace {
    KerQMinus,
    KerQPlus,
    KMinus,
    KPlus,
}

impl Subspace {
    pub const ALL: [Subspace; 4] = [
        Subspace::KerQMinus,
        Subspace::KerQPlus,
        Subspace::KMinus,
        Subspace::KPlus,
    ];

    pub fn sign(self) -> Sign {
        match self {
            Subspace::KerQMinus | Subspace::KMinus => Sign::Minus,
            Subspace::KerQPlus | Subspace::KPlus => Sign::Plus,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Subspace::KerQMinus => "ker_q_minus",
            Subspace::KerQPlus => "ker_q_plus",
            Subspace::KMinus => "k_minus",
            Subspace::KPlus => "k_plus",
        }
    }
}

/// A solution `(X̂, X̌)` of the vertex-condition system, in the `e` basis.
///
/// `Minus` elements live in the `τ = +1` eigenspace, `χ = (X, X)`; `Plus`
/// elements in `τ = −1`, `χ = (X, −X)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelElement {
    pub subspace: Subspace,
    pub hat: DMatrix<f64>,
    pub check: DMatrix<f64>,
}

impl KernelElement {
    pub fn n(&self) -> usize {
        self.hat.nrows()
    }

    /// The basic solution at first-particle momentum `k1` (forward
    /// assignment only).
    pub fn basic_tensor(&self) -> AmplitudeTensor {
        let n = self.n();
        let s = vertex_matrices(n).s;
        let tau_sign = match self.subspace.sign() {
            Sign::Minus => 1.0,
            Sign::Plus => -1.0,
        };
        // transform values per side: (ψ^{++}, ψ^{−−}, ψ^{+−}, ψ^{−+})
        let hat = [
            -(&self.hat * &s),
            -(&self.hat * &s) * tau_sign,
            self.hat.clone(),
            &self.hat * tau_sign,
        ];
        let check = [
            -(&s * &self.check) * tau_sign,
            -(&s * &self.check),
            self.check.clone(),
            &self.check * tau_sign,
        ];
        let signs = [
            (Sign::Plus, Sign::Plus),
            (Sign::Minus, Sign::Minus),
            (Sign::Plus, Sign::Minus),
            (Sign::Minus, Sign::Plus),
        ];
        let mut t = AmplitudeTensor::new(n);
        for i in 1..=n {
            for j in 1..=n {
                for &sector in Sector::slots(i, j) {
                    let vals = if sector == Sector::Below { &check } else { &hat };
                    for (v, &(sigma, tau)) in vals.iter().zip(&signs) {
                        let amp = v[(i - 1, j - 1)] * transform_sign(sigma, tau);
                        if amp != 0.0 {
                            t.accumulate(
                                key(i, j, sector, sigma, tau, Assignment::Forward),
                                Complex64::new(amp, 0.0),
                            );
                        }
                    }
                }
            }
        }
        t
    }

    /// Largest off-diagonal disagreement between the hat and check readings
    /// of `ξ` and `χ`; zero for elements of `ker P±`.
    pub fn off_diagonal_mismatch(&self) -> f64 {
        let n = self.n();
        let s = vertex_matrices(n).s;
        let sg = self.subspace.sign().value();
        let a = &self.hat * &s + (&s * &self.check) * sg;
        let b = &self.hat - &self.check;
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in 0..n {
                if r != c {
                    worst = worst.max(a[(r, c)].abs()).max(b[(r, c)].abs());
                }
            }
        }
        worst
    }
}

/// Orthonormal basis of one subspace as kernel elements.
pub fn kernel_elements(n: usize, subspace: Subspace) -> Result<Vec<KernelElement>> {
    let sp = kernel_spaces(n, subspace.sign(), MatrixBasis::E)?;
    let cols = match subspace {
        Subspace::KerQMinus | Subspace::KerQPlus => &sp.ker_q,
        Subspace::KMinus | Subspace::KPlus => &sp.k,
    };
    Ok((0..cols.ncols())
        .map(|c| {
            let (hat, check) = split(&cols.column(c).into_owned(), n);
            KernelElement { subspace, hat, check }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_config;
    use crate::domain::{Field, QuadrantPoint};
    use crate::sampling::Sampler;
    use crate::two_particle::{build_basis, build_element, Family};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_c2(rng: &mut ChaCha8Rng, n: usize) -> Vec<[Complex64; 2]> {
        (0..n * n)
            .map(|_| {
                [
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                ]
            })
            .collect()
    }

    #[test]
    fn zero_transforms_satisfy_everything() {
        let z = TransformVectors2::zeros(4);
        assert_eq!(check_kirchhoff_transforms(&z, &z).unwrap().max(), 0.0);
        let t = AmplitudeTensor::new(3);
        let m = MomentumPair::from_k1(0.3).unwrap();
        let t4 = extract_transforms(&t, &m, 0.3).unwrap();
        let r = check_diagonal_conditions(&t4, 1.0).unwrap();
        assert_eq!(r.max(), 0.0);
    }

    #[test]
    fn random_transforms_violate_vertex_conditions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let hat = TransformVectors2 {
            n: 3,
            xi: random_c2(&mut rng, 3),
            chi: random_c2(&mut rng, 3),
        };
        let r = check_kirchhoff_transforms(&hat, &hat).unwrap();
        assert!(r.hat_form > 1e-3 && r.check_form > 1e-3);
        assert!(check_kirchhoff_transforms(&hat, &TransformVectors2::zeros(4)).is_err());
    }

    #[test]
    fn basis_elements_satisfy_transform_vertex_conditions() {
        for n in 3..=5 {
            let cfg = make_config(n, 1.3).unwrap();
            let m = MomentumPair::from_k1(0.42).unwrap();
            for e in build_basis(&cfg, m).unwrap().elements {
                for a in Assignment::BOTH {
                    let hat = extract_transforms2(&e.tensor, a, Side::Hat);
                    let check = extract_transforms2(&e.tensor, a, Side::Check);
                    let r = check_kirchhoff_transforms(&hat, &check).unwrap();
                    assert!(r.hat_form < 1e-11 && r.check_form < 1e-11, "{}: {r:?}", e.family);
                    if matches!(e.family, Family::Antisym { .. }) {
                        assert!(r.off_diagonal_mismatch < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn tau_commutes_with_s_and_pi() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 4;
        let s = vertex_matrices(n).s;
        let chi = random_c2(&mut rng, n);
        let right = |v: &[[Complex64; 2]]| -> Vec<[Complex64; 2]> {
            (0..n * n)
                .map(|idx| {
                    let (i, j) = (idx / n, idx % n);
                    let mut out = [ZERO; 2];
                    for (c, o) in out.iter_mut().enumerate() {
                        for k in 0..n {
                            *o += v[i * n + k][c] * s[(k, j)];
                        }
                    }
                    out
                })
                .collect()
        };
        let pi = |v: &[[Complex64; 2]]| -> Vec<[Complex64; 2]> {
            (0..n * n)
                .map(|idx| if idx % (n + 1) == 0 { v[idx] } else { [ZERO; 2] })
                .collect()
        };
        let close = |a: &[[Complex64; 2]], b: &[[Complex64; 2]]| {
            a.iter()
                .zip(b)
                .all(|(x, y)| (x[0] - y[0]).norm() < 1e-14 && (x[1] - y[1]).norm() < 1e-14)
        };
        assert!(close(&tau2(&right(&chi)), &right(&tau2(&chi))));
        assert!(close(&tau2(&pi(&chi)), &pi(&tau2(&chi))));
        assert!(close(&tau2(&tau2(&chi)), &chi));
        let four: Vec<[Complex64; 4]> = chi.iter().map(|e| [e[0], e[1], e[1], e[0]]).collect();
        assert_eq!(tau4(&tau4(&four)), four);
    }

    #[test]
    fn single_plane_wave_fills_one_slot() {
        let k = 0.3;
        let m = MomentumPair::from_k1(k).unwrap();
        let mut t = AmplitudeTensor::new(3);
        t.insert(
            key(1, 1, Sector::Above, Sign::Plus, Sign::Plus, Assignment::Forward),
            Complex64::new(1.0, 0.0),
        )
        .unwrap();
        let t4 = extract_transforms(&t, &m, k).unwrap();
        let nonzero: Vec<_> = [&t4.hat_xi, &t4.hat_chi, &t4.check_xi, &t4.check_chi]
            .iter()
            .flat_map(|v| v.iter().flat_map(|e| e.iter()))
            .filter(|z| z.norm() > 0.0)
            .collect();
        assert_eq!(nonzero.len(), 1);
        assert!((t4.hat_xi[0][0] + partner(k)).norm() < 1e-15);
    }

    #[test]
    fn extraction_round_trips() {
        let mut s = Sampler::new(17);
        let cfg = make_config(4, -0.9).unwrap();
        for k1 in [0.2, 0.9] {
            let m = MomentumPair::from_k1(k1).unwrap();
            let k = k1.min(partner(k1));
            for e in build_basis(&cfg, m).unwrap().elements.iter().step_by(5) {
                let t4 = extract_transforms(&e.tensor, &m, k).unwrap();
                let back = t4.resynthesize();
                for _ in 0..50 {
                    let (i, j) = (s.edge(4), s.edge(4));
                    let (x, y) = s.next_pair();
                    let p = QuadrantPoint::natural(i, j, x, y).unwrap();
                    assert!((back.evaluate(&p, &m) - e.value(&p)).norm() < 1e-12);
                }
                for idx in 0..16 {
                    if idx % 5 != 0 {
                        assert_eq!(t4.hat_xi[idx], t4.check_xi[idx]);
                        assert_eq!(t4.hat_chi[idx], t4.check_chi[idx]);
                    }
                }
            }
        }
        let m = MomentumPair::from_k1(0.3).unwrap();
        let t = AmplitudeTensor::new(3);
        assert!(matches!(
            extract_transforms(&t, &m, 0.35),
            Err(Error::MomentumMismatch(_))
        ));
        assert!(extract_transforms(&t, &m, 0.9).is_err());
    }

    #[test]
    fn m_n_shapes() {
        let (m, nn) = build_m_n(0.3, 0.0).unwrap();
        assert_eq!(m, Matrix4::identity());
        assert_eq!(nn, Matrix4::identity());
        let c = 1.7;
        let (cp, cm) = pole_scalars(0.0, c).unwrap();
        assert!((cm - Complex64::new(0.0, c)).norm() < 1e-15);
        assert!((cp - Complex64::new(0.0, -c)).norm() < 1e-15);
        let (m, nn) = build_m_n(0.0, c).unwrap();
        assert!((m[(0, 0)] - (1.0 + cm)).norm() < 1e-15);
        assert!((m[(1, 0)] + cm).norm() < 1e-15);
        assert!((m[(3, 2)] - cm).norm() < 1e-15);
        assert!((nn[(0, 3)] - cp).norm() < 1e-15);
        assert!((nn[(2, 1)] + cp).norm() < 1e-15);
        assert!(matches!(
            build_m_n(std::f64::consts::FRAC_1_SQRT_2 - 1e-7, 1.0),
            Err(Error::Singularity { .. })
        ));
        assert!(build_m_n(std::f64::consts::FRAC_1_SQRT_2, 0.0).is_ok());
        assert!(build_m_n(0.8, 1.0).is_err());
    }

    #[test]
    fn m_n_determinants_and_raw_equivalence() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let k = rng.random_range(0.0..0.7);
            let c = rng.random_range(-3.0..3.0);
            let (m, nn) = build_m_n(k, c).unwrap();
            assert!((m.determinant() - 1.0).norm() < 1e-10);
            assert!((nn.determinant() - 1.0).norm() < 1e-10);
            let (cp, cm) = pole_scalars(k, c).unwrap();
            let raw = raw_system(cp, cm);
            let solved_m = -(raw[0].0.try_inverse().unwrap() * raw[0].1);
            let solved_n = -(raw[1].0.try_inverse().unwrap() * raw[1].1);
            let scale = 1.0 + cm.norm() + cp.norm();
            assert!(cmax(&(solved_m - m)) < 1e-12 * scale);
            assert!(cmax(&(solved_n - nn)) < 1e-12 * scale);
        }
    }

    #[test]
    fn basis_elements_satisfy_diagonal_conditions() {
        for n in 3..=5 {
            for (c, k1) in [(1.0, 0.6), (-1.5, 0.28), (0.4, 0.95)] {
                let cfg = make_config(n, c).unwrap();
                let m = MomentumPair::from_k1(k1).unwrap();
                let k = k1.min(partner(k1));
                for e in build_basis(&cfg, m).unwrap().elements {
                    let t4 = extract_transforms(&e.tensor, &m, k).unwrap();
                    let r = check_diagonal_conditions(&t4, c).unwrap();
                    assert!(r.eigs_residual < 1e-10 && r.raw_residual < 1e-10, "{}: {r:?}", e.family);
                    assert!(r.path_discrepancy < 1e-12);
                    assert!(t4.kirchhoff_residual().hat_form < 1e-11);
                    assert!(t4.kirchhoff_residual().check_form < 1e-11);
                    // wrong coupling breaks the diagonal family
                    if matches!(e.family, Family::SymDiag { .. }) {
                        let bad = check_diagonal_conditions(&t4, c + 0.5).unwrap();
                        assert!(bad.eigs_residual > 1e-3);
                    }
                }
            }
        }
    }

    #[test]
    fn q_annihilates_closed_forms() {
        for n in 3..=6 {
            let qp = build_q(n, Sign::Plus, MatrixBasis::F);
            let qm = build_q(n, Sign::Minus, MatrixBasis::F);
            assert!((&qp * closed_forms::ker_q_plus(n)).amax() < 1e-14);
            assert!((&qm * closed_forms::ker_q_minus(n)).amax() < 1e-14);
        }
        let qm = build_q(3, Sign::Minus, MatrixBasis::E);
        assert_eq!(svd_split(&qm, RANK_TOL, 1e-12).null.ncols(), 5);
    }

    #[test]
    fn helmert_is_orthogonal_and_diagonalizes_s() {
        for n in 3..=7 {
            let f = helmert(n);
            assert!((f.transpose() * &f - DMatrix::identity(n, n)).amax() < 1e-14);
            let sf = f.transpose() * vertex_matrices(n).s * &f;
            assert!((sf - s_matrix(n, MatrixBasis::F)).amax() < 1e-14);
            let t = change_of_basis(n);
            assert!((t.transpose() * &t - DMatrix::identity(2 * n * n, 2 * n * n)).amax() < 1e-13);
            // Q is covariant, Π⊥ is not
            let qe = build_q(n, Sign::Plus, MatrixBasis::E);
            let qf = build_q(n, Sign::Plus, MatrixBasis::F);
            assert!((t.transpose() * qe * &t - qf).amax() < 1e-13);
        }
    }

    #[test]
    fn kernel_dimensions() {
        for (n, dims) in [(3, (5, 4, 2, 2)), (4, (10, 6, 3, 2)), (6, (26, 10, 5, 2))] {
            let r = compute_kernel_decomposition(n).unwrap();
            assert!(r.pass, "n = {n}: {:?}", r.failures);
            let got = (r.dims.ker_q_minus, r.dims.ker_q_plus, r.dims.k_minus, r.dims.k_plus);
            assert_eq!(got, dims);
            assert_eq!(r.total, n * n + n + 1);
            assert_eq!(r.ker_p_minus, n * n - n + 1);
            assert_eq!(r.ker_p_plus, 2 * n);
        }
        assert!(compute_kernel_decomposition(2).is_err());
    }

    #[test]
    fn symmetric_border_family_is_not_in_k_minus() {
        let r = compute_kernel_decomposition(4).unwrap();
        assert!(r.closed_form.k_minus < 1e-12);
        assert!(r.closed_form.k_minus_symmetric_border > 1e-2);
    }

    #[test]
    fn e_basis_report_matches() {
        let r = compute_kernel_decomposition_with(5, MatrixBasis::E, true).unwrap();
        assert!(r.pass, "{:?}", r.failures);
        let b = r.bases.as_ref().unwrap();
        assert_eq!(b.k_plus.len(), 2);
        assert_eq!(b.ker_q_minus[0].len(), 50);
        let back = KernelReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn basic_solutions_satisfy_vertex_conditions_only() {
        let n = 4;
        let m = MomentumPair::from_k1(0.37).unwrap();
        let k = 0.37;
        for sub in Subspace::ALL {
            let elems = kernel_elements(n, sub).unwrap();
            assert_eq!(
                elems.len(),
                match sub {
                    Subspace::KerQMinus => 10,
                    Subspace::KerQPlus => 6,
                    Subspace::KMinus => 3,
                    Subspace::KPlus => 2,
                }
            );
            let mut worst_jump = 0.0f64;
            for e in &elems {
                assert!(e.off_diagonal_mismatch() < 1e-12);
                let t = e.basic_tensor();
                let hat = extract_transforms2(&t, Assignment::Forward, Side::Hat);
                let check = extract_transforms2(&t, Assignment::Forward, Side::Check);
                let r = check_kirchhoff_transforms(&hat, &check).unwrap();
                assert!(r.max() < 1e-12, "{sub:?}: {r:?}");
                let t4 = extract_transforms(&t, &m, k).unwrap();
                worst_jump = worst_jump.max(check_diagonal_conditions(&t4, 1.0).unwrap().eigs_residual);
            }
            assert!(worst_jump > 1e-3, "{sub:?}");
        }
    }

    #[test]
    fn single_element_diagonal_report_uses_each_quadrant() {
        let cfg = make_config(3, 1.0).unwrap();
        let m = MomentumPair::real(0.6, 0.8).unwrap();
        let e = build_element(&cfg, Family::SymDiag { i: 2 }, m).unwrap();
        let t4 = extract_transforms(&e.tensor, &m, 0.6).unwrap();
        let r = check_diagonal_conditions(&t4, 1.0).unwrap();
        assert_eq!(r.per_quadrant.len(), 3);
    }
}
