//! Two-particle product states and the explicit eigensolution basis.
//!
//! Products of one-particle solutions expand exactly into plane waves, so
//! every state here is an [`AmplitudeTensor`]. The amplitudes of a product
//! do not depend on the momentum values; only the coupling-dependent
//! coefficients of the diagonal family do.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::{
    check_edge, AmplitudeKey, AmplitudeTensor, Assignment, Direction, Field, MomentumPair, QuadrantPoint, Sector, Sign,
    StarConfig,
};
use crate::error::{Error, Result};
use crate::linalg::{rank_complex, RankInfo};
use crate::one_particle::{one_particle, Branch, OneParticleKind, OneParticleSolution};
use crate::sampling::Sampler;

/// Amplitudes whose magnitude falls to this level through cancellation are
/// dropped from assembled basis tensors.
pub const CANCELLATION_FLOOR: f64 = 1e-14;

/// Which product of one-particle factors a state is.
///
/// `PhiPhi` indices run over `0..=n`, index 0 meaning `φ^0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProductKind {
    PhiPhi { i: usize, j: usize },
    PsiPsi { i: usize, j: usize },
    PsiXiAnti { i: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoParticleState {
    pub kind: ProductKind,
    pub assignment: Assignment,
    pub momentum: MomentumPair,
    pub tensor: AmplitudeTensor,
}

fn phi_kind(index: usize) -> OneParticleKind {
    if index == 0 {
        OneParticleKind::PhiZero
    } else {
        OneParticleKind::Phi(index)
    }
}

/// Adds `weight · f(x) g(y)` to `out`, with `f` carrying momentum `k_s` and
/// `g` carrying `k_t` under `assignment`.
fn accumulate_product(
    out: &mut AmplitudeTensor,
    f: &OneParticleSolution,
    g: &OneParticleSolution,
    assignment: Assignment,
    weight: Complex64,
) {
    let n = out.n();
    for i in 1..=n {
        for j in 1..=n {
            for &sector in Sector::slots(i, j) {
                let (bx, by) = (Branch::for_x(sector), Branch::for_y(sector));
                for sigma in Sign::BOTH {
                    let a = f.coefficient(i, sigma, bx);
                    if a == Complex64::default() {
                        continue;
                    }
                    for tau in Sign::BOTH {
                        let amp = a * g.coefficient(j, tau, by);
                        if amp != Complex64::default() {
                            let key = AmplitudeKey {
                                i,
                                j,
                                sector,
                                sigma,
                                tau,
                                assignment,
                            };
                            out.accumulate(key, weight * amp);
                        }
                    }
                }
            }
        }
    }
}

fn product_tensor(n: usize, kind: ProductKind, assignment: Assignment) -> Result<AmplitudeTensor> {
    let one = Complex64::new(1.0, 0.0);
    let mut t = AmplitudeTensor::new(n);
    match kind {
        ProductKind::PhiPhi { i, j } => {
            for idx in [i, j] {
                if idx > n {
                    return Err(Error::IndexOutOfRange { index: idx, n });
                }
            }
            let f = one_particle(n, phi_kind(i))?;
            let g = one_particle(n, phi_kind(j))?;
            accumulate_product(&mut t, &f, &g, assignment, one);
        }
        ProductKind::PsiPsi { i, j } => {
            let f = one_particle(n, OneParticleKind::Scattering(i))?;
            let g = one_particle(n, OneParticleKind::Scattering(j))?;
            accumulate_product(&mut t, &f, &g, assignment, one);
        }
        ProductKind::PsiXiAnti { i } => {
            let f = one_particle(n, OneParticleKind::Phi(i))?;
            let xi = one_particle(n, OneParticleKind::Xi)?;
            accumulate_product(&mut t, &f, &xi, assignment, one);
            accumulate_product(&mut t, &xi, &f, assignment, -one);
        }
    }
    Ok(t)
}

/// Expands a product state into plane waves.
pub fn product_state(
    cfg: &StarConfig,
    kind: ProductKind,
    assignment: Assignment,
    m: MomentumPair,
) -> Result<TwoParticleState> {
    let tensor = product_tensor(cfg.n(), kind, assignment)?;
    Ok(TwoParticleState {
        kind,
        assignment,
        momentum: m,
        tensor,
    })
}

/// `min(|i − j|, n − |i − j|)`.
pub fn circular_distance(i: usize, j: usize, n: usize) -> usize {
    let d = i.abs_diff(j) % n;
    d.min(n - d)
}

/// The three families of basis elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Antisym { i: usize, j: usize },
    SymOffDiag { i: usize, j: usize },
    SymDiag { i: usize },
}

impl Family {
    pub fn label(&self) -> &'static str {
        match self {
            Family::Antisym { .. } => "antisym",
            Family::SymOffDiag { .. } => "sym_off_diag",
            Family::SymDiag { .. } => "sym_diag",
        }
    }

    /// `+1` for symmetric families, `−1` for the antisymmetric one.
    pub fn exchange_parity(&self) -> f64 {
        match self {
            Family::Antisym { .. } => -1.0,
            _ => 1.0,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match *self {
            Family::Antisym { i, j } => {
                check_edge(i, n)?;
                check_edge(j, n)
            }
            Family::SymOffDiag { i, j } => {
                check_edge(i, n)?;
                check_edge(j, n)?;
                if circular_distance(i, j, n) < 2 {
                    return Err(Error::InvalidAmplitude(format!(
                        "sym_off_diag needs circular distance >= 2, got ({i}, {j}) for n = {n}"
                    )));
                }
                Ok(())
            }
            Family::SymDiag { i } => check_edge(i, n),
        }
    }

    /// All families for `n` edges, in canonical order.
    pub fn enumerate(n: usize) -> Vec<Family> {
        let mut out = Vec::with_capacity(2 * n * n - 2 * n);
        for i in 1..=n {
            for j in 1..=n {
                out.push(Family::Antisym { i, j });
            }
        }
        for i in 1..=n {
            for j in 1..=n {
                if circular_distance(i, j, n) >= 2 {
                    out.push(Family::SymOffDiag { i, j });
                }
            }
        }
        out.extend((1..=n).map(|i| Family::SymDiag { i }));
        out
    }
}

/// Parses the display form, e.g. `sym_diag(2)` or `antisym(1,3)`.
impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("unrecognised basis element {text:?}"));
        let t = text.trim();
        let open = t.find('(').ok_or_else(bad)?;
        let inner = t[open + 1..].strip_suffix(')').ok_or_else(bad)?;
        let idx = inner
            .split(',')
            .map(|v| v.trim().parse::<usize>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        match (&t[..open], idx.as_slice()) {
            ("antisym", &[i, j]) => Ok(Family::Antisym { i, j }),
            ("sym_off_diag", &[i, j]) => Ok(Family::SymOffDiag { i, j }),
            ("sym_diag", &[i]) => Ok(Family::SymDiag { i }),
            _ => Err(bad()),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Family::Antisym { i, j } => write!(f, "antisym({i},{j})"),
            Family::SymOffDiag { i, j } => write!(f, "sym_off_diag({i},{j})"),
            Family::SymDiag { i } => write!(f, "sym_diag({i})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisElement {
    pub family: Family,
    pub tensor: AmplitudeTensor,
    pub momentum: MomentumPair,
    pub coupling: f64,
}

impl Field for BasisElement {
    fn edges(&self) -> usize {
        self.tensor.n()
    }

    fn value(&self, p: &QuadrantPoint) -> Complex64 {
        self.tensor.evaluate(p, &self.momentum)
    }

    fn derivative(&self, p: &QuadrantPoint, dir: Direction) -> Complex64 {
        self.tensor.derivative(p, &self.momentum, dir)
    }
}

/// Tensor of one basis element. The diagonal family carries
/// `n·k1/c` and `n·k2/c` coefficients and needs `c ≠ 0`.
pub fn family_tensor(n: usize, c: f64, family: Family, m: &MomentumPair) -> Result<AmplitudeTensor> {
    family.validate(n)?;
    let one = Complex64::new(1.0, 0.0);
    let (fw, sw) = (Assignment::Forward, Assignment::Swapped);
    let t = match family {
        Family::Antisym { i, j } => AmplitudeTensor::combine(
            one,
            &product_tensor(n, ProductKind::PsiPsi { i, j }, fw)?,
            -one,
            &product_tensor(n, ProductKind::PsiPsi { i: j, j: i }, sw)?,
        ),
        Family::SymOffDiag { i, j } => AmplitudeTensor::combine(
            one,
            &product_tensor(n, ProductKind::PhiPhi { i, j }, fw)?,
            one,
            &product_tensor(n, ProductKind::PhiPhi { i: j, j: i }, sw)?,
        ),
        Family::SymDiag { i } => {
            if c == 0.0 {
                return Err(Error::ZeroCoupling);
            }
            let nf = n as f64;
            return sym_diag_tensor(n, i, -m.k1() * nf / c, m.k2() * nf / c);
        }
    };
    Ok(t.pruned(CANCELLATION_FLOOR))
}

/// The diagonal family with explicit coefficients `a1` on
/// `Φ^{0i}_12 + Φ^{i0}_21` and `a2` on `Φ^{0i}_21 + Φ^{i0}_12`. The basis
/// element uses `a1 = −n·k1/c`, `a2 = n·k2/c`.
pub fn sym_diag_tensor(n: usize, i: usize, a1: Complex64, a2: Complex64) -> Result<AmplitudeTensor> {
    Family::SymDiag { i }.validate(n)?;
    let one = Complex64::new(1.0, 0.0);
    let (fw, sw) = (Assignment::Forward, Assignment::Swapped);
    let mut t = AmplitudeTensor::combine(
        one,
        &product_tensor(n, ProductKind::PsiXiAnti { i }, fw)?,
        -one,
        &product_tensor(n, ProductKind::PsiXiAnti { i }, sw)?,
    );
    t.add_scaled(a1, &product_tensor(n, ProductKind::PhiPhi { i: 0, j: i }, fw)?);
    t.add_scaled(a1, &product_tensor(n, ProductKind::PhiPhi { i, j: 0 }, sw)?);
    t.add_scaled(a2, &product_tensor(n, ProductKind::PhiPhi { i: 0, j: i }, sw)?);
    t.add_scaled(a2, &product_tensor(n, ProductKind::PhiPhi { i, j: 0 }, fw)?);
    Ok(t.pruned(CANCELLATION_FLOOR))
}

pub fn build_element(cfg: &StarConfig, family: Family, m: MomentumPair) -> Result<BasisElement> {
    Ok(BasisElement {
        family,
        tensor: family_tensor(cfg.n(), cfg.c(), family, &m)?,
        momentum: m,
        coupling: cfg.c(),
    })
}

/// The full list of `2n² − 2n` eigensolutions at one momentum pair.
#[derive(Debug, Clone)]
pub struct Basis {
    pub elements: Vec<BasisElement>,
    pub warnings: Vec<String>,
}

impl Basis {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// `(antisym, sym_off_diag, sym_diag)` counts.
    pub fn family_counts(&self) -> (usize, usize, usize) {
        let mut counts = (0, 0, 0);
        for e in &self.elements {
            match e.family {
                Family::Antisym { .. } => counts.0 += 1,
                Family::SymOffDiag { .. } => counts.1 += 1,
                Family::SymDiag { .. } => counts.2 += 1,
            }
        }
        counts
    }
}

pub fn build_basis(cfg: &StarConfig, m: MomentumPair) -> Result<Basis> {
    if cfg.c() == 0.0 {
        return Err(Error::ZeroCoupling);
    }
    let elements = Family::enumerate(cfg.n())
        .into_iter()
        .map(|f| build_element(cfg, f, m))
        .collect::<Result<Vec<_>>>()?;
    let mut warnings = Vec::new();
    if (m.k1() - m.k2()).norm() < 1e-9 {
        warnings.push("k1 = k2: the basis may lose rank at degenerate momenta".to_string());
    }
    Ok(Basis { elements, warnings })
}

/// The diagonal-quadrant form of the diagonal family in centre-of-mass
/// momenta `k = (k1 + k2)/2` and `k′ = (k1 − k2)/2`, with `d = |x − y|` and
/// `s = x + y`.
pub fn closed_form_kk(n: usize, c: f64, k: Complex64, kp: Complex64, x: f64, y: f64) -> Complex64 {
    let d = (x - y).abs();
    let s = x + y;
    let nf = n as f64;
    let two_over_c = 2.0 / c;
    nf * ((kp * d).sin() * (k * s).sin()
        - (k * d).sin() * (kp * s).sin()
        - two_over_c * k * (k * d).cos() * (kp * s).sin()
        + two_over_c * kp * (kp * d).cos() * (k * s).sin())
}

pub fn diagonal_closed_form(cfg: &StarConfig, i: usize, m: &MomentumPair, x: f64, y: f64) -> Result<Complex64> {
    cfg.check_edge(i)?;
    if cfg.c() == 0.0 {
        return Err(Error::ZeroCoupling);
    }
    if !(x.is_finite() && y.is_finite()) || x < 0.0 || y < 0.0 {
        return Err(Error::InvalidPoint(format!(
            "coordinates must be finite and >= 0, got ({x}, {y})"
        )));
    }
    let k = (m.k1() + m.k2()) * 0.5;
    let kp = (m.k1() - m.k2()) * 0.5;
    Ok(closed_form_kk(cfg.n(), cfg.c(), k, kp, x, y))
}

/// The two terms of the diagonal form at `k = ic/2`; the value there is
/// `i·n·(decaying + growing)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexMomentumTerms {
    pub x: f64,
    pub y: f64,
    /// `−e^{(c/2)|x−y|} sin k′(x+y)`.
    pub decaying: f64,
    /// `[(2k′/c) cos k′|x−y| + sin k′|x−y|] sinh((c/2)(x+y))`.
    pub growing: f64,
    pub value: Complex64,
}

pub fn complex_momentum_profile(
    cfg: &StarConfig,
    i: usize,
    kprime: f64,
    samples: &[(f64, f64)],
) -> Result<Vec<ComplexMomentumTerms>> {
    cfg.check_edge(i)?;
    let c = cfg.c();
    if c >= 0.0 {
        return Err(Error::NotAttractive(c));
    }
    let nf = cfg.n() as f64;
    samples
        .iter()
        .map(|&(x, y)| {
            if !(x.is_finite() && y.is_finite()) || x < 0.0 || y < 0.0 {
                return Err(Error::InvalidPoint(format!("bad sample ({x}, {y})")));
            }
            let d = (x - y).abs();
            let s = x + y;
            let decaying = -(0.5 * c * d).exp() * (kprime * s).sin();
            let growing = (2.0 * kprime / c * (kprime * d).cos() + (kprime * d).sin()) * (0.5 * c * s).sinh();
            Ok(ComplexMomentumTerms {
                x,
                y,
                decaying,
                growing,
                value: Complex64::new(0.0, nf * (decaying + growing)),
            })
        })
        .collect()
}

/// Sample matrix of the basis at points spread over every quadrant and
/// sector, one column per element. Its rank is the rank of the Gram matrix.
pub fn sample_matrix(basis: &Basis, points: &[QuadrantPoint]) -> nalgebra::DMatrix<Complex64> {
    nalgebra::DMatrix::from_fn(points.len(), basis.len(), |r, col| {
        basis.elements[col].value(&points[r])
    })
}

/// `count` sample points cycling through all quadrants.
pub fn spread_points(n: usize, count: usize, seed: u64) -> Vec<QuadrantPoint> {
    let mut s = Sampler::new(seed);
    (0..count)
        .map(|idx| {
            let q = idx % (n * n);
            let (i, j) = (q / n + 1, q % n + 1);
            let (x, y) = s.next_pair();
            QuadrantPoint::natural(i, j, x, y).expect("sampled coordinates are valid")
        })
        .collect()
}

/// Numerical rank of the basis sampled at `6n²` points.
pub fn basis_rank(basis: &Basis, n: usize, seed: u64, rel_tol: f64) -> RankInfo {
    let pts = spread_points(n, 6 * n * n, seed);
    rank_complex(&sample_matrix(basis, &pts), rel_tol)
}

/// Serialized form of a basis element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisElementDoc {
    pub schema: u32,
    pub n: usize,
    pub coupling: f64,
    pub k1: ComplexDoc,
    pub k2: ComplexDoc,
    pub element: Family,
    pub amplitudes: Vec<AmplitudeRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexDoc {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ComplexDoc {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

impl From<ComplexDoc> for Complex64 {
    fn from(z: ComplexDoc) -> Self {
        Complex64::new(z.re, z.im)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeRow {
    pub i: usize,
    pub j: usize,
    pub sector: Sector,
    pub sigma: Sign,
    pub tau: Sign,
    pub assignment: Assignment,
    pub re: f64,
    pub im: f64,
}

pub const SCHEMA_VERSION: u32 = 1;

impl BasisElement {
    pub fn to_doc(&self) -> BasisElementDoc {
        BasisElementDoc {
            schema: SCHEMA_VERSION,
            n: self.tensor.n(),
            coupling: self.coupling,
            k1: self.momentum.k1().into(),
            k2: self.momentum.k2().into(),
            element: self.family,
            amplitudes: self
                .tensor
                .entries()
                .map(|(k, a)| AmplitudeRow {
                    i: k.i,
                    j: k.j,
                    sector: k.sector,
                    sigma: k.sigma,
                    tau: k.tau,
                    assignment: k.assignment,
                    re: a.re,
                    im: a.im,
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("basis documents always serialize")
    }

    /// Parses and validates a serialized element. The amplitude table is
    /// taken as given; it is not required to match the family.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: BasisElementDoc = serde_json::from_str(text)?;
        Self::from_doc(doc)
    }

    pub fn from_doc(doc: BasisElementDoc) -> Result<Self> {
        if doc.schema != SCHEMA_VERSION {
            return Err(Error::Parse(format!("unsupported schema {}", doc.schema)));
        }
        let cfg = StarConfig::new(doc.n, doc.coupling)?;
        doc.element.validate(cfg.n())?;
        let momentum = MomentumPair::new(doc.k1.into(), doc.k2.into())?;
        let mut tensor = AmplitudeTensor::new(cfg.n());
        for row in doc.amplitudes {
            let key = AmplitudeKey {
                i: row.i,
                j: row.j,
                sector: row.sector,
                sigma: row.sigma,
                tau: row.tau,
                assignment: row.assignment,
            };
            if tensor.get(&key) != Complex64::default() {
                return Err(Error::InvalidAmplitude(format!("duplicate amplitude {key}")));
            }
            tensor.insert(key, Complex64::new(row.re, row.im))?;
        }
        Ok(Self {
            family: doc.element,
            tensor,
            momentum,
            coupling: cfg.c(),
        })
    }
}
