//! Residual checks of the vertex and diagonal boundary conditions, pointwise
//! and on the transform side, plus whole-basis checks.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{
    partner, AmplitudeKey, AmplitudeTensor, Assignment, Direction, Field, MomentumPair, QuadrantPoint, Sector, Sign,
    StarConfig,
};
use crate::error::{Error, Result};
use crate::quadrature::Rule;
use crate::sampling::Sampler;
use crate::transform::{
    check_diagonal_conditions, check_kirchhoff_transforms, extract_transforms, extract_transforms2, Side,
    SINGULARITY_HALF_WIDTH,
};
use crate::two_particle::{basis_rank, build_basis, sym_diag_tensor, BasisElement, Family};

pub const REPORT_SCHEMA: u32 = 1;
/// Default pass/fail tolerance on absolute residuals.
pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_SAMPLES: usize = 100;
/// Relative singular-value cut for the Gram rank.
pub const GRAM_RANK_TOL: f64 = 1e-10;
/// Amplitudes below this magnitude are skipped by the mutation sweep.
pub const MUTATION_FLOOR: f64 = 0.02;

pub const VERTEX_CONTINUITY: &str = "vertex_continuity";
pub const VERTEX_KIRCHHOFF: &str = "vertex_kirchhoff";
pub const DIAGONAL_CONTINUITY: &str = "diagonal_continuity";
pub const DIAGONAL_JUMP: &str = "diagonal_jump";
pub const TRANSFORM_KIRCHHOFF: &str = "transform_kirchhoff";
pub const TRANSFORM_DIAGONAL: &str = "transform_diagonal";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualCheck {
    pub name: String,
    pub max_abs_residual: f64,
    pub sample_count: usize,
    pub tolerance: f64,
    pub pass: bool,
}

impl ResidualCheck {
    pub fn new(name: &str, max_abs_residual: f64, sample_count: usize, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            max_abs_residual,
            sample_count,
            tolerance,
            pass: max_abs_residual.is_finite() && max_abs_residual <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub schema: u32,
    pub solution: String,
    pub checks: Vec<ResidualCheck>,
    pub pass: bool,
}

impl ResidualReport {
    pub fn new(solution: impl Into<String>) -> Self {
        Self {
            schema: REPORT_SCHEMA,
            solution: solution.into(),
            checks: Vec::new(),
            pass: true,
        }
    }

    pub fn push(&mut self, check: ResidualCheck) {
        self.pass &= check.pass;
        self.checks.push(check);
    }

    pub fn extend(&mut self, checks: impl IntoIterator<Item = ResidualCheck>) {
        for c in checks {
            self.push(c);
        }
    }

    pub fn check(&self, name: &str) -> Option<&ResidualCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Largest residual over all checks.
    pub fn max_residual(&self) -> f64 {
        self.checks.iter().map(|c| c.max_abs_residual).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text)?;
        if r.schema != REPORT_SCHEMA {
            return Err(Error::Json(format!("unsupported schema {}", r.schema)));
        }
        if r.pass != r.checks.iter().all(|c| c.pass) {
            return Err(Error::Json("overall pass disagrees with the checks".into()));
        }
        Ok(r)
    }
}

/// Sampling and tolerance settings shared by all checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
            seed: 0,
            tol: DEFAULT_TOL,
        }
    }
}

/// Kirchhoff conditions at the vertex for either particle.
///
/// Sample `s` puts particle 1 at the vertex when `s` is even (particle 2 on
/// edge `j`, coordinate `y`) and particle 2 when `s` is odd. At each sample
/// the `n` quadrants meeting at the boundary must agree in value and their
/// normal derivatives must sum to zero.
pub fn check_vertex_bc<F: Field + ?Sized>(f: &F, samples: usize, seed: u64, tol: f64) -> [ResidualCheck; 2] {
    let n = f.edges();
    let mut sampler = Sampler::new(seed);
    let (mut cont, mut kirch) = (0.0f64, 0.0f64);
    for s in 0..samples {
        let other = (s / 2) % n + 1;
        let t = sampler.next_coordinate();
        let first = s % 2 == 0;
        let mut base = None;
        let mut dsum = Complex64::new(0.0, 0.0);
        for l in 1..=n {
            let p = if first {
                QuadrantPoint::natural(l, other, 0.0, t)
            } else {
                QuadrantPoint::natural(other, l, t, 0.0)
            }
            .expect("boundary points are valid");
            let v = f.value(&p);
            let b = *base.get_or_insert(v);
            cont = cont.max((v - b).norm());
            dsum += f.derivative(&p, if first { Direction::Dx } else { Direction::Dy });
        }
        kirch = kirch.max(dsum.norm());
    }
    [
        ResidualCheck::new(VERTEX_CONTINUITY, cont, samples, tol),
        ResidualCheck::new(VERTEX_KIRCHHOFF, kirch, samples, tol),
    ]
}

/// One-sided values at `x = y = t` on the diagonal of `Q_ii`.
#[derive(Debug, Clone, Copy)]
pub struct DiagonalTrace {
    pub above: Complex64,
    pub below: Complex64,
    /// `½(∂x − ∂y)` on the `Above` branch.
    pub above_normal: Complex64,
    pub below_normal: Complex64,
}

impl DiagonalTrace {
    pub fn at<F: Field + ?Sized>(f: &F, i: usize, t: f64) -> Self {
        let a = QuadrantPoint::new(i, i, t, t, Sector::Above).expect("diagonal point");
        let b = QuadrantPoint::new(i, i, t, t, Sector::Below).expect("diagonal point");
        let normal = |p: &QuadrantPoint| 0.5 * (f.derivative(p, Direction::Dx) - f.derivative(p, Direction::Dy));
        Self {
            above: f.value(&a),
            below: f.value(&b),
            above_normal: normal(&a),
            below_normal: normal(&b),
        }
    }

    pub fn continuity(&self) -> f64 {
        (self.above - self.below).norm()
    }

    /// `|½(∂x−∂y)|_above − ½(∂x−∂y)|_below − c·ψ|` with `ψ` the mean of the
    /// two one-sided values.
    pub fn jump(&self, c: f64) -> f64 {
        let psi = 0.5 * (self.above + self.below);
        (self.above_normal - self.below_normal - c * psi).norm()
    }
}

/// Continuity and δ-jump across `x_i = y_i`, cycling through the diagonal
/// quadrants.
pub fn check_diagonal_bc<F: Field + ?Sized>(f: &F, c: f64, samples: usize, seed: u64, tol: f64) -> [ResidualCheck; 2] {
    let n = f.edges();
    let mut sampler = Sampler::new(seed ^ 0x9e37_79b9);
    let (mut cont, mut jump) = (0.0f64, 0.0f64);
    for s in 0..samples {
        let tr = DiagonalTrace::at(f, s % n + 1, sampler.next_coordinate());
        cont = cont.max(tr.continuity());
        jump = jump.max(tr.jump(c));
    }
    [
        ResidualCheck::new(DIAGONAL_CONTINUITY, cont, samples, tol),
        ResidualCheck::new(DIAGONAL_JUMP, jump, samples, tol),
    ]
}

/// Transform-side checks: the compact vertex conditions for both momentum
/// assignments (ℂ² and extended ℂ⁴ forms) and the diagonal system.
pub fn check_transforms(t: &AmplitudeTensor, m: &MomentumPair, c: f64, tol: f64) -> Result<[ResidualCheck; 2]> {
    let (k1, k2) = m
        .real_parts()
        .ok_or_else(|| Error::MomentumMismatch("transform checks need real momenta".into()))?;
    let mut kirch = 0.0f64;
    for a in Assignment::BOTH {
        let hat = extract_transforms2(t, a, Side::Hat);
        let check = extract_transforms2(t, a, Side::Check);
        kirch = kirch.max(check_kirchhoff_transforms(&hat, &check)?.max());
    }
    let t4 = extract_transforms(t, m, k1.min(k2))?;
    kirch = kirch.max(t4.kirchhoff_residual().max());
    let diag = check_diagonal_conditions(&t4, c)?;
    let n = t.n();
    Ok([
        ResidualCheck::new(TRANSFORM_KIRCHHOFF, kirch, 2 * n * n, tol),
        ResidualCheck::new(TRANSFORM_DIAGONAL, diag.eigs_residual.max(diag.raw_residual), n, tol),
    ])
}

/// Pointwise checks only.
pub fn verify_field<F: Field + ?Sized>(f: &F, c: f64, id: &str, opts: &VerifyOptions) -> ResidualReport {
    let mut r = ResidualReport::new(id);
    r.extend(check_vertex_bc(f, opts.samples, opts.seed, opts.tol));
    r.extend(check_diagonal_bc(f, c, opts.samples, opts.seed, opts.tol));
    r
}

/// Pointwise and transform-side checks of one basis element.
pub fn verify_element(e: &BasisElement, opts: &VerifyOptions) -> Result<ResidualReport> {
    let mut r = verify_field(e, e.coupling, &e.family.to_string(), opts);
    r.extend(check_transforms(&e.tensor, &e.momentum, e.coupling, opts.tol)?);
    Ok(r)
}

/// Numerical rank of the sampled basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramCheck {
    pub rank: usize,
    /// `2n² − 2n`, the number of elements.
    pub element_count: usize,
    /// `2n² − 2n − 1`: the diagonal family sums to zero.
    pub expected_rank: usize,
    pub smallest_kept_ratio: f64,
    pub first_dropped_ratio: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisReport {
    pub schema: u32,
    pub n: usize,
    pub c: f64,
    pub k1: f64,
    pub k2: f64,
    pub seed: u64,
    pub elements: Vec<ResidualReport>,
    pub gram: GramCheck,
    pub passed: usize,
    pub pass: bool,
}

impl BasisReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text)?;
        if r.schema != REPORT_SCHEMA {
            return Err(Error::Json(format!("unsupported schema {}", r.schema)));
        }
        Ok(r)
    }

    /// One row per (element, check).
    pub fn csv_rows(&self) -> Vec<CsvRow> {
        let mut rows = Vec::new();
        for e in &self.elements {
            for ch in &e.checks {
                rows.push(CsvRow::from_check(self.n, self.c, self.k1, &e.solution, ch));
            }
        }
        rows.push(CsvRow {
            n: self.n,
            c: self.c,
            k1: self.k1,
            element: "basis".into(),
            check: "gram_rank".into(),
            max_abs_residual: self.gram.first_dropped_ratio,
            sample_count: 6 * self.n * self.n,
            tolerance: GRAM_RANK_TOL,
            status: status(self.gram.pass).into(),
        });
        rows
    }
}

/// Flat summary row for spreadsheet use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub n: usize,
    pub c: f64,
    pub k1: f64,
    pub element: String,
    pub check: String,
    pub max_abs_residual: f64,
    pub sample_count: usize,
    pub tolerance: f64,
    pub status: String,
}

impl CsvRow {
    pub fn from_check(n: usize, c: f64, k1: f64, element: &str, ch: &ResidualCheck) -> Self {
        Self {
            n,
            c,
            k1,
            element: element.to_string(),
            check: ch.name.clone(),
            max_abs_residual: ch.max_abs_residual,
            sample_count: ch.sample_count,
            tolerance: ch.tolerance,
            status: status(ch.pass).into(),
        }
    }
}

fn status(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Rejects first-particle momenta inside the exclusion zone around
/// `1/√2`, where the diagonal system is singular.
pub fn guard_singularity(k1: f64, c: f64) -> Result<()> {
    let k = k1.min(partner(k1));
    if c != 0.0 && (k - std::f64::consts::FRAC_1_SQRT_2).abs() < SINGULARITY_HALF_WIDTH {
        return Err(Error::Singularity {
            k: k1,
            half_width: SINGULARITY_HALF_WIDTH,
        });
    }
    Ok(())
}

/// Every check on every basis element, plus the Gram rank. Elements are
/// checked in parallel; the report keeps enumeration order.
pub fn verify_full_basis(cfg: &StarConfig, m: MomentumPair, opts: &VerifyOptions) -> Result<BasisReport> {
    let (k1, k2) = m
        .real_parts()
        .ok_or_else(|| Error::MomentumMismatch("verification needs real momenta".into()))?;
    guard_singularity(k1, cfg.c())?;
    let basis = build_basis(cfg, m)?;
    let elements = basis
        .elements
        .par_iter()
        .map(|e| verify_element(e, opts))
        .collect::<Result<Vec<_>>>()?;
    let n = cfg.n();
    let info = basis_rank(&basis, n, opts.seed, GRAM_RANK_TOL);
    let expected_rank = 2 * n * n - 2 * n - 1;
    let gram = GramCheck {
        rank: info.rank,
        element_count: basis.len(),
        expected_rank,
        smallest_kept_ratio: info.smallest_kept_ratio,
        first_dropped_ratio: info.first_dropped_ratio,
        pass: info.rank == expected_rank,
    };
    let passed = elements.iter().filter(|r| r.pass).count();
    let pass = passed == elements.len() && gram.pass;
    Ok(BasisReport {
        schema: REPORT_SCHEMA,
        n,
        c: cfg.c(),
        k1,
        k2,
        seed: opts.seed,
        elements,
        gram,
        passed,
        pass,
    })
}

/// `t` with the amplitude at `key` scaled by `1 + rel`.
pub fn mutate_amplitude(t: &AmplitudeTensor, key: &AmplitudeKey, rel: f64) -> Result<AmplitudeTensor> {
    let mut out = t.clone();
    out.insert(*key, t.get(key) * (1.0 + rel))?;
    Ok(out)
}

/// The diagonal-family element with its `n·k1/c` coefficient scaled by
/// `1 + rel`.
pub fn mutate_sym_diag_coefficient(cfg: &StarConfig, i: usize, m: &MomentumPair, rel: f64) -> Result<AmplitudeTensor> {
    if cfg.c() == 0.0 {
        return Err(Error::ZeroCoupling);
    }
    let nf = cfg.n() as f64;
    sym_diag_tensor(cfg.n(), i, -m.k1() * nf / cfg.c() * (1.0 + rel), m.k2() * nf / cfg.c())
}

/// Outcome of perturbing one amplitude of one element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationRow {
    pub n: usize,
    pub c: f64,
    pub k1: f64,
    pub element: String,
    pub amplitude: String,
    pub magnitude: f64,
    pub max_residual: f64,
    pub worst_check: String,
    pub detected: bool,
}

/// Perturbs each amplitude of magnitude at least [`MUTATION_FLOOR`] of
/// every basis element by relative `rel` and records the largest pointwise
/// residual. A mutation counts as detected when that residual exceeds
/// `threshold`.
pub fn mutation_sweep(
    cfg: &StarConfig,
    m: MomentumPair,
    rel: f64,
    threshold: f64,
    opts: &VerifyOptions,
) -> Result<Vec<MutationRow>> {
    let k1 = m
        .real_parts()
        .ok_or_else(|| Error::MomentumMismatch("mutation sweep needs real momenta".into()))?
        .0;
    let basis = build_basis(cfg, m)?;
    let rows: Vec<Vec<MutationRow>> = basis
        .elements
        .par_iter()
        .map(|e| {
            e.tensor
                .entries()
                .filter(|(_, v)| v.norm() >= MUTATION_FLOOR)
                .map(|(key, v)| {
                    let t = mutate_amplitude(&e.tensor, key, rel).expect("existing key");
                    let r = verify_field(&t.bind(m), cfg.c(), "", opts);
                    let worst = r
                        .checks
                        .iter()
                        .max_by(|a, b| a.max_abs_residual.total_cmp(&b.max_abs_residual))
                        .expect("four checks");
                    MutationRow {
                        n: cfg.n(),
                        c: cfg.c(),
                        k1,
                        element: e.family.to_string(),
                        amplitude: key.to_string(),
                        magnitude: v.norm(),
                        max_residual: worst.max_abs_residual,
                        worst_check: worst.name.clone(),
                        detected: worst.max_abs_residual > threshold,
                    }
                })
                .collect()
        })
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

/// A transform channel `ψ^{στ}(k)` on `[0, 1]`.
pub struct Channel<'a> {
    pub sigma: Sign,
    pub tau: Sign,
    pub transform: &'a (dyn Fn(f64) -> Complex64 + Sync),
}

/// Both sides of the norm-limit identity at one radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormLimit {
    pub r: f64,
    /// `(1/R)∫∫_{[0,R]²} |ψ|²`.
    pub lhs: f64,
    /// `2π Σ ∫ |ψ^{στ}|²`.
    pub rhs: f64,
    /// Relative change of `lhs` under the last momentum-rule refinement.
    pub refinement_change: f64,
    pub nodes: usize,
}

impl NormLimit {
    /// `|lhs/rhs − 1|`, or `|lhs|` when `rhs = 0`.
    pub fn relative_error(&self) -> f64 {
        if self.rhs == 0.0 {
            self.lhs.abs()
        } else {
            (self.lhs / self.rhs - 1.0).abs()
        }
    }
}

/// `∫_0^R e^{iΔx} dx`.
fn oscillatory_integral(delta: f64, r: f64) -> Complex64 {
    let z = delta * r;
    if z.abs() < 1e-4 {
        r * Complex64::new(1.0 - z * z / 6.0, z / 2.0)
    } else {
        (Complex64::new(0.0, z).exp() - 1.0) / Complex64::new(0.0, delta)
    }
}

const NORM_REL_TOL: f64 = 1e-7;
const NORM_MAX_REFINEMENTS: usize = 6;

/// Evaluates both sides of the norm-limit identity for
/// `ψ(x, y) = Σ ∫_0^1 ψ^{στ}(k) e^{iσkx + iτk̃y} dk` on one quadrant.
///
/// The momentum integral is a composite Gauss–Legendre rule fine enough to
/// resolve `e^{ikR}`; the `x` and `y` integrals of each pair of plane waves
/// are done in closed form. The rule is doubled until `lhs` changes by
/// less than a relative `1e−7`.
pub fn check_norm_limit(channels: &[Channel<'_>], r: f64) -> Result<NormLimit> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::InvalidQuadrature(format!("radius must be positive, got {r}")));
    }
    let mut panels = ((r / 4.0).ceil() as usize).max(16);
    let mut prev: Option<f64> = None;
    for _ in 0..NORM_MAX_REFINEMENTS {
        let rule = Rule::composite(8, panels, 0.0, 1.0)?;
        let (lhs, rhs, nodes) = norm_sides(channels, r, &rule)?;
        if let Some(p) = prev {
            let change = (lhs - p).abs() / lhs.abs().max(p.abs()).max(f64::MIN_POSITIVE);
            if change < NORM_REL_TOL || lhs == p {
                return Ok(NormLimit {
                    r,
                    lhs,
                    rhs,
                    refinement_change: if lhs == p { 0.0 } else { change },
                    nodes,
                });
            }
        }
        prev = Some(lhs);
        panels *= 2;
    }
    Err(Error::NonConvergence(format!(
        "norm limit at R = {r} after {NORM_MAX_REFINEMENTS} refinements"
    )))
}

fn norm_sides(channels: &[Channel<'_>], r: f64, rule: &Rule) -> Result<(f64, f64, usize)> {
    // (weighted amplitude, x-momentum, y-momentum)
    let mut waves: Vec<(Complex64, f64, f64)> = Vec::new();
    let mut rhs = 0.0;
    for ch in channels {
        for (&k, &w) in rule.nodes.iter().zip(&rule.weights) {
            let f = (ch.transform)(k);
            if !(f.re.is_finite() && f.im.is_finite()) {
                return Err(Error::InvalidProfile(format!("transform is not finite at k = {k}")));
            }
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            rhs += w * f.norm_sqr();
            waves.push((w * f, ch.sigma.value() * k, ch.tau.value() * partner(k)));
        }
    }
    let lhs: f64 = waves
        .par_iter()
        .map(|&(a, p, q)| {
            let mut acc = Complex64::new(0.0, 0.0);
            for &(b, pp, qq) in &waves {
                acc += b.conj() * oscillatory_integral(p - pp, r) * oscillatory_integral(q - qq, r);
            }
            (a * acc).re
        })
        .sum();
    Ok((lhs / r, 2.0 * std::f64::consts::PI * rhs, waves.len()))
}

/// Pointwise checks for a family element built at a different coupling
/// than the one checked against.
pub fn verify_with_coupling(
    cfg: &StarConfig,
    family: Family,
    m: MomentumPair,
    c_check: f64,
    opts: &VerifyOptions,
) -> Result<ResidualReport> {
    let e = crate::two_particle::build_element(cfg, family, m)?;
    Ok(verify_field(&e, c_check, &family.to_string(), opts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_config;
    use crate::two_particle::build_element;

    fn opts() -> VerifyOptions {
        VerifyOptions::default()
    }

    #[test]
    fn basis_elements_pass_pointwise_checks() {
        for (n, c, k1) in [(3, 1.0, 0.6), (4, -1.5, 0.28), (5, 0.7, 0.45)] {
            let cfg = make_config(n, c).unwrap();
            let m = MomentumPair::from_k1(k1).unwrap();
            for e in build_basis(&cfg, m).unwrap().elements {
                let r = verify_field(&e, c, &e.family.to_string(), &opts());
                assert!(r.pass, "n={n} {}: {:?}", e.family, r.checks);
                assert!(r.max_residual() < 1e-10);
            }
        }
    }

    #[test]
    fn single_plane_wave_is_discontinuous() {
        let n = 3;
        let m = MomentumPair::from_k1(0.6).unwrap();
        let mut t = AmplitudeTensor::new(n);
        t.insert(
            AmplitudeKey {
                i: 1,
                j: 2,
                sector: Sector::OffDiagonal,
                sigma: Sign::Plus,
                tau: Sign::Plus,
                assignment: Assignment::Forward,
            },
            Complex64::new(1.0, 0.0),
        )
        .unwrap();
        let [cont, _] = check_vertex_bc(&t.bind(m), 100, 0, 1e-9);
        assert!(cont.max_abs_residual > 0.5);
        assert!(!cont.pass);
    }

    #[test]
    fn cosine_product_has_zero_derivative_sum() {
        let cfg = make_config(4, 1.0).unwrap();
        let m = MomentumPair::from_k1(0.3).unwrap();
        let s = crate::two_particle::product_state(
            &cfg,
            crate::two_particle::ProductKind::PhiPhi { i: 0, j: 0 },
            Assignment::Forward,
            m,
        )
        .unwrap();
        let [cont, kirch] = check_vertex_bc(&s.tensor.bind(m), 100, 3, 1e-12);
        assert!(cont.pass && kirch.pass, "{cont:?} {kirch:?}");
    }

    #[test]
    fn antisymmetric_elements_vanish_on_the_diagonal() {
        let cfg = make_config(4, 2.0).unwrap();
        let m = MomentumPair::from_k1(0.41).unwrap();
        let e = build_element(&cfg, Family::Antisym { i: 2, j: 2 }, m).unwrap();
        for s in 0..50 {
            let tr = DiagonalTrace::at(&e, 2, 0.2 * s as f64);
            assert!(tr.above.norm() < 1e-12 && tr.below.norm() < 1e-12);
        }
        let [_, jump] = check_diagonal_bc(&e, 2.0, 100, 1, 1e-11);
        assert!(jump.pass, "{jump:?}");
    }

    #[test]
    fn wrong_coupling_is_detected() {
        let cfg = make_config(3, 1.0).unwrap();
        let m = MomentumPair::from_k1(0.6).unwrap();
        let fam = Family::SymDiag { i: 1 };
        let e = build_element(&cfg, fam, m).unwrap();
        let r = verify_with_coupling(&cfg, fam, m, 1.3, &opts()).unwrap();
        let jump = r.check(DIAGONAL_JUMP).unwrap();
        assert!(!jump.pass);
        // the jump defect at each diagonal point is |c − c′|·|ψ|
        let mut sampler = Sampler::new(opts().seed ^ 0x9e37_79b9);
        let mut bound = 0.0f64;
        for s in 0..100 {
            let tr = DiagonalTrace::at(&e, s % 3 + 1, sampler.next_coordinate());
            bound = bound.max(0.3 * tr.above.norm());
        }
        assert!((jump.max_abs_residual - bound).abs() < 1e-9 * bound.max(1.0));
    }

    #[test]
    fn sym_diag_coefficient_mutation_fails_jump() {
        let cfg = make_config(3, 1.0).unwrap();
        let m = MomentumPair::real(0.6, 0.8).unwrap();
        let t = mutate_sym_diag_coefficient(&cfg, 2, &m, 0.01).unwrap();
        let r = verify_field(&t.bind(m), 1.0, "mutant", &opts());
        assert!(!r.check(DIAGONAL_JUMP).unwrap().pass);
        assert!(!r.pass);
        let same = mutate_sym_diag_coefficient(&cfg, 2, &m, 0.0).unwrap();
        assert_eq!(same, build_element(&cfg, Family::SymDiag { i: 2 }, m).unwrap().tensor);
    }

    #[test]
    fn full_basis_reports_in_enumeration_order() {
        let cfg = make_config(3, 1.0).unwrap();
        let m = MomentumPair::real(0.6, 0.8).unwrap();
        let r = verify_full_basis(&cfg, m, &opts()).unwrap();
        assert!(
            r.pass,
            "{:?}",
            r.elements.iter().filter(|e| !e.pass).collect::<Vec<_>>()
        );
        assert_eq!(r.passed, 12);
        assert_eq!(r.gram.rank, 11);
        let names: Vec<String> = Family::enumerate(3).iter().map(|f| f.to_string()).collect();
        let got: Vec<String> = r.elements.iter().map(|e| e.solution.clone()).collect();
        assert_eq!(got, names);
        assert_eq!(r.csv_rows().len(), 12 * 6 + 1);
        let back = BasisReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn singular_momentum_is_rejected() {
        let cfg = make_config(3, 1.0).unwrap();
        let m = MomentumPair::from_k1(std::f64::consts::FRAC_1_SQRT_2).unwrap();
        assert!(matches!(
            verify_full_basis(&cfg, m, &opts()),
            Err(Error::Singularity { .. })
        ));
    }

    #[test]
    fn report_overall_tracks_checks() {
        let mut r = ResidualReport::new("x");
        r.push(ResidualCheck::new("a", 1e-12, 3, 1e-9));
        assert!(r.pass);
        r.push(ResidualCheck::new("b", f64::NAN, 3, 1e-9));
        assert!(!r.pass);
        let text = ResidualReport::new("y")
            .to_json()
            .replace("\"pass\": true", "\"pass\": false");
        assert!(ResidualReport::from_json(&text).is_err());
    }

    #[test]
    fn zero_transform_norm_limit() {
        let zero = |_k: f64| Complex64::new(0.0, 0.0);
        let ch = [Channel {
            sigma: Sign::Plus,
            tau: Sign::Plus,
            transform: &zero,
        }];
        let nl = check_norm_limit(&ch, 50.0).unwrap();
        assert_eq!((nl.lhs, nl.rhs), (0.0, 0.0));
    }

    #[test]
    fn gaussian_bump_norm_limit_converges() {
        let bump = |k: f64| Complex64::new((-(k - 0.35f64).powi(2) / (2.0 * 0.12f64.powi(2))).exp(), 0.0);
        let ch = [Channel {
            sigma: Sign::Plus,
            tau: Sign::Plus,
            transform: &bump,
        }];
        let errs: Vec<f64> = [50.0, 100.0, 200.0]
            .iter()
            .map(|&r| check_norm_limit(&ch, r).unwrap().relative_error())
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
        assert!(errs[2] < 0.05, "{errs:?}");
    }

    #[test]
    fn oscillatory_integral_small_and_large_delta() {
        let r = 7.0;
        for d in [0.0, 1e-7, 1e-3, 0.4, -2.0] {
            let rule = Rule::composite(16, 40, 0.0, r).unwrap();
            let re = rule.integrate(|x| (d * x).cos());
            let im = rule.integrate(|x| (d * x).sin());
            let got = oscillatory_integral(d, r);
            assert!((got - Complex64::new(re, im)).norm() < 1e-11, "{d}");
        }
    }
}
