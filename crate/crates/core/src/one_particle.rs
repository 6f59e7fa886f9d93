//! One-particle solutions on the star graph with Kirchhoff vertex
//! conditions.
//!
//! Each solution is stored per edge as a pair `(a_l, b_l)` of amplitudes of
//! `e^{-ikx}` and `e^{+ikx}`. The scattering wave `ψ^i` has a unit incoming
//! wave on edge `i` and outgoing amplitudes `S_il` with `S = 2P − I`. The
//! derived solutions `φ^0`, `φ^j` are built from those by the defining
//! linear combinations, not from their closed forms.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::{check_edge, Sector, Sign, StarConfig};
use crate::error::Result;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Vertex projection `P` onto `(1, …, 1)ᵗ` and the scattering matrix
/// `S = 2P − I`. Both are real symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexMatrices {
    pub p: DMatrix<f64>,
    pub s: DMatrix<f64>,
}

pub fn build_vertex_matrices(cfg: &StarConfig) -> VertexMatrices {
    vertex_matrices(cfg.n())
}

pub(crate) fn vertex_matrices(n: usize) -> VertexMatrices {
    let p = DMatrix::from_element(n, n, 1.0 / n as f64);
    let s = &p * 2.0 - DMatrix::identity(n, n);
    VertexMatrices { p, s }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OneParticleKind {
    Scattering(usize),
    PhiZero,
    Phi(usize),
    Xi,
}

/// Branch of a one-particle factor inside a two-particle product.
///
/// Only `ξ` distinguishes the two: on a diagonal quadrant the particle whose
/// coordinate is the smaller one sits on the `Inner` branch and carries the
/// factor `1 − n`. Off-diagonal quadrants are always `Outer`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Outer,
    Inner,
}

impl Branch {
    /// Branch of the first particle's factor in the given sector.
    pub fn for_x(sector: Sector) -> Self {
        match sector {
            Sector::Below => Branch::Inner,
            _ => Branch::Outer,
        }
    }

    /// Branch of the second particle's factor in the given sector.
    pub fn for_y(sector: Sector) -> Self {
        match sector {
            Sector::Above => Branch::Inner,
            _ => Branch::Outer,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OneParticleSolution {
    n: usize,
    kind: OneParticleKind,
    incoming: Vec<Complex64>,
    outgoing: Vec<Complex64>,
    inner_scale: f64,
}

impl OneParticleSolution {
    fn from_parts(n: usize, kind: OneParticleKind, incoming: Vec<Complex64>, outgoing: Vec<Complex64>) -> Self {
        Self {
            n,
            kind,
            incoming,
            outgoing,
            inner_scale: 1.0,
        }
    }

    pub fn kind(&self) -> OneParticleKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `(a_l, b_l)` on edge `l`, outer branch.
    pub fn coefficients(&self, edge: usize) -> (Complex64, Complex64) {
        (self.incoming[edge - 1], self.outgoing[edge - 1])
    }

    /// Amplitude of `e^{iσkx}` on `edge` for the given branch.
    pub fn coefficient(&self, edge: usize, sign: Sign, branch: Branch) -> Complex64 {
        let base = match sign {
            Sign::Minus => self.incoming[edge - 1],
            Sign::Plus => self.outgoing[edge - 1],
        };
        match branch {
            Branch::Outer => base,
            Branch::Inner => base * self.inner_scale,
        }
    }

    fn sum_terms(&self, edge: usize, x: f64, k: Complex64, branch: Branch, order: i32) -> Complex64 {
        Sign::BOTH
            .iter()
            .map(|&s| {
                let p = k * s.value();
                self.coefficient(edge, s, branch) * (I * p).powi(order) * (I * p * x).exp()
            })
            .sum()
    }

    pub fn evaluate(&self, edge: usize, x: f64, k: Complex64, branch: Branch) -> Complex64 {
        self.sum_terms(edge, x, k, branch, 0)
    }

    pub fn derivative(&self, edge: usize, x: f64, k: Complex64, branch: Branch) -> Complex64 {
        self.sum_terms(edge, x, k, branch, 1)
    }

    pub fn second_derivative(&self, edge: usize, x: f64, k: Complex64, branch: Branch) -> Complex64 {
        self.sum_terms(edge, x, k, branch, 2)
    }

    fn linear_combination(n: usize, kind: OneParticleKind, terms: &[(Complex64, &OneParticleSolution)]) -> Self {
        let mut incoming = vec![Complex64::default(); n];
        let mut outgoing = vec![Complex64::default(); n];
        for (w, sol) in terms {
            for l in 0..n {
                incoming[l] += w * sol.incoming[l];
                outgoing[l] += w * sol.outgoing[l];
            }
        }
        Self::from_parts(n, kind, incoming, outgoing)
    }
}

/// `ψ^i`: unit incoming wave `e^{-ikx}` on edge `i`, outgoing `S_il e^{ikx}`
/// on every edge `l`.
pub fn scattering_wave(cfg: &StarConfig, i: usize) -> Result<OneParticleSolution> {
    cfg.check_edge(i)?;
    Ok(scattering(cfg.n(), i))
}

fn scattering(n: usize, i: usize) -> OneParticleSolution {
    let s = vertex_matrices(n).s;
    let incoming = (1..=n)
        .map(|l| Complex64::new(if l == i { 1.0 } else { 0.0 }, 0.0))
        .collect();
    let outgoing = (0..n).map(|l| Complex64::new(s[(i - 1, l)], 0.0)).collect();
    OneParticleSolution::from_parts(n, OneParticleKind::Scattering(i), incoming, outgoing)
}

/// `φ^0 = ½ Σ_j ψ^j`.
pub fn phi_zero(cfg: &StarConfig) -> OneParticleSolution {
    phi_zero_n(cfg.n())
}

pub(crate) fn phi_zero_n(n: usize) -> OneParticleSolution {
    let waves: Vec<_> = (1..=n).map(|j| scattering(n, j)).collect();
    let half = Complex64::new(0.5, 0.0);
    let terms: Vec<_> = waves.iter().map(|w| (half, w)).collect();
    OneParticleSolution::linear_combination(n, OneParticleKind::PhiZero, &terms)
}

/// `φ^j = (ψ^j − ψ^{j+1}) / 2i`, indices mod n.
pub fn phi_j(cfg: &StarConfig, j: usize) -> Result<OneParticleSolution> {
    cfg.check_edge(j)?;
    Ok(phi_j_n(cfg.n(), j))
}

pub(crate) fn phi_j_n(n: usize, j: usize) -> OneParticleSolution {
    debug_assert!(check_edge(j, n).is_ok());
    let next = j % n + 1;
    let w = Complex64::new(1.0, 0.0) / (2.0 * I);
    let (a, b) = (scattering(n, j), scattering(n, next));
    OneParticleSolution::linear_combination(n, OneParticleKind::Phi(j), &[(w, &a), (-w, &b)])
}

/// `ξ`: `sin(kx)` on the outer branch and `(1 − n) sin(kx)` on the inner
/// branch of a diagonal quadrant. Vanishes at the vertex.
pub fn xi_solution(cfg: &StarConfig) -> OneParticleSolution {
    xi_n(cfg.n())
}

pub(crate) fn xi_n(n: usize) -> OneParticleSolution {
    let half_i = Complex64::new(1.0, 0.0) / (2.0 * I);
    let mut sol = OneParticleSolution::from_parts(n, OneParticleKind::Xi, vec![-half_i; n], vec![half_i; n]);
    sol.inner_scale = 1.0 - n as f64;
    sol
}

/// Any one-particle solution by kind. `Phi(0)` is not a kind; use
/// `PhiZero`.
pub fn one_particle(n: usize, kind: OneParticleKind) -> Result<OneParticleSolution> {
    match kind {
        OneParticleKind::Scattering(i) => {
            check_edge(i, n)?;
            Ok(scattering(n, i))
        }
        OneParticleKind::PhiZero => Ok(phi_zero_n(n)),
        OneParticleKind::Phi(j) => {
            check_edge(j, n)?;
            Ok(phi_j_n(n, j))
        }
        OneParticleKind::Xi => Ok(xi_n(n)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::make_config;
    use crate::sampling::Sampler;
    use std::f64::consts::PI;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn vertex_matrices_n3() {
        let vm = build_vertex_matrices(&make_config(3, 1.0).unwrap());
        for r in 0..3 {
            for col in 0..3 {
                assert!((vm.p[(r, col)] - 1.0 / 3.0).abs() < 1e-15);
                let expect = if r == col { -1.0 / 3.0 } else { 2.0 / 3.0 };
                assert!((vm.s[(r, col)] - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn vertex_matrix_invariants() {
        for n in 3..=8 {
            let vm = vertex_matrices(n);
            let id = DMatrix::<f64>::identity(n, n);
            assert!((&vm.s * &vm.s - &id).norm() < 1e-14);
            assert!((&vm.p * &vm.p - &vm.p).norm() < 1e-14);
            assert!((vm.p.trace() - 1.0).abs() < 1e-14);
            assert!((&vm.s - vm.s.transpose()).norm() == 0.0);
        }
    }

    #[test]
    fn s_spectrum_n4() {
        let vm = vertex_matrices(4);
        let mut ev: Vec<f64> = vm.s.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let expect = [-1.0, -1.0, -1.0, 1.0];
        for (a, b) in ev.iter().zip(expect) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn scattering_vertex_value_and_kirchhoff() {
        let cfg = make_config(3, 1.0).unwrap();
        let psi = scattering_wave(&cfg, 1).unwrap();
        for l in 1..=3 {
            let v = psi.evaluate(l, 0.0, c(0.5), Branch::Outer);
            assert!((v - 2.0 / 3.0).norm() < 1e-15);
        }
        for n in 3..=7 {
            let cfg = make_config(n, 1.0).unwrap();
            for i in 1..=n {
                let psi = scattering_wave(&cfg, i).unwrap();
                let sum: Complex64 = (1..=n).map(|l| psi.derivative(l, 0.0, c(0.83), Branch::Outer)).sum();
                assert!(sum.norm() < 1e-14);
                let v0 = psi.evaluate(1, 0.0, c(0.83), Branch::Outer);
                for l in 2..=n {
                    assert!((psi.evaluate(l, 0.0, c(0.83), Branch::Outer) - v0).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn scattering_direct_value() {
        let cfg = make_config(4, 1.0).unwrap();
        let psi = scattering_wave(&cfg, 2).unwrap();
        let v = psi.evaluate(3, 1.3, c(0.7), Branch::Outer);
        let expect = 0.5 * Complex64::new(0.0, 0.91).exp();
        assert!((v - expect).norm() < 1e-15);
        assert!(scattering_wave(&cfg, 5).is_err());
        assert!(scattering_wave(&cfg, 0).is_err());
    }

    #[test]
    fn phi_zero_is_cosine() {
        let mut s = Sampler::new(11);
        for _ in 0..100 {
            let n = s.edge(6) + 2;
            let cfg = make_config(n, 1.0).unwrap();
            let phi = phi_zero(&cfg);
            let (k, x, l) = (s.uniform(0.0, 1.0), s.uniform(0.0, 10.0), s.edge(n));
            // oracle: explicit sum of the n scattering waves
            let oracle: Complex64 = (1..=n)
                .map(|j| 0.5 * scattering_wave(&cfg, j).unwrap().evaluate(l, x, c(k), Branch::Outer))
                .sum();
            let v = phi.evaluate(l, x, c(k), Branch::Outer);
            assert!((v - (k * x).cos()).norm() < 1e-13);
            assert!((v - oracle).norm() < 1e-13);
        }
        let phi = phi_zero(&make_config(5, 1.0).unwrap());
        for l in 1..=5 {
            assert!((phi.evaluate(l, 0.0, c(0.4), Branch::Outer) - 1.0).norm() < 1e-15);
            assert!(phi.derivative(l, 0.0, c(0.4), Branch::Outer).norm() < 1e-15);
        }
    }

    #[test]
    fn phi_j_support_and_wraparound() {
        let cfg = make_config(3, 1.0).unwrap();
        let phi = phi_j(&cfg, 3).unwrap();
        let k = c(0.9);
        let x = 0.7;
        assert!((phi.evaluate(3, x, k, Branch::Outer) + (0.9 * x).sin()).norm() < 1e-14);
        assert!((phi.evaluate(1, x, k, Branch::Outer) - (0.9 * x).sin()).norm() < 1e-14);
        assert!(phi.evaluate(2, x, k, Branch::Outer).norm() < 1e-14);
        assert!(phi_j(&cfg, 4).is_err());
    }

    #[test]
    fn phi_j_direct_value() {
        let cfg = make_config(4, 1.0).unwrap();
        let phi = phi_j(&cfg, 2).unwrap();
        let v = phi.evaluate(2, PI / 2.0, c(1.0), Branch::Outer);
        // oracle through the defining combination of ψ² and ψ³
        let w = Complex64::new(1.0, 0.0) / (2.0 * I);
        let oracle = w
            * (scattering_wave(&cfg, 2)
                .unwrap()
                .evaluate(2, PI / 2.0, c(1.0), Branch::Outer)
                - scattering_wave(&cfg, 3)
                    .unwrap()
                    .evaluate(2, PI / 2.0, c(1.0), Branch::Outer));
        assert!((v + 1.0).norm() < 1e-14);
        assert!((v - oracle).norm() < 1e-14);
    }

    #[test]
    fn phi_closed_forms_and_telescoping() {
        let mut s = Sampler::new(3);
        for _ in 0..100 {
            let n = s.edge(6) + 2;
            let (k, x, l) = (s.uniform(0.0, 1.0), s.uniform(0.0, 10.0), s.edge(n));
            let mut total = Complex64::default();
            for j in 1..=n {
                let v = phi_j_n(n, j).evaluate(l, x, c(k), Branch::Outer);
                let weight = if l == j % n + 1 {
                    1.0
                } else if l == j {
                    -1.0
                } else {
                    0.0
                };
                assert!((v - weight * (k * x).sin()).norm() < 1e-13);
                total += v;
            }
            assert!(total.norm() < 1e-13);
        }
    }

    #[test]
    fn xi_branches() {
        let cfg = make_config(3, 1.0).unwrap();
        let xi = xi_solution(&cfg);
        let k = c(0.5);
        for b in [Branch::Inner, Branch::Outer] {
            assert!(xi.evaluate(1, 0.0, k, b).norm() < 1e-15);
        }
        let inner = xi.evaluate(1, 1.0, k, Branch::for_x(Sector::Below));
        assert!((inner + 2.0 * 0.5f64.sin()).norm() < 1e-15);
        let off = xi.evaluate(1, 1.0, k, Branch::for_x(Sector::OffDiagonal));
        assert!((off - 0.5f64.sin()).norm() < 1e-15);
        assert_eq!(Branch::for_y(Sector::Above), Branch::Inner);
        assert_eq!(Branch::for_x(Sector::Above), Branch::Outer);
    }

    #[test]
    fn helmholtz_equation_holds() {
        let mut s = Sampler::new(5);
        let n = 5;
        let kinds = [
            OneParticleKind::Scattering(2),
            OneParticleKind::PhiZero,
            OneParticleKind::Phi(5),
            OneParticleKind::Xi,
        ];
        for kind in kinds {
            let sol = one_particle(n, kind).unwrap();
            for _ in 0..25 {
                let (k, x, l) = (s.uniform(0.1, 1.0), s.uniform(0.5, 10.0), s.edge(n));
                let branch = if s.coin() { Branch::Inner } else { Branch::Outer };
                let f = sol.evaluate(l, x, c(k), branch);
                let f2 = sol.second_derivative(l, x, c(k), branch);
                assert!((f2 + k * k * f).norm() < 1e-13);
                let h = 1e-4;
                let fd =
                    (sol.evaluate(l, x + h, c(k), branch) - 2.0 * f + sol.evaluate(l, x - h, c(k), branch)) / (h * h);
                let scale = f2.norm().max(k * k);
                assert!((fd - f2).norm() < 1e-6 * scale.max(1.0), "{kind:?}: fd {fd} exact {f2}");
            }
        }
    }

    #[test]
    fn zero_momentum_degenerates() {
        let sol = phi_j_n(4, 1);
        assert!(sol.evaluate(1, 3.0, c(0.0), Branch::Outer).norm() < 1e-15);
        assert!((phi_zero_n(4).evaluate(2, 3.0, c(0.0), Branch::Outer) - 1.0).norm() < 1e-15);
    }
}
