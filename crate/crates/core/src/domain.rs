//! Configuration space of two particles on an n-edge star graph.
//!
//! The space is covered by n² quadrants `Q_ij` (particle one on edge `i`,
//! particle two on edge `j`). Diagonal quadrants are cut along `x = y` into
//! two sectors. Every solution built by this crate is a finite sum of plane
//! waves `A·exp(iσ k_s x + iτ k_t y)` per quadrant and sector, stored in an
//! [`AmplitudeTensor`]. Evaluation is exact; nothing is discretized.
//!
//! Edge indices are 1-based throughout the public API.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `k1² + k2² = 1` for a [`MomentumPair`].
pub const ENERGY_TOLERANCE: f64 = 1e-12;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// A validated problem instance. The energy is normalized to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarConfig {
    n: usize,
    c: f64,
    lambda: f64,
}

impl StarConfig {
    pub fn new(n: usize, c: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::EdgeCountTooSmall(n));
        }
        if !c.is_finite() {
            return Err(Error::NonFiniteCoupling(c));
        }
        Ok(Self { n, c, lambda: 1.0 })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Number of listed eigensolutions, `2n² − 2n`.
    pub fn basis_size(&self) -> usize {
        2 * self.n * self.n - 2 * self.n
    }

    pub fn check_edge(&self, index: usize) -> Result<()> {
        check_edge(index, self.n)
    }
}

/// Builds a validated [`StarConfig`].
pub fn make_config(n: usize, c: f64) -> Result<StarConfig> {
    StarConfig::new(n, c)
}

pub(crate) fn check_edge(index: usize, n: usize) -> Result<()> {
    if index == 0 || index > n {
        Err(Error::IndexOutOfRange { index, n })
    } else {
        Ok(())
    }
}

/// Which analytic branch a point is evaluated on.
///
/// `Above` is the sector `x_i > y_i` of a diagonal quadrant, `Below` is
/// `x_i < y_i`. Off-diagonal quadrants have a single branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sector {
    Above,
    Below,
    #[serde(rename = "off")]
    OffDiagonal,
}

impl Sector {
    /// Sector slots that exist in quadrant `(i, j)`.
    pub fn slots(i: usize, j: usize) -> &'static [Sector] {
        if i == j {
            &[Sector::Above, Sector::Below]
        } else {
            &[Sector::OffDiagonal]
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Sector::Above => "above",
            Sector::Below => "below",
            Sector::OffDiagonal => "off",
        }
    }
}

/// A point in one quadrant together with the branch to evaluate.
///
/// The stored coordinates need not agree with the sector: a diagonal point
/// `x = y` may be evaluated on either side to obtain one-sided limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadrantPoint {
    i: usize,
    j: usize,
    x: f64,
    y: f64,
    sector: Sector,
}

impl QuadrantPoint {
    pub fn new(i: usize, j: usize, x: f64, y: f64, sector: Sector) -> Result<Self> {
        if i == 0 || j == 0 {
            return Err(Error::InvalidPoint(format!("edge indices are 1-based, got ({i}, {j})")));
        }
        if !(x.is_finite() && y.is_finite()) || x < 0.0 || y < 0.0 {
            return Err(Error::InvalidPoint(format!(
                "coordinates must be finite and >= 0, got ({x}, {y})"
            )));
        }
        let off = sector == Sector::OffDiagonal;
        if off != (i != j) {
            return Err(Error::InvalidPoint(format!(
                "sector {sector:?} does not fit quadrant ({i}, {j})"
            )));
        }
        Ok(Self { i, j, x, y, sector })
    }

    /// Point with the sector implied by its coordinates (`x >= y` maps to
    /// `Above` on a diagonal quadrant).
    pub fn natural(i: usize, j: usize, x: f64, y: f64) -> Result<Self> {
        let sector = if i != j {
            Sector::OffDiagonal
        } else if x >= y {
            Sector::Above
        } else {
            Sector::Below
        };
        Self::new(i, j, x, y, sector)
    }

    pub fn i(&self) -> usize {
        self.i
    }

    pub fn j(&self) -> usize {
        self.j
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn sector(&self) -> Sector {
        self.sector
    }

    /// The same physical configuration with the particles exchanged.
    pub fn exchanged(&self) -> Self {
        let sector = match self.sector {
            Sector::Above => Sector::Below,
            Sector::Below => Sector::Above,
            Sector::OffDiagonal => Sector::OffDiagonal,
        };
        Self {
            i: self.j,
            j: self.i,
            x: self.y,
            y: self.x,
            sector,
        }
    }
}

/// The two one-particle momenta, constrained by `k1² + k2² = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentumPair {
    k1: Complex64,
    k2: Complex64,
}

impl MomentumPair {
    pub fn new(k1: Complex64, k2: Complex64) -> Result<Self> {
        let defect = (k1 * k1 + k2 * k2 - 1.0).norm();
        if defect.is_nan() || defect > ENERGY_TOLERANCE {
            return Err(Error::EnergyConstraint(defect));
        }
        Ok(Self { k1, k2 })
    }

    pub fn real(k1: f64, k2: f64) -> Result<Self> {
        Self::new(Complex64::new(k1, 0.0), Complex64::new(k2, 0.0))
    }

    /// Pair `(k1, sqrt(1 - k1²))` for real `k1` in `[0, 1]`.
    pub fn from_k1(k1: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&k1) {
            return Err(Error::MomentumOutOfRange(k1));
        }
        Self::real(k1, partner(k1))
    }

    pub fn k1(&self) -> Complex64 {
        self.k1
    }

    pub fn k2(&self) -> Complex64 {
        self.k2
    }

    pub fn swapped(&self) -> Self {
        Self {
            k1: self.k2,
            k2: self.k1,
        }
    }

    pub fn is_real(&self) -> bool {
        self.k1.im == 0.0 && self.k2.im == 0.0
    }

    /// Real components, if both momenta are real.
    pub fn real_parts(&self) -> Option<(f64, f64)> {
        self.is_real().then_some((self.k1.re, self.k2.re))
    }
}

/// `sqrt(1 - k²)`, the momentum paired with `k` at unit energy.
pub fn partner(k: f64) -> f64 {
    (1.0 - k * k).max(0.0).sqrt()
}

/// Sign of a momentum component in a plane wave.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Which momentum goes to which particle: `Forward` is `(k1, k2)`, i.e.
/// `k1` on `x` and `k2` on `y`; `Swapped` is `(k2, k1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Assignment {
    #[serde(rename = "12")]
    Forward,
    #[serde(rename = "21")]
    Swapped,
}

impl Assignment {
    pub const BOTH: [Assignment; 2] = [Assignment::Forward, Assignment::Swapped];

    /// `(k_s, k_t)` for this assignment.
    pub fn momenta(self, m: &MomentumPair) -> (Complex64, Complex64) {
        match self {
            Assignment::Forward => (m.k1, m.k2),
            Assignment::Swapped => (m.k2, m.k1),
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Assignment::Forward => Assignment::Swapped,
            Assignment::Swapped => Assignment::Forward,
        }
    }
}

/// Partial derivative direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Dx,
    Dy,
}

/// Index of one plane-wave amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AmplitudeKey {
    pub i: usize,
    pub j: usize,
    pub sector: Sector,
    pub sigma: Sign,
    pub tau: Sign,
    pub assignment: Assignment,
}

impl AmplitudeKey {
    fn quadrant_bounds(i: usize, j: usize) -> (Self, Self) {
        let lo = Self {
            i,
            j,
            sector: Sector::Above,
            sigma: Sign::Plus,
            tau: Sign::Plus,
            assignment: Assignment::Forward,
        };
        let hi = Self {
            i,
            j,
            sector: Sector::OffDiagonal,
            sigma: Sign::Minus,
            tau: Sign::Minus,
            assignment: Assignment::Swapped,
        };
        (lo, hi)
    }

    fn validate(&self, n: usize) -> Result<()> {
        check_edge(self.i, n).map_err(|e| Error::InvalidAmplitude(e.to_string()))?;
        check_edge(self.j, n).map_err(|e| Error::InvalidAmplitude(e.to_string()))?;
        if (self.sector == Sector::OffDiagonal) != (self.i != self.j) {
            return Err(Error::InvalidAmplitude(format!(
                "sector {:?} does not fit quadrant ({}, {})",
                self.sector, self.i, self.j
            )));
        }
        Ok(())
    }
}

impl fmt::Display for AmplitudeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = |s: Sign| if s == Sign::Plus { '+' } else { '-' };
        let a = match self.assignment {
            Assignment::Forward => "12",
            Assignment::Swapped => "21",
        };
        write!(
            f,
            "Q{}{}/{}/{}{}/{}",
            self.i,
            self.j,
            self.sector.label(),
            s(self.sigma),
            s(self.tau),
            a
        )
    }
}

/// Exact plane-wave coefficient table of a two-particle function.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AmplitudeTensor {
    n: usize,
    entries: BTreeMap<AmplitudeKey, Complex64>,
}

impl AmplitudeTensor {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            entries: BTreeMap::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &AmplitudeKey) -> Complex64 {
        self.entries.get(key).copied().unwrap_or_default()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&AmplitudeKey, &Complex64)> {
        self.entries.iter()
    }

    /// Sets an amplitude, replacing any previous value.
    pub fn insert(&mut self, key: AmplitudeKey, value: Complex64) -> Result<()> {
        key.validate(self.n)?;
        if !(value.re.is_finite() && value.im.is_finite()) {
            return Err(Error::InvalidAmplitude(format!("non-finite amplitude at {key}")));
        }
        self.entries.insert(key, value);
        Ok(())
    }

    /// Accumulates into an amplitude. Keys are assumed valid (internal
    /// builders only).
    pub(crate) fn accumulate(&mut self, key: AmplitudeKey, value: Complex64) {
        debug_assert!(key.validate(self.n).is_ok());
        *self.entries.entry(key).or_default() += value;
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: Complex64, other: &AmplitudeTensor) {
        debug_assert_eq!(self.n, other.n);
        for (k, v) in &other.entries {
            self.accumulate(*k, alpha * v);
        }
    }

    pub fn scaled(&self, alpha: Complex64) -> Self {
        let mut out = Self::new(self.n);
        out.add_scaled(alpha, self);
        out
    }

    /// `alpha * a + beta * b`.
    pub fn combine(alpha: Complex64, a: &Self, beta: Complex64, b: &Self) -> Self {
        let mut out = a.scaled(alpha);
        out.add_scaled(beta, b);
        out
    }

    /// Drops entries whose magnitude is at most `tol`.
    pub fn pruned(mut self, tol: f64) -> Self {
        self.entries.retain(|_, v| v.norm() > tol);
        self
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.values().map(|v| v.norm()).fold(0.0, f64::max)
    }

    fn quadrant_terms<'a>(
        &'a self,
        p: &'a QuadrantPoint,
    ) -> impl Iterator<Item = (&'a AmplitudeKey, &'a Complex64)> + 'a {
        let (lo, hi) = AmplitudeKey::quadrant_bounds(p.i, p.j);
        self.entries.range(lo..=hi).filter(move |(k, _)| k.sector == p.sector)
    }

    /// Sum of all plane waves matching the point's quadrant and sector.
    pub fn evaluate(&self, p: &QuadrantPoint, m: &MomentumPair) -> Complex64 {
        self.quadrant_terms(p)
            .map(|(k, a)| {
                let (ks, kt) = k.assignment.momenta(m);
                a * plane_wave(k.sigma.value() * ks, k.tau.value() * kt, p.x, p.y)
            })
            .sum()
    }

    /// Exact partial derivative of [`evaluate`](Self::evaluate).
    pub fn derivative(&self, p: &QuadrantPoint, m: &MomentumPair, dir: Direction) -> Complex64 {
        self.quadrant_terms(p)
            .map(|(k, a)| {
                let (ks, kt) = k.assignment.momenta(m);
                let (px, py) = (k.sigma.value() * ks, k.tau.value() * kt);
                let factor = match dir {
                    Direction::Dx => I * px,
                    Direction::Dy => I * py,
                };
                a * factor * plane_wave(px, py, p.x, p.y)
            })
            .sum()
    }

    /// Largest per-entry defect of `−Δ e = e`: `|(σk_s)² + (τk_t)² − 1|`.
    pub fn max_energy_defect(&self, m: &MomentumPair) -> f64 {
        self.entries
            .keys()
            .map(|k| {
                let (ks, kt) = k.assignment.momenta(m);
                let (px, py) = (k.sigma.value() * ks, k.tau.value() * kt);
                (px * px + py * py - 1.0).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Binds the tensor to a momentum pair so it can be used as a [`Field`].
    pub fn bind(&self, m: MomentumPair) -> BoundTensor<'_> {
        BoundTensor {
            tensor: self,
            momentum: m,
        }
    }
}

fn plane_wave(px: Complex64, py: Complex64, x: f64, y: f64) -> Complex64 {
    (I * (px * x + py * y)).exp()
}

/// Free-function form of [`AmplitudeTensor::evaluate`].
pub fn evaluate_amplitude_tensor(t: &AmplitudeTensor, p: &QuadrantPoint, m: &MomentumPair) -> Complex64 {
    t.evaluate(p, m)
}

/// Free-function form of [`AmplitudeTensor::derivative`].
pub fn derivative_amplitude_tensor(
    t: &AmplitudeTensor,
    p: &QuadrantPoint,
    m: &MomentumPair,
    dir: Direction,
) -> Complex64 {
    t.derivative(p, m, dir)
}

/// A two-particle function that can be evaluated and differentiated at
/// quadrant points. Implemented by everything the verifier checks.
pub trait Field: Sync {
    /// Number of star-graph edges.
    fn edges(&self) -> usize;
    fn value(&self, p: &QuadrantPoint) -> Complex64;
    fn derivative(&self, p: &QuadrantPoint, dir: Direction) -> Complex64;
}

/// An [`AmplitudeTensor`] evaluated at a fixed momentum pair.
#[derive(Debug, Clone, Copy)]
pub struct BoundTensor<'a> {
    pub tensor: &'a AmplitudeTensor,
    pub momentum: MomentumPair,
}

impl Field for BoundTensor<'_> {
    fn edges(&self) -> usize {
        self.tensor.n
    }

    fn value(&self, p: &QuadrantPoint) -> Complex64 {
        self.tensor.evaluate(p, &self.momentum)
    }

    fn derivative(&self, p: &QuadrantPoint, dir: Direction) -> Complex64 {
        self.tensor.derivative(p, &self.momentum, dir)
    }
}
