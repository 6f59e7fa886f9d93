//! Eigenfunctions and basic solutions as momentum integrals of basis
//! elements, evaluated by Gauss–Legendre quadrature.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{partner, AmplitudeTensor, Assignment, Direction, Field, MomentumPair, QuadrantPoint, StarConfig};
use crate::error::{Error, Result};
use crate::quadrature::Rule;
use crate::transform::{KernelElement, SINGULARITY_HALF_WIDTH};
use crate::two_particle::{family_tensor, spread_points, Family};

/// Default distance of the quadrature interval from `0` and `1/√2`.
pub const ENDPOINT_OFFSET: f64 = 1e-6;
pub const DEFAULT_NODES: usize = 64;

/// A scalar coefficient function `g(k)` on `[0, 1/√2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Zero,
    /// `exp(−(k − center)² / (2 width²))`.
    Gaussian {
        center: f64,
        width: f64,
    },
    /// `Σ c_p k^p`.
    Polynomial {
        coefficients: Vec<f64>,
    },
    /// `1` on `[lo, hi]`, `0` elsewhere.
    Indicator {
        lo: f64,
        hi: f64,
    },
    /// Values at the nodes of one rule. Cannot be evaluated elsewhere, so
    /// it cannot be refined.
    Sampled {
        nodes: Vec<f64>,
        values: Vec<f64>,
    },
}

impl Profile {
    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(Error::InvalidProfile(s));
        match self {
            Profile::Zero => Ok(()),
            Profile::Gaussian { center, width } => {
                if !(center.is_finite() && width.is_finite() && *width > 0.0) {
                    return bad(format!(
                        "gaussian needs finite center and positive width, got {center}, {width}"
                    ));
                }
                Ok(())
            }
            Profile::Polynomial { coefficients } => {
                if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
                    return bad("polynomial needs finite coefficients".into());
                }
                Ok(())
            }
            Profile::Indicator { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return bad(format!("indicator needs lo < hi, got {lo}, {hi}"));
                }
                Ok(())
            }
            Profile::Sampled { nodes, values } => {
                if nodes.len() != values.len() || nodes.is_empty() {
                    return bad("sampled profile needs one value per node".into());
                }
                if nodes.iter().chain(values).any(|v| !v.is_finite()) {
                    return bad("sampled profile has non-finite entries".into());
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, k: f64) -> Result<f64> {
        Ok(match self {
            Profile::Zero => 0.0,
            Profile::Gaussian { center, width } => (-(k - center).powi(2) / (2.0 * width * width)).exp(),
            Profile::Polynomial { coefficients } => coefficients.iter().rev().fold(0.0, |acc, c| acc * k + c),
            Profile::Indicator { lo, hi } => {
                if (*lo..=*hi).contains(&k) {
                    1.0
                } else {
                    0.0
                }
            }
            Profile::Sampled { nodes, values } => {
                let idx = nodes
                    .iter()
                    .position(|&x| (x - k).abs() <= 1e-12 * x.abs().max(1.0))
                    .ok_or_else(|| Error::InvalidProfile(format!("sampled profile has no node at k = {k}")))?;
                values[idx]
            }
        })
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Profile::Zero)
    }

    /// Samples `self` at the nodes of `spec`.
    pub fn sampled(&self, spec: &QuadratureSpec) -> Result<Profile> {
        let rule = spec.rule()?;
        let values = rule.nodes.iter().map(|&k| self.eval(k)).collect::<Result<Vec<_>>>()?;
        Ok(Profile::Sampled {
            nodes: rule.nodes,
            values,
        })
    }
}

/// Text forms: `zero`, `const:v`, `gaussian:center,width`,
/// `poly:c0,c1,...`, `indicator:lo,hi`.
impl FromStr for Profile {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let t = text.trim();
        let bad = |why: &str| Error::Parse(format!("profile {text:?}: {why}"));
        let (name, args) = match t.split_once(':') {
            Some((a, b)) => (a.trim(), Some(b)),
            None => (t, None),
        };
        let nums = || -> Result<Vec<f64>> {
            let a = args.ok_or_else(|| bad("missing parameters"))?;
            a.split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|_| bad("expected numbers")))
                .collect()
        };
        let p = match name {
            "zero" if args.is_none() => Profile::Zero,
            "const" => match nums()?.as_slice() {
                &[v] => Profile::Polynomial { coefficients: vec![v] },
                _ => return Err(bad("const takes one value")),
            },
            "gaussian" => match nums()?.as_slice() {
                &[center, width] => Profile::Gaussian { center, width },
                _ => return Err(bad("gaussian takes center,width")),
            },
            "poly" => Profile::Polynomial { coefficients: nums()? },
            "indicator" => match nums()?.as_slice() {
                &[lo, hi] => Profile::Indicator { lo, hi },
                _ => return Err(bad("indicator takes lo,hi")),
            },
            _ => return Err(bad("unknown profile")),
        };
        p.validate().map_err(|e| bad(&e.to_string()))?;
        Ok(p)
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        match self {
            Profile::Zero => write!(f, "zero"),
            Profile::Gaussian { center, width } => write!(f, "gaussian:{center},{width}"),
            Profile::Polynomial { coefficients } => write!(f, "poly:{}", join(coefficients)),
            Profile::Indicator { lo, hi } => write!(f, "indicator:{lo},{hi}"),
            Profile::Sampled { nodes, .. } => write!(f, "sampled[{}]", nodes.len()),
        }
    }
}

/// One coefficient function attached to one basis element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub element: Family,
    pub profile: Profile,
    #[serde(default = "unit")]
    pub scale: f64,
}

fn unit() -> f64 {
    1.0
}

/// Coefficient functions `g_i` over the basis; absent elements are zero.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CoefficientProfile {
    pub terms: Vec<Term>,
}

impl CoefficientProfile {
    pub fn single(element: Family, profile: Profile) -> Self {
        Self {
            terms: vec![Term {
                element,
                profile,
                scale: 1.0,
            }],
        }
    }

    pub fn with(mut self, element: Family, profile: Profile, scale: f64) -> Self {
        self.terms.push(Term {
            element,
            profile,
            scale,
        });
        self
    }

    /// Every term scaled by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    scale: t.scale * alpha,
                    ..t.clone()
                })
                .collect(),
        }
    }

    /// The pointwise sum of two profiles.
    pub fn plus(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self { terms }
    }

    fn validate(&self, n: usize) -> Result<()> {
        for t in &self.terms {
            t.element.validate(n)?;
            t.profile.validate()?;
            if !t.scale.is_finite() {
                return Err(Error::InvalidProfile(format!("non-finite scale on {}", t.element)));
            }
        }
        Ok(())
    }

    fn has_sampled(&self) -> bool {
        self.terms.iter().any(|t| matches!(t.profile, Profile::Sampled { .. }))
    }
}

/// `element=profile` pairs separated by `;`, e.g.
/// `sym_diag(1)=gaussian:0.35,0.1;antisym(1,2)=const:1`.
impl FromStr for CoefficientProfile {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut out = Self::default();
        for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (elem, prof) = part
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected element=profile, got {part:?}")))?;
            out = out.with(elem.parse()?, prof.parse()?, 1.0);
        }
        if out.terms.is_empty() {
            return Err(Error::Parse("empty coefficient profile".into()));
        }
        Ok(out)
    }
}

/// Gauss–Legendre rule on `[lo, hi] ⊂ [0, 1/√2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub nodes: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self::with_nodes(DEFAULT_NODES)
    }
}

impl QuadratureSpec {
    pub fn with_nodes(nodes: usize) -> Self {
        Self {
            nodes,
            lo: ENDPOINT_OFFSET,
            hi: FRAC_1_SQRT_2 - ENDPOINT_OFFSET,
        }
    }

    pub fn rule(&self) -> Result<Rule> {
        if !(self.lo >= 0.0 && self.hi <= FRAC_1_SQRT_2) {
            return Err(Error::InvalidQuadrature(format!(
                "interval [{}, {}] leaves [0, 1/sqrt(2)]",
                self.lo, self.hi
            )));
        }
        let rule = Rule::gauss_legendre(self.nodes, self.lo, self.hi)?;
        if let Some(&k) = rule.nodes.iter().find(|&&k| FRAC_1_SQRT_2 - k < SINGULARITY_HALF_WIDTH) {
            return Err(Error::Singularity {
                k,
                half_width: SINGULARITY_HALF_WIDTH,
            });
        }
        Ok(rule)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Eigen(CoefficientProfile),
    Basic { element: KernelElement, profile: Profile },
}

/// Integrand at one quadrature node: `Σ_i g_i(k) G^i(k, k̃)` as one tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeTerm {
    pub k: f64,
    pub weight: f64,
    pub momentum: MomentumPair,
    pub tensor: AmplitudeTensor,
}

/// A quadrature sum of plane-wave tensors. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesizedSolution {
    pub n: usize,
    pub c: f64,
    pub spec: QuadratureSpec,
    pub source: Source,
    pub nodes: Vec<NodeTerm>,
}

impl Field for SynthesizedSolution {
    fn edges(&self) -> usize {
        self.n
    }

    fn value(&self, p: &QuadrantPoint) -> Complex64 {
        self.nodes
            .iter()
            .map(|t| t.weight * t.tensor.evaluate(p, &t.momentum))
            .sum()
    }

    fn derivative(&self, p: &QuadrantPoint, dir: Direction) -> Complex64 {
        self.nodes
            .iter()
            .map(|t| t.weight * t.tensor.derivative(p, &t.momentum, dir))
            .sum()
    }
}

fn check_square_summable(rule: &Rule, values: &[f64]) -> Result<()> {
    let s: f64 = rule.weights.iter().zip(values).map(|(w, g)| w * g * g).sum();
    if s.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidProfile(
            "profile is not square-summable on the rule".into(),
        ))
    }
}

/// `Σ_i g_i(k)·G^i(k, √(1 − k²))` at one momentum.
fn eigen_integrand(n: usize, c: f64, profile: &CoefficientProfile, k: f64) -> Result<AmplitudeTensor> {
    let m = MomentumPair::from_k1(k)?;
    let mut t = AmplitudeTensor::new(n);
    for term in &profile.terms {
        let g = term.scale * term.profile.eval(k)?;
        if g != 0.0 {
            t.add_scaled(Complex64::new(g, 0.0), &family_tensor(n, c, term.element, &m)?);
        }
    }
    Ok(t)
}

pub fn synthesize_eigensolution(
    cfg: &StarConfig,
    profile: &CoefficientProfile,
    spec: &QuadratureSpec,
) -> Result<SynthesizedSolution> {
    if cfg.c() == 0.0 {
        return Err(Error::ZeroCoupling);
    }
    let (n, c) = (cfg.n(), cfg.c());
    profile.validate(n)?;
    let rule = spec.rule()?;
    for term in &profile.terms {
        let vals = rule
            .nodes
            .iter()
            .map(|&k| term.profile.eval(k))
            .collect::<Result<Vec<_>>>()?;
        check_square_summable(&rule, &vals)?;
    }
    let nodes = rule
        .nodes
        .par_iter()
        .zip(rule.weights.par_iter())
        .map(|(&k, &weight)| {
            Ok(NodeTerm {
                k,
                weight,
                momentum: MomentumPair::from_k1(k)?,
                tensor: eigen_integrand(n, c, profile, k)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SynthesizedSolution {
        n,
        c,
        spec: *spec,
        source: Source::Eigen(profile.clone()),
        nodes,
    })
}

/// `∫ g(k)·B(k) dk` for a vertex-condition solution `B` whose transforms
/// are the kernel element at first-particle momentum `k`.
pub fn synthesize_basic_solution(
    cfg: &StarConfig,
    element: &KernelElement,
    profile: &Profile,
    spec: &QuadratureSpec,
) -> Result<SynthesizedSolution> {
    if element.n() != cfg.n() {
        return Err(Error::InvalidProfile(format!(
            "kernel element has n = {}, configuration n = {}",
            element.n(),
            cfg.n()
        )));
    }
    profile.validate()?;
    let rule = spec.rule()?;
    let vals = rule
        .nodes
        .iter()
        .map(|&k| profile.eval(k))
        .collect::<Result<Vec<_>>>()?;
    check_square_summable(&rule, &vals)?;
    let base = element.basic_tensor();
    let nodes = rule
        .nodes
        .iter()
        .zip(&rule.weights)
        .zip(&vals)
        .map(|((&k, &weight), &g)| {
            Ok(NodeTerm {
                k,
                weight,
                momentum: MomentumPair::from_k1(k)?,
                tensor: if g == 0.0 {
                    AmplitudeTensor::new(cfg.n())
                } else {
                    base.scaled(Complex64::new(g, 0.0))
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SynthesizedSolution {
        n: cfg.n(),
        c: cfg.c(),
        spec: *spec,
        source: Source::Basic {
            element: element.clone(),
            profile: profile.clone(),
        },
        nodes,
    })
}

/// Empirical quadrature error of one refinement step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub base_nodes: usize,
    pub refined_nodes: usize,
    pub samples: usize,
    pub max_change: f64,
}

/// Fixed evaluation points used by refinement studies.
pub fn refinement_points(n: usize) -> Vec<QuadrantPoint> {
    spread_points(n, 64, 0x5eed)
}

/// Re-synthesizes with `factor` times as many nodes and reports the largest
/// pointwise change on [`refinement_points`].
pub fn refine_quadrature(s: &SynthesizedSolution, factor: usize) -> Result<Refinement> {
    if factor < 2 {
        return Err(Error::InvalidQuadrature(format!(
            "refinement factor must be at least 2, got {factor}"
        )));
    }
    let spec = QuadratureSpec {
        nodes: s.spec.nodes * factor,
        ..s.spec
    };
    let cfg = StarConfig::new(s.n, s.c)?;
    let finer = match &s.source {
        Source::Eigen(p) => {
            if p.has_sampled() {
                return Err(Error::InvalidProfile("sampled profiles cannot be refined".into()));
            }
            synthesize_eigensolution(&cfg, p, &spec)?
        }
        Source::Basic { element, profile } => {
            if matches!(profile, Profile::Sampled { .. }) {
                return Err(Error::InvalidProfile("sampled profiles cannot be refined".into()));
            }
            synthesize_basic_solution(&cfg, element, profile, &spec)?
        }
    };
    let pts = refinement_points(s.n);
    let max_change = pts
        .par_iter()
        .map(|p| (s.value(p) - finer.value(p)).norm())
        .reduce(|| 0.0, f64::max);
    Ok(Refinement {
        base_nodes: s.spec.nodes,
        refined_nodes: spec.nodes,
        samples: pts.len(),
        max_change,
    })
}

fn restrict(t: &AmplitudeTensor, assignment: Assignment) -> AmplitudeTensor {
    let mut out = AmplitudeTensor::new(t.n());
    for (k, v) in t.entries().filter(|(k, _)| k.assignment == assignment) {
        out.insert(*k, *v).expect("entry of a valid tensor");
    }
    out
}

/// The same eigensolution written over the full momentum interval: first
/// particle momentum `u ∈ [0, 1]` with transforms carrying the Jacobian
/// `u/√(1 − u²)` on the upper half. The upper half is integrated in
/// `s = √(1 − u)` so the endpoint at `u = 1` stays smooth.
pub fn synthesize_unfolded(
    cfg: &StarConfig,
    profile: &CoefficientProfile,
    spec: &QuadratureSpec,
) -> Result<SynthesizedSolution> {
    let folded = synthesize_eigensolution(cfg, profile, spec)?;
    let (n, c) = (cfg.n(), cfg.c());
    let mut nodes: Vec<NodeTerm> = folded
        .nodes
        .into_iter()
        .map(|t| NodeTerm {
            tensor: restrict(&t.tensor, Assignment::Forward),
            ..t
        })
        .collect();
    // the upper half maps onto the same k-interval [lo, hi]
    let (s_lo, s_hi) = ((1.0 - partner(spec.lo)).sqrt(), (1.0 - partner(spec.hi)).sqrt());
    let rule = Rule::gauss_legendre(spec.nodes, s_lo.min(s_hi), s_lo.max(s_hi))?;
    let upper = rule
        .nodes
        .par_iter()
        .zip(rule.weights.par_iter())
        .map(|(&s, &w)| {
            let u = 1.0 - s * s;
            let k = partner(u);
            let t = eigen_integrand(n, c, profile, k)?;
            Ok(NodeTerm {
                k,
                weight: w * 2.0 * s * u / k,
                momentum: MomentumPair::from_k1(k)?,
                tensor: restrict(&t, Assignment::Swapped),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    nodes.extend(upper);
    Ok(SynthesizedSolution {
        n,
        c,
        spec: *spec,
        source: Source::Eigen(profile.clone()),
        nodes,
    })
}

/// One gridded value for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    /// `i-j`.
    pub quadrant: String,
    pub sector: String,
    pub x: f64,
    pub y: f64,
    pub re: f64,
    pub im: f64,
}

/// Values of `f` on `xs × ys` in every quadrant.
pub fn export_grid<F: Field + ?Sized>(f: &F, xs: &[f64], ys: &[f64]) -> Result<Vec<GridRow>> {
    let n = f.edges();
    let mut rows = Vec::with_capacity(n * n * xs.len() * ys.len());
    for i in 1..=n {
        for j in 1..=n {
            for &x in xs {
                for &y in ys {
                    let p = QuadrantPoint::natural(i, j, x, y)?;
                    let v = f.value(&p);
                    rows.push(GridRow {
                        quadrant: format!("{i}-{j}"),
                        sector: p.sector().label().to_string(),
                        x,
                        y,
                        re: v.re,
                        im: v.im,
                    });
                }
            }
        }
    }
    Ok(rows)
}
