//! Gauss–Legendre rules.

use crate::error::{Error, Result};

/// Nodes and weights of a quadrature rule on a finite interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    /// `order`-point Gauss–Legendre rule on `[a, b]`.
    pub fn gauss_legendre(order: usize, a: f64, b: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidQuadrature("order must be positive".into()));
        }
        if !(a.is_finite() && b.is_finite()) || b <= a {
            return Err(Error::InvalidQuadrature(format!("bad interval [{a}, {b}]")));
        }
        let (xs, ws) = legendre_nodes(order);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        Ok(Self {
            nodes: xs.iter().map(|x| mid + half * x).collect(),
            weights: ws.iter().map(|w| half * w).collect(),
        })
    }

    /// Composite rule: `panels` equal panels of `order` points each.
    pub fn composite(order: usize, panels: usize, a: f64, b: f64) -> Result<Self> {
        if panels == 0 {
            return Err(Error::InvalidQuadrature("panel count must be positive".into()));
        }
        let width = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(order * panels);
        let mut weights = Vec::with_capacity(order * panels);
        for p in 0..panels {
            let lo = a + width * p as f64;
            let hi = if p + 1 == panels { b } else { lo + width };
            let r = Self::gauss_legendre(order, lo, hi)?;
            nodes.extend(r.nodes);
            weights.extend(r.weights);
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Nodes and weights on `[-1, 1]`, by Newton iteration on `P_n` from the
/// Tricomi initial guesses.
fn legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let theta = std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5);
        let mut x = theta.cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        xs[i] = -x;
        xs[n - 1 - i] = x;
        ws[i] = w;
        ws[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        xs[n / 2] = 0.0;
    }
    (xs, ws)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        for order in [1, 2, 5, 16, 64] {
            let r = Rule::gauss_legendre(order, -1.0, 2.0).unwrap();
            let deg = 2 * order - 1;
            let exact = (2f64.powi(deg as i32 + 1) - (-1f64).powi(deg as i32 + 1)) / (deg as f64 + 1.0);
            let got = r.integrate(|x| x.powi(deg as i32));
            assert!(
                (got - exact).abs() < 1e-11 * exact.abs().max(1.0),
                "order {order}: {got} vs {exact}"
            );
            assert!((r.weights.iter().sum::<f64>() - 3.0).abs() < 1e-13);
        }
    }

    #[test]
    fn nodes_are_sorted_and_interior() {
        let r = Rule::gauss_legendre(33, 0.0, 1.0).unwrap();
        assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
        assert!(r.nodes[0] > 0.0 && r.nodes[32] < 1.0);
        assert_eq!(r.nodes[16], 0.5);
    }

    #[test]
    fn composite_matches_smooth_integral() {
        let r = Rule::composite(8, 10, 0.0, 20.0).unwrap();
        let got = r.integrate(|x| x.sin().powi(2));
        let exact = 10.0 - (40f64).sin() / 4.0;
        assert!((got - exact).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_rules() {
        assert!(Rule::gauss_legendre(0, 0.0, 1.0).is_err());
        assert!(Rule::gauss_legendre(4, 1.0, 1.0).is_err());
        assert!(Rule::composite(4, 0, 0.0, 1.0).is_err());
    }
}
