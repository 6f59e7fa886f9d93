use deltastar::verifier::{check_diagonal_bc, check_vertex_bc, mutate_sym_diag_coefficient, verify_element};
use deltastar::{
    build_basis, make_config, BasisReport, Direction, Field, MomentumPair, QuadrantPoint, Sector, VerifyOptions,
};
use num_complex::Complex64;
use proptest::prelude::*;

const H: f64 = 1e-5;

/// Second-order one-sided difference stepping in `sign` direction, never
/// leaving the sector of `p`.
fn one_sided<F: Field>(f: &F, p: &QuadrantPoint, dir: Direction, sign: f64) -> Complex64 {
    let at = |step: f64| {
        let (x, y) = match dir {
            Direction::Dx => (p.x() + step, p.y()),
            Direction::Dy => (p.x(), p.y() + step),
        };
        f.value(&QuadrantPoint::new(p.i(), p.j(), x, y, p.sector()).unwrap())
    };
    let h = sign * H;
    (-3.0 * at(0.0) + 4.0 * at(h) - at(2.0 * h)) / (2.0 * h)
}

/// Direction that keeps a step inside the sector.
fn inward(p: &QuadrantPoint, dir: Direction) -> f64 {
    match (p.sector(), dir) {
        (Sector::Above, Direction::Dx) | (Sector::Below, Direction::Dy) => 1.0,
        (Sector::Above, Direction::Dy) | (Sector::Below, Direction::Dx) => -1.0,
        _ => 1.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn analytic_derivatives_match_finite_differences(
        n in 3usize..6,
        c in prop_oneof![-3.0..-0.05f64, 0.05..3.0f64],
        k1 in 0.05..0.70f64,
        i in 1usize..6,
        j in 1usize..6,
        x in 0.5..8.0f64,
        y in 0.5..8.0f64,
    ) {
        prop_assume!((x - y).abs() > 0.01);
        let (i, j) = (i.min(n), j.min(n));
        let cfg = make_config(n, c).unwrap();
        let basis = build_basis(&cfg, MomentumPair::from_k1(k1).unwrap()).unwrap();
        let p = QuadrantPoint::natural(i, j, x, y).unwrap();
        for e in &basis.elements {
            for dir in [Direction::Dx, Direction::Dy] {
                let exact = e.derivative(&p, dir);
                let fd = one_sided(e, &p, dir, inward(&p, dir));
                let scale = exact.norm().max(e.value(&p).norm()).max(1.0);
                prop_assert!((exact - fd).norm() <= 1e-7 * scale, "{} {:?}: {} vs {}", e.family, dir, exact, fd);
            }
        }
    }

    #[test]
    fn random_draws_pass_every_check(
        n in 3usize..7,
        c in prop_oneof![-3.0..-0.05f64, 0.05..3.0f64],
        k1 in 0.05..0.70f64,
        seed in any::<u64>(),
    ) {
        let cfg = make_config(n, c).unwrap();
        let basis = build_basis(&cfg, MomentumPair::from_k1(k1).unwrap()).unwrap();
        let opts = VerifyOptions { samples: 30, seed, ..Default::default() };
        for e in &basis.elements {
            let r = verify_element(e, &opts).unwrap();
            prop_assert!(r.pass, "{}", r.to_json());
        }
    }

    #[test]
    fn sym_diag_mutants_fail(
        n in 3usize..6,
        c in prop_oneof![-3.0..-0.05f64, 0.05..3.0f64],
        k1 in 0.05..0.70f64,
        rel in 1e-3..0.5f64,
    ) {
        let cfg = make_config(n, c).unwrap();
        let m = MomentumPair::from_k1(k1).unwrap();
        let t = mutate_sym_diag_coefficient(&cfg, 1, &m, rel).unwrap();
        let f = t.bind(m);
        let [cont, jump] = check_diagonal_bc(&f, c, 40, 3, 1e-9);
        prop_assert!(cont.pass && !jump.pass);
        // the vertex conditions do not see the diagonal coefficient
        prop_assert!(check_vertex_bc(&f, 40, 3, 1e-9).iter().all(|r| r.pass));
    }
}

/// Vertex Kirchhoff sum computed from finite differences only.
#[test]
fn vertex_kirchhoff_from_finite_differences() {
    for (n, c, k1) in [(3, 1.0, 0.6), (5, -2.0, 0.2)] {
        let cfg = make_config(n, c).unwrap();
        let basis = build_basis(&cfg, MomentumPair::from_k1(k1).unwrap()).unwrap();
        for e in &basis.elements {
            for other in 1..=n {
                for y in [0.4, 2.3, 7.9] {
                    let mut sum = Complex64::new(0.0, 0.0);
                    for l in 1..=n {
                        let p = QuadrantPoint::natural(l, other, 0.0, y).unwrap();
                        sum += one_sided(e, &p, Direction::Dx, 1.0);
                    }
                    assert!(sum.norm() < 1e-7, "{} other={other} y={y}: {sum}", e.family);
                }
            }
        }
    }
}

/// Diagonal jump from finite differences, stepping off the diagonal on each side.
#[test]
fn diagonal_jump_from_finite_differences() {
    for (n, c, k1) in [(3, 1.0, 0.6), (4, -1.5, 0.28)] {
        let cfg = make_config(n, c).unwrap();
        let basis = build_basis(&cfg, MomentumPair::from_k1(k1).unwrap()).unwrap();
        for e in &basis.elements {
            for i in 1..=n {
                for t in [0.7, 3.1] {
                    let a = QuadrantPoint::new(i, i, t, t, Sector::Above).unwrap();
                    let b = QuadrantPoint::new(i, i, t, t, Sector::Below).unwrap();
                    let normal = |p: &QuadrantPoint| {
                        0.5 * (one_sided(e, p, Direction::Dx, inward(p, Direction::Dx))
                            - one_sided(e, p, Direction::Dy, inward(p, Direction::Dy)))
                    };
                    let psi = 0.5 * (e.value(&a) + e.value(&b));
                    let r = normal(&a) - normal(&b) - c * psi;
                    assert!(r.norm() < 1e-6 * psi.norm().max(1.0), "{} i={i} t={t}: {r}", e.family);
                }
            }
        }
    }
}

#[test]
fn basis_report_round_trips() {
    let cfg = make_config(4, 0.9).unwrap();
    let r =
        deltastar::verify_full_basis(&cfg, MomentumPair::from_k1(0.33).unwrap(), &VerifyOptions::default()).unwrap();
    assert!(r.pass);
    assert_eq!(BasisReport::from_json(&r.to_json()).unwrap(), r);
}
