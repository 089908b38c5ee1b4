use proptest::prelude::*;
use stokes_darcy::quadrature::{make_quadrature, QuadratureRule};

fn exact_monomial(a: u32, b: u32) -> f64 {
    let f = |n: u32| (1..=n).map(|i| i as f64).product::<f64>();
    f(a) * f(b) / f(a + b + 2)
}

#[test]
fn reference_area() {
    for k in 1..=3 {
        let q = make_quadrature(k).unwrap();
        let s: f64 = q.tri_weights.iter().sum();
        assert!((s - 0.5).abs() < 1e-15);
        let s: f64 = q.edge_weights.iter().sum();
        assert!((s - 1.0).abs() < 1e-15);
        assert!(q.tri_weights.iter().all(|&w| w > 0.0));
        assert!(q.edge_weights.iter().all(|&w| w > 0.0));
    }
}

#[test]
fn monomial_exactness() {
    for k in 1..=3 {
        let q = make_quadrature(k).unwrap();
        let deg = 2 * k as u32 + 2;
        for a in 0..=deg {
            for b in 0..=deg - a {
                let s: f64 = q
                    .tri_points
                    .iter()
                    .zip(&q.tri_weights)
                    .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                    .sum();
                let e = exact_monomial(a, b);
                assert!((s - e).abs() <= 1e-13 * e, "k={k} a={a} b={b}");
            }
            let s: f64 = q.edge_points.iter().zip(&q.edge_weights).map(|(t, w)| w * t.powi(a as i32)).sum();
            assert!((s - 1.0 / (a as f64 + 1.0)).abs() < 1e-14);
        }
    }
}

#[test]
fn odd_degree_rules() {
    for deg in 1..=9 {
        let q = QuadratureRule::with_degree(deg);
        for a in 0..=deg as u32 {
            for b in 0..=deg as u32 - a {
                let s: f64 =
                    q.tri_points.iter().zip(&q.tri_weights).map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32)).sum();
                assert!((s - exact_monomial(a, b)).abs() < 1e-14);
            }
        }
    }
}

#[test]
fn unsupported_degree() {
    assert!(make_quadrature(0).is_err());
    assert!(make_quadrature(4).is_err());
}

proptest! {
    #[test]
    fn random_polynomial_matches_fine_rule(k in 1usize..=3, coeffs in proptest::collection::vec(-1.0f64..1.0, 36)) {
        let q = make_quadrature(k).unwrap();
        let fine = QuadratureRule::with_degree(30);
        let deg = 2 * k + 2;
        let f = |x: f64, y: f64| {
            let mut s = 0.0;
            let mut i = 0;
            for a in 0..=deg {
                for b in 0..=deg - a {
                    s += coeffs[i % coeffs.len()] * x.powi(a as i32) * y.powi(b as i32);
                    i += 1;
                }
            }
            s
        };
        let lo: f64 = q.tri_points.iter().zip(&q.tri_weights).map(|(p, w)| w * f(p[0], p[1])).sum();
        let hi: f64 = fine.tri_points.iter().zip(&fine.tri_weights).map(|(p, w)| w * f(p[0], p[1])).sum();
        prop_assert!((lo - hi).abs() < 1e-12);
    }
}
