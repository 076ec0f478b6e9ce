use num_complex::Complex64 as C64;
use proptest::prelude::*;

use wcospec::mobius::{Automorphism, Mobius};
use wcospec::series::TaylorSeries;
use wcospec::spaces::SpaceSpec;
use wcospec::spectra::predict_annuli;
use wcospec::symbolparse::{analyze, parse, Expr};
use wcospec::universality::{decompose, split_exprs};
use wcospec::wco::guard_band;

fn complex() -> impl Strategy<Value = C64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| C64::new(a, b))
}

fn poly(max_deg: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec(complex(), 1..=max_deg + 1)
}

fn disk_point() -> impl Strategy<Value = C64> {
    (0.0..0.8f64, 0.0..std::f64::consts::TAU).prop_map(|(r, t)| C64::from_polar(r, t))
}

fn expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        Just(Expr::Z),
        (-3.0..3.0f64).prop_map(Expr::c),
        (1.5..3.0f64, 0.0..6.2f64, -0.9..0.9f64).prop_map(|(r, t, s)| Expr::Pow {
            p0: C64::from_polar(r, t),
            p1: C64::new(-1.0, 0.0),
            s: C64::new(s, 0.0),
        }),
    ];
    leaf.prop_recursive(3, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
            inner.prop_map(|a| (a * Expr::c(0.3)).exp()),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn series_product_is_commutative_and_distributive(a in poly(8), b in poly(8), d in poly(8)) {
        let (a, b, d) = (TaylorSeries::from_poly(&a, 24), TaylorSeries::from_poly(&b, 24), TaylorSeries::from_poly(&d, 24));
        prop_assert!(a.mul(&b).max_diff(&b.mul(&a), 24) < 1e-13);
        let lhs = a.mul(&(&b + &d));
        let rhs = &a.mul(&b) + &a.mul(&d);
        prop_assert!(lhs.max_diff(&rhs, 24) < 1e-12);
    }

    #[test]
    fn exp_is_a_homomorphism(a in poly(4), b in poly(4)) {
        let a = TaylorSeries::from_poly(&a, 32).scale(C64::new(0.5, 0.0));
        let b = TaylorSeries::from_poly(&b, 32).scale(C64::new(0.5, 0.0));
        let lhs = (&a + &b).exp();
        let rhs = a.exp().mul(&b.exp());
        prop_assert!(lhs.max_diff(&rhs, 32) < 1e-10 * lhs.max_abs().max(1.0));
    }

    #[test]
    fn mobius_inverse(r in 0.05..0.9f64, t in 0.0..6.2f64, z in disk_point()) {
        let m = Mobius::canonical(r).compose(&Mobius::rotation(t));
        prop_assert!((m.inverse().eval(m.eval(z)) - z).norm() < 1e-12);
        prop_assert!(m.compose(&m.inverse()).approx_eq(&Mobius::identity(), 1e-12));
    }

    #[test]
    fn display_round_trips(e in expr(), z in disk_point()) {
        let back = parse(&e.to_string()).unwrap();
        let (x, y) = (e.eval(z), back.eval(z));
        prop_assert!((x - y).norm() <= 1e-12 * x.norm().max(1.0));
    }

    #[test]
    fn split_sums_to_one(m in 0u32..5, n in 0u32..5, z in disk_point()) {
        let psi = Automorphism::canonical(0.5).unwrap();
        let (e1, e2) = split_exprs(&psi, m, n);
        prop_assert!((e1.eval(z) + e2.eval(z) - 1.0).norm() < 1e-12);
    }

    #[test]
    fn decomposition_is_exact(p in poly(12), mu in 0.0..3.0f64, nu in 0.0..3.0f64) {
        let psi = Automorphism::canonical(0.4).unwrap();
        let f = TaylorSeries::from_poly(&p, 48);
        let d = decompose(&f, &psi, mu, nu, &SpaceSpec::hardy()).unwrap();
        prop_assert!(d.sum_error < 1e-12);
    }

    #[test]
    fn guard_band_within_half(n in 8usize..4096, lam in 0.01..0.99f64) {
        let g = guard_band(n, lam);
        prop_assert!(g <= n / 2);
        prop_assert!(guard_band(n, 1.5) == n / 2);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn annuli_scale_with_the_weight(scale in 0.2..5.0f64, phase in 0.0..6.2f64) {
        let psi = Automorphism::canonical(0.5).unwrap();
        let c = C64::from_polar(scale, phase);
        let u = parse("2 + z").unwrap();
        let base = predict_annuli(&analyze(&u, &psi, 32).unwrap(), &psi, &SpaceSpec::hardy());
        let scaled = predict_annuli(&analyze(&(Expr::Const(c) * u), &psi, 32).unwrap(), &psi, &SpaceSpec::hardy());
        for (x, y) in [
            (base.outer_upper, scaled.outer_upper),
            (base.inner_lower, scaled.inner_lower),
            (base.inclusion_inner, scaled.inclusion_inner),
            (base.inclusion_outer, scaled.inclusion_outer),
        ] {
            prop_assert!((y - scale * x).abs() < 1e-10 * scale * x);
        }
        let inv = scaled.inverse();
        prop_assert!((inv.outer_upper - 1.0 / scaled.inner_lower).abs() < 1e-10 * inv.outer_upper);
    }
}
