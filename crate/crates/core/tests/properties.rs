use pkl_core::certificates::{one_pm_talpha, verify, QuadraticModuleElement};
use pkl_core::gauss::{apply_gauss, sup_error_bound};
use pkl_core::{ChebPoly1, ChebPolyN, MultiIndex};
use proptest::prelude::*;

fn poly_n(n: usize, max_deg: u32) -> impl Strategy<Value = ChebPolyN> {
    prop::collection::vec(
        (prop::collection::vec(0..=max_deg, n), -2.0f64..2.0),
        1..8,
    )
    .prop_map(move |terms| {
        ChebPolyN::from_terms(n, terms.into_iter().map(|(a, c)| (MultiIndex(a), c))).unwrap()
    })
}

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..=1.0, n)
}

proptest! {
    #[test]
    fn product_is_pointwise((p, q, x) in (1usize..=3).prop_flat_map(|n| (poly_n(n, 4), poly_n(n, 4), point(n)))) {
        let lhs = p.mul(&q).eval(&x).unwrap();
        let rhs = p.eval(&x).unwrap() * q.eval(&x).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-11 * (1.0 + p.norm_1cheb() * q.norm_1cheb()));
    }

    #[test]
    fn one_norm_dominates_values((p, x) in (1usize..=3).prop_flat_map(|n| (poly_n(n, 6), point(n)))) {
        prop_assert!(p.eval(&x).unwrap().abs() <= p.norm_1cheb() + 1e-12);
    }

    #[test]
    fn one_pm_talpha_verifies_within_degree(
        alpha in (1usize..=3).prop_flat_map(|n| prop::collection::vec(0u32..=8, n))
            .prop_filter("1 <= |alpha| <= 8", |a| { let t: u32 = a.iter().sum(); (1..=8).contains(&t) }),
        plus in any::<bool>(),
    ) {
        let sign = if plus { 1 } else { -1 };
        let alpha = MultiIndex(alpha);
        let cert = one_pm_talpha(&alpha, sign).unwrap();
        let target = ChebPolyN::basis(alpha.clone()).scale(sign as f64).add_constant(1.0);
        let r = verify(&cert, &target).unwrap();
        prop_assert!(r.residual <= 1e-10);
        prop_assert!(r.degrees_ok);
        prop_assert_eq!(cert.declared_degree, 2 * alpha.total());
        let json = serde_json::to_string(&cert).unwrap();
        let back: QuadraticModuleElement = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back, cert);
    }

    #[test]
    fn gauss_smoothing_within_sup_bound(k in 1usize..=8, frac in 0.05f64..=1.0) {
        let sigma = frac / (k * k) as f64;
        let t = ChebPoly1::basis(k);
        let err = (&apply_gauss(&t, sigma).unwrap() - &t).sup_norm_sampled(400);
        prop_assert!(err <= sup_error_bound(k as u32, sigma) * (1.0 + 1e-9) + 1e-13);
    }

    #[test]
    fn interpolation_is_exact_on_polynomials(c in prop::collection::vec(-3.0f64..3.0, 1..20)) {
        let p = ChebPoly1::new(c);
        let q = ChebPoly1::interpolate(p.degree(), |x| p.eval(x));
        prop_assert!((&p - &q).norm_1cheb() <= 1e-12 * (1.0 + p.norm_1cheb()));
    }
}
