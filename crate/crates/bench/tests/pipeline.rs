use pkl_bench::e2e::{construct_certificate, end_to_end_bound, smallest_r, threshold, ConstructParams, Mode};
use pkl_bench::report::fmt6;
use pkl_core::oracle::grid_oracle;
use pkl_core::{ChebPoly1, ChebPolyN, MultiIndex};
use pkl_sdp::{lasserre_bound, NativeIpm};
use proptest::prelude::*;

fn m(v: Vec<u32>) -> MultiIndex {
    MultiIndex(v)
}

fn uni(c: &[f64]) -> ChebPolyN {
    ChebPolyN::from_univariate(&ChebPoly1::new(c.to_vec()), 1, 0)
}

/// Polynomials with minima known in closed form.
fn known_minima() -> Vec<(ChebPolyN, f64)> {
    let mono = |n, t: Vec<(Vec<u32>, f64)>| ChebPolyN::from_monomial_terms(n, t.into_iter().map(|(a, c)| (m(a), c))).unwrap();
    vec![
        (ChebPolyN::constant(1, 1.0), 1.0),
        (uni(&[2.0, 1.0]), 1.0),
        (ChebPolyN::basis(m(vec![2])), -1.0),
        (ChebPolyN::basis(m(vec![5])), -1.0),
        // x³ - x at x = 1/√3
        (mono(1, vec![(vec![3], 1.0), (vec![1], -1.0)]), -2.0 / (3.0 * 3f64.sqrt())),
        (ChebPolyN::basis(m(vec![1, 1])), -1.0),
        // (x - 0.3)² + (y + 0.2)²
        (mono(2, vec![(vec![2, 0], 1.0), (vec![1, 0], -0.6), (vec![0, 2], 1.0), (vec![0, 1], 0.4), (vec![0, 0], 0.13)]), 0.0),
        // x y z
        (ChebPolyN::basis(m(vec![1, 1, 1])), -1.0),
    ]
}

#[test]
fn oracle_soundness_on_known_minima() {
    for (f, want) in known_minima() {
        let o = grid_oracle(&f, if f.nvars() == 3 { 21 } else { 101 }).unwrap();
        assert!((o.f_min_hat - want).abs() <= o.slack + 1e-12, "{f:?}: {} vs {want}", o.f_min_hat);
        assert!(o.f_min_hat <= o.f_max_hat);
    }
}

#[test]
fn rate_slack_covers_measured_gap() {
    let be = NativeIpm::new();
    let cases = [
        (uni(&[0.3, -0.2, 0.5, 0.0, 0.4]), 4),
        (ChebPolyN::from_monomial_terms(1, vec![(m(vec![3]), 1.0), (m(vec![1]), -1.0)]).unwrap(), 4),
        (ChebPolyN::from_terms(2, vec![(m(vec![2, 0]), 1.0), (m(vec![1, 1]), 0.7), (m(vec![0, 1]), -0.3)]).unwrap(), 2),
    ];
    for (f, level) in cases {
        let o = grid_oracle(&f, 201).unwrap();
        let low = lasserre_bound(&f, level, &be).unwrap().value;
        for eps in [0.1, 0.5, 0.9] {
            let rep = end_to_end_bound(&f, eps, Mode::Arithmetic).unwrap();
            assert!(rep.slack >= o.f_min_hat - low, "eps {eps}: slack {} < gap {}", rep.slack, o.f_min_hat - low);
        }
    }
}

#[test]
fn construction_bound_is_sound_in_two_variables() {
    let f = ChebPolyN::from_terms(2, vec![(m(vec![2, 0]), 1.0), (m(vec![1, 1]), 0.7), (m(vec![0, 1]), -0.3)]).unwrap();
    let rep = construct_certificate(&f, ConstructParams::default()).unwrap();
    let o = grid_oracle(&f, 201).unwrap();
    assert!(rep.bound_value <= o.lower());
    assert!(rep.verify_residual <= 1e-8);
    assert_eq!(rep.level, rep.certificate.r_level);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn smallest_r_meets_threshold(d in 1u32..6, eps in 0.01f64..0.99) {
        let need = threshold(d, eps);
        let r = smallest_r(need).unwrap();
        prop_assert!(r as f64 / (r as f64).ln() >= need);
        prop_assert!(r == 3 || ((r - 1) as f64) / ((r - 1) as f64).ln() < need);
    }

    #[test]
    fn larger_eps_never_raises_r(d in 1u32..6, a in 0.01f64..0.99, b in 0.01f64..0.99) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(smallest_r(threshold(d, hi)).unwrap() <= smallest_r(threshold(d, lo)).unwrap());
    }

    #[test]
    fn six_digit_format_is_close(x in -1e6f64..1e6) {
        let back: f64 = fmt6(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-6 * x.abs() + 1e-300);
    }
}
