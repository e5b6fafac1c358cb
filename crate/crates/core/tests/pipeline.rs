use pkl_core::certificates::{assemble_putinar, verify};
use pkl_core::expkernel::{max_abs_cheb_on, KernelSpec};
use pkl_core::kernel_op::{
    apply_kernel, apply_product_kernel, measured_identity_error, measured_product_identity_error,
    multivariate_error_bound, product_kernel_image,
};
use pkl_core::{ChebPoly1, ChebPolyN, MultiIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn kernel() -> KernelSpec {
    KernelSpec::schedule_off(0.15, 1e-3, 1.1, 3).unwrap()
}

/// Random degree-3 polynomial in two variables, shifted to be at least 0.5
/// on `[-R, R]²`.
fn random_positive(rng: &mut ChaCha8Rng, radius: f64) -> ChebPolyN {
    let mut f = ChebPolyN::zero(2);
    let mut shift = 0.5;
    for a in 0..=3u32 {
        for b in 0..=(3 - a) {
            if a + b == 0 {
                continue;
            }
            let c: f64 = rng.gen_range(-1.0..1.0);
            f.add_term(MultiIndex(vec![a, b]), c);
            shift += c.abs() * max_abs_cheb_on(a, radius) * max_abs_cheb_on(b, radius);
        }
    }
    f.add_constant(shift)
}

#[test]
fn putinar_from_product_kernel_images() {
    let k = kernel();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..3 {
        let f = random_positive(&mut rng, k.radius);
        let img = apply_product_kernel(&k, &f).unwrap();
        assert!((&img.sos.expand() - &img.image).norm_1cheb() <= 1e-9);
        let (eps, cert) = assemble_putinar(&f, &img.sos).unwrap();
        let report = verify(&cert, &f.add_constant(eps)).unwrap();
        assert!(report.residual <= 1e-8, "residual {}", report.residual);
        assert!(report.degrees_ok);
        for i in 0..=10 {
            for j in 0..=10 {
                let x = [-1.0 + 0.2 * i as f64, -1.0 + 0.2 * j as f64];
                let v = cert.eval(&x).unwrap();
                assert!(v >= 0.0);
                assert!(f.eval(&x).unwrap() + eps - v >= -1e-8);
            }
        }
    }
}

#[test]
fn product_structure_identity() {
    let k = kernel();
    for alpha in [vec![1u32, 1], vec![2, 0], vec![0, 3], vec![2, 1]] {
        let t = ChebPolyN::basis(MultiIndex(alpha.clone()));
        let img = product_kernel_image(&k, &t).unwrap();
        let factors: Vec<ChebPoly1> = alpha
            .iter()
            .map(|&a| apply_kernel(&k, &ChebPoly1::basis(a as usize)).unwrap())
            .collect();
        let want = ChebPolyN::tensor(&factors);
        let diff = &img - &want;
        let max_coef = diff.terms().map(|(_, c)| c.abs()).fold(0.0, f64::max);
        assert!(max_coef <= 1e-10, "alpha {alpha:?}: {max_coef}");
    }
}

#[test]
fn product_error_within_geometric_bound() {
    let k = kernel();
    let eps = (0..=3)
        .map(|d| measured_identity_error(&k, d).unwrap())
        .fold(0.0, f64::max);
    for alpha in [vec![1u32, 1], vec![3, 0], vec![2, 1], vec![0, 0]] {
        let m = measured_product_identity_error(&k, &MultiIndex(alpha.clone())).unwrap();
        let b = multivariate_error_bound(eps, 2).unwrap();
        assert!(m <= b.value + 1e-12, "alpha {alpha:?}: {m} > {}", b.value);
    }
}
