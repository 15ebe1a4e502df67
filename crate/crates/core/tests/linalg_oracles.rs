use matconc_core::linalg::*;
use proptest::prelude::*;
use rand_core::RngCore;
use matconc_core::streams::stream_rng;

fn uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

fn random_square(d: usize, seed: u64) -> SquareMatrix {
    let mut rng = stream_rng(seed);
    let rows: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| uniform(&mut rng)).collect()).collect();
    SquareMatrix::from_rows(&rows).unwrap()
}

fn random_psd(d: usize, seed: u64) -> SymMatrix {
    let a = random_square(d, seed);
    a.gram()
}

/// Power iteration on AᵀA, independent of the Jacobi kernel.
fn power_norm(a: &SquareMatrix) -> f64 {
    let g = a.gram();
    let d = a.dim();
    let mut v: Vec<f64> = (0..d).map(|i| 1.0 + 0.1 * i as f64).collect();
    let mut lambda = 0.0;
    for _ in 0..20_000 {
        let w = g.as_square().mul_vec(&v);
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm;
        v = w.into_iter().map(|x| x / norm).collect();
    }
    lambda.sqrt()
}

#[test]
fn reconstruction_of_random_symmetric() {
    for seed in 0..20 {
        let s = random_square(5, seed).symmetric_part();
        let sp = sym_eigen(&s).unwrap();
        let q = &sp.eigenvectors;
        let qtq = q.transpose().matmul(q);
        assert!(qtq.sub(&SquareMatrix::identity(5)).max_abs() <= 1e-10);
        let err = sp.reconstruct().sub(s.as_square()).max_abs();
        assert!(err <= 1e-9 * (1.0 + s.as_square().max_abs()), "seed {seed}: {err}");
        assert!(sp.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }
}

#[test]
fn operator_norm_matches_power_iteration() {
    for seed in 100..110 {
        let a = random_square(4, seed);
        let got = operator_norm(&a);
        let oracle = power_norm(&a);
        assert!(((got - oracle) / oracle).abs() < 1e-9, "seed {seed}: {got} vs {oracle}");
        // And the eigen route on AᵀA.
        let lmax = sym_eigen(&a.gram()).unwrap().max_eigenvalue();
        assert!(((got - lmax.sqrt()) / got).abs() < 1e-12);
    }
}

#[test]
fn expected_product_equals_direct_multiplication() {
    let sigma = random_psd(3, 7);
    let sp = sym_eigen(&sigma).unwrap();
    let id = SquareMatrix::identity(3);
    let f1 = id.add(&sigma.as_square().scale(0.1));
    let f2 = id.add(&sigma.as_square().scale(0.2));
    let direct = f2.matmul(&f1);
    assert!(expected_product(&sp, &[0.1, 0.2]).sub(&direct).max_abs() <= 1e-12);
}

fn psd_strategy() -> impl Strategy<Value = (SymMatrix, Vec<f64>)> {
    (1usize..=6, any::<u64>(), prop::collection::vec(0.0f64..0.3, 0..40)).prop_map(|(d, seed, etas)| {
        (random_psd(d, seed), etas)
    })
}

proptest! {
    #[test]
    fn sym_norm_is_max_abs_eigenvalue(d in 1usize..=6, seed in any::<u64>()) {
        let s = random_square(d, seed).symmetric_part();
        let sp = sym_eigen(&s).unwrap();
        let expect = sp.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
        let got = operator_norm(s.as_square());
        prop_assert!((got - expect).abs() <= 1e-10 * expect.max(1e-300));
    }

    #[test]
    fn expected_norm_is_growth_product((sigma, etas) in psd_strategy()) {
        let sp = sym_eigen(&sigma).unwrap();
        let lmax = sp.max_eigenvalue().max(0.0);
        let growth: f64 = etas.iter().map(|e| 1.0 + e * lmax).product();
        let e = expected_product(&sp, &etas);
        prop_assert!(((operator_norm(&e) - growth) / growth).abs() <= 1e-10);
        let inv = inverse_expected_product(&sp, &etas);
        prop_assert!(operator_norm(&inv) <= 1.0 + 1e-12);
        // Round-off in E⁻¹E scales with the condition number of E.
        let cond = operator_norm(&e) * operator_norm(&inv);
        prop_assert!(inv.matmul(&e).sub(&SquareMatrix::identity(sigma.dim())).max_abs() <= 1e-13 * cond.max(1.0));
    }

    #[test]
    fn expected_product_ignores_step_order((sigma, etas) in psd_strategy(), rot in 0usize..40) {
        let sp = sym_eigen(&sigma).unwrap();
        let mut permuted = etas.clone();
        if !permuted.is_empty() {
            let r = rot % permuted.len();
            permuted.rotate_left(r);
            permuted.reverse();
        }
        let a = expected_product(&sp, &etas);
        let b = expected_product(&sp, &permuted);
        prop_assert!(a.sub(&b).max_abs() <= 1e-12 * a.max_abs().max(1.0));
    }
}
