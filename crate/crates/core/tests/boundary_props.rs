use matconc_core::boundary::*;
use proptest::prelude::*;

fn params(delta: f64, d: usize, l: f64, eta_epoch: f64, alpha: f64, mu: f64) -> BoundaryParams {
    BoundaryParams::new(delta, d, l, eta_epoch, alpha, mu).unwrap()
}

/// Epochs listed by brute force with exact integer arithmetic where possible.
fn brute_epoch(n: usize, eta: f64) -> usize {
    (0..)
        .find(|&k| {
            let lo = eta.powi(k as i32).ceil() as usize;
            let hi = eta.powi(k as i32 + 1).floor() as usize;
            lo <= n && n <= hi
        })
        .unwrap()
}

#[test]
fn epochs_cover_and_are_monotone() {
    for eta in [1.1, 1.5, 2.0, 3.0] {
        let mut prev = 0;
        for n in 1..=100_000usize {
            let k = epoch_index(n, eta);
            assert!(k >= prev, "eta {eta} n {n}");
            let (lo, hi) = epoch_bounds(k, eta);
            assert!(lo <= n && n <= hi, "eta {eta} n {n} k {k}: [{lo},{hi}]");
            if k > 0 {
                // Minimality: n is not in any earlier epoch.
                let (plo, phi) = epoch_bounds(k - 1, eta);
                assert!(!(plo <= n && n <= phi));
            }
            prev = k;
        }
    }
}

#[test]
fn epochs_match_brute_force_for_small_n() {
    for eta in [1.5, 2.0, 3.0] {
        for n in 1..=2000 {
            assert_eq!(epoch_index(n, eta), brute_epoch(n, eta), "eta {eta} n {n}");
        }
    }
}

#[test]
fn anytime_piecewise_constant_bit_exact() {
    let sched = StepSchedule::Polynomial { c: 0.01, gamma: 0.7 };
    for eta in [1.1, 1.5, 2.0, 3.0] {
        let p = params(0.1, 3, 2.0, eta, 2.0, 1.0);
        let table = BoundaryTable::new(100_000, &sched, &p).unwrap();
        let mut last: Option<(usize, f64)> = None;
        for n in 1..=100_000 {
            let k = table.epoch(n);
            let b = table.anytime(n).value;
            if let Some((pk, pb)) = last {
                if pk == k {
                    assert_eq!(b.to_bits(), pb.to_bits(), "eta {eta} n {n}");
                }
            }
            last = Some((k, b));
        }
    }
}

#[test]
fn zeta_against_partial_sum_oracle() {
    // Brute-force sum to N plus the integral tail bracket [N^{1-a}/(a-1) - ..., ...].
    for alpha in [3.0, 2.5, 5.0] {
        let n = 200_000usize;
        let head: f64 = (1..=n).rev().map(|k| (k as f64).powf(-alpha)).sum();
        let tail_hi = (n as f64).powf(1.0 - alpha) / (alpha - 1.0);
        let tail_lo = ((n + 1) as f64).powf(1.0 - alpha) / (alpha - 1.0);
        let z = zeta(alpha).unwrap();
        assert!(z >= head + tail_lo - 1e-12 && z <= head + tail_hi + 1e-12, "alpha {alpha}");
        let mid = head + 0.5 * (tail_lo + tail_hi);
        assert!((z - mid).abs() < 1e-10, "alpha {alpha}: {z} vs {mid}");
    }
    let z2 = zeta(2.0).unwrap();
    assert!((z2 - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-12);
    let z4 = zeta(4.0).unwrap();
    assert!((z4 - std::f64::consts::PI.powi(4) / 90.0).abs() < 1e-12);
}

#[test]
fn zeta_near_pole_matches_reference() {
    // mpmath.zeta(1.1), zeta(1.01)
    assert!((zeta(1.1).unwrap() - 10.584448464950810).abs() < 1e-9);
    assert!((zeta(1.01).unwrap() - 100.57794333849687).abs() < 1e-8);
    assert!(zeta(1.0 + 1e-10).is_err());
}

#[test]
fn stitching_weights_sum_to_one() {
    for alpha in [2.0, 3.0] {
        let partial: f64 = (0..=1_000_000usize).rev().map(|k| 1.0 / stitching_h(k, alpha).unwrap()).sum();
        assert!(partial <= 1.0 && partial >= 1.0 - 1e-5, "alpha {alpha}: {partial}");
    }
    let z = zeta(2.0).unwrap();
    let partial: f64 = (0..=1_000_000usize).rev().map(|k| 1.0 / stitching_h(k, 2.0).unwrap()).sum();
    // The missing tail is ≈ 1/(ζ(2)·(K+1)).
    assert!((1.0 - partial - 1.0 / (z * 1_000_001.0)).abs() < 1e-8);
}

fn schedule_strategy() -> impl Strategy<Value = StepSchedule> {
    prop_oneof![
        (0.0f64..0.05).prop_map(|c| StepSchedule::Constant { c }),
        (0.0f64..2.0, 0.1f64..1.0).prop_map(|(c, gamma)| StepSchedule::Polynomial { c, gamma }),
    ]
}

fn params_strategy() -> impl Strategy<Value = BoundaryParams> {
    (0.01f64..0.5, 1usize..10, 0.1f64..5.0, 1.05f64..4.0, 1.2f64..4.0, 0.0f64..3.0)
        .prop_map(|(delta, d, l, eta, alpha, mu)| params(delta, d, l, eta, alpha, mu))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dominating_smooth_bounds_anytime(sched in schedule_strategy(), p in params_strategy()) {
        let table = BoundaryTable::new(3000, &sched, &p).unwrap();
        for n in 1..=3000 {
            let a = table.anytime(n).value;
            let s = table.smooth(n, SmoothVariant::Dominating).value;
            prop_assert!(s >= a, "n {}: {} < {}", n, s, a);
        }
    }

    #[test]
    fn anytime_pays_for_uniformity(sched in schedule_strategy(), p in params_strategy()) {
        let table = BoundaryTable::new(2000, &sched, &p).unwrap();
        for n in 1..=2000 {
            prop_assert!(table.anytime(n).value >= table.fixed(n));
        }
    }

    #[test]
    fn condition_is_monotone(sched in schedule_strategy(), p in params_strategy()) {
        let table = BoundaryTable::new(1500, &sched, &p).unwrap();
        let mut failed = false;
        for n in 1..=1500 {
            let ok = table.condition(n);
            prop_assert!(!(failed && ok), "condition recovered at n = {}", n);
            failed |= !ok;
        }
    }

    #[test]
    fn free_functions_match_table(sched in schedule_strategy(), p in params_strategy(), n in 1usize..400) {
        let table = BoundaryTable::new(400, &sched, &p).unwrap();
        prop_assert_eq!(anytime_boundary(n, &sched, &p).unwrap(), table.anytime(n));
        for v in [SmoothVariant::Paper, SmoothVariant::Dominating] {
            prop_assert_eq!(smooth_boundary(n, &sched, &p, v).unwrap(), table.smooth(n, v));
        }
    }

    #[test]
    fn huang_tail_is_decreasing(v in 1e-6f64..10.0, d in 1usize..20, u1 in 0.0f64..std::f64::consts::E, u2 in 0.0f64..std::f64::consts::E) {
        let s = CumulativeStats { n: 1, growth: 1.0, variance: v, expected_norm: 1.0 };
        let (lo, hi) = if u1 <= u2 { (u1, u2) } else { (u2, u1) };
        prop_assert!(huang_tail(lo, &s, d).unwrap() >= huang_tail(hi, &s, d).unwrap());
    }
}

#[test]
fn zero_schedule_gives_zero_boundaries() {
    let p = params(0.1, 2, 1.0, 2.0, 2.0, 1.0);
    let sched = StepSchedule::Constant { c: 0.0 };
    let table = BoundaryTable::new(100, &sched, &p).unwrap();
    for n in 1..=100 {
        assert_eq!(table.anytime(n).value, 0.0);
        assert_eq!(table.smooth(n, SmoothVariant::Paper).value, 0.0);
        assert_eq!(table.smooth(n, SmoothVariant::Dominating).value, 0.0);
        assert!(table.condition(n));
    }
}
