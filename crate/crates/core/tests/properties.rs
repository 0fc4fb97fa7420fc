use proptest::prelude::*;
use steinhaus_core::concentration::{dudley_integral, hoeffding_mgf_bound, hoeffding_tail_bound};
use steinhaus_core::counting::{count_rough, count_smooth, rankin_certificate};
use steinhaus_core::euler::evaluate_field;
use steinhaus_core::multiplicative::{check_splitting_identity, partial_sums_at, MultiplicativeTable};
use steinhaus_core::output::{from_csv, from_json, to_csv, to_json, MomentEstimate};
use steinhaus_core::sieve::{primes_up_to, LinearSieve};
use steinhaus_core::{PhaseAssignment, Seed};

fn seed() -> impl Strategy<Value = Seed> {
    (any::<u64>(), any::<u64>()).prop_map(|(m, r)| Seed::new(m, r))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn phases_are_pure_functions_of_seed(s in seed(), picks in prop::collection::vec(0usize..2000, 1..20)) {
        let primes = primes_up_to(20_000);
        let all = PhaseAssignment::new(s).thetas(&primes);
        // any query order gives the same angles
        for &i in picks.iter().rev() {
            let p = primes[i] as u64;
            let t = PhaseAssignment::new(s).phase(p).unwrap();
            prop_assert_eq!(t, all[i]);
            prop_assert!((0.0..std::f64::consts::TAU).contains(&t));
        }
    }

    #[test]
    fn table_is_completely_multiplicative(s in seed(), m in 1u32..300, n in 1u32..300) {
        let t = MultiplicativeTable::build(&PhaseAssignment::new(s), 90_000).unwrap();
        prop_assert!((t.alpha(m * n) - t.alpha(m) * t.alpha(n)).norm() < 1e-12);
        prop_assert!((t.alpha(n).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn streamed_sums_match_table(s in seed(), mut pts in prop::collection::vec(1u32..5000, 1..8)) {
        pts.sort_unstable();
        pts.dedup();
        let a = PhaseAssignment::new(s);
        let t = MultiplicativeTable::build(&a, 5000).unwrap();
        let streamed = partial_sums_at(&a, &LinearSieve::new(5000), &pts).unwrap();
        for (&x, v) in pts.iter().zip(streamed) {
            prop_assert!((t.prefix(x) - v).norm() < 1e-9);
        }
    }

    #[test]
    fn splitting_identity_is_exact(s in seed(), x in 1u32..3000, y in 2u64..200) {
        let t = MultiplicativeTable::build(&PhaseAssignment::new(s), 3000).unwrap();
        let r = check_splitting_identity(&t, x, y).unwrap();
        prop_assert!(r.residual <= 1e-10, "{:?}", r);
    }

    #[test]
    fn rankin_slack_nonnegative(x in 1u64..200_000, y in 2u64..500, alpha in 0.05f64..1.5) {
        prop_assert!(rankin_certificate(x, y, alpha).unwrap().holds());
    }

    #[test]
    fn counts_monotone_and_bounded(x in 1u64..50_000, dx in 0u64..5000, y in 2u64..300, dy in 0u64..300) {
        let (a, b) = (count_smooth(x, y).unwrap(), count_smooth(x + dx, y + dy).unwrap());
        prop_assert!(a.psi <= b.psi);
        prop_assert!(a.psi <= x && a.phi <= x);
        prop_assert!(count_rough(x, y + dy).unwrap().phi <= a.phi);
    }

    #[test]
    fn records_round_trip(q in 0.0f64..1.0, est in -1e300f64..1e300, x in any::<u64>(), n in any::<u64>(), s in seed(), name in "[A-Za-z_^,\"]{1,12}") {
        let r = vec![MomentEstimate { quantity: name, x_or_y: x, q, estimate: est, ci_lo: est / 3.0, ci_hi: est * 3.0, replicas: n, seed: s }];
        prop_assert_eq!(&from_csv(&to_csv(&r).unwrap()).unwrap(), &r);
        prop_assert_eq!(&from_json(&to_json(&r).unwrap()).unwrap(), &r);
        prop_assert_eq!(format!("{}:{}", s.master, s.replica).parse::<Seed>().unwrap(), s);
    }

    #[test]
    fn hoeffding_bounds_shape(c in prop::collection::vec(0.0f64..3.0, 1..20), lambda in -3.0f64..3.0, u in 0.0f64..20.0) {
        let mgf = hoeffding_mgf_bound(&c, lambda).unwrap();
        prop_assert!(mgf >= 1.0);
        // symmetric Bernoulli steps ±c_i attain E exp(λΣ) = Π cosh(λ c_i)
        let exact: f64 = c.iter().map(|ci| (lambda * ci).cosh()).product();
        prop_assert!(exact <= mgf * (1.0 + 1e-12));
        let t = hoeffding_tail_bound(&c, u).unwrap();
        prop_assert!((0.0..=2.0).contains(&t));
        prop_assert!(hoeffding_tail_bound(&c, u + 1.0).unwrap() <= t);
    }

    #[test]
    fn dudley_is_linear_in_length(l in 1e-3f64..1e3, k in 1.0f64..10.0) {
        let (a, b) = (dudley_integral(l).unwrap().dudley, dudley_integral(k * l).unwrap().dudley);
        prop_assert!((b / a - k).abs() < 1e-9 * k);
    }

    #[test]
    fn field_reconstructs_product(s in seed(), y in 2u64..3000, sigma in 0.5f64..2.0, t0 in -50.0f64..50.0) {
        let grid: Vec<f64> = (0..8).map(|k| t0 + k as f64 * 0.37).collect();
        let f = evaluate_field(&PhaseAssignment::new(s), y, sigma, &grid).unwrap();
        prop_assert!(f.reconstruction_error() <= 1e-9);
        prop_assert!(f.a.iter().all(|z| z.norm() > 0.0 && z.is_finite()));
    }
}
