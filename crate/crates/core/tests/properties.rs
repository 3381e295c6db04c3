use hcp_core::acceptance::random_lattice_measure;
use hcp_core::hcp::EpochSchedule;
use hcp_core::measure::{
    c0_estimate, deconvolve_m, epoch_pushforward, iterate_hcp_measures, log_grid, reassemble_from_m, u1_from_m,
    un_transport, AtomicMeasure, C0Options, IterateOptions,
};
use hcp_core::ocp::{run_epoch, RateFamily};
use hcp_core::rng::stream;
use hcp_core::spp::{Boundary, IntervalConfiguration};
use hcp_core::stats::{exchangeable_identity_check, ks_test, IdentityVariant, SampleSet};
use proptest::prelude::*;

fn transform(m: &AtomicMeasure, s: f64) -> f64 {
    m.atoms().iter().map(|&(x, w)| w * (-s * x).exp()).sum()
}

fn lattice_case() -> impl Strategy<Value = (u64, usize, usize, usize)> {
    (any::<u64>(), 1usize..=4).prop_flat_map(|(seed, d_min)| (Just(seed), Just(d_min), 1..=d_min, 1..=3 * d_min))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn pushforward_conserves_mass_and_shifts_support((seed, d_min, extra, width) in lattice_case()) {
        let mut rng = stream(seed, 0);
        let d_max = (d_min + extra) as f64;
        let mu = random_lattice_measure(&mut rng, d_min, width, 50.0 * d_min as f64);
        let out = epoch_pushforward(&mu, d_min as f64, d_max).unwrap();
        prop_assert!((out.total() - 1.0).abs() < 1e-12);
        prop_assert!(out.atoms().iter().all(|a| a.0 >= d_max));
        prop_assert!(out.atoms().iter().all(|a| a.1 >= 0.0));
    }

    #[test]
    fn transform_identity_at_random_points((seed, d_min, extra, width) in lattice_case(), s in prop::collection::vec(0.2f64..5.0, 20)) {
        let mut rng = stream(seed, 1);
        let d_max = (d_min + extra) as f64;
        let mu = random_lattice_measure(&mut rng, d_min, width, 80.0 * d_min as f64);
        let out = epoch_pushforward(&mu, d_min as f64, d_max).unwrap();
        let h = mu.restrict(d_min as f64, d_max);
        for s in s {
            let s = s / d_min as f64;
            let lhs = 1.0 - transform(&out, s);
            let rhs = (1.0 - transform(&mu, s)) * transform(&h, s).exp();
            prop_assert!(((lhs - rhs) / rhs).abs() < 1e-10, "s={} {} {}", s, lhs, rhs);
        }
    }

    #[test]
    fn deconvolution_round_trip((seed, d_min, extra, width) in lattice_case()) {
        let mut rng = stream(seed, 2);
        let d_max = (d_min + extra) as f64;
        let mu = random_lattice_measure(&mut rng, d_min, width, 40.0 * d_min as f64);
        let p = epoch_pushforward(&mu, d_min as f64, d_max).unwrap().scale_positions(1.0 / d_max);
        let j_max = 10.0;
        let m = deconvolve_m(&p, j_max).unwrap();
        let back = reassemble_from_m(&m, j_max);
        for &(x, w) in p.atoms().iter().filter(|a| a.0 < j_max - 1e-9) {
            prop_assert!((back.mass_at(x) - w).abs() < 1e-10);
        }
    }

    #[test]
    fn c0_estimate_in_unit_interval((seed, d_min, _extra, width) in lattice_case()) {
        let mut rng = stream(seed, 3);
        let mu = random_lattice_measure(&mut rng, d_min, width, 100.0);
        let e = c0_estimate(&mu, &log_grid(1.0, 1e-4, 10), C0Options::default()).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&e.estimate));
    }

    #[test]
    fn exchangeable_identities(g in prop::collection::vec(0.01f64..10.0, 2..=7)) {
        let chain = exchangeable_identity_check(&g, IdentityVariant::Chain).unwrap();
        prop_assert!(chain.deviation < 1e-10);
        let full = exchangeable_identity_check(&g, IdentityVariant::Full).unwrap();
        prop_assert!(full.deviation < 1e-10, "{:?}", full);
    }

    #[test]
    fn ks_outputs_are_probabilities(v in prop::collection::vec(-3.0f64..3.0, 1..200)) {
        let r = ks_test(&SampleSet::new(v), |x| 1.0 / (1.0 + (-x).exp())).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.statistic));
        prop_assert!((0.0..=1.0).contains(&r.p_value));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn one_epoch_invariants(seed in any::<u64>(), n in 2usize..300, left in 0.0f64..2.0, right in prop_oneof![Just(0.0), 0.0f64..2.0]) {
        prop_assume!(left + right > 0.1);
        let mut rng = stream(seed, 7);
        let lengths: Vec<f64> = (0..n).map(|_| 1.0 + 2.0 * rand::Rng::random::<f64>(&mut rng)).collect();
        let rates = RateFamily::constant(1.0, 2.0, left, right);
        for boundary in [Boundary::Periodic, Boundary::LeftBounded, Boundary::Window] {
            let cfg = IntervalConfiguration::new(0.0, lengths.clone(), boundary).unwrap();
            let out = run_epoch(&cfg, &rates, &mut rng).unwrap();
            prop_assert!(out.final_config.lengths.iter().all(|&d| d >= 2.0));
            let alive: Vec<f64> = cfg.points().iter().zip(&out.point_alive).filter(|(_, &a)| a).map(|(p, _)| *p).collect();
            let fin = out.final_config.points();
            if boundary == Boundary::Periodic {
                prop_assert!((out.final_config.total_length() - cfg.total_length()).abs() < 1e-9 * cfg.total_length());
            } else {
                // surviving points are exactly the final points
                prop_assert_eq!(alive.len(), fin.len());
                prop_assert!(alive.iter().zip(&fin).all(|(a, b)| (a - b).abs() < 1e-9));
            }
            if right == 0.0 && boundary != Boundary::Periodic {
                prop_assert!(out.point_alive[0]);
            }
        }
    }
}

#[test]
fn transport_commutes_with_iteration() {
    // U^(n) from the iterated measure agrees with the transported U^(1).
    let mut rng = stream(5, 0);
    for case in 0..20 {
        let width = 1 + case % 3;
        let mu = random_lattice_measure(&mut rng, 1, width, 512.0);
        let schedule = EpochSchedule::east();
        let res = iterate_hcp_measures(&mu, &schedule, 4, IterateOptions::default()).unwrap();
        let j_max = 400.0;
        let u1 = u1_from_m(&deconvolve_m(&mu, j_max).unwrap());
        for n in 2..=4 {
            let d = schedule.threshold(n).unwrap();
            let p = res.measures[n - 1].scale_positions(1.0 / d);
            let un = u1_from_m(&deconvolve_m(&p, 20.0).unwrap());
            for x in [0.0, 0.5, 1.0, 2.25, 5.0, 10.0] {
                let direct = un.eval(x).unwrap();
                let moved = un_transport(&u1, d, x).unwrap();
                assert!((direct - moved).abs() < 1e-8, "case {case} n={n} x={x}: {direct} vs {moved}");
            }
        }
    }
}
