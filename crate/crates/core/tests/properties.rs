use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use apsumma::config::{ExperimentConfig, FunctionSource, FunctionSpec, GeneratorKind, GeneratorSpec, NRange};
use apsumma::kernels::{geometric_sine_sum_closed, geometric_sine_sum_direct, psi, psi_k, KernelParams};
use apsumma::moduli::{best_approx_bracket, default_delta_grid, fit_modulus};
use apsumma::strong_means::{block_strong_mean_of, deviations_at, stop_index, strong_mean_of, threshold_partial_sum};
use apsumma::summability::{check_row_stochastic, hierarchy_check, ms_check, MatrixRow};
use apsumma::{ApFunction, Term};

fn ap_function() -> impl Strategy<Value = ApFunction> {
    (
        0.3f64..2.0,
        prop::collection::vec((0.0f64..2.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 1..5),
        -1.0f64..1.0,
    )
        .prop_map(|(alpha, raw, a0)| {
            let mut lambda = 0.0;
            let mut terms = vec![Term::zero_frequency(Complex64::new(a0, 0.0))];
            for (gap, pr, pi, mr, mi) in raw {
                lambda += alpha * (1.0 + gap);
                let (plus, minus) = (Complex64::new(pr, pi), Complex64::new(mr, mi));
                // keep every listed exponent active
                let plus = if plus.norm() + minus.norm() == 0.0 { Complex64::new(0.5, 0.0) } else { plus };
                terms.push(Term::new(lambda, plus, minus));
            }
            ApFunction::new(alpha, terms).unwrap()
        })
}

fn stochastic_row() -> impl Strategy<Value = MatrixRow> {
    prop::collection::vec(0.0f64..1.0, 1..40).prop_filter_map("nonzero mass", |w| {
        let total: f64 = w.iter().sum();
        (total > 1e-3).then(|| MatrixRow::explicit(w.len() - 1, w.iter().map(|v| v / total).collect()).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn threshold_sum_reproduces_f_past_top_exponent(f in ap_function(), x in -50.0f64..50.0) {
        let s = threshold_partial_sum(&f, x, f.lambda_max());
        prop_assert!((s - f.evaluate(x)).norm() <= 1e-12 * (1.0 + f.amplitude_sum()));
    }

    #[test]
    fn deviations_vanish_from_stop_index(f in ap_function(), x in -20.0f64..20.0) {
        let dev = deviations_at(&f, x);
        prop_assert_eq!(dev.k_stop(), stop_index(f.lambda_max(), f.alpha()));
        prop_assert_eq!(dev.get(dev.k_stop()), 0.0);
        prop_assert_eq!(dev.get(dev.k_stop() + 17), 0.0);
        for n in dev.k_stop().div_ceil(2) + 1..dev.k_stop() + 5 {
            if f.alpha() * n as f64 / 2.0 >= f.lambda_max() {
                prop_assert_eq!(block_strong_mean_of(&dev, n, 1.5).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn strong_means_are_power_means(f in ap_function(), x in -20.0f64..20.0, row in stochastic_row()) {
        let dev = deviations_at(&f, x);
        prop_assert!(check_row_stochastic(&row));
        let qs = [0.25, 0.5, 1.0, 2.0, 3.0];
        let means: Vec<f64> = qs.iter().map(|&q| strong_mean_of(&dev, &row, q).unwrap()).collect();
        let top = (0..=row.n()).map(|k| dev.get(k)).fold(0.0, f64::max);
        for w in means.windows(2) {
            prop_assert!(w[0] <= w[1] + 1e-12);
        }
        prop_assert!(means[4] <= top + 1e-12);
    }

    #[test]
    fn monotone_rows_satisfy_the_chain(mut w in prop::collection::vec(0.01f64..1.0, 1..30), c in 1.1f64..4.0) {
        w.sort_by(|a, b| b.total_cmp(a));
        let total: f64 = w.iter().sum();
        let row = MatrixRow::explicit(w.len() - 1, w.iter().map(|v| v / total).collect()).unwrap();
        prop_assert!(ms_check(&row).member);
        let reports = hierarchy_check(&row, c, row.default_m_max()).unwrap();
        prop_assert!(reports.iter().all(|r| r.member));
        prop_assert!(reports[1].k.unwrap() <= 1.0 + 1e-12);
    }

    #[test]
    fn fitted_modulus_is_nondecreasing_and_subadditive(f in ap_function(), x in -5.0f64..5.0) {
        let w = fit_modulus(&f, x, &default_delta_grid(11)).unwrap();
        for p in w.values().windows(2) {
            prop_assert!(p[0] <= p[1] * (1.0 + 1e-12) + 1e-15);
        }
        prop_assert!(w.subadditivity_violations().is_empty());
        prop_assert_eq!(w.value(0.0), 0.0);
    }

    #[test]
    fn bracket_is_ordered_and_decreasing(f in ap_function(), s1 in 0.0f64..10.0, ds in 0.0f64..5.0) {
        let a = best_approx_bracket(&f, s1).unwrap();
        let b = best_approx_bracket(&f, s1 + ds).unwrap();
        prop_assert!(a.lower <= a.upper);
        prop_assert!(b.lower <= a.lower + 1e-15);
        prop_assert!(b.upper <= a.upper + 1e-15);
        let past = best_approx_bracket(&f, f.lambda_max()).unwrap();
        prop_assert_eq!(past.upper, 0.0);
    }

    #[test]
    fn psi_k_is_psi_at_half_steps(alpha in 0.1f64..3.0, k in 0usize..80, t in -200.0f64..200.0) {
        let p = KernelParams::for_index(alpha, k).unwrap();
        let peak = (p.eta() + p.lambda()) / (2.0 * PI);
        prop_assert!((psi(p, t) - psi_k(alpha, k, t)).abs() <= 1e-12 * peak);
        prop_assert_eq!(psi(p, t), psi(p, -t));
        prop_assert!(psi(p, t).abs() <= peak * (1.0 + 1e-12));
    }

    #[test]
    fn geometric_sine_identity(r in 0.0f64..0.9, y in 0.05f64..3.09, z in 0.05f64..3.09) {
        let closed = geometric_sine_sum_closed(r, y, z).unwrap();
        let direct = geometric_sine_sum_direct(r, y, z, 700).unwrap();
        prop_assert!((closed - direct).abs() <= 1e-10 + r.powi(700) / (1.0 - r));
    }

    #[test]
    fn phi_is_even_and_vanishes_at_zero(f in ap_function(), x in -10.0f64..10.0, t in -10.0f64..10.0) {
        prop_assert!((f.phi(x, t) - f.phi(x, -t)).norm() <= 1e-12 * (1.0 + f.amplitude_sum()));
        prop_assert_eq!(f.phi(x, 0.0), Complex64::new(0.0, 0.0));
        let direct = f.evaluate(x + t) + f.evaluate(x - t) - 2.0 * f.evaluate(x);
        prop_assert!((f.phi(x, t) - direct).norm() <= 1e-11 * (1.0 + f.amplitude_sum()));
    }

    #[test]
    fn bohr_error_is_bounded_by_separation(f in ap_function(), l in 10.0f64..1e4) {
        for (mu, _) in f.signed_spectrum() {
            let err = (f.bohr_coefficient(mu, l).unwrap() - f.exact_coefficient(mu)).norm();
            let bound: f64 = f
                .signed_spectrum()
                .filter(|&(nu, _)| nu != mu)
                .map(|(nu, a)| 2.0 * a.norm() / ((nu - mu).abs() * l))
                .sum();
            prop_assert!(err <= bound * (1.0 + 1e-9) + 1e-15);
        }
    }

    #[test]
    fn function_json_round_trip(f in ap_function()) {
        let back = ApFunction::from_json(&f.to_json()).unwrap();
        prop_assert_eq!(back, f);
    }

    #[test]
    fn config_round_trip(seed in any::<u64>(), c in 1.01f64..8.0, end in 1usize..512, q in prop::collection::vec(0.1f64..4.0, 1..4)) {
        let mut cfg = ExperimentConfig::with_functions(vec![FunctionSpec {
            id: "g".into(),
            source: FunctionSource::Generator(GeneratorSpec { kind: GeneratorKind::Random, seed, alpha: 0.5, terms: 3 }),
        }]);
        cfg.seed = seed;
        cfg.c = c;
        cfg.n_range = NRange { start: 0, end };
        cfg.q_list = q;
        let text = cfg.to_json();
        let back = ExperimentConfig::from_json(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_json(), text);
    }
}
