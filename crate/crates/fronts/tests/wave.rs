use fronts::reaction::Nonlinearity;
use fronts::wave::*;
use proptest::prelude::*;

fn f(a: f64) -> Nonlinearity {
    Nonlinearity::cubic(a).unwrap()
}

#[test]
fn pushed_cubic_has_the_closed_form_wave() {
    // For a > 2: U = 1/(1 + e^{kz}), k = √(a/2), at speed √(2/a) + √(a/2).
    let a: f64 = 4.0;
    let c = (2.0 / a).sqrt() + (a / 2.0).sqrt();
    let k = (a / 2.0).sqrt();
    let p = solve_profile(&f(a), c, &WaveOptions::default()).unwrap();
    let mut err: f64 = 0.0;
    for i in 0..=200 {
        let z = -10.0 + 0.1 * i as f64;
        err = err.max((p.u(z) - 1.0 / (1.0 + (k * z).exp())).abs());
    }
    assert!(err < 1e-6, "{err}");
}

#[test]
fn logistic_tail_is_fast_and_a_zero_tail_is_slow() {
    let d2 = classify(&f(2.0)).unwrap();
    assert_eq!(d2.regime, Regime::PulledFast);
    assert!(d2.b.unwrap().abs() < TOL_B && !d2.b_unstable);
    let d0 = classify(&f(0.0)).unwrap();
    assert_eq!(d0.regime, Regime::PulledSlow);
    assert!(d0.b.unwrap() > 0.0);
    assert_eq!(classify(&f(4.0)).unwrap().regime, Regime::Pushed);
}

#[test]
fn left_decay_matches_linearization_at_one() {
    let fa = f(1.0);
    let p = solve_profile(&fa, 2.0, &WaveOptions::default()).unwrap();
    let d = left_decay_exponent(&p, &fa).unwrap();
    assert!((d.nu - d.expected).abs() < 1e-3 * d.expected, "{d:?}");
}

#[test]
fn level_positions_invert_the_profile() {
    let p = solve_profile(&f(1.0), 2.0, &WaveOptions::default()).unwrap();
    for level in [0.9, 0.5, 0.1, 1e-4] {
        let z = p.position_of(level).unwrap();
        assert!((p.u(z) - level).abs() < 1e-9 * level.max(1e-3));
    }
    let q = p.shifted(3.0);
    assert!((q.u(0.0) - p.u(3.0)).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn pulled_profiles_are_monotone_fronts(a in 0.0f64..2.0) {
        let p = solve_profile(&f(a), 2.0, &WaveOptions::default()).unwrap();
        let s = p.sample_uniform(-20.0, 30.0, 501);
        for w in s.windows(2) {
            prop_assert!(w[1].u < w[0].u);
        }
        prop_assert!(s.iter().all(|v| v.u > 0.0 && v.u < 1.0 && v.du < 0.0));
        // Residual of U'' + 2U' + f(U) on interior points.
        let fa = f(a);
        for z in [-3.0, 0.0, 4.0] {
            let r = p.d2u(z) + 2.0 * p.du(z) + fa.eval(p.u(z));
            prop_assert!(r.abs() < 1e-8);
        }
    }

    #[test]
    fn feasibility_is_monotone_in_the_speed(a in 2.5f64..8.0) {
        let c_star = (2.0 / a).sqrt() + (a / 2.0).sqrt();
        let opts = WaveOptions::default();
        prop_assert!(!is_feasible(&f(a), c_star - 0.05, &opts));
        prop_assert!(is_feasible(&f(a), c_star + 0.05, &opts));
    }
}
