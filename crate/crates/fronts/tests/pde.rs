use fronts::pde::*;
use fronts::reaction::Nonlinearity;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small(t_end: f64) -> SolverConfig {
    SolverConfig { domain_half_width: 60.0, recenter: false, t_end, ..SolverConfig::drift(t_end) }
}

#[test]
fn constant_states_are_preserved() {
    let f = Nonlinearity::cubic(1.0).unwrap();
    let cfg = small(2.0);
    let ones = FieldState::from_fn(&cfg, |_| 1.0);
    let out = simulate(&f, ones, &cfg, &[]).unwrap();
    assert!(out.state.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
}

#[test]
fn speed_of_logistic_front_approaches_two() {
    let f = Nonlinearity::cubic(2.0).unwrap();
    let cfg = SolverConfig { output_every: 1.0, ..SolverConfig::drift(200.0) };
    let out = simulate(&f, make_initial_data(InitialKind::Step, &cfg), &cfg, &[0.5]).unwrap();
    let e = &out.traces[0].entries;
    let (t1, x1) = e[e.len() - 51];
    let (t2, x2) = *e.last().unwrap();
    let speed = (x2 - x1) / (t2 - t1);
    assert!(speed < 2.0 && speed > 1.99, "{speed}");
    assert!(out.n_shifts > 0 && out.max_clamp < 1e-10);
}

#[test]
fn bad_levels_are_rejected() {
    let f = Nonlinearity::cubic(1.0).unwrap();
    let cfg = small(1.0);
    let u0 = make_initial_data(InitialKind::Step, &cfg);
    assert!(matches!(simulate(&f, u0, &cfg, &[1.2]), Err(PdeError::Config(_))));
}

#[test]
fn ordered_data_stay_ordered() {
    let f = Nonlinearity::cubic(1.0).unwrap();
    let cfg = SolverConfig { output_every: 5.0, ..small(20.0) };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..4 {
        let (x0, bump): (f64, f64) = (rng.gen_range(-10.0..10.0), rng.gen_range(0.0..0.5));
        let lower = FieldState::from_fn(&cfg, |x| if x < x0 { 0.6 } else { 0.0 });
        let upper =
            FieldState::from_fn(
                &cfg,
                |x| if x < x0 + 3.0 { (0.6 + bump).min(1.0) } else { 0.05 * (-x * x / 50.0).exp() },
            );
        let a = simulate(&f, lower, &cfg, &[]).unwrap().state;
        let b = simulate(&f, upper, &cfg, &[]).unwrap().state;
        let worst = a.values.iter().zip(&b.values).map(|(l, u)| l - u).fold(f64::MIN, f64::max);
        assert!(worst <= 1e-8, "{worst}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tracking_inverts_a_linear_ramp(x0 in -20.0f64..20.0, level in 0.05f64..0.95) {
        let cfg = small(1.0);
        let st = FieldState::from_fn(&cfg, |x| (0.5 - (x - x0) / 10.0).clamp(0.0, 1.0));
        let x = track_level_set(&st, level).unwrap();
        prop_assert!((x - (x0 + 10.0 * (0.5 - level))).abs() < 1e-9);
    }

    #[test]
    fn drift_fit_recovers_synthetic_logs(r in 0.2f64..2.0, x in -5.0f64..5.0) {
        let entries: Vec<(f64, f64)> = (100..=2000).map(|k| {
            let t = k as f64;
            (t, 2.0 * t - r * t.ln() - x)
        }).collect();
        let fit = fit_drift(&FrontTrace { level: 0.5, entries }, 2.0, [200.0, 2000.0]).unwrap();
        prop_assert!((fit.r - r).abs() < 1e-9 && (fit.x - x).abs() < 1e-8);
        prop_assert!((fit.r_halfwindow - r).abs() < 1e-9);
    }
}
