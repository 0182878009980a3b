use std::collections::BTreeMap;
use std::sync::OnceLock;

use fronts::constructions::fast_sub::{c_floor, FastSub};
use fronts::constructions::fast_super::FastSuper;
use fronts::constructions::slow_super::{beta_window, SlowSuper, SlowSuperParams};
use fronts::constructions::*;
use fronts::perturbed::{first_zero_growth_check, SlowedFamily};
use fronts::reaction::Nonlinearity;
use fronts::wave::{solve_profile, WaveOptions, WaveProfile};
use proptest::prelude::*;

fn f2() -> Nonlinearity {
    Nonlinearity::cubic(2.0).unwrap()
}

fn fast_sub() -> &'static ConstructedFunction {
    static C: OnceLock<ConstructedFunction> = OnceLock::new();
    C.get_or_init(|| build_fast_subsolution(&f2(), 0.9).unwrap())
}

fn fast_super() -> &'static ConstructedFunction {
    static C: OnceLock<ConstructedFunction> = OnceLock::new();
    C.get_or_init(|| build_fast_supersolution(&f2(), 0.26).unwrap())
}

fn linear_case() -> &'static LinearCase {
    static C: OnceLock<LinearCase> = OnceLock::new();
    C.get_or_init(|| LinearCase::new(0.1).unwrap())
}

#[test]
fn fast_sub_stays_below_one_with_a_gaussian_tail() {
    let c = fast_sub();
    let sub = FastSub::new(&f2(), 0.9, c_floor(&f2())).unwrap();
    let t = 4096.0;
    let grid = CertGrid { t0: t, t1: t, nt: 1, x_margin: 20.0, nx: 400 };
    for s in grid.positions(c.construction(), t) {
        let u = c.value(t, s + 2.0 * t).unwrap();
        assert!((0.0..1.0).contains(&u), "u({s}) = {u}");
    }
    // Far right: ln u + z + z²/4t tends to ln(K t^{−ε}).
    let k = 1.0 + sub.c / t.sqrt();
    for &y in &[4.0, 6.0] {
        let z = y * t.sqrt();
        let u = c.value(t, 2.0 * t + z - 0.5 * t.ln()).unwrap();
        let rest = u.ln() + z + z * z / (4.0 * t);
        let expect = (k * (t.powf(-sub.eps) + z / t)).ln();
        assert!((rest - expect).abs() < 1e-9, "y = {y}: {rest} vs {expect}");
    }
}

#[test]
fn fast_sub_level_set_lags_by_r_ln_t() {
    // The ½-level of the left piece sits at 2t − r ln t + h(t) + X₁.
    let c = fast_sub();
    let sub = FastSub::new(&f2(), 0.9, c_floor(&f2())).unwrap();
    let x1 = sub.wave.position_of(0.5).unwrap();
    for &t in &[1e3, 1e4, 1e5] {
        let s = x1 - sub.r * f64::ln(t) + sub.h(t);
        let u = c.value(t, 2.0 * t + s).unwrap();
        assert!((u - 0.5).abs() < 1e-6, "t = {t}: {u}");
    }
}

#[test]
fn supersolution_is_at_least_one_far_left_and_positive() {
    let c = fast_super();
    for &t in &[2f64.powi(14), 2f64.powi(16)] {
        let s0 = c.construction().s_left(t, 20.0);
        assert!(c.value(t, 2.0 * t + s0).unwrap() >= 1.0);
        let grid = CertGrid { t0: t, t1: t, nt: 1, x_margin: 20.0, nx: 300 };
        c.prepare(&[t]).unwrap();
        for s in grid.positions(c.construction(), t) {
            let u = c.value(t, 2.0 * t + s).unwrap();
            // e^{−z} underflows once z passes about 745.
            assert!(u > 0.0 || s + 0.5 * t.ln() > 700.0, "ū({s}) = {u}");
        }
    }
}

#[test]
fn drift_corrections_vanish_like_inverse_root() {
    let sub = FastSub::new(&f2(), 0.9, c_floor(&f2())).unwrap();
    let sup = FastSuper::new(&f2(), 0.26, 1.0, None).unwrap();
    let mut last = f64::INFINITY;
    for k in 8..=20 {
        let t = 2f64.powi(k);
        let h = sub.h(t);
        assert!(h.abs() < last, "h not decreasing at t = {t}");
        last = h.abs();
        assert!(sub.h_dot(t).abs() * t.powf(1.5) < 2.0 * sub.c);
        assert!(sup.h(t).is_finite());
    }
    assert!(sub.h(2f64.powi(36)).abs() < 1e-2);
    assert!(sup.h(2f64.powi(40)).abs() < 1e-2);
}

#[test]
fn z_delta_approaches_its_limit_geometrically() {
    let wave =
        fronts::constructions::normalize_fast(&solve_profile(&f2(), 2.0, &WaveOptions::deep_tail()).unwrap()).unwrap();
    let fam = SlowedFamily::new(wave, 0.3).unwrap();
    for &t in &[50.0, 200.0, 1e3, 1e4] {
        let d1 = fam.z_delta_inf - fam.z_delta(t);
        let d2 = fam.z_delta_inf - fam.z_delta(2.0 * t);
        assert!(d1 > 0.0 && d2 > 0.0);
        assert!(d2 < 0.6 * d1, "t = {t}: {d2} vs {d1}");
    }
}

#[test]
fn first_zero_moves_right_with_t() {
    let wave: WaveProfile = solve_profile(&f2(), 2.0, &WaveOptions::deep_tail()).unwrap();
    let fam = SlowedFamily::new(fronts::constructions::normalize_fast(&wave).unwrap(), 0.4).unwrap();
    let rep = first_zero_growth_check(&fam, &[1e2, 1e3, 1e4]).unwrap();
    assert!(rep.increasing && rep.pass, "{rep:?}");
}

#[test]
fn slow_super_rejects_beta_outside_its_window() {
    let f1 = Nonlinearity::cubic(1.0).unwrap();
    let (lo, hi) = beta_window(0.2);
    for beta in [lo, hi, 1.0, 0.5] {
        let p = SlowSuperParams { eps: 0.2, beta, c: 0.05, gamma: None };
        assert!(matches!(SlowSuper::new(&f1, p), Err(ConstructionError::Parameter(_))));
    }
    let p = SlowSuperParams { eps: 0.3, beta: 0.95, c: 0.05, gamma: None };
    assert!(SlowSuper::new(&f1, p).is_err());
}

#[test]
fn constructions_refuse_the_wrong_regime() {
    let f1 = Nonlinearity::cubic(1.0).unwrap();
    assert!(matches!(build_fast_subsolution(&f1, 0.9), Err(ConstructionError::Regime(_))));
    let p = SlowSuperParams::default();
    assert!(matches!(SlowSuper::new(&f2(), p), Err(ConstructionError::Regime(_))));
    assert!(matches!(build_fast_subsolution(&f2(), 0.4), Err(ConstructionError::Parameter(_))));
}

/// A supersolution candidate whose residual is negative everywhere.
struct Broken(WaveProfile);

impl Construction for Broken {
    fn kind(&self) -> ConstructionKind {
        ConstructionKind::FastSuper
    }
    fn orientation(&self) -> Orientation {
        Orientation::Super
    }
    fn params(&self) -> BTreeMap<String, f64> {
        BTreeMap::new()
    }
    fn wave(&self) -> &WaveProfile {
        &self.0
    }
    fn band(&self, t: f64) -> [f64; 2] {
        [t.ln() - 1.0, t.ln() + 1.0]
    }
    fn s_left(&self, _t: f64, margin: f64) -> f64 {
        -10.0 - margin
    }
    fn right_frame(&self) -> f64 {
        0.5
    }
    fn left(&self, _t: f64, s: f64) -> Result<PieceEval, ConstructionError> {
        Ok(PieceEval { value: (-s).exp().min(1.0), rel_residual: -0.1, rel_margin: 1e-12 })
    }
    fn right(&self, _t: f64, s: f64) -> Result<PieceEval, ConstructionError> {
        Ok(PieceEval { value: 2.0 * (-s).exp(), rel_residual: -0.1, rel_margin: 1e-12 })
    }
}

#[test]
fn failing_candidate_exceeds_the_cap() {
    let c = ConstructedFunction::new(Broken(solve_profile(&f2(), 2.0, &WaveOptions::default()).unwrap()));
    let search = find_valid_t(&c, 3, 10.0, 40);
    assert_eq!(search.found, None);
    assert_eq!(search.attempts.len(), (T_CAP_EXPONENT - 3) as usize);
    assert!(search.attempts.iter().all(|a| a.verdict == Some(Certification::Violated)));
}

#[test]
fn linear_case_junction_is_continuous_and_steeper_on_the_wave() {
    let case = linear_case();
    assert!(case.residual_b.abs() < 1e-8, "{}", case.residual_b);
    for &t in &[2.0, 5.0, 30.0, 300.0, 3e3, 1e4] {
        let j = case.check_junction(t).unwrap();
        assert!(j.gap.abs() < 1e-12, "gap {} at t = {t}", j.gap);
        assert!(j.holds, "{j:?}");
        let xj = 2.0 * t - j.h;
        let below = eval_linear_case_subsolution(case, t, xj - 1e-9).unwrap();
        let above = eval_linear_case_subsolution(case, t, xj + 1e-9).unwrap();
        assert!((below - above).abs() < 1e-8);
    }
    let t: f64 = 1e4;
    assert!((h_linear(t) - 0.5 * t.ln()).abs() < 0.05);
}

#[test]
fn glued_value_is_the_selected_extremum_inside_the_band() {
    for c in [fast_sub(), fast_super()] {
        let t = 2f64.powi(15);
        c.prepare(&[t]).unwrap();
        let [lo, hi] = c.band(t);
        for i in 1..20 {
            let s = lo + (hi - lo) * i as f64 / 20.0;
            let l = c.construction().left(t, s).unwrap().value;
            let r = c.construction().right(t, s).unwrap().value;
            let want = match c.orientation() {
                Orientation::Sub => l.max(r),
                Orientation::Super => l.min(r),
            };
            assert_eq!(c.eval_rel(t, s).unwrap().0.value, want);
        }
        // Matching holds at this t, so the glued function is continuous at both edges.
        assert!(c.matching(t).unwrap().iter().all(|m| m.holds));
        for edge in [lo, hi] {
            let a = c.value(t, 2.0 * t + edge - 1e-7).unwrap();
            let b = c.value(t, 2.0 * t + edge + 1e-7).unwrap();
            assert!((a - b).abs() < 1e-5 * a.abs().max(b.abs()), "edge {edge}: {a} vs {b}");
        }
    }
}

#[test]
fn report_serializes_with_snake_case_tags() {
    let rep = residual_certify(fast_sub(), &CertGrid { t0: 512.0, t1: 1024.0, nt: 2, x_margin: 10.0, nx: 40 }).unwrap();
    let js = serde_json::to_string(&rep).unwrap();
    assert!(js.contains("\"orientation\":\"sub\""));
    assert!(js.contains("\"verdict\":\"certified\""));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn beta_window_is_nonempty_and_below_one(eps in 1e-4f64..0.25) {
        let (lo, hi) = beta_window(eps);
        prop_assert!(lo < hi && hi < 1.0);
    }

    #[test]
    fn fast_sub_residual_has_the_sub_sign(k in 10.0f64..16.0, u in 0.0f64..1.0) {
        let c = fast_sub();
        let t = 2f64.powf(k);
        let s0 = c.construction().s_left(t, 10.0);
        let s1 = 6.0 * t.sqrt();
        let s = s0 + (s1 - s0) * u;
        let (n, m) = c.residual(t, 2.0 * t + s).unwrap();
        prop_assert!(n <= m, "t = {} s = {}: N/u = {} margin {}", t, s, n, m);
    }

    #[test]
    fn linear_subsolution_is_below_the_wave_level(t in 2.0f64..1e4, dx in -30.0f64..30.0) {
        let case = linear_case();
        let x = 2.0 * t - h_linear(t) + dx;
        let u = eval_linear_case_subsolution(case, t, x).unwrap();
        prop_assert!((0.0..1.0).contains(&u));
    }
}
