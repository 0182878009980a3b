use fronts::spectral::*;
use proptest::prelude::*;

const DY: f64 = 0.005;
const N: usize = 3200;

fn gauss(y: f64) -> f64 {
    (-y * y / 8.0).exp()
}

fn sample(f: impl Fn(f64) -> f64) -> Vec<f64> {
    (0..=N).map(|i| f(i as f64 * DY)).collect()
}

fn norm2(v: &[f64]) -> f64 {
    inner(v, v, DY)
}

#[test]
fn ground_mode_is_in_the_kernel_of_m1() {
    let e = ground_mode(Boundary::Neumann, DY, N);
    let r = discrete_m1(&e, DY);
    let res = norm2(&r[..N]).sqrt();
    assert!(res < 1e-6, "residual {res:e}");
}

#[test]
fn second_neumann_mode_has_eigenvalue_one() {
    let psi = sample(|y| (y * y / 4.0 - 0.5) * gauss(y));
    let m = discrete_m1(&psi, DY);
    let lambda = inner(&m, &psi, DY) / norm2(&psi);
    assert!((lambda - 1.0).abs() < 1e-4, "{lambda}");
    let e = ground_mode(Boundary::Neumann, DY, N);
    assert!(inner(&e, &psi, DY).abs() < 1e-8);
}

#[test]
fn projection_conventions_differ_by_the_printed_constant() {
    let field = SpectralField { tau: 0.0, dy: DY, bc: Boundary::Neumann, values: sample(gauss) };
    let p = project_ground_mode(&field);
    assert!((p.shape_coefficient - 1.0).abs() < 1e-12);
    // ‖e^{−y²/8}‖² = √π on the half-line.
    let pi = std::f64::consts::PI;
    assert!((p.unit - pi.powf(0.25)).abs() < 1e-9);
    assert!((p.printed - (2.0 * pi).powf(-0.25) * pi.sqrt()).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn q1_is_coercive_off_the_ground_mode(c in prop::collection::vec(-1.0f64..1.0, 5), s in 0.6f64..1.6) {
        let raw = sample(|y| {
            let p = c[0] + c[1] * y + c[2] * y * y + c[3] * (y * s).sin() + c[4] * (y / s).cos();
            p * gauss(y)
        });
        let e = ground_mode(Boundary::Neumann, DY, N);
        let a = inner(&e, &raw, DY);
        let psi: Vec<f64> = raw.iter().zip(&e).map(|(r, m)| r - a * m).collect();
        let n2 = norm2(&psi);
        prop_assume!(n2 > 1e-6);
        let psi: Vec<f64> = psi.iter().map(|v| v / n2.sqrt()).collect();
        let q = quadratic_form_q1(&psi, DY);
        prop_assert!(q >= 1.0 - 1e-6, "Q1 = {q}");
    }
}

#[test]
fn neumann_run_has_stable_w1_and_decaying_remainder() {
    let grid = SpectralGrid::default();
    let run = run_w(Boundary::Neumann, 0.5, gauss, 8.0, &grid).unwrap();
    let rep = verify_neumann_decay(&run, 6.0).unwrap();
    assert!(rep.w1 > 0.0 && rep.w1.is_finite());
    assert!(rep.w1_relative_spread < 0.01);
    assert!(rep.decay_slope.unwrap() <= -0.45);
    assert!(rep.bounded && rep.pass);
    // Both conventions describe the same limit.
    assert!((rep.phi1_printed / rep.phi1_unit - 2f64.powf(-0.25)).abs() < 1e-9);

    let mut prev = 0.0;
    for k in 0..run.n_frames() {
        let f = run.frame(k);
        let phi1 = project_ground_mode(&f).unit * (-0.5 * f.tau).exp();
        assert!(phi1 >= prev - 1e-12, "φ₁ decreased at τ = {}", f.tau);
        prev = phi1;
        assert!(f.boundary_slope().abs() < 1e-8);
        if f.tau > 0.0 {
            assert!(f.values[..N].iter().all(|&v| v > 0.0));
        }
    }
}

#[test]
fn w1_is_insensitive_to_the_domain_length() {
    let short = run_w(Boundary::Neumann, 0.5, gauss, 8.0, &SpectralGrid::default()).unwrap();
    let long_grid = SpectralGrid { y_max: 32.0, dy: 0.0025, ..Default::default() };
    let long = run_w(Boundary::Neumann, 0.5, gauss, 8.0, &long_grid).unwrap();
    let (a, b) = (estimate_w1(&short).unwrap(), estimate_w1(&long).unwrap());
    assert!(((a - b) / a).abs() < 1e-3, "{a} vs {b}");
}

#[test]
fn dirichlet_run_has_bounded_normalized_deviation() {
    let eps = 0.1;
    let run =
        run_w(Boundary::Dirichlet, (3.0 + 2.0 * eps) / 2.0, |y| y * gauss(y), 8.0, &SpectralGrid::default()).unwrap();
    let rep = verify_dirichlet_decay(&run, 6.0).unwrap();
    assert!(rep.w1 > 0.0 && rep.w1.is_finite());
    assert!(rep.bounded && rep.pass, "{:?}", rep.k_profile);
    let f = run.field_at(8.0);
    assert_eq!(f.values[0], 0.0);
    assert!(f.values[1..N].iter().all(|&v| v > 0.0));
}

#[test]
fn dirichlet_without_drift_keeps_w1_equal_to_one() {
    let run = run_w(Boundary::Dirichlet, 0.0, |y| y * gauss(y), 8.0, &SpectralGrid::default()).unwrap();
    let rep = verify_dirichlet_decay(&run, 6.0).unwrap();
    // The discrete stationary state differs from ye^{−y²/8} by O(dy²).
    assert!((rep.w1 - 1.0).abs() < 1e-5, "{}", rep.w1);
    assert!(rep.k_l * (-4.0f64).exp() < 1e-4, "{}", rep.k_l);
}

#[test]
fn interpolation_reproduces_stored_frames() {
    let run = run_w(Boundary::Neumann, 0.5, gauss, 2.0, &SpectralGrid::default()).unwrap();
    let f = run.field_at(1.0);
    for i in [0usize, 7, 400, 1333] {
        let v = run.eval(1.0, f.y(i)).unwrap();
        assert!((v - f.values[i]).abs() < 1e-12);
    }
    // Between frames the exact modal growth is recovered when drift is off.
    let free = run_w(Boundary::Neumann, 0.0, gauss, 2.0, &SpectralGrid::default()).unwrap();
    let (tau, y) = (1.013, 1.2345);
    let v = free.eval(tau, y).unwrap();
    assert!((v - (0.5f64 * tau).exp() * gauss(y)).abs() < 1e-5);
    assert!(free.eval(2.5, 0.0).is_err());
}
