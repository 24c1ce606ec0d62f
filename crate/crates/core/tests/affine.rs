use num_complex::Complex64;
use proptest::prelude::*;
use slevolve_core::affine::{
    beta_closed, classify_affine_case, integrate_affine, quadrature_affine, rhs_affine, translation_defect, AffineCase,
    AffineParams, AffineState,
};
use slevolve_core::centred::{rhs_w, Signature};
use slevolve_core::ode::OdeOptions;
use slevolve_core::threefold::{Affine3, Affine3Variant};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn case_d() -> AffineParams {
    let sig = Signature::new(2, vec![2.0, 3.0, 1.2]).unwrap();
    AffineParams::new(2, sig.alphas.clone(), 0.4 * sig.a_max(), c(0.3, -0.2)).unwrap()
}

#[test]
fn rates_of_letters_and_translation() {
    let w = [c(0.5, 0.2), c(-1.0, 0.7), c(0.3, 0.3)];
    let (dw, db) = rhs_affine(&w, 2);
    assert_eq!(dw, rhs_w(2, &w));
    assert!((db - (w[0] * w[1] * w[2]).conj()).norm() <= 1e-15);
}

#[test]
fn translation_follows_the_closed_form() {
    let p = case_d();
    let times: Vec<f64> = (0..=40).map(|k| 0.1 * k as f64).collect();
    let tr = integrate_affine(p.a, &p.initial_state().unwrap(), &times, OdeOptions::tight()).unwrap();
    let u = tr.u(&p.alphas);
    for (k, t) in times.iter().enumerate() {
        let want = beta_closed(u[k], u[0], *t, p.big_a, p.c_const);
        assert!((tr.beta[k] - want).norm() <= 1e-8, "t = {t}");
        if k > 0 {
            assert!(tr.beta[k].im < tr.beta[k - 1].im);
        }
    }
}

#[test]
fn case_labels() {
    let flat = AffineParams::new(2, vec![2.0, 3.0, 1.2], 0.0, c(0.0, 0.0)).unwrap();
    assert_eq!(classify_affine_case(&flat).unwrap(), AffineCase::A);
    assert_eq!(classify_affine_case(&case_d()).unwrap(), AffineCase::D);
    assert!(AffineCase::D.never_periodic());
    let b3 = AffineParams::new(2, vec![1.0, 1.0], 0.3, c(0.0, 0.0)).unwrap();
    assert_eq!(classify_affine_case(&b3).unwrap(), AffineCase::B { finite_interval: false });
    let b4 = AffineParams::new(3, vec![1.0, 1.0, 1.0], 0.3, c(0.0, 0.0)).unwrap();
    assert_eq!(classify_affine_case(&b4).unwrap(), AffineCase::B { finite_interval: true });
    let sig = Signature::new(2, vec![2.0, 3.0, 1.2]).unwrap();
    let top = AffineParams::new(2, sig.alphas.clone(), sig.a_max(), c(0.0, 0.0)).unwrap();
    assert_eq!(classify_affine_case(&top).unwrap(), AffineCase::C);
}

#[test]
fn finite_time_escape_in_case_b() {
    let p = AffineParams::new(3, vec![1.0, 1.0, 1.0], 0.3, c(0.0, 0.0)).unwrap();
    let tr = integrate_affine(p.a, &p.initial_state().unwrap(), &[0.0, 50.0], OdeOptions::default()).unwrap();
    assert!(tr.escaped.is_some());
    let p = AffineParams::new(2, vec![1.0, 1.0], 0.3, c(0.0, 0.0)).unwrap();
    let tr = integrate_affine(p.a, &p.initial_state().unwrap(), &[0.0, 5.0], OdeOptions::default()).unwrap();
    assert!(tr.escaped.is_none());
}

#[test]
fn quadrature_agrees_with_the_flow() {
    let p = case_d();
    let t1 = 0.15;
    let tr = integrate_affine(p.a, &p.initial_state().unwrap(), &[0.0, t1], OdeOptions::tight()).unwrap();
    let u = tr.u(&p.alphas);
    let q = quadrature_affine(&p, u[0], u[1]).unwrap();
    assert!((q.dt.abs() - t1).abs() <= 1e-8, "{} vs {t1}", q.dt);
    for j in 0..3 {
        let moved = tr.thetas[1][j] - tr.thetas[0][j];
        assert!((q.dthetas[j].abs() - moved.abs()).abs() <= 1e-8, "theta {j}");
    }
}

#[test]
fn three_dimensional_paraboloid_matches_closed_form() {
    let state = AffineState {
        w: vec![c(0.9, 0.3), c(0.4, -0.8)],
        beta: c(0.2, 0.1),
    };
    let sol = Affine3::from_initial(Affine3Variant::A2, state.w[0], state.w[1], state.beta).unwrap();
    let times: Vec<f64> = (0..=20).map(|k| 0.05 * k as f64).collect();
    let tr = integrate_affine(2, &state, &times, OdeOptions::tight()).unwrap();
    for (k, t) in times.iter().enumerate() {
        let w = sol.w(*t);
        assert!((tr.w[k][0] - w[0]).norm() <= 1e-8 && (tr.w[k][1] - w[1]).norm() <= 1e-8);
        assert!((tr.beta[k] - sol.beta(*t)).norm() <= 1e-8);
    }
}

#[test]
fn drift_per_period() {
    let (period, defect) = translation_defect(&case_d(), OdeOptions::tight()).unwrap();
    assert!(period > 0.0 && defect <= 1e-8, "{defect}");
    let flat = AffineParams::new(2, vec![2.0, 3.0, 1.2], 0.0, c(0.0, 0.0)).unwrap();
    assert!(translation_defect(&flat, OdeOptions::tight()).is_err());
}

#[test]
fn csv_has_one_row_per_time() {
    let p = case_d();
    let tr = integrate_affine(p.a, &p.initial_state().unwrap(), &[0.0, 0.5, 1.0], OdeOptions::default()).unwrap();
    let csv = tr.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("t,re_w1,im_w1"));
    assert!(lines.iter().all(|l| l.split(',').count() == 1 + 6 + 2 + 3));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn imaginary_translation_is_linear(frac in 0.05..0.95f64, t in 0.1..2.0f64) {
        let sig = Signature::new(2, vec![2.0, 3.0, 1.2]).unwrap();
        let p = AffineParams::new(2, sig.alphas.clone(), frac * sig.a_max(), c(0.0, 0.0)).unwrap();
        let tr = integrate_affine(p.a, &p.initial_state().unwrap(), &[0.0, t], OdeOptions::tight()).unwrap();
        prop_assert!((tr.beta[1].im + p.big_a * t).abs() <= 1e-8);
    }
}
