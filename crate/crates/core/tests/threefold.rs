mod common;

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slevolve_core::centred::{betas, integrate_w, rhs_w, CentredParams};
use slevolve_core::elliptic::{complete_k, jacobi};
use slevolve_core::linalg::singular_values;
use slevolve_core::ode::{solve_to, OdeOptions};
use slevolve_core::threefold::{
    affine3_closed, conformal_fd, conformal_map, cross_section, rhs_w3, Affine3, Affine3Variant,
};

use common::linspace;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Composite Simpson rule on a uniform grid.
fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(a) + f(b) + inner) * h / 3.0
}

#[test]
fn jacobi_start_and_ode() {
    for k in [0.0, 0.3, 0.95] {
        let j = jacobi(0.0, k).unwrap();
        assert_eq!((j.sn, j.cn, j.dn), (0.0, 1.0, 1.0));
    }
    let k: f64 = 0.7;
    let f = move |_t: f64, y: &[f64], dy: &mut [f64]| {
        dy[0] = y[1] * y[2];
        dy[1] = -y[0] * y[2];
        dy[2] = -k * k * y[0] * y[1];
    };
    let y = solve_to(f, 0.0, &[0.0, 1.0, 1.0], 1.3, OdeOptions::tight()).unwrap();
    let j = jacobi(1.3, k).unwrap();
    assert!((y[0] - j.sn).abs() < 1e-10 && (y[1] - j.cn).abs() < 1e-10 && (y[2] - j.dn).abs() < 1e-10);
}

#[test]
fn quarter_period() {
    assert!((complete_k(0.0).unwrap() - FRAC_PI_2).abs() < 1e-15);
    let k: f64 = 0.5;
    let oracle = simpson(|p| 1.0 / (1.0 - k * k * p.sin().powi(2)).sqrt(), 0.0, FRAC_PI_2, 4000);
    assert!((complete_k(k).unwrap() - oracle).abs() < 1e-12);
    let k = 0.9;
    let big_k = complete_k(k).unwrap();
    for t in linspace(-3.0, 7.0, 60) {
        let (a, b) = (jacobi(t, k).unwrap(), jacobi(t + 4.0 * big_k, k).unwrap());
        assert!((a.sn - b.sn).abs() <= 1e-9);
    }
}

#[test]
fn three_letter_system() {
    let one = c(1.0, 0.0);
    assert_eq!(rhs_w3(&[one, one, one]), [one, -one, -one]);
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..50 {
        let w: [Complex64; 3] = std::array::from_fn(|_| c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)));
        assert_eq!(rhs_w3(&w).to_vec(), rhs_w(1, &w));
    }
}

#[test]
fn solutions_exist_for_long_times() {
    let p = CentredParams::new(1, vec![1.0, 2.0, 2.0], 1.3, 1.0).unwrap();
    let period = betas(&p).unwrap().period;
    let tr = integrate_w(1, &p.initial_w().unwrap(), &[0.0, 100.0 * period], OdeOptions::default()).unwrap();
    assert!(tr.escaped.is_none());
}

#[test]
fn circular_cross_section() {
    let cs = cross_section([2.0 / 3.0, 4.0 / 3.0, 4.0 / 3.0]).unwrap();
    assert_eq!(cs.nu, 0.0);
    for s in linspace(0.0, cs.period().unwrap(), 200) {
        let (e, q) = cs.constraint_residuals(s).unwrap();
        assert!(e <= 1e-12 && q <= 1e-12);
        assert!(cs.ode_residual_fd(s, 1e-5).unwrap() <= 1e-9);
    }
}

#[test]
fn elliptic_cross_section() {
    let alphas = [1.0, 1.5, 3.0];
    let cs = cross_section(alphas).unwrap();
    assert!(!cs.swapped && cs.nu > 0.0);
    for s in linspace(0.0, cs.period().unwrap(), 200) {
        let (e, q) = cs.constraint_residuals(s).unwrap();
        assert!(e <= 1e-12 && q <= 1e-12);
        assert!(cs.ode_residual_fd(s, 1e-5).unwrap() <= 1e-9);
        let sn = jacobi(cs.mu * s, cs.nu).unwrap().sn;
        assert!((cs.v(s).unwrap() - sn * sn / (alphas[0] + alphas[2])).abs() <= 1e-14);
    }
    // the curve closes after one period
    let (a, b) = (cs.at(0.3).unwrap().x, cs.at(0.3 + cs.period().unwrap()).unwrap().x);
    assert!((0..3).all(|i| (a[i] - b[i]).abs() <= 1e-12));
}

#[test]
fn swapped_cross_section() {
    let cs = cross_section([1.0, 3.0, 1.5]).unwrap();
    assert!(cs.swapped);
    for s in linspace(0.0, cs.period().unwrap(), 100) {
        let (e, q) = cs.constraint_residuals(s).unwrap();
        assert!(e <= 1e-12 && q <= 1e-12);
        assert!(cs.ode_residual_fd(s, 1e-5).unwrap() <= 1e-9);
    }
}

#[test]
fn cone_map_lies_on_the_sphere() {
    let alphas = [1.0, 1.5, 3.0];
    let sig = slevolve_core::centred::Signature::new(1, alphas.to_vec()).unwrap();
    let p = CentredParams::new(1, alphas.to_vec(), 0.5 * sig.a_max(), 0.0).unwrap();
    let cs = cross_section(alphas).unwrap();
    let grid = conformal_map(&p, &linspace(0.0, cs.period().unwrap(), 30), &linspace(0.0, 3.0, 30), OdeOptions::tight()).unwrap();
    let r = grid.report();
    assert!(r.sphere <= 1e-10 && r.orthogonality <= 1e-10 && r.equal_norms <= 1e-9 && r.norm_formula <= 1e-9);
    let (orth, gap) = conformal_fd(&p, 0.4, 0.7, 1e-5, OdeOptions::tight()).unwrap();
    assert!(orth <= 1e-7 && gap <= 1e-7);
}

fn affine_rank(sol: &Affine3) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let pts: Vec<Vec<f64>> = (0..40)
        .map(|_| {
            let z = sol.point(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            z.iter().flat_map(|w| [w.re, w.im]).collect()
        })
        .collect();
    let m = DMatrix::from_fn(6, pts.len() - 1, |r, k| pts[k + 1][r] - pts[0][r]);
    let s = singular_values(&m);
    s.iter().filter(|&&v| v > 1e-10 * s[0]).count()
}

#[test]
fn planar_affine_solutions() {
    // Im(C conj D) = 0 makes the a = 2 family planar
    let flat = Affine3::new(Affine3Variant::A2, c(0.8, 0.3), c(1.6, 0.6), c(0.1, 0.0)).unwrap();
    assert!(flat.big_a().abs() < 1e-15);
    assert_eq!(affine_rank(&flat), 3);
    let bent = Affine3::new(Affine3Variant::A2, c(0.8, 0.3), c(0.2, -0.6), c(0.0, 0.0)).unwrap();
    assert!(affine_rank(&bent) > 3);
    // |C| = |D| for the a = 1 family
    let flat = Affine3::new(Affine3Variant::A1, c(0.6, 0.8), c(1.0, 0.0), c(0.0, 0.2)).unwrap();
    assert!(flat.big_a().abs() < 1e-15);
    assert_eq!(affine_rank(&flat), 3);
}

#[test]
fn perpendicular_symmetry_family() {
    let cc = c(0.7, -0.4);
    let sol = Affine3::new(Affine3Variant::A1, cc, c(0.0, 0.0), c(0.0, 0.0)).unwrap();
    for t in linspace(-2.0, 2.0, 21) {
        let w = sol.w(t);
        let e = Complex64::from_polar(1.0, t);
        assert!((w[0] - cc * e).norm() <= 1e-15);
        assert!((w[1] + c(0.0, 1.0) * cc.conj() * e.conj()).norm() <= 1e-15);
        assert!(sol.ode_residual(t) <= 1e-14);
    }
}

#[test]
fn closed_grid_evaluation() {
    let (cc, d, e) = (c(0.4, 0.1), c(-0.3, 0.5), c(0.2, 0.0));
    let grid = [[0.1, 0.2, 0.0], [0.5, -0.4, 1.2], [-1.0, 0.3, -0.7]];
    let pts = affine3_closed(Affine3Variant::A2, cc, d, e, &grid).unwrap();
    let sol = Affine3::new(Affine3Variant::A2, cc, d, e).unwrap();
    for (p, g) in pts.iter().zip(&grid) {
        assert_eq!(*p, sol.point(g[0], g[1], g[2]));
    }
    assert!(affine3_closed(Affine3Variant::A1, c(0.0, 0.0), c(0.0, 0.0), e, &grid).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jacobi_identities(t in -30.0..30.0f64, k in 0.0..0.999f64) {
        let j = jacobi(t, k).unwrap();
        prop_assert!((j.sn * j.sn + j.cn * j.cn - 1.0).abs() <= 1e-12);
        prop_assert!((j.dn * j.dn + k * k * j.sn * j.sn - 1.0).abs() <= 1e-12);
        let half = jacobi(t + 2.0 * complete_k(k).unwrap(), k).unwrap();
        prop_assert!((half.sn + j.sn).abs() <= 1e-9);
    }

    #[test]
    fn affine_closed_forms_are_exact(
        re in prop::collection::vec(-1.0..1.0f64, 6),
        t in -2.0..2.0f64,
        a2 in any::<bool>(),
    ) {
        let v = if a2 { Affine3Variant::A2 } else { Affine3Variant::A1 };
        let sol = Affine3::from_initial(v, c(re[0], re[1]), c(re[2], re[3]), c(re[4], re[5]));
        prop_assume!(sol.is_ok());
        let sol = sol.unwrap();
        let scale = 1.0 + sol.w(t).iter().map(|z| z.norm_sqr()).sum::<f64>();
        prop_assert!(sol.ode_residual(t) <= 1e-13 * scale);
        let w0 = sol.w(0.0);
        prop_assert!((w0[0] - c(re[0], re[1])).norm() <= 1e-14);
        prop_assert!((sol.beta(0.0) - c(re[4], re[5])).norm() <= 1e-14);
        prop_assert!((sol.big_a() * PI).is_finite());
    }
}
