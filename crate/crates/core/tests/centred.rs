mod common;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_6, PI};

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slevolve_core::centred::{
    beta_limits, betas, classify_case, classify_topology, integrate_w, normalize_lambda, period_from_ode,
    quadrature_solution, rationalize, reduce, rhs_reduced, rhs_w, turning_points, w_at, Case, CentredParams,
    Signature,
};
use slevolve_core::ode::OdeOptions;

use common::{case_d_params, normalized_signature};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn w_system_examples() {
    let one = c(1.0, 0.0);
    assert_eq!(rhs_w(1, &[one, one, one]), vec![one, -one, -one]);
    let got = rhs_w(1, &[c(0.0, 1.0), one]);
    assert!((got[0] - one).norm() < 1e-15 && (got[1] - c(0.0, 1.0)).norm() < 1e-15);
}

#[test]
fn normalization_of_unit_start() {
    let (lam, al) = normalize_lambda(&[1.0, 1.0, 1.0], 1).unwrap();
    // 1/(1 - l) = 2/(1 + l)
    assert!((lam - 1.0 / 3.0).abs() < 1e-14);
    for (x, y) in al.iter().zip([2.0 / 3.0, 4.0 / 3.0, 4.0 / 3.0]) {
        assert!((x - y).abs() < 1e-14);
    }
    let (lam, _) = normalize_lambda(&[0.5, 1.0, 1.0], 1).unwrap();
    assert!(lam.abs() < 1e-14);
}

#[test]
fn invariant_from_phases() {
    let sig = Signature::new(1, vec![1.0, 1.0, 1.0]).unwrap();
    let w: Vec<Complex64> = (0..3).map(|_| Complex64::from_polar(1.0, FRAC_PI_6)).collect();
    assert!((reduce(&w, &sig).unwrap().big_a - 1.0).abs() < 1e-15);
    let w = vec![c(1.0, 0.0); 3];
    assert_eq!(reduce(&w, &sig).unwrap().big_a, 0.0);
}

#[test]
fn reduced_rates_in_special_cases() {
    let sig = Signature::new(1, vec![1.0, 2.0, 2.0]).unwrap();
    let a_max = sig.a_max();
    let thetas = [FRAC_PI_2, 0.0, 0.0];
    let r = rhs_reduced(&sig, 0.0, &thetas);
    assert!(r.du.abs() < 1e-15);
    for j in 0..3 {
        let expect = -sig.sign(j) * a_max / sig.alphas[j];
        assert!((r.dthetas[j] - expect).abs() < 1e-14);
    }
    let r = rhs_reduced(&sig, 0.3, &[0.4, -0.1, -0.3]);
    assert!(r.dthetas.iter().all(|d| d.abs() < 1e-15));
}

#[test]
fn reduced_system_is_the_derivative_of_reduce() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let opts = OdeOptions::tight();
    for _ in 0..5 {
        let p = case_d_params(&mut rng, 3);
        let sig = p.signature();
        let w0 = p.initial_w().unwrap();
        let t = rng.gen_range(0.2..2.0);
        let h = 1e-3;
        let at = |s: f64| reduce(&w_at(p.a, &w0, s, opts).unwrap(), &sig).unwrap();
        let mid = at(t);
        let r = rhs_reduced(&sig, mid.u, &mid.thetas);
        // Richardson-extrapolated central differences
        let diff = |step: f64| {
            let (lo, hi) = (at(t - step), at(t + step));
            let mut out = vec![(hi.u - lo.u) / (2.0 * step)];
            for j in 0..3 {
                let mut d = hi.thetas[j] - lo.thetas[j];
                d -= 2.0 * PI * (d / (2.0 * PI)).round();
                out.push(d / (2.0 * step));
            }
            out
        };
        let (coarse, fine) = (diff(h), diff(0.5 * h));
        let est: Vec<f64> = coarse.iter().zip(&fine).map(|(c, f)| (4.0 * f - c) / 3.0).collect();
        assert!((est[0] - r.du).abs() <= 1e-7);
        for j in 0..3 {
            assert!((est[1 + j] - r.dthetas[j]).abs() <= 1e-7, "{} vs {}", est[1 + j], r.dthetas[j]);
        }
    }
}

#[test]
fn turning_points_against_a_scan() {
    let sig = Signature::new(1, vec![1.0, 2.0, 2.0]).unwrap();
    let (g, d) = turning_points(&sig, 1.0).unwrap();
    assert!((sig.q(g) - 1.0).abs() <= 1e-12 && (sig.q(d) - 1.0).abs() <= 1e-12);
    assert!(g > -1.0 && g < 0.0 && d > 0.0 && d < 2.0);
    // sign changes of Q - 1 on a fine grid over (-1, 2)
    let n = 300_000;
    let grid: Vec<f64> = (1..n).map(|i| -1.0 + 3.0 * i as f64 / n as f64).collect();
    let roots: Vec<f64> = grid
        .windows(2)
        .filter(|w| (sig.q(w[0]) - 1.0).signum() != (sig.q(w[1]) - 1.0).signum())
        .map(|w| 0.5 * (w[0] + w[1]))
        .collect();
    assert_eq!(roots.len(), 2);
    assert!((roots[0] - g).abs() <= 1e-5 && (roots[1] - d).abs() <= 1e-5);
}

#[test]
fn turning_points_symmetry_and_collapse() {
    let sig = Signature::new(2, vec![1.0; 4]).unwrap();
    let (g, d) = turning_points(&sig, 0.5).unwrap();
    assert!((g + d).abs() <= 1e-12);
    let sig = Signature::new(1, vec![1.0, 2.0, 2.0]).unwrap();
    let (g, d) = turning_points(&sig, sig.a_max() * (1.0 - 1e-10)).unwrap();
    assert!(g.abs() < 1e-4 && d.abs() < 1e-4);
}

#[test]
fn quadrature_branch_matches_the_flow() {
    let sig = Signature::new(1, vec![1.0, 2.0, 2.0]).unwrap();
    let big_a = 1.0;
    let (g, d) = turning_points(&sig, big_a).unwrap();
    // start at the minimum of u with theta = pi/2 on the first letter
    let w0: Vec<Complex64> = (0..3)
        .map(|j| {
            let r = sig.factor(j, g).sqrt();
            if j == 0 {
                Complex64::from_polar(r, FRAC_PI_2)
            } else {
                c(r, 0.0)
            }
        })
        .collect();
    for frac in [0.25, 0.5, 0.9] {
        let u1 = g + frac * (d - g);
        let q = quadrature_solution(&sig, big_a, g, u1).unwrap();
        let tr = integrate_w(1, &w0, &[0.0, q.dt], OdeOptions::tight()).unwrap();
        let red = reduce(&tr.w[1], &sig).unwrap();
        assert!((red.u - u1).abs() <= 1e-8, "u {} vs {u1}", red.u);
        for j in 0..3 {
            let moved = tr.thetas[1][j] - tr.thetas[0][j];
            assert!((moved - q.dthetas[j]).abs() <= 1e-8);
        }
    }
    let half = quadrature_solution(&sig, big_a, g, d).unwrap().dt;
    let p = CentredParams::new(1, sig.alphas.clone(), big_a, 1.0).unwrap();
    let ode = period_from_ode(&p, OdeOptions::tight()).unwrap();
    assert!((2.0 * half - ode.period).abs() <= 1e-7);
}

#[test]
fn small_invariant_freezes_phases() {
    let sig = Signature::new(1, vec![1.0, 2.0, 2.0]).unwrap();
    let q = quadrature_solution(&sig, 1e-9, -0.5, 0.5).unwrap();
    assert!(q.dthetas.iter().all(|d| d.abs() < 1e-8));
}

#[test]
fn limit_multiplicities() {
    let sig = Signature::new(1, vec![1.0, 2.0, 2.0]).unwrap();
    let lim = beta_limits(&sig).unwrap();
    assert_eq!((lim.k, lim.l), (1, 2));
    let s3 = 3f64.sqrt();
    let expect = [-2.0 * PI / s3, PI / s3, PI / s3];
    for j in 0..3 {
        assert!((lim.large_a[j] - expect[j]).abs() < 1e-14);
    }
    assert_eq!(lim.small_a, vec![-PI, FRAC_PI_2, FRAC_PI_2]);
}

#[test]
fn case_labels_and_topology() {
    let sig = Signature::new(1, vec![1.0, 2.0, 2.0]).unwrap();
    let p = |a: usize, alphas: Vec<f64>, big_a: f64, cc: f64| CentredParams::new(a, alphas, big_a, cc).unwrap();
    assert_eq!(classify_case(&p(1, sig.alphas.clone(), 0.0, 1.0)).unwrap(), Case::A);
    assert_eq!(classify_case(&p(3, vec![1.0, 1.0, 1.0], 0.3, 1.0)).unwrap(), Case::B);
    assert_eq!(classify_case(&p(1, sig.alphas.clone(), sig.a_max(), 1.0)).unwrap(), Case::C);
    assert_eq!(classify_case(&p(1, sig.alphas.clone(), 1.0, 1.0)).unwrap(), Case::D);
    assert!(classify_case(&p(1, vec![1.0, 1.0, 1.0], 0.5, 1.0)).is_err());

    let t = classify_topology(3, 1, &[-8, 4, 4], 0.0).unwrap();
    assert!(t.label.contains("two T^2-cones") && t.pieces == 2);
    let t = classify_topology(3, 1, &[-3, 1, 2], -1.0).unwrap();
    assert!(t.label.contains("Klein bottle") && t.label.contains("T^2 x (0, inf)"));
    let t = classify_topology(4, 2, &[-2, -2, 2, 2], 1.0).unwrap();
    assert_eq!(t.label, "S^1 x R^2 x S^1");
    let t = classify_topology(4, 2, &[-1, -1, 1, 1], 1.0).unwrap();
    assert!(t.label.ends_with("/ Z_2") && t.z2_quotient);
    // S^0 factor: two sheets unless the involution exchanges them
    assert_eq!(classify_topology(4, 1, &[-6, 2, 2, 2], 1.0).unwrap().pieces, 2);
    assert_eq!(classify_topology(4, 1, &[-3, 1, 1, 1], 1.0).unwrap().pieces, 1);
    assert_eq!(classify_topology(4, 3, &[-2, -2, -2, 6], -1.0).unwrap().pieces, 2);
    assert_eq!(classify_topology(4, 3, &[-2, -2, -2, 6], 1.0).unwrap().pieces, 1);
}

#[test]
fn two_dimensional_family_closes_after_one_period() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..5 {
        let x: f64 = rng.gen_range(0.5..3.0);
        let p = CentredParams::new(1, vec![x, x], rng.gen_range(0.05..0.95) * x, 1.0).unwrap();
        let b = betas(&p).unwrap();
        assert_eq!(rationalize(&b.betas, 8, 1e-8), Some((vec![-1, 1], 1)));
    }
}

#[test]
fn negative_invariant_reverses_advances() {
    let p = CentredParams::new(1, vec![1.0, 2.0, 2.0], 0.7, 1.0).unwrap();
    let mut q = p.clone();
    q.big_a = -0.7;
    let (bp, bq) = (betas(&p).unwrap(), betas(&q).unwrap());
    assert!((bp.period - bq.period).abs() < 1e-14);
    for j in 0..3 {
        assert!((bp.betas[j] + bq.betas[j]).abs() < 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn normalization_residual_vanishes(raw in prop::collection::vec(0.2..4.0f64, 4), a in 1usize..4) {
        let (_, al) = normalize_lambda(&raw, a).unwrap();
        let sig = Signature::new(a, al.clone()).unwrap();
        let scale: f64 = al.iter().map(|x| 1.0 / x).sum();
        prop_assert!(sig.normalization_residual().abs() <= 1e-12 * scale);
    }

    #[test]
    fn advances_sum_to_zero(seed in any::<u64>(), m in 3usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = case_d_params(&mut rng, m);
        let b = betas(&p).unwrap();
        prop_assert!(b.sum_residual <= 1e-10);
        prop_assert!(b.period > 0.0);
    }

    #[test]
    fn advances_are_scale_invariant(seed in any::<u64>(), kappa in 0.4..2.5f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = case_d_params(&mut rng, 4);
        let sig = p.signature().scaled(kappa);
        let q = CentredParams::new(p.a, sig.alphas.clone(), p.big_a * kappa.powi(4), 1.0).unwrap();
        let (bp, bq) = (betas(&p).unwrap(), betas(&q).unwrap());
        for j in 0..4 {
            prop_assert!((bp.betas[j] - bq.betas[j]).abs() <= 1e-8);
        }
        prop_assert!((bq.period / bp.period - kappa.powi(-2)).abs() <= 1e-8 * kappa.powi(-2));
    }

    #[test]
    fn invariant_is_conserved(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sig = normalized_signature(&mut rng, 3);
        let p = CentredParams::new(sig.a, sig.alphas.clone(), rng.gen_range(0.1..0.9) * sig.a_max(), 1.0).unwrap();
        let times: Vec<f64> = (0..=20).map(|i| 0.5 * i as f64).collect();
        let tr = integrate_w(p.a, &p.initial_w().unwrap(), &times, OdeOptions::default()).unwrap();
        for w in &tr.w {
            let r = reduce(w, &sig).unwrap();
            prop_assert!((r.big_a - p.big_a).abs() <= 1e-8 * (1.0 + p.big_a));
        }
    }
}
