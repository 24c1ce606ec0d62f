use num_complex::Complex64;
use proptest::prelude::*;
use slevolve_core::multilinear::{contract, eval_omega, eval_omega_complex, from_complex, Frame, Multivector};

fn vec_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, n)
}

/// Leibniz expansion over all permutations.
fn leibniz(cols: &[Vec<Complex64>]) -> Complex64 {
    let m = cols.len();
    let mut perm: Vec<usize> = (0..m).collect();
    let mut total = Complex64::new(0.0, 0.0);
    permute(&mut perm, 0, &mut |p| {
        let inversions = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).filter(|&(i, j)| p[i] > p[j]).count();
        let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
        let prod = (0..m).fold(Complex64::new(sign, 0.0), |acc, c| acc * cols[c][p[c]]);
        total += prod;
    });
    total
}

fn permute(p: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k == p.len() {
        f(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, f);
        p.swap(k, i);
    }
}

#[test]
fn omega_on_coordinate_pairs() {
    let e1 = vec![1.0, 0.0, 0.0, 0.0];
    let ie1 = vec![0.0, 1.0, 0.0, 0.0];
    let e2 = vec![0.0, 0.0, 1.0, 0.0];
    assert_eq!(eval_omega(&e1, &ie1, 2).unwrap(), 1.0);
    assert_eq!(eval_omega(&e1, &e2, 2).unwrap(), 0.0);
}

#[test]
fn holomorphic_volume_on_real_and_twisted_frames() {
    let m = 3;
    let mut frame: Vec<Vec<f64>> = (0..m)
        .map(|j| {
            let mut v = vec![0.0; 2 * m];
            v[2 * j] = 1.0;
            v
        })
        .collect();
    let z = eval_omega_complex(&Frame::new(frame.clone()).unwrap()).unwrap();
    assert_eq!(z, Complex64::new(1.0, 0.0));
    frame[m - 1] = vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
    let z = eval_omega_complex(&Frame::new(frame).unwrap()).unwrap();
    assert!((z - Complex64::new(0.0, 1.0)).norm() < 1e-15);
}

#[test]
fn disjoint_contraction_vanishes() {
    let chi = Multivector::blade(3, &[0, 1]).unwrap();
    let alpha = Multivector::blade(3, &[2]).unwrap();
    assert!(contract(&chi, &alpha).unwrap().iter().all(|x| *x == 0.0));
}

proptest! {
    #[test]
    fn wedge_of_vectors_anticommutes(u in vec_strategy(5), v in vec_strategy(5)) {
        let (a, b) = (Multivector::vector(&u).unwrap(), Multivector::vector(&v).unwrap());
        let ab = a.wedge(&b).unwrap();
        let ba = b.wedge(&a).unwrap();
        prop_assert!(ab.add(&ba).unwrap().norm() < 1e-12);
    }

    #[test]
    fn wedge_is_associative(u in vec_strategy(5), v in vec_strategy(5), w in vec_strategy(5)) {
        let (a, b, c) = (
            Multivector::vector(&u).unwrap(),
            Multivector::vector(&v).unwrap(),
            Multivector::vector(&w).unwrap(),
        );
        let left = a.wedge(&b).unwrap().wedge(&c).unwrap();
        let right = a.wedge(&b.wedge(&c).unwrap()).unwrap();
        prop_assert!(left.max_abs_diff(&right) < 1e-12);
    }

    #[test]
    fn omega_matches_coordinate_sum(u in vec_strategy(6), v in vec_strategy(6)) {
        let direct: f64 = (0..3).map(|j| u[2 * j] * v[2 * j + 1] - u[2 * j + 1] * v[2 * j]).sum();
        prop_assert!((eval_omega(&u, &v, 3).unwrap() - direct).abs() < 1e-14);
        prop_assert!((eval_omega(&u, &v, 3).unwrap() + eval_omega(&v, &u, 3).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn holomorphic_volume_matches_leibniz(raw in prop::collection::vec(-1.5..1.5f64, 32)) {
        let m = 4;
        let cols: Vec<Vec<Complex64>> = (0..m)
            .map(|c| (0..m).map(|r| Complex64::new(raw[2 * (c * m + r)], raw[2 * (c * m + r) + 1])).collect())
            .collect();
        let frame = Frame::new(cols.iter().map(|c| from_complex(c)).collect()).unwrap();
        let z = eval_omega_complex(&frame).unwrap();
        prop_assert!((z - leibniz(&cols)).norm() < 1e-12);
    }

    #[test]
    fn contraction_is_bilinear(u in vec_strategy(4), v in vec_strategy(4), w in vec_strategy(4), s in -3.0..3.0f64) {
        let chi = Multivector::vector(&u).unwrap().wedge(&Multivector::vector(&v).unwrap()).unwrap();
        let alpha = Multivector::vector(&w).unwrap();
        let once = contract(&chi, &alpha).unwrap();
        let scaled = contract(&chi.scale(s), &alpha).unwrap();
        let both = contract(&chi, &alpha.scale(s)).unwrap();
        for i in 0..4 {
            prop_assert!((scaled[i] - s * once[i]).abs() < 1e-13);
            prop_assert!((both[i] - s * once[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn contraction_of_wedge_expands(u in vec_strategy(4), v in vec_strategy(4), w in vec_strategy(4)) {
        // (u ^ v) contracted with w in the last slot is (v.w) u - (u.w) v
        let chi = Multivector::vector(&u).unwrap().wedge(&Multivector::vector(&v).unwrap()).unwrap();
        let got = contract(&chi, &Multivector::vector(&w).unwrap()).unwrap();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        for i in 0..4 {
            let expect = dot(&v, &w) * u[i] - dot(&u, &w) * v[i];
            prop_assert!((got[i] - expect).abs() < 1e-12);
        }
    }
}
