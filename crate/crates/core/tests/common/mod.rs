#![allow(dead_code)]

use rand::Rng;
use slevolve_core::centred::{CentredParams, Signature};

/// Random normalized signature with `m` letters: the first alpha is solved
/// from `sum_{j<a} 1/alpha_j = sum_{j>=a} 1/alpha_j`.
pub fn normalized_signature<R: Rng>(rng: &mut R, m: usize) -> Signature {
    loop {
        let a = rng.gen_range(1..m);
        let mut alphas = vec![0.0];
        alphas.extend((1..m).map(|_| rng.gen_range(0.5..3.0)));
        let rest: f64 = (1..m).map(|j| if j < a { -1.0 / alphas[j] } else { 1.0 / alphas[j] }).sum();
        if rest > 0.15 && rest < 3.0 {
            alphas[0] = 1.0 / rest;
            return Signature::new(a, alphas).unwrap();
        }
    }
}

/// Case (d) parameters with `A` a random fraction of its maximum.
pub fn case_d_params<R: Rng>(rng: &mut R, m: usize) -> CentredParams {
    let sig = normalized_signature(rng, m);
    let frac = rng.gen_range(0.1..0.9);
    CentredParams::new(sig.a, sig.alphas.clone(), frac * sig.a_max(), 1.0).unwrap()
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}
