//! Gauss-Legendre rules and an adaptive composite integrator.

use std::sync::OnceLock;

use crate::error::{Result, SlError};

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

const PANEL: usize = 20;

fn panel_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(PANEL))
}

/// Fixed-order rule on [a, b] for a vector-valued integrand.
fn panel<F>(f: &mut F, a: f64, b: f64, dim: usize) -> Vec<f64>
where
    F: FnMut(f64, &mut [f64]),
{
    let (x, w) = panel_rule();
    let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
    let mut acc = vec![0.0; dim];
    let mut val = vec![0.0; dim];
    for (xi, wi) in x.iter().zip(w) {
        f(c + r * xi, &mut val);
        for k in 0..dim {
            acc[k] += wi * r * val[k];
        }
    }
    acc
}

/// Result of an adaptive integration.
#[derive(Debug, Clone)]
pub struct Integral {
    pub value: Vec<f64>,
    pub error: f64,
    pub panels: usize,
}

/// Adaptive composite Gauss-Legendre integration of a vector-valued
/// smooth integrand over [a, b]. A panel is accepted when splitting it
/// changes every component by at most `tol` times the panel share, relative
/// to the size of the integral once that exceeds one.
pub fn integrate_adaptive<F>(mut f: F, a: f64, b: f64, dim: usize, tol: f64) -> Result<Integral>
where
    F: FnMut(f64, &mut [f64]),
{
    let mut total = vec![0.0; dim];
    let mut error = 0.0;
    let mut panels = 0usize;
    let whole = panel(&mut f, a, b, dim);
    let mut stack = vec![(a, b, whole, 0u32)];
    let len = (b - a).abs();
    // rough magnitude from a uniform split, so narrow peaks are not missed
    let mut rough = vec![0.0; dim];
    for i in 0..32 {
        let (lo, hi) = (a + (b - a) * i as f64 / 32.0, a + (b - a) * (i + 1) as f64 / 32.0);
        for (r, v) in rough.iter_mut().zip(panel(&mut f, lo, hi, dim)) {
            *r += v;
        }
    }
    let scale = rough.iter().chain(&stack[0].2).fold(1.0f64, |s, v| s.max(v.abs()));
    while let Some((lo, hi, coarse, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = panel(&mut f, lo, mid, dim);
        let right = panel(&mut f, mid, hi, dim);
        let diff = (0..dim)
            .map(|k| (left[k] + right[k] - coarse[k]).abs())
            .fold(0.0, f64::max);
        let share = ((hi - lo).abs() / len).max(1e-3);
        if diff <= tol * share * scale || depth >= 40 {
            if depth >= 40 && diff > tol * share * scale {
                return Err(SlError::NoConvergence(format!(
                    "adaptive quadrature stalled near {mid}"
                )));
            }
            for k in 0..dim {
                total[k] += left[k] + right[k];
            }
            error += diff;
            panels += 2;
        } else {
            stack.push((lo, mid, left, depth + 1));
            stack.push((mid, hi, right, depth + 1));
        }
        if panels > 200_000 {
            return Err(SlError::NoConvergence("too many quadrature panels".into()));
        }
    }
    if total.iter().any(|v| !v.is_finite()) {
        return Err(SlError::NoConvergence("non-finite quadrature value".into()));
    }
    Ok(Integral {
        value: total,
        error,
        panels,
    })
}
