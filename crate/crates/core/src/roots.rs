//! Scalar root finding and rational recognition.

use crate::error::{Result, SlError};

/// Find a root of `f` in `[lo, hi]` given values of opposite sign at the
/// ends, using the Illinois variant of regula falsi with a bisection
/// fallback.
pub fn bracketed_root<F>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut f_lo = f(lo)?;
    let mut f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(SlError::NoConvergence(format!(
            "root not bracketed in [{lo}, {hi}]"
        )));
    }
    let mut side = 0i8;
    for iter in 0..200 {
        let width = hi - lo;
        if width.abs() <= tol {
            break;
        }
        let mut x = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        if iter % 4 == 3 || !(x > lo.min(hi) && x < lo.max(hi)) {
            x = 0.5 * (lo + hi);
        }
        if x == lo || x == hi {
            break;
        }
        let fx = f(x)?;
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == f_lo.signum() {
            lo = x;
            f_lo = fx;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            f_hi = fx;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
    }
    Ok(if f_lo.abs() < f_hi.abs() { lo } else { hi })
}

/// Closest fraction `p / q` with `1 <= q <= q_max` from the continued
/// fraction expansion of `x`, if it lies within `tol` of `x`.
pub fn recognize_rational(x: f64, q_max: i64, tol: f64) -> Option<(i64, i64)> {
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut r = x;
    let mut best: Option<(i64, i64)> = None;
    for _ in 0..64 {
        let a = r.floor();
        if a.abs() > 1e15 {
            break;
        }
        let ai = a as i64;
        let h2 = ai.checked_mul(h1)?.checked_add(h0)?;
        let k2 = ai.checked_mul(k1)?.checked_add(k0)?;
        if k2 > q_max {
            break;
        }
        best = Some((h2, k2));
        if (x - h2 as f64 / k2 as f64).abs() <= tol {
            break;
        }
        let frac = r - a;
        if frac.abs() < 1e-300 {
            break;
        }
        r = 1.0 / frac;
        h0 = h1;
        h1 = h2;
        k0 = k1;
        k1 = k2;
    }
    best.filter(|&(p, q)| (x - p as f64 / q as f64).abs() <= tol)
}

pub fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn lcm(a: i64, b: i64) -> i64 {
    if a == 0 || b == 0 {
        0
    } else {
        (a / gcd(a, b) * b).abs()
    }
}

/// All fractions `p / q` with `q <= q_max` strictly between `lo` and `hi`,
/// in lowest terms and sorted.
pub fn fractions_between(lo: f64, hi: f64, q_max: i64) -> Vec<(i64, i64)> {
    let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut out = Vec::new();
    for q in 1..=q_max {
        let p_min = (lo * q as f64).floor() as i64;
        let p_max = (hi * q as f64).ceil() as i64;
        for p in p_min..=p_max {
            let v = p as f64 / q as f64;
            if v > lo && v < hi && gcd(p, q) == 1 {
                out.push((p, q));
            }
        }
    }
    out.sort_by(|a, b| {
        (a.0 as f64 / a.1 as f64)
            .partial_cmp(&(b.0 as f64 / b.1 as f64))
            .unwrap()
    });
    out
}
